#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "gapfinder/corpus.hpp"

namespace gapfinder {

enum class NodeKind : std::uint8_t { Concept, Article };
enum class EdgeKind : std::uint8_t { Sitelink, InterLanguage, Redirect };

struct Node {
  NodeKind kind = NodeKind::Concept;
  ConceptId concept_id;  // Concept nodes
  LanguageCode lang;     // Article nodes
  std::string title;
  bool is_redirect = false;
  std::int64_t byte_length = 0;
};

struct Edge {
  std::uint32_t a = 0;
  std::uint32_t b = 0;
  EdgeKind kind = EdgeKind::Sitelink;
};

// Concepts and source/target articles joined by sitelinks, S-T inter-language
// links and intra-language redirects. Edges are undirected.
class CoverageGraph {
 public:
  CoverageGraph(LanguageCode source, LanguageCode target)
      : source_(std::move(source)), target_(std::move(target)) {}

  const LanguageCode& source() const { return source_; }
  const LanguageCode& target() const { return target_; }

  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<Edge>& edges() const { return edges_; }
  std::size_t edge_count(EdgeKind kind) const;

  std::uint32_t add_concept(const ConceptId& id);
  std::uint32_t add_article(const ArticleRecord& article);
  void add_edge(std::uint32_t a, std::uint32_t b, EdgeKind kind);

  std::optional<std::uint32_t> find_concept(const ConceptId& id) const;
  std::optional<std::uint32_t> find_article(const LanguageCode& lang, const std::string& title) const;

  bool has_components() const { return !component_.empty() || nodes_.empty(); }
  std::uint32_t component_of(std::uint32_t node) const { return component_.at(node); }
  std::size_t component_count() const { return n_components_; }
  const std::vector<std::uint32_t>& components() const { return component_; }
  void set_components(std::vector<std::uint32_t> ids, std::size_t count);

 private:
  LanguageCode source_;
  LanguageCode target_;
  std::vector<Node> nodes_;
  std::vector<Edge> edges_;
  std::unordered_map<std::string, std::uint32_t> concept_index_;
  std::unordered_map<std::string, std::uint32_t> article_index_;
  std::vector<std::uint32_t> component_;
  std::size_t n_components_ = 0;
};

// Throws UnknownLanguage when either code is undeclared or both are equal.
CoverageGraph build_graph(const Corpus& corpus, const LanguageCode& source,
                          const LanguageCode& target);

// Assigns dense component ids, numbered by first member in node order.
void weakly_connected_components(CoverageGraph& graph);

// Per-component coverage facts.
struct ComponentSummary {
  std::uint32_t component = 0;
  std::optional<ConceptId> representative;    // lexicographically smallest concept
  std::optional<std::string> source_title;    // longest non-redirect S article
  std::optional<std::string> target_title;    // longest non-redirect T article
  std::size_t size = 0;
};

std::vector<ComponentSummary> summarize_components(const CoverageGraph& graph);

struct MissingEntry {
  ConceptId concept_id;
  std::string source_title;
  std::size_t component_size = 0;

  bool operator==(const MissingEntry&) const = default;
};

struct MissingSet {
  LanguageCode source;
  LanguageCode target;
  std::vector<MissingEntry> entries;  // sorted by concept_id
};

// Components with a non-redirect source article, a concept, and no
// non-redirect target article.
MissingSet find_missing(const CoverageGraph& graph, const LanguageCode& target);
MissingSet missing_from_components(std::span<const ComponentSummary> components, LanguageCode source,
                                   LanguageCode target);

// Source titles whose component also holds a non-redirect target article.
std::unordered_map<std::string, bool> source_coverage(const CoverageGraph& graph);

void write_missing(const MissingSet& missing, const std::filesystem::path& file);
MissingSet read_missing(const std::filesystem::path& file, LanguageCode source, LanguageCode target);

}  // namespace gapfinder
