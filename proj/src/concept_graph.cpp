#include "gapfinder/concept_graph.hpp"

#include <algorithm>
#include <array>

#include "gapfinder/error.hpp"
#include "gapfinder/tsv.hpp"

namespace gapfinder {

using namespace std::string_view_literals;

namespace {

std::string article_key(const LanguageCode& lang, const std::string& title) {
  std::string k = lang;
  k += '\t';
  k += title;
  return k;
}

constexpr std::array kMissingCols{"concept_id"sv, "source_title"sv, "component_size"sv};

}  // namespace

std::size_t CoverageGraph::edge_count(EdgeKind kind) const {
  return static_cast<std::size_t>(
      std::count_if(edges_.begin(), edges_.end(), [kind](const Edge& e) { return e.kind == kind; }));
}

std::uint32_t CoverageGraph::add_concept(const ConceptId& id) {
  auto [it, inserted] = concept_index_.emplace(id, static_cast<std::uint32_t>(nodes_.size()));
  if (inserted) {
    Node node;
    node.kind = NodeKind::Concept;
    node.concept_id = id;
    nodes_.push_back(std::move(node));
    component_.clear();
  }
  return it->second;
}

std::uint32_t CoverageGraph::add_article(const ArticleRecord& article) {
  auto [it, inserted] = article_index_.emplace(article_key(article.lang, article.title),
                                               static_cast<std::uint32_t>(nodes_.size()));
  if (inserted) {
    Node node;
    node.kind = NodeKind::Article;
    node.lang = article.lang;
    node.title = article.title;
    node.is_redirect = article.is_redirect;
    node.byte_length = article.byte_length;
    nodes_.push_back(std::move(node));
    component_.clear();
  }
  return it->second;
}

void CoverageGraph::add_edge(std::uint32_t a, std::uint32_t b, EdgeKind kind) {
  edges_.push_back({a, b, kind});
  component_.clear();
}

std::optional<std::uint32_t> CoverageGraph::find_concept(const ConceptId& id) const {
  if (auto it = concept_index_.find(id); it != concept_index_.end()) return it->second;
  return std::nullopt;
}

std::optional<std::uint32_t> CoverageGraph::find_article(const LanguageCode& lang,
                                                         const std::string& title) const {
  if (auto it = article_index_.find(article_key(lang, title)); it != article_index_.end()) {
    return it->second;
  }
  return std::nullopt;
}

void CoverageGraph::set_components(std::vector<std::uint32_t> ids, std::size_t count) {
  component_ = std::move(ids);
  n_components_ = count;
}

CoverageGraph build_graph(const Corpus& corpus, const LanguageCode& source,
                          const LanguageCode& target) {
  if (source == target) {
    throw Error(Errc::UnknownLanguage, "source and target must differ ('" + source + "')");
  }
  for (const auto& lang : {source, target}) {
    if (!corpus.has_language(lang)) {
      throw Error(Errc::UnknownLanguage, "language '" + lang + "' not declared in corpus");
    }
  }
  auto in_pair = [&](const LanguageCode& l) { return l == source || l == target; };

  CoverageGraph g(source, target);
  for (const auto& a : corpus.articles) {
    if (in_pair(a.lang)) g.add_article(a);
  }
  auto article_node = [&](const LanguageCode& lang,
                          const std::string& title) -> std::optional<std::uint32_t> {
    return g.find_article(lang, title);
  };

  for (const auto& s : corpus.sitelinks) {
    if (!in_pair(s.lang)) continue;
    auto art = article_node(s.lang, s.title);
    if (!art) continue;
    g.add_edge(g.add_concept(s.concept_id), *art, EdgeKind::Sitelink);
  }
  for (const auto& l : corpus.interlanguage_links) {
    if (!in_pair(l.from_lang) || !in_pair(l.to_lang)) continue;
    auto a = article_node(l.from_lang, l.from_title);
    auto b = article_node(l.to_lang, l.to_title);
    if (!a || !b) continue;
    g.add_edge(*a, *b, EdgeKind::InterLanguage);
  }
  for (const auto& a : corpus.articles) {
    if (!in_pair(a.lang) || !a.is_redirect || !a.redirect_target) continue;
    auto to = article_node(a.lang, *a.redirect_target);
    if (!to) continue;
    g.add_edge(*g.find_article(a.lang, a.title), *to, EdgeKind::Redirect);
  }
  return g;
}

void weakly_connected_components(CoverageGraph& graph) {
  const auto n = graph.nodes().size();
  // CSR adjacency.
  std::vector<std::uint32_t> offset(n + 1, 0);
  for (const auto& e : graph.edges()) {
    ++offset[e.a + 1];
    ++offset[e.b + 1];
  }
  for (std::size_t i = 0; i < n; ++i) offset[i + 1] += offset[i];
  std::vector<std::uint32_t> adjacent(offset[n]);
  std::vector<std::uint32_t> fill(offset.begin(), offset.end() - 1);
  for (const auto& e : graph.edges()) {
    adjacent[fill[e.a]++] = e.b;
    adjacent[fill[e.b]++] = e.a;
  }

  constexpr auto kUnset = static_cast<std::uint32_t>(-1);
  std::vector<std::uint32_t> component(n, kUnset);
  std::vector<std::uint32_t> stack;
  std::uint32_t next = 0;
  for (std::uint32_t start = 0; start < n; ++start) {
    if (component[start] != kUnset) continue;
    component[start] = next;
    stack.push_back(start);
    while (!stack.empty()) {
      auto v = stack.back();
      stack.pop_back();
      for (auto i = offset[v]; i < offset[v + 1]; ++i) {
        auto w = adjacent[i];
        if (component[w] == kUnset) {
          component[w] = next;
          stack.push_back(w);
        }
      }
    }
    ++next;
  }
  graph.set_components(std::move(component), next);
}

std::vector<ComponentSummary> summarize_components(const CoverageGraph& graph) {
  if (!graph.has_components()) {
    throw std::logic_error("summarize_components: components not computed");
  }
  std::vector<ComponentSummary> out(graph.component_count());
  std::vector<std::int64_t> source_len(out.size(), -1);
  std::vector<std::int64_t> target_len(out.size(), -1);
  for (std::size_t c = 0; c < out.size(); ++c) out[c].component = static_cast<std::uint32_t>(c);

  // Longest article wins; equal lengths fall back to the smaller title.
  auto better = [](std::int64_t len, const std::string& title, std::int64_t best_len,
                   const std::optional<std::string>& best) {
    if (!best) return true;
    if (len != best_len) return len > best_len;
    return title < *best;
  };

  const auto& nodes = graph.nodes();
  for (std::uint32_t i = 0; i < nodes.size(); ++i) {
    auto c = graph.component_of(i);
    auto& s = out[c];
    ++s.size;
    const auto& node = nodes[i];
    if (node.kind == NodeKind::Concept) {
      if (!s.representative || node.concept_id < *s.representative) {
        s.representative = node.concept_id;
      }
      continue;
    }
    if (node.is_redirect) continue;
    if (node.lang == graph.source()) {
      if (better(node.byte_length, node.title, source_len[c], s.source_title)) {
        s.source_title = node.title;
        source_len[c] = node.byte_length;
      }
    } else if (node.lang == graph.target()) {
      if (better(node.byte_length, node.title, target_len[c], s.target_title)) {
        s.target_title = node.title;
        target_len[c] = node.byte_length;
      }
    }
  }
  return out;
}

MissingSet find_missing(const CoverageGraph& graph, const LanguageCode& target) {
  if (target != graph.target()) {
    throw Error(Errc::UnknownLanguage,
                "graph was built for target '" + graph.target() + "', not '" + target + "'");
  }
  return missing_from_components(summarize_components(graph), graph.source(), graph.target());
}

MissingSet missing_from_components(std::span<const ComponentSummary> components, LanguageCode source,
                                   LanguageCode target) {
  MissingSet out{std::move(source), std::move(target), {}};
  for (const auto& s : components) {
    if (s.source_title && !s.target_title && s.representative) {
      out.entries.push_back({*s.representative, *s.source_title, s.size});
    }
  }
  std::sort(out.entries.begin(), out.entries.end(),
            [](const MissingEntry& a, const MissingEntry& b) { return a.concept_id < b.concept_id; });
  return out;
}

std::unordered_map<std::string, bool> source_coverage(const CoverageGraph& graph) {
  auto summaries = summarize_components(graph);
  std::unordered_map<std::string, bool> out;
  const auto& nodes = graph.nodes();
  for (std::uint32_t i = 0; i < nodes.size(); ++i) {
    const auto& node = nodes[i];
    if (node.kind != NodeKind::Article || node.lang != graph.source()) continue;
    out[node.title] = summaries[graph.component_of(i)].target_title.has_value();
  }
  return out;
}

void write_missing(const MissingSet& missing, const std::filesystem::path& file) {
  tsv::Writer w(file, kMissingCols);
  for (const auto& e : missing.entries) w.row(e.concept_id, e.source_title, e.component_size);
}

MissingSet read_missing(const std::filesystem::path& file, LanguageCode source, LanguageCode target) {
  MissingSet out{std::move(source), std::move(target), {}};
  tsv::read(file, kMissingCols, {}, [&](std::size_t line, auto f) {
    out.entries.push_back({std::string(f[0]), std::string(f[1]),
                           static_cast<std::size_t>(tsv::parse_int(f[2], file, line,
                                                                   "component_size"))});
  });
  return out;
}

}  // namespace gapfinder
