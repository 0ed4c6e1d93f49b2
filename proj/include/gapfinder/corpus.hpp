#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace gapfinder {

using LanguageCode = std::string;
using ConceptId = std::string;

enum class QualityClass { Stub, Good, Featured };
enum class ImportanceClass { Low, Mid, High, Top };

// Unknown labels parse as absent.
std::optional<QualityClass> parse_quality(std::string_view text);
std::optional<ImportanceClass> parse_importance(std::string_view text);
std::string_view to_string(QualityClass q);
std::string_view to_string(ImportanceClass c);

struct ArticleRecord {
  LanguageCode lang;
  std::string title;
  std::int64_t byte_length = 0;
  bool is_redirect = false;
  std::optional<std::string> redirect_target;
  std::int64_t created_months_ago = 0;
  std::int64_t last_edited_months_ago = 0;
  std::int64_t editor_count = 0;
  std::optional<QualityClass> quality_class;
  std::optional<ImportanceClass> importance_class;
  bool is_disambiguation = false;

  bool operator==(const ArticleRecord&) const = default;
};

struct SitelinkRecord {
  ConceptId concept_id;
  LanguageCode lang;
  std::string title;

  bool operator==(const SitelinkRecord&) const = default;
};

struct InterlanguageLinkRecord {
  LanguageCode from_lang;
  std::string from_title;
  LanguageCode to_lang;
  std::string to_title;

  bool operator==(const InterlanguageLinkRecord&) const = default;
};

struct PageViewRecord {
  LanguageCode lang;
  std::string title;
  std::int64_t views = 0;
  std::optional<std::string> country;  // absent for global rows

  bool operator==(const PageViewRecord&) const = default;
};

struct PageLinkRecord {
  LanguageCode lang;
  std::string from_title;
  std::string to_title;

  bool operator==(const PageLinkRecord&) const = default;
};

struct EditEventRecord {
  std::string editor_id;
  LanguageCode lang;
  std::string title;
  std::int64_t bytes_added = 0;
  std::int64_t timestamp = 0;

  bool operator==(const EditEventRecord&) const = default;
};

struct TokenDoc {
  LanguageCode lang;
  std::string title;
  std::vector<std::string> tokens;

  bool operator==(const TokenDoc&) const = default;
};

struct Corpus {
  std::vector<LanguageCode> languages;
  std::vector<ArticleRecord> articles;
  std::vector<SitelinkRecord> sitelinks;
  std::vector<InterlanguageLinkRecord> interlanguage_links;
  std::vector<PageViewRecord> page_views;
  std::vector<PageLinkRecord> page_links;
  std::vector<EditEventRecord> edit_events;
  std::vector<TokenDoc> token_docs;

  // Referential problems found during validation (non-fatal).
  std::vector<std::string> warnings;

  bool has_language(std::string_view code) const;

  bool operator==(const Corpus& other) const;
};

struct LoadReport {
  std::map<std::string, std::size_t> row_counts;  // file name -> data rows
};

// Loads and validates the TSV interchange files under `root`.
Corpus load_corpus(const std::filesystem::path& root, LoadReport* report = nullptr);

// Writes the interchange files; rows are emitted in stored order.
void write_corpus(const Corpus& corpus, const std::filesystem::path& root);

// Checks record invariants and cross-references. Throws on invariant
// violations; appends referential warnings to `corpus.warnings`.
void validate(Corpus& corpus);

// Views per (lang, title), summing global rows only (country absent).
std::map<std::pair<LanguageCode, std::string>, std::int64_t> global_views(const Corpus& corpus);

}  // namespace gapfinder
