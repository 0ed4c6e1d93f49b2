#include "gapfinder/corpus.hpp"

#include <algorithm>
#include <array>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "gapfinder/error.hpp"
#include "gapfinder/tsv.hpp"

namespace gapfinder {

namespace fs = std::filesystem;
using namespace std::string_view_literals;

namespace {

constexpr std::array kLanguageCols{"code"sv};
constexpr std::array kArticleCols{"lang"sv,
                                  "title"sv,
                                  "byte_length"sv,
                                  "is_redirect"sv,
                                  "redirect_target"sv,
                                  "created_months_ago"sv,
                                  "last_edited_months_ago"sv,
                                  "editor_count"sv,
                                  "quality_class"sv,
                                  "importance_class"sv};
constexpr std::array kArticleOptionalCols{"is_disambiguation"sv};
constexpr std::array kSitelinkCols{"concept_id"sv, "lang"sv, "title"sv};
constexpr std::array kLanglinkCols{"from_lang"sv, "from_title"sv, "to_lang"sv, "to_title"sv};
constexpr std::array kPageviewCols{"lang"sv, "title"sv, "views"sv, "country"sv};
constexpr std::array kPagelinkCols{"lang"sv, "from_title"sv, "to_title"sv};
constexpr std::array kEditCols{"editor_id"sv, "lang"sv, "title"sv, "bytes_added"sv,
                               "timestamp"sv};
constexpr std::array kTokenCols{"lang"sv, "title"sv, "tokens"sv};
constexpr std::array<std::string_view, 0> kNone{};

std::optional<std::string> optional_field(std::string_view f) {
  if (f.empty()) return std::nullopt;
  return std::string(f);
}

std::string key2(std::string_view a, std::string_view b) {
  std::string k(a);
  k += '\t';
  k += b;
  return k;
}

// Tracks first occurrence of a key so duplicates can name both locations.
class KeyIndex {
 public:
  explicit KeyIndex(std::string file) : file_(std::move(file)) {}

  void insert(std::string key, std::size_t line) {
    auto [it, inserted] = seen_.emplace(std::move(key), line);
    if (!inserted) {
      throw Error(Errc::DuplicateKey, file_ + ": key '" + it->first + "' on lines " +
                                          std::to_string(it->second) + " and " +
                                          std::to_string(line));
    }
  }

 private:
  std::string file_;
  std::unordered_map<std::string, std::size_t> seen_;
};

void require_nonnegative(std::int64_t v, const fs::path& file, std::size_t line,
                         std::string_view column) {
  if (v < 0) {
    throw Error(Errc::MalformedRow, file.filename().string() + ":" + std::to_string(line) +
                                        ": column '" + std::string(column) + "' is negative");
  }
}

void check_article(const ArticleRecord& a, const std::string& where) {
  if (a.lang.empty() || a.title.empty()) {
    throw Error(Errc::MalformedRow, where + ": empty language or title");
  }
  if (a.is_redirect != a.redirect_target.has_value()) {
    throw Error(Errc::MalformedRow, where + ": redirect_target must be present iff is_redirect");
  }
  if (a.byte_length < 0 || a.created_months_ago < 0 || a.last_edited_months_ago < 0 ||
      a.editor_count < 0) {
    throw Error(Errc::MalformedRow, where + ": negative count");
  }
  if (a.last_edited_months_ago > a.created_months_ago) {
    throw Error(Errc::MalformedRow, where + ": last edit precedes creation");
  }
}

}  // namespace

std::optional<QualityClass> parse_quality(std::string_view text) {
  if (text == "stub") return QualityClass::Stub;
  if (text == "good") return QualityClass::Good;
  if (text == "featured") return QualityClass::Featured;
  return std::nullopt;
}

std::optional<ImportanceClass> parse_importance(std::string_view text) {
  if (text == "low") return ImportanceClass::Low;
  if (text == "mid") return ImportanceClass::Mid;
  if (text == "high") return ImportanceClass::High;
  if (text == "top") return ImportanceClass::Top;
  return std::nullopt;
}

std::string_view to_string(QualityClass q) {
  switch (q) {
    case QualityClass::Stub: return "stub";
    case QualityClass::Good: return "good";
    case QualityClass::Featured: return "featured";
  }
  return "";
}

std::string_view to_string(ImportanceClass c) {
  switch (c) {
    case ImportanceClass::Low: return "low";
    case ImportanceClass::Mid: return "mid";
    case ImportanceClass::High: return "high";
    case ImportanceClass::Top: return "top";
  }
  return "";
}

bool Corpus::has_language(std::string_view code) const {
  return std::find(languages.begin(), languages.end(), code) != languages.end();
}

bool Corpus::operator==(const Corpus& o) const {
  return languages == o.languages && articles == o.articles && sitelinks == o.sitelinks &&
         interlanguage_links == o.interlanguage_links && page_views == o.page_views &&
         page_links == o.page_links && edit_events == o.edit_events && token_docs == o.token_docs;
}

Corpus load_corpus(const fs::path& root, LoadReport* report) {
  Corpus c;
  LoadReport local;

  auto load = [&](std::string_view name, std::span<const std::string_view> cols,
                  std::span<const std::string_view> optional, auto&& fn) {
    fs::path path = root / name;
    local.row_counts[std::string(name)] = tsv::read(path, cols, optional, fn);
  };

  {
    KeyIndex keys("languages.tsv");
    load("languages.tsv", kLanguageCols, kNone, [&](std::size_t line, auto f) {
      if (f[0].empty()) throw Error(Errc::MalformedRow, "languages.tsv: empty code");
      keys.insert(std::string(f[0]), line);
      c.languages.emplace_back(f[0]);
    });
  }
  {
    KeyIndex keys("articles.tsv");
    const fs::path file = root / "articles.tsv";
    load("articles.tsv", kArticleCols, kArticleOptionalCols, [&](std::size_t line, auto f) {
      ArticleRecord a;
      a.lang = f[0];
      a.title = f[1];
      a.byte_length = tsv::parse_int(f[2], file, line, "byte_length");
      a.is_redirect = tsv::parse_bool(f[3], file, line, "is_redirect");
      a.redirect_target = optional_field(f[4]);
      a.created_months_ago = tsv::parse_int(f[5], file, line, "created_months_ago");
      a.last_edited_months_ago = tsv::parse_int(f[6], file, line, "last_edited_months_ago");
      a.editor_count = tsv::parse_int(f[7], file, line, "editor_count");
      a.quality_class = parse_quality(f[8]);
      a.importance_class = parse_importance(f[9]);
      a.is_disambiguation = tsv::parse_bool(f[10], file, line, "is_disambiguation");
      check_article(a, "articles.tsv:" + std::to_string(line));
      keys.insert(key2(a.lang, a.title), line);
      c.articles.push_back(std::move(a));
    });
  }
  {
    KeyIndex keys("sitelinks.tsv");
    load("sitelinks.tsv", kSitelinkCols, kNone, [&](std::size_t line, auto f) {
      keys.insert(key2(f[0], f[1]), line);
      c.sitelinks.push_back({std::string(f[0]), std::string(f[1]), std::string(f[2])});
    });
  }
  {
    const fs::path file = root / "langlinks.tsv";
    load("langlinks.tsv", kLanglinkCols, kNone, [&](std::size_t line, auto f) {
      if (f[0] == f[2]) {
        throw Error(Errc::MalformedRow,
                    "langlinks.tsv:" + std::to_string(line) + ": from_lang equals to_lang");
      }
      c.interlanguage_links.push_back(
          {std::string(f[0]), std::string(f[1]), std::string(f[2]), std::string(f[3])});
    });
  }
  {
    KeyIndex keys("pageviews.tsv");
    const fs::path file = root / "pageviews.tsv";
    load("pageviews.tsv", kPageviewCols, kNone, [&](std::size_t line, auto f) {
      PageViewRecord r{std::string(f[0]), std::string(f[1]),
                       tsv::parse_int(f[2], file, line, "views"), optional_field(f[3])};
      require_nonnegative(r.views, file, line, "views");
      keys.insert(key2(key2(r.lang, r.title), r.country.value_or("")), line);
      c.page_views.push_back(std::move(r));
    });
  }
  load("pagelinks.tsv", kPagelinkCols, kNone, [&](std::size_t, auto f) {
    c.page_links.push_back({std::string(f[0]), std::string(f[1]), std::string(f[2])});
  });
  {
    const fs::path file = root / "edits.tsv";
    load("edits.tsv", kEditCols, kNone, [&](std::size_t line, auto f) {
      c.edit_events.push_back({std::string(f[0]), std::string(f[1]), std::string(f[2]),
                               tsv::parse_int(f[3], file, line, "bytes_added"),
                               tsv::parse_int(f[4], file, line, "timestamp")});
    });
  }
  {
    KeyIndex keys("tokens.tsv");
    load("tokens.tsv", kTokenCols, kNone, [&](std::size_t line, auto f) {
      keys.insert(key2(f[0], f[1]), line);
      TokenDoc d{std::string(f[0]), std::string(f[1]), {}};
      for (auto tok : tsv::split(f[2], ' ')) {
        if (!tok.empty()) d.tokens.emplace_back(tok);
      }
      c.token_docs.push_back(std::move(d));
    });
  }

  validate(c);
  if (report) *report = std::move(local);
  return c;
}

void validate(Corpus& c) {
  // Record-level invariants; duplicates here name 1-based row indices.
  std::unordered_set<std::string> langs;
  for (const auto& l : c.languages) {
    if (l.empty() || !langs.insert(l).second) {
      throw Error(Errc::DuplicateKey, "language '" + l + "' declared twice or empty");
    }
  }
  std::unordered_map<std::string, std::size_t> article_keys;
  for (std::size_t i = 0; i < c.articles.size(); ++i) {
    const auto& a = c.articles[i];
    check_article(a, "article row " + std::to_string(i + 1));
    auto [it, ok] = article_keys.emplace(key2(a.lang, a.title), i + 1);
    if (!ok) {
      throw Error(Errc::DuplicateKey, "article '" + a.lang + ":" + a.title + "' on rows " +
                                          std::to_string(it->second) + " and " +
                                          std::to_string(i + 1));
    }
  }
  std::unordered_map<std::string, std::size_t> sitelink_keys;
  for (std::size_t i = 0; i < c.sitelinks.size(); ++i) {
    const auto& s = c.sitelinks[i];
    auto [it, ok] = sitelink_keys.emplace(key2(s.concept_id, s.lang), i + 1);
    if (!ok) {
      throw Error(Errc::DuplicateKey, "sitelink '" + s.concept_id + "'/" + s.lang + " on rows " +
                                          std::to_string(it->second) + " and " +
                                          std::to_string(i + 1));
    }
  }
  for (const auto& l : c.interlanguage_links) {
    if (l.from_lang == l.to_lang) {
      throw Error(Errc::MalformedRow, "inter-language link within '" + l.from_lang + "'");
    }
  }
  for (const auto& v : c.page_views) {
    if (v.views < 0) throw Error(Errc::MalformedRow, "negative views for " + v.title);
  }

  std::stable_sort(c.edit_events.begin(), c.edit_events.end(), [](const auto& a, const auto& b) {
    if (a.editor_id != b.editor_id) return a.editor_id < b.editor_id;
    return a.timestamp < b.timestamp;
  });

  // Referential checks.
  std::set<std::string> warned;
  auto warn = [&](std::string msg) {
    if (warned.insert(msg).second) c.warnings.push_back(std::move(msg));
  };
  auto check_lang = [&](const std::string& lang, std::string_view file) {
    if (!langs.contains(lang)) {
      warn(std::string(file) + ": undeclared language '" + lang + "'");
    }
  };
  auto check_article_ref = [&](const std::string& lang, const std::string& title,
                               std::string_view file) {
    check_lang(lang, file);
    if (!article_keys.contains(key2(lang, title))) {
      warn(std::string(file) + ": unknown article '" + lang + ":" + title + "'");
    }
  };
  for (const auto& a : c.articles) check_lang(a.lang, "articles.tsv");
  for (const auto& s : c.sitelinks) check_article_ref(s.lang, s.title, "sitelinks.tsv");
  for (const auto& l : c.interlanguage_links) {
    check_article_ref(l.from_lang, l.from_title, "langlinks.tsv");
    check_article_ref(l.to_lang, l.to_title, "langlinks.tsv");
  }
  for (const auto& v : c.page_views) check_article_ref(v.lang, v.title, "pageviews.tsv");
  for (const auto& l : c.page_links) {
    check_article_ref(l.lang, l.from_title, "pagelinks.tsv");
    check_article_ref(l.lang, l.to_title, "pagelinks.tsv");
  }
  for (const auto& e : c.edit_events) check_lang(e.lang, "edits.tsv");
  for (const auto& d : c.token_docs) check_lang(d.lang, "tokens.tsv");
}

void write_corpus(const Corpus& c, const fs::path& root) {
  fs::create_directories(root);
  {
    tsv::Writer w(root / "languages.tsv", kLanguageCols);
    for (const auto& l : c.languages) w.row(l);
  }
  {
    bool any_disambiguation =
        std::any_of(c.articles.begin(), c.articles.end(),
                    [](const ArticleRecord& a) { return a.is_disambiguation; });
    std::vector<std::string_view> header(kArticleCols.begin(), kArticleCols.end());
    if (any_disambiguation) header.push_back(kArticleOptionalCols[0]);
    tsv::Writer w(root / "articles.tsv", header);
    for (const auto& a : c.articles) {
      std::vector<std::string> f{a.lang,
                                 a.title,
                                 std::to_string(a.byte_length),
                                 a.is_redirect ? "1" : "0",
                                 a.redirect_target.value_or(""),
                                 std::to_string(a.created_months_ago),
                                 std::to_string(a.last_edited_months_ago),
                                 std::to_string(a.editor_count),
                                 a.quality_class ? std::string(to_string(*a.quality_class)) : "",
                                 a.importance_class ? std::string(to_string(*a.importance_class))
                                                    : ""};
      if (any_disambiguation) f.push_back(a.is_disambiguation ? "1" : "0");
      w.raw_row(f);
    }
  }
  {
    tsv::Writer w(root / "sitelinks.tsv", kSitelinkCols);
    for (const auto& s : c.sitelinks) w.row(s.concept_id, s.lang, s.title);
  }
  {
    tsv::Writer w(root / "langlinks.tsv", kLanglinkCols);
    for (const auto& l : c.interlanguage_links) {
      w.row(l.from_lang, l.from_title, l.to_lang, l.to_title);
    }
  }
  {
    tsv::Writer w(root / "pageviews.tsv", kPageviewCols);
    for (const auto& v : c.page_views) w.row(v.lang, v.title, v.views, v.country.value_or(""));
  }
  {
    tsv::Writer w(root / "pagelinks.tsv", kPagelinkCols);
    for (const auto& l : c.page_links) w.row(l.lang, l.from_title, l.to_title);
  }
  {
    tsv::Writer w(root / "edits.tsv", kEditCols);
    for (const auto& e : c.edit_events) {
      w.row(e.editor_id, e.lang, e.title, e.bytes_added, e.timestamp);
    }
  }
  {
    tsv::Writer w(root / "tokens.tsv", kTokenCols);
    for (const auto& d : c.token_docs) {
      std::string joined;
      for (std::size_t i = 0; i < d.tokens.size(); ++i) {
        if (i) joined += ' ';
        joined += d.tokens[i];
      }
      w.row(d.lang, d.title, joined);
    }
  }
}

std::map<std::pair<LanguageCode, std::string>, std::int64_t> global_views(const Corpus& c) {
  std::map<std::pair<LanguageCode, std::string>, std::int64_t> out;
  for (const auto& v : c.page_views) {
    if (!v.country) out[{v.lang, v.title}] += v.views;
  }
  return out;
}

}  // namespace gapfinder
