#include <algorithm>
#include <map>
#include <random>
#include <set>

#include "doctest.h"
#include "gapfinder/concept_graph.hpp"
#include "gapfinder/error.hpp"
#include "gapfinder/synthetic.hpp"
#include "support/fixtures.hpp"
#include "support/union_find.hpp"

using namespace gapfinder;
using gapfinder::testing::article;
using gapfinder::testing::redirect;

namespace {

// Two labelings describe the same partition iff the label map is a bijection.
bool same_partition(const std::vector<std::uint32_t>& a, const std::vector<std::uint32_t>& b) {
  if (a.size() != b.size()) return false;
  std::map<std::uint32_t, std::uint32_t> ab, ba;
  for (std::size_t i = 0; i < a.size(); ++i) {
    auto [x, fresh_x] = ab.emplace(a[i], b[i]);
    auto [y, fresh_y] = ba.emplace(b[i], a[i]);
    if (x->second != b[i] || y->second != a[i]) return false;
  }
  return true;
}

std::vector<std::uint32_t> oracle_labels(const CoverageGraph& g) {
  gapfinder::testing::DisjointSet ds(g.nodes().size());
  for (const auto& e : g.edges()) ds.unite(e.a, e.b);
  std::vector<std::uint32_t> out(g.nodes().size());
  for (std::uint32_t i = 0; i < out.size(); ++i) out[i] = ds.find(i);
  return out;
}

std::set<ConceptId> missing_ids(const MissingSet& m) {
  std::set<ConceptId> out;
  for (const auto& e : m.entries) out.insert(e.concept_id);
  return out;
}

CoverageGraph analysed(const Corpus& c, const LanguageCode& s, const LanguageCode& t) {
  auto g = build_graph(c, s, t);
  weakly_connected_components(g);
  return g;
}

}  // namespace

TEST_CASE("single sitelinked article") {
  Corpus c;
  c.languages = {"en", "de"};
  c.articles = {article("en", "A")};
  c.sitelinks = {{"Q1", "en", "A"}};
  const auto g = build_graph(c, "en", "de");
  CHECK(g.nodes().size() == 2);
  CHECK(g.edges().size() == 1);
  CHECK(g.edge_count(EdgeKind::Sitelink) == 1);
}

TEST_CASE("neoplasm merges into the tumor component") {
  const Corpus c = gapfinder::testing::neoplasm_corpus();
  const auto g = analysed(c, "en", "de");
  const auto neoplasm = *g.find_article("en", "Neoplasm");
  const auto tumor = *g.find_article("de", "Tumor");
  const auto neoplasma = *g.find_article("de", "Neoplasma");
  const auto q_tumor = *g.find_concept("Q133212");
  const auto q_neoplasm = *g.find_concept("Q1216998");
  for (auto n : {tumor, neoplasma, q_tumor, q_neoplasm}) CHECK(g.component_of(n) == g.component_of(neoplasm));
  CHECK(g.component_count() == 1);
  // Articles outside the pair stay out of the graph.
  CHECK_FALSE(g.find_article("fr", "Tumeur").has_value());
  CHECK_FALSE(g.find_article("hr", "Novotvorina").has_value());

  const auto missing = find_missing(g, "de");
  CHECK(missing.entries.empty());
}

TEST_CASE("without the merge links neoplasm would be missing") {
  Corpus c = gapfinder::testing::neoplasm_corpus();
  c.interlanguage_links.clear();
  const auto m = find_missing(analysed(c, "en", "de"), "de");
  REQUIRE(m.entries.size() == 1);
  CHECK(m.entries[0].concept_id == "Q1216998");
  CHECK(m.entries[0].source_title == "Neoplasm");
}

TEST_CASE("edgeless graph has singleton components") {
  CoverageGraph g("en", "de");
  for (int i = 0; i < 5; ++i) g.add_concept("Q" + std::to_string(i));
  weakly_connected_components(g);
  CHECK(g.component_count() == 5);
  std::set<std::uint32_t> ids(g.components().begin(), g.components().end());
  CHECK(ids.size() == 5);
}

TEST_CASE("components match a union-find oracle on random graphs") {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 10; ++trial) {
    CoverageGraph g("en", "de");
    const std::uint32_t n = 200 + static_cast<std::uint32_t>(rng() % 800);
    for (std::uint32_t i = 0; i < n; ++i) g.add_concept("Q" + std::to_string(i));
    const std::size_t m = rng() % (n + n / 2);
    for (std::size_t e = 0; e < m; ++e) {
      g.add_edge(static_cast<std::uint32_t>(rng() % n), static_cast<std::uint32_t>(rng() % n), EdgeKind::Sitelink);
    }
    weakly_connected_components(g);
    CHECK(same_partition(g.components(), oracle_labels(g)));
  }
}

TEST_CASE("edge counts equal an independent recount") {
  SyntheticSpec spec;
  spec.n_concepts = 500;
  spec.languages = {"en", "fr", "de"};
  spec.n_editors = 5;
  const auto s = generate_synthetic(spec, 21);
  const Corpus& c = s.corpus;
  const LanguageCode src = "en", tgt = "fr";

  std::set<std::pair<std::string, std::string>> present;
  for (const auto& a : c.articles) {
    if (a.lang == src || a.lang == tgt) present.emplace(a.lang, a.title);
  }
  std::size_t sitelinks = 0, langlinks = 0, redirects = 0;
  for (const auto& l : c.sitelinks) sitelinks += present.contains({l.lang, l.title});
  for (const auto& l : c.interlanguage_links) {
    const bool pair = (l.from_lang == src && l.to_lang == tgt) || (l.from_lang == tgt && l.to_lang == src);
    langlinks += pair && present.contains({l.from_lang, l.from_title}) && present.contains({l.to_lang, l.to_title});
  }
  for (const auto& a : c.articles) {
    if (a.is_redirect && present.contains({a.lang, a.title})) redirects += present.contains({a.lang, *a.redirect_target});
  }
  const auto g = build_graph(c, src, tgt);
  CHECK(g.edge_count(EdgeKind::Sitelink) == sitelinks);
  CHECK(g.edge_count(EdgeKind::InterLanguage) == langlinks);
  CHECK(g.edge_count(EdgeKind::Redirect) == redirects);
  CHECK(langlinks > 0);
  CHECK(redirects > 0);
}

TEST_CASE("synthetic detection equals planted truth") {
  SyntheticSpec spec;
  spec.n_concepts = 800;
  spec.languages = {"en", "fr", "de"};
  spec.n_editors = 5;
  const auto s = generate_synthetic(spec, 8);
  for (const LanguageCode t : {"fr", "de"}) {
    CAPTURE(t);
    const auto m = find_missing(analysed(s.corpus, "en", t), t);
    const auto& truth = s.truth.missing.at(t);
    CHECK(missing_ids(m) == std::set<ConceptId>(truth.begin(), truth.end()));
    CHECK(m.entries.size() == truth.size());
  }
}

TEST_CASE("missing set contract") {
  Corpus c;
  c.languages = {"en", "de"};
  c.articles = {article("en", "Only", 100), article("en", "Long", 900), article("en", "Short", 100),
                article("de", "Lang", 500), redirect("de", "Umleitung", "Nirgendwo"), article("en", "Redirected", 100)};
  c.sitelinks = {{"Q5", "en", "Only"},
                 {"Q2", "en", "Long"},
                 {"Q9", "en", "Short"},
                 {"Q3", "de", "Lang"},
                 {"Q7", "en", "Redirected"},
                 {"Q7", "de", "Umleitung"}};
  c.articles.push_back(redirect("en", "Short_alias", "Short"));
  c.sitelinks.push_back({"Q1", "en", "Short_alias"});
  const auto g = analysed(c, "en", "de");
  const auto m = find_missing(g, "de");

  SUBCASE("source-only concept is missing") { CHECK(missing_ids(m).contains("Q5")); }
  SUBCASE("a target redirect is not coverage") { CHECK(missing_ids(m).contains("Q7")); }
  SUBCASE("representative is the smallest concept") {
    CHECK(missing_ids(m).contains("Q1"));
    CHECK_FALSE(missing_ids(m).contains("Q9"));
    auto it = std::find_if(m.entries.begin(), m.entries.end(), [](const MissingEntry& e) { return e.concept_id == "Q1"; });
    CHECK(it->source_title == "Short");
    CHECK(it->component_size == 4);
  }
  SUBCASE("entries sorted by concept") {
    CHECK(std::is_sorted(m.entries.begin(), m.entries.end(),
                         [](const MissingEntry& a, const MissingEntry& b) { return a.concept_id < b.concept_id; }));
  }
  SUBCASE("no entry's component holds a target article") {
    for (const auto& e : m.entries) {
      const auto comp = g.component_of(*g.find_concept(e.concept_id));
      for (std::uint32_t i = 0; i < g.nodes().size(); ++i) {
        const auto& n = g.nodes()[i];
        if (g.component_of(i) == comp && n.kind == NodeKind::Article && n.lang == "de") CHECK(n.is_redirect);
      }
    }
  }
}

TEST_CASE("adding edges never increases the missing count") {
  SyntheticSpec spec;
  spec.n_concepts = 300;
  spec.n_editors = 3;
  const auto s = generate_synthetic(spec, 13);
  auto g = build_graph(s.corpus, "en", "fr");
  weakly_connected_components(g);
  std::size_t previous = find_missing(g, "fr").entries.size();
  std::mt19937_64 rng(5);
  const auto n = static_cast<std::uint32_t>(g.nodes().size());
  for (int step = 0; step < 30; ++step) {
    g.add_edge(static_cast<std::uint32_t>(rng() % n), static_cast<std::uint32_t>(rng() % n), EdgeKind::InterLanguage);
    weakly_connected_components(g);
    const std::size_t now = find_missing(g, "fr").entries.size();
    CHECK(now <= previous);
    previous = now;
  }
}

TEST_CASE("without merge edges detection reduces to sitelink lookup") {
  SyntheticSpec spec;
  spec.n_concepts = 400;
  spec.n_editors = 3;
  auto s = generate_synthetic(spec, 17);
  Corpus c = s.corpus;
  c.interlanguage_links.clear();
  std::erase_if(c.articles, [](const ArticleRecord& a) { return a.is_redirect; });
  std::set<std::pair<std::string, std::string>> titles;
  for (const auto& a : c.articles) titles.emplace(a.lang, a.title);
  std::erase_if(c.sitelinks, [&](const SitelinkRecord& l) { return !titles.contains({l.lang, l.title}); });

  std::set<ConceptId> in_s, in_t;
  for (const auto& l : c.sitelinks) {
    if (l.lang == "en") in_s.insert(l.concept_id);
    if (l.lang == "fr") in_t.insert(l.concept_id);
  }
  std::set<ConceptId> expected;
  std::set_difference(in_s.begin(), in_s.end(), in_t.begin(), in_t.end(), std::inserter(expected, expected.end()));
  CHECK(missing_ids(find_missing(analysed(c, "en", "fr"), "fr")) == expected);
}

TEST_CASE("language checks") {
  const Corpus c = gapfinder::testing::neoplasm_corpus();
  for (auto [s, t] : {std::pair{"en", "en"}, std::pair{"en", "xx"}, std::pair{"zz", "de"}}) {
    try {
      build_graph(c, s, t);
      FAIL("expected UnknownLanguage");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::UnknownLanguage);
    }
  }
}

TEST_CASE("missing.tsv round trip") {
  SyntheticSpec spec;
  spec.n_concepts = 200;
  spec.n_editors = 2;
  const auto s = generate_synthetic(spec, 2);
  const auto m = find_missing(analysed(s.corpus, "en", "fr"), "fr");
  gapfinder::testing::TempDir dir;
  write_missing(m, dir / "missing.tsv");
  const auto back = read_missing(dir / "missing.tsv", "en", "fr");
  CHECK(back.entries == m.entries);
}
