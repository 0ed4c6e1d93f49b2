#include <doctest.h>

#include <map>
#include <set>

#include "gapfinder/concept_graph.hpp"
#include "gapfinder/error.hpp"
#include "gapfinder/pipeline.hpp"
#include "gapfinder/ranking.hpp"
#include "gapfinder/tsv.hpp"
#include "support/fixtures.hpp"

using namespace gapfinder;
using namespace gapfinder::testing;
namespace fs = std::filesystem;

namespace {

Errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no gapfinder::Error thrown");
  return Errc::ConfigError;
}

RunConfig small_synthetic() {
  RunConfig c;
  c.synth_concepts = 300;
  c.synth_editors = 20;
  c.synth_topics = 5;
  c.n_topics = 5;
  c.lda_iterations = 30;
  c.min_bytes = 0;
  c.min_views = 0;
  c.forest_trees = {10};
  c.forest_depths = {0};
  c.forest_cv_folds = 2;
  c.top_K = 200;
  c.k_per_editor = 3;
  c.bootstrap_resamples = 50;
  c.mrr_ws = {4};
  return c;
}

std::vector<std::vector<std::string>> rows_of(const fs::path& file) {
  std::vector<std::vector<std::string>> out;
  std::istringstream in(slurp(file));
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    std::vector<std::string> f;
    for (auto part : tsv::split(line, '\t')) f.emplace_back(part);
    out.push_back(std::move(f));
  }
  return out;
}

}  // namespace

TEST_CASE("config file with comments and overrides") {
  TempDir dir;
  spit(dir / "a.conf", "# comment\nsource = de   # trailing\n\n  n_topics=25\nforest_trees = 5, 7\nmethod = average\n");
  RunConfig c = read_config(dir / "a.conf");
  CHECK(c.source == "de");
  CHECK(c.target == "fr");
  CHECK(c.n_topics == 25);
  CHECK(c.forest_trees == std::vector<int>{5, 7});
  CHECK(c.method == InterestMethod::Average);
  set_config_value(c, "target", "hr");
  CHECK(c.target == "hr");
  CHECK(get_config_value(c, "forest_trees") == "5,7");
}

TEST_CASE("config errors") {
  RunConfig c;
  CHECK(code_of([&] { set_config_value(c, "no_such_key", "1"); }) == Errc::ConfigError);
  CHECK(code_of([&] { set_config_value(c, "n_topics", "12x"); }) == Errc::ConfigError);
  CHECK(code_of([&] { set_config_value(c, "stepwise", "maybe"); }) == Errc::ConfigError);
  CHECK(code_of([&] { set_config_value(c, "matcher", "hungarian"); }) == Errc::ConfigError);
  CHECK(code_of([&] { set_config_value(c, "mrr_ws", ""); }) == Errc::ConfigError);
  TempDir dir;
  spit(dir / "bad.conf", "source en\n");
  CHECK(code_of([&] { read_config(dir / "bad.conf"); }) == Errc::ConfigError);
  CHECK(code_of([&] { read_config(dir / "absent.conf"); }) == Errc::ConfigError);
  CHECK(exit_code(Errc::ConfigError) == 2);
}

TEST_CASE("written config reads back identically") {
  TempDir dir;
  RunConfig c = small_synthetic();
  c.method = InterestMethod::WeightedMedoid;
  c.forest_feature_fraction = 0.1;
  write_config(c, dir / "c.conf");
  CHECK(config_json(read_config(dir / "c.conf")) == config_json(c));
  for (const auto& key : config_keys()) CHECK_FALSE(config_help(key).empty());
}

TEST_CASE("find-missing keeps Neoplasm out for de") {
  TempDir dir;
  Corpus corpus = neoplasm_corpus();
  corpus.articles.push_back(article("en", "Lonely"));
  corpus.sitelinks.push_back({"Q9", "en", "Lonely"});
  write_corpus(corpus, dir / "corpus");
  RunConfig c;
  c.source = "en";
  c.target = "de";
  stage_build_graph(c, dir.path());
  const auto stamp = stage_find_missing(c, dir.path());
  const auto missing = read_missing(dir / artifact::kMissing, "en", "de");
  REQUIRE(missing.entries.size() == 1);
  CHECK(missing.entries[0].source_title == "Lonely");
  CHECK(stamp.summary["missing"] == 1);
  CHECK(stamp.scope == nlohmann::json{{"source", "en"}, {"target", "de"}});
}

TEST_CASE("evaluate on a perfect prediction gives zero RMSE") {
  TempDir dir;
  const std::vector<ConceptId> ids{"Q1", "Q2", "Q3", "Q4"};
  Eigen::VectorXd y(4);
  y << 0.1, 0.7, 0.4, 0.9;
  write_predictions(ids, y, dir / artifact::kTestPredictions);
  spit(dir / artifact::kTargets, "concept_id\ty\nQ1\t0.1\nQ2\t0.7\nQ3\t0.4\nQ4\t0.9\n");
  RunConfig c;
  const auto stamp = stage_evaluate(c, dir.path());
  const auto report = nlohmann::json::parse(slurp(dir / artifact::kReport));
  CHECK(report["ranking"]["forest"]["rmse"].get<double>() == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(report["ranking"]["forest"]["spearman"].get<double>() == doctest::Approx(1.0));
  CHECK(report["ranking"]["forest"]["n"] == 4);
  CHECK(stamp.summary["forest_rmse"].get<double>() == doctest::Approx(0.0));
  CHECK(stamp.inputs.contains(artifact::kTargets));
}

TEST_CASE("evaluate with nothing to evaluate") {
  TempDir dir;
  CHECK(code_of([&] { stage_evaluate(RunConfig{}, dir.path()); }) == Errc::MissingFile);
}

TEST_CASE("stale and missing inputs are refused") {
  TempDir dir;
  write_corpus(neoplasm_corpus(), dir / "corpus");
  RunConfig c;
  c.target = "de";

  SUBCASE("missing input") {
    CHECK(code_of([&] { stage_find_missing(c, dir.path()); }) == Errc::MissingFile);
  }
  SUBCASE("edited output") {
    stage_build_graph(c, dir.path());
    std::ofstream(dir / artifact::kComponents, std::ios::app) << "9\t\t\t\t1\n";
    CHECK(code_of([&] { stage_find_missing(c, dir.path()); }) == Errc::StaleArtifact);
  }
  SUBCASE("edited upstream input") {
    stage_build_graph(c, dir.path());
    Corpus more = neoplasm_corpus();
    more.articles.push_back(article("en", "Extra"));
    write_corpus(more, dir / "corpus");
    CHECK(code_of([&] { stage_find_missing(c, dir.path()); }) == Errc::StaleArtifact);
  }
  SUBCASE("other language pair") {
    stage_build_graph(c, dir.path());
    RunConfig fr = c;
    fr.target = "fr";
    CHECK(code_of([&] { stage_find_missing(fr, dir.path()); }) == Errc::StaleArtifact);
    CHECK(exit_code(Errc::StaleArtifact) == 4);
  }
}

TEST_CASE("small synthetic pipeline end to end") {
  TempDir dir;
  const RunConfig c = small_synthetic();
  stage_gen_synth(c, dir.path());
  const auto stamps = run_pipeline(c, dir.path());
  std::set<std::string> stages;
  for (const auto& s : stamps) stages.insert(s.stage);
  CHECK(stages.size() == 10);
  CHECK(read_stamps(dir.path()).size() == 11);

  std::set<std::string> editors;
  for (const auto& r : rows_of(dir / artifact::kInterests)) editors.insert(r.at(0));
  REQUIRE_FALSE(editors.empty());
  std::map<std::string, int> per_editor;
  std::set<std::string> concepts;
  for (const auto& r : rows_of(dir / artifact::kPlan)) {
    ++per_editor[r.at(0)];
    CHECK(concepts.insert(r.at(1)).second);
  }
  CHECK(per_editor.size() == editors.size());
  for (const auto& [e, n] : per_editor) CHECK(n == c.k_per_editor);

  const auto report = nlohmann::json::parse(slurp(dir / artifact::kReport));
  CHECK(report.contains("ranking"));
  CHECK(report.contains("mrr"));
  CHECK(report["matching"]["objective"].get<double>() >= report["matching"]["greedy_objective"].get<double>());

  SUBCASE("rerun reproduces every artifact") {
    TempDir again;
    stage_gen_synth(c, again.path());
    run_pipeline(c, again.path());
    for (const auto& e : fs::recursive_directory_iterator(dir.path())) {
      if (!e.is_regular_file() || e.path().parent_path().filename() == artifact::kStampDir) continue;
      const auto rel = fs::relative(e.path(), dir.path());
      CHECK_MESSAGE(slurp(e.path()) == slurp(again.path() / rel), rel.string());
    }
    for (auto a : read_stamps(dir.path())) {
      auto b = Stamp::from_json(nlohmann::json::parse(slurp(stamp_path(again.path(), a.stage))));
      a.timing = b.timing = nullptr;
      CHECK(a.to_json() == b.to_json());
    }
  }
}
