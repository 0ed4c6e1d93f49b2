#include <algorithm>
#include <random>

#include "doctest.h"
#include "gapfinder/error.hpp"
#include "gapfinder/matching.hpp"
#include "gapfinder/tsv.hpp"
#include "support/fixtures.hpp"
#include "support/matching_oracle.hpp"

using namespace gapfinder;
using gapfinder::testing::instance_from;
using gapfinder::testing::plan_violation;

namespace {

Eigen::MatrixXd rows(std::initializer_list<std::initializer_list<double>> r) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(r.size()), static_cast<Eigen::Index>(r.begin()->size()));
  Eigen::Index i = 0;
  for (auto row : r) {
    Eigen::Index j = 0;
    for (double v : row) m(i, j++) = v;
    ++i;
  }
  return m;
}

}  // namespace

TEST_CASE("candidate pool is sort then truncate") {
  std::mt19937_64 rng(1);
  MissingSet m{"en", "de", {}};
  std::map<ConceptId, double> pred;
  for (int i = 0; i < 300; ++i) {
    const std::string id = "Q" + std::to_string(1000 + i);
    m.entries.push_back({id, "T" + std::to_string(i), 1});
    if (i % 7 != 0) pred[id] = static_cast<double>(1 + rng() % 50) / 50.0;
  }
  std::vector<std::pair<double, std::string>> oracle;
  for (const auto& e : m.entries) {
    if (pred.contains(e.concept_id)) oracle.emplace_back(-pred[e.concept_id], e.concept_id);
  }
  std::sort(oracle.begin(), oracle.end());
  for (std::size_t k : {std::size_t{0}, std::size_t{10}, std::size_t{100}, std::size_t{1000}}) {
    const auto pool = candidate_pool(m, pred, k);
    REQUIRE(pool.size() == std::min(k, oracle.size()));
    for (std::size_t i = 0; i < pool.size(); ++i) {
      CHECK(pool[i].concept_id == oracle[i].second);
      CHECK(pool[i].y_pred == -oracle[i].first);
    }
  }
}

TEST_CASE("greedy takes the best articles in turn") {
  SUBCASE("one editor") {
    auto inst = instance_from(rows({{0.9, 0.8, 0.1}}));
    const auto plan = greedy_match(inst, 2);
    REQUIRE(plan.assignments.size() == 2);
    CHECK(plan.assignments[0].concept_id == "Q100");
    CHECK(plan.assignments[1].concept_id == "Q101");
  }
  SUBCASE("two editors contest one article") {
    auto inst = instance_from(rows({{0.9, 0.1}, {0.8, 0.7}}));
    const auto plan = greedy_match(inst, 1);
    REQUIRE(plan.assignments.size() == 2);
    CHECK(plan.assignments[0] == Assignment{"E0", "Q100", 0.9});
    CHECK(plan.assignments[1] == Assignment{"E1", "Q101", 0.7});
  }
  SUBCASE("ties go to the earlier column") {
    auto inst = instance_from(rows({{0.5, 0.5}}));
    CHECK(greedy_match(inst, 1).assignments[0].concept_id == "Q100");
  }
}

TEST_CASE("optimal matching") {
  SUBCASE("one by one") {
    const auto plan = optimal_match(instance_from(rows({{0.25}})), 3);
    REQUIRE(plan.assignments.size() == 1);
    CHECK(plan.objective == 0.25);
  }
  SUBCASE("beats greedy on a contested instance") {
    auto inst = instance_from(rows({{0.9, 0.85, 0.0, 0.0, 0.0},
                                    {0.88, 0.1, 0.0, 0.0, 0.0},
                                    {0.0, 0.0, 0.5, 0.25, 0.125}}));
    const auto g = greedy_match(inst, 1);
    const auto o = optimal_match(inst, 1);
    CHECK(g.objective == doctest::Approx(0.9 + 0.1 + 0.5));
    CHECK(o.objective == doctest::Approx(0.85 + 0.88 + 0.5));
    CHECK(plan_violation(o, inst, 1).empty());
  }
  SUBCASE("k must be positive") {
    CHECK_THROWS_AS(optimal_match(instance_from(rows({{0.25}})), 0), Error);
    CHECK_THROWS_AS(greedy_match(instance_from(rows({{0.25}})), 0), Error);
  }
  SUBCASE("instance size cap") {
    try {
      optimal_match(instance_from(Eigen::MatrixXd::Constant(3, 4, 0.5)), 1, 11);
      FAIL("expected InstanceTooLarge");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::InstanceTooLarge);
    }
  }
}

TEST_CASE("optimal equals the exhaustive optimum on small instances") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 60; ++trial) {
    const auto e = static_cast<Eigen::Index>(1 + rng() % 3);
    const auto a = static_cast<Eigen::Index>(1 + rng() % 6);
    const int k = 1 + static_cast<int>(rng() % 3);
    const auto inst = instance_from(gapfinder::testing::dyadic_scores(rng, e, a));
    const auto o = optimal_match(inst, k);
    const auto g = greedy_match(inst, k);
    CAPTURE(trial);
    CHECK(o.objective == gapfinder::testing::exhaustive_optimum(inst.scores, k));
    CHECK(o.objective >= g.objective);
    CHECK(plan_violation(o, inst, k).empty());
    CHECK(plan_violation(g, inst, k).empty());
  }
}

TEST_CASE("matching is deterministic and ignores row order") {
  std::mt19937_64 rng(12);
  const auto inst = instance_from(gapfinder::testing::dyadic_scores(rng, 6, 20));
  const auto o = optimal_match(inst, 3);
  CHECK(optimal_match(inst, 3).assignments == o.assignments);
  CHECK(greedy_match(inst, 3).assignments == greedy_match(inst, 3).assignments);

  MatchInstance shuffled = inst;
  std::vector<Eigen::Index> perm(6);
  for (Eigen::Index i = 0; i < 6; ++i) perm[static_cast<std::size_t>(i)] = 5 - i;
  for (Eigen::Index i = 0; i < 6; ++i) {
    shuffled.editor_ids[static_cast<std::size_t>(i)] = inst.editor_ids[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])];
    shuffled.scores.row(i) = inst.scores.row(perm[static_cast<std::size_t>(i)]);
  }
  CHECK(optimal_match(shuffled, 3).objective == o.objective);
}

TEST_CASE("build_instance computes cosine scores") {
  TopicVector a(2), b(2);
  a << 3, 4;
  b << 1, 0;
  std::vector<InterestVector> eds{{"E1", a, InterestMethod::Average, 4}};
  std::vector<Candidate> arts{{"Q1", b}, {"Q2", a}};
  const auto inst = build_instance(eds, arts);
  CHECK(inst.scores(0, 0) == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(inst.scores(0, 1) == doctest::Approx(1.0).epsilon(1e-12));
  arts.push_back({"Q3", TopicVector::Zero(2)});
  CHECK_THROWS_AS(build_instance(eds, arts), Error);
}

TEST_CASE("plan.tsv layout") {
  const auto inst = instance_from(rows({{0.5, 0.25}}));
  const auto plan = optimal_match(inst, 2);
  std::vector<PoolItem> pool{{"Q100", "Alpha", 0.75}, {"Q101", "Beta", 0.5}};
  gapfinder::testing::TempDir dir;
  write_plan(plan, pool, dir / "plan.tsv");
  CHECK(gapfinder::testing::slurp(dir / "plan.tsv") ==
        "editor_id\tconcept_id\tsource_title\tinterest_score\ty_pred\n"
        "E0\tQ100\tAlpha\t0.500000\t0.750000\n"
        "E0\tQ101\tBeta\t0.250000\t0.500000\n");
}
