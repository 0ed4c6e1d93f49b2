#include <cmath>
#include <random>
#include <set>

#include "doctest.h"
#include "gapfinder/error.hpp"
#include "gapfinder/ranking.hpp"
#include "support/fixtures.hpp"

using namespace gapfinder;

namespace {

struct Data {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
};

// y is a clean increasing function of column 0; the other columns are noise.
Data monotone(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Data d{Eigen::MatrixXd(static_cast<Eigen::Index>(n), 4), Eigen::VectorXd(static_cast<Eigen::Index>(n))};
  for (Eigen::Index r = 0; r < d.x.rows(); ++r) {
    for (Eigen::Index c = 0; c < 4; ++c) d.x(r, c) = u(rng);
    d.y(r) = 0.05 + 0.9 * d.x(r, 0) * d.x(r, 0);
  }
  return d;
}

ForestConfig quick_config() {
  ForestConfig c;
  c.n_trees_grid = {10, 30};
  c.max_depth_grid = {4, 0};
  c.cv_folds = 3;
  c.seed = 9;
  return c;
}

double rmse(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return std::sqrt((a - b).squaredNorm() / static_cast<double>(a.size()));
}

}  // namespace

TEST_CASE("constant target predicts the constant") {
  const auto d = monotone(50, 1);
  const Eigen::VectorXd y = Eigen::VectorXd::Constant(50, 0.5);
  const auto model = grow_forest(d.x, y, 10, 0, quick_config());
  const auto p = predict_raw(model, d.x);
  for (Eigen::Index i = 0; i < p.size(); ++i) CHECK(p(i) == 0.5);
}

TEST_CASE("one training row gives back its target") {
  Eigen::MatrixXd x(1, 3);
  x << 1, 2, 3;
  Eigen::VectorXd y(1);
  y << 0.37;
  const auto model = grow_forest(x, y, 1, 0, quick_config());
  CHECK(predict_raw(model, x)(0) == 0.37);
}

TEST_CASE("planted monotone signal beats the mean baseline threefold") {
  const auto train = monotone(500, 2);
  const auto test = monotone(200, 3);
  const auto model = train_forest(train.x, train.y, quick_config());
  const auto pred = predict_raw(model, test.x);
  const double base = rmse(mean_baseline().predict(test.y.size()), test.y);
  CHECK(rmse(pred, test.y) < base / 3.0);
  CHECK(model.cv.size() == 4);
}

TEST_CASE("training is deterministic and seed dependent") {
  const auto d = monotone(120, 4);
  const auto a = train_forest(d.x, d.y, quick_config());
  const auto b = train_forest(d.x, d.y, quick_config());
  CHECK(predict_raw(a, d.x) == predict_raw(b, d.x));
  auto other = quick_config();
  other.seed = 10;
  CHECK_FALSE(predict_raw(train_forest(d.x, d.y, other), d.x) == predict_raw(a, d.x));
}

TEST_CASE("predictions stay inside the training range and (0, 1]") {
  const auto d = monotone(200, 5);
  const auto model = grow_forest(d.x, d.y, 20, 0, quick_config());
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> wide(-5.0, 5.0);
  Eigen::MatrixXd probe(300, 4);
  for (Eigen::Index r = 0; r < probe.rows(); ++r) {
    for (Eigen::Index c = 0; c < 4; ++c) probe(r, c) = wide(rng);
  }
  const auto p = predict_raw(model, probe);
  CHECK(p.minCoeff() >= d.y.minCoeff());
  CHECK(p.maxCoeff() <= d.y.maxCoeff());
  CHECK(p.minCoeff() > 0.0);
  CHECK(p.maxCoeff() <= 1.0);
  for (const auto& tree : model.trees) {
    for (const auto& node : tree.nodes) {
      CHECK(node.value >= d.y.minCoeff());
      CHECK(node.value <= d.y.maxCoeff());
    }
  }
}

TEST_CASE("truncated and prefix forests equal separately grown ones") {
  const auto d = monotone(150, 7);
  const auto config = quick_config();
  const auto big = grow_forest(d.x, d.y, 30, 0, config);
  const auto small = grow_forest(d.x, d.y, 12, 3, config);
  for (Eigen::Index r = 0; r < d.x.rows(); ++r) {
    double sum = 0.0;
    for (int t = 0; t < 12; ++t) sum += big.trees[static_cast<std::size_t>(t)].predict(d.x.row(r), 3);
    CHECK(sum / 12.0 == doctest::Approx(predict_raw(small, d.x.row(r))(0)).epsilon(1e-12));
  }
}

TEST_CASE("training preconditions") {
  const auto d = monotone(40, 8);
  auto expect = [](auto&& fn, Errc code) {
    try {
      fn();
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == code);
    }
  };
  expect([&] { train_forest(d.x.topRows(19), d.y.head(19), quick_config()); }, Errc::TooFewRows);
  expect([&] { train_forest(d.x, Eigen::VectorXd::Constant(40, 0.3), quick_config()); }, Errc::DegenerateTarget);
  Eigen::VectorXd bad = d.y;
  bad(0) = 0.0;
  expect([&] { train_forest(d.x, bad, quick_config()); }, Errc::InvalidSpec);
}

TEST_CASE("schema hash is enforced at predict time") {
  const auto d = monotone(30, 9);
  FeatureMatrix m;
  m.schema.source = "en";
  m.schema.target = "de";
  m.schema.view_languages = {"en"};
  m.schema.finalize();
  m.values = Eigen::MatrixXd::Zero(2, static_cast<Eigen::Index>(m.schema.columns.size()));
  const auto model = grow_forest(Eigen::MatrixXd::Zero(2, m.values.cols()), Eigen::VectorXd::Constant(2, 0.4), 2, 0,
                                 quick_config(), m.schema.hash);
  CHECK(predict(model, m)(0) == 0.4);
  m.schema.hash = "0000000000000000";
  try {
    predict(model, m);
    FAIL("expected SchemaMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::SchemaMismatch);
  }
}

TEST_CASE("baselines") {
  CHECK(mean_baseline().value == 0.5);
  CHECK(mean_baseline().predict(3) == Eigen::VectorXd::Constant(3, 0.5));

  FeatureMatrix m;
  m.schema.source = "en";
  m.schema.target = "de";
  m.schema.view_languages = {"en", "fr"};
  m.schema.finalize();
  m.values = Eigen::MatrixXd::Zero(2, static_cast<Eigen::Index>(m.schema.columns.size()));
  m.values(0, m.source_normrank_column()) = 0.9;
  m.values(1, m.source_normrank_column()) = 0.2;
  const auto p = source_language_baseline(m);
  CHECK(p(0) == 0.9);
  CHECK(p(1) == 0.2);
}

TEST_CASE("stratified split partitions rows across deciles") {
  Eigen::VectorXd y(1000);
  for (Eigen::Index i = 0; i < 1000; ++i) y(i) = static_cast<double>((i * 37) % 1000 + 1) / 1000.0;
  const auto [train, test] = stratified_split(y, 0.2, 3);
  CHECK(train.size() == 800);
  CHECK(test.size() == 200);
  std::set<Eigen::Index> all(train.begin(), train.end());
  for (auto t : test) CHECK(all.insert(t).second);
  CHECK(all.size() == 1000);
  std::vector<int> per_decile(10, 0);
  for (auto t : test) ++per_decile[static_cast<std::size_t>(std::min(9.0, std::floor((y(t) - 1e-9) * 10)))];
  for (int n : per_decile) CHECK(n == 20);
  CHECK(stratified_split(y, 0.2, 3) == stratified_split(y, 0.2, 3));
}

TEST_CASE("model bundle round trip") {
  const auto d = monotone(60, 10);
  const auto model = train_forest(d.x, d.y, quick_config(), "abc");
  gapfinder::testing::TempDir dir;
  model.save(dir / "model.tsv");
  const auto back = ForestModel::load(dir / "model.tsv");
  CHECK(back.n_trees == model.n_trees);
  CHECK(back.max_depth == model.max_depth);
  CHECK(back.schema_hash == "abc");
  CHECK(back.cv.size() == model.cv.size());
  CHECK(predict_raw(back, d.x) == predict_raw(model, d.x));
}

TEST_CASE("predictions file round trip") {
  std::vector<ConceptId> ids{"Q1", "Q2"};
  Eigen::VectorXd y(2);
  y << 0.125, 0.8;
  gapfinder::testing::TempDir dir;
  write_predictions(ids, y, dir / "p.tsv");
  const auto back = read_predictions(dir / "p.tsv");
  CHECK(back.at("Q1") == 0.125);
  CHECK(back.at("Q2") == 0.8);
}
