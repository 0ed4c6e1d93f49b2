#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>

#include "gapfinder/error.hpp"
#include "gapfinder/ranking.hpp"
#include "gapfinder/seeding.hpp"
#include "gapfinder/tsv.hpp"

namespace gapfinder {

using namespace std::string_view_literals;

namespace {

std::uint64_t tree_seed(std::uint64_t seed, std::size_t tree) {
  return derive_seed(seed, static_cast<std::uint64_t>(tree));
}

class TreeBuilder {
 public:
  TreeBuilder(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, int max_depth,
              const ForestConfig& config)
      : x_(x), y_(y), max_depth_(max_depth), min_leaf_(std::max(1, config.min_samples_leaf)) {
    const auto p = static_cast<double>(x.cols());
    candidates_ = std::max<Eigen::Index>(
        1, std::min<Eigen::Index>(x.cols(),
                                  static_cast<Eigen::Index>(std::ceil(p * config.feature_fraction))));
  }

  RegressionTree grow(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const auto n = static_cast<std::size_t>(y_.size());
    rows_.resize(n);
    std::uniform_int_distribution<Eigen::Index> draw(0, y_.size() - 1);
    for (auto& r : rows_) r = draw(rng);

    RegressionTree tree;
    struct Pending {
      std::int32_t node;
      std::size_t begin, end;
      std::uint64_t seed;
    };
    std::vector<Pending> stack;
    tree.nodes.push_back(TreeNode{});
    stack.push_back({0, 0, n, splitmix64(seed ^ 0xA5A5A5A5ULL)});
    while (!stack.empty()) {
      Pending job = stack.back();
      stack.pop_back();
      auto split = split_node(tree, job.node, job.begin, job.end, job.seed);
      if (!split) continue;
      const auto depth = tree.nodes[static_cast<std::size_t>(job.node)].depth + 1;
      const auto left = static_cast<std::int32_t>(tree.nodes.size());
      tree.nodes.push_back(TreeNode{});
      tree.nodes.push_back(TreeNode{});
      tree.nodes[static_cast<std::size_t>(left)].depth = depth;
      tree.nodes[static_cast<std::size_t>(left + 1)].depth = depth;
      tree.nodes[static_cast<std::size_t>(job.node)].left = left;
      tree.nodes[static_cast<std::size_t>(job.node)].right = left + 1;
      stack.push_back({left + 1, *split, job.end, splitmix64(job.seed ^ 0x2ULL)});
      stack.push_back({left, job.begin, *split, splitmix64(job.seed ^ 0x1ULL)});
    }
    return tree;
  }

 private:
  // Sets the node's value; on a split records feature/threshold and returns the
  // partition point of rows_[begin, end).
  std::optional<std::size_t> split_node(RegressionTree& tree, std::int32_t index, std::size_t begin,
                                        std::size_t end, std::uint64_t seed) {
    auto& node = tree.nodes[static_cast<std::size_t>(index)];
    const auto n = end - begin;
    double sum = 0.0;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t i = begin; i < end; ++i) {
      const double v = y_(rows_[i]);
      sum += v;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    node.value = sum / static_cast<double>(n);
    if ((max_depth_ > 0 && node.depth >= max_depth_) || n < 2 * static_cast<std::size_t>(min_leaf_) ||
        lo == hi) {
      return std::nullopt;
    }

    std::mt19937_64 rng(seed);
    features_.resize(static_cast<std::size_t>(x_.cols()));
    std::iota(features_.begin(), features_.end(), Eigen::Index{0});

    const double parent_score = sum * sum / static_cast<double>(n);
    double best_score = parent_score;
    Eigen::Index best_feature = -1;
    double best_threshold = 0.0;
    Eigen::Index examined = 0;
    for (std::size_t f = 0; f < features_.size() && examined < candidates_; ++f) {
      // Partial Fisher-Yates: visit features in a node-specific random order.
      std::uniform_int_distribution<std::size_t> pick(f, features_.size() - 1);
      std::swap(features_[f], features_[pick(rng)]);
      const Eigen::Index feature = features_[f];

      pairs_.clear();
      for (std::size_t i = begin; i < end; ++i) {
        pairs_.emplace_back(x_(rows_[i], feature), y_(rows_[i]));
      }
      std::sort(pairs_.begin(), pairs_.end());
      if (pairs_.front().first == pairs_.back().first) continue;
      ++examined;

      double left_sum = 0.0;
      for (std::size_t i = 0; i + 1 < n; ++i) {
        left_sum += pairs_[i].second;
        if (pairs_[i].first == pairs_[i + 1].first) continue;
        const auto n_left = i + 1;
        const auto n_right = n - n_left;
        if (n_left < static_cast<std::size_t>(min_leaf_) || n_right < static_cast<std::size_t>(min_leaf_)) {
          continue;
        }
        const double right_sum = sum - left_sum;
        const double score = left_sum * left_sum / static_cast<double>(n_left) +
                             right_sum * right_sum / static_cast<double>(n_right);
        if (score > best_score) {
          best_score = score;
          best_feature = feature;
          double mid = pairs_[i].first + (pairs_[i + 1].first - pairs_[i].first) / 2.0;
          if (mid >= pairs_[i + 1].first) mid = pairs_[i].first;
          best_threshold = mid;
        }
      }
    }
    if (best_feature < 0 || best_score <= parent_score * (1.0 + 1e-12)) return std::nullopt;

    auto mid = std::partition(rows_.begin() + static_cast<std::ptrdiff_t>(begin),
                              rows_.begin() + static_cast<std::ptrdiff_t>(end),
                              [&](Eigen::Index r) { return x_(r, best_feature) <= best_threshold; });
    node.feature = static_cast<std::int32_t>(best_feature);
    node.threshold = best_threshold;
    return static_cast<std::size_t>(mid - rows_.begin());
  }

  const Eigen::MatrixXd& x_;
  const Eigen::VectorXd& y_;
  int max_depth_;
  int min_leaf_;
  Eigen::Index candidates_ = 1;
  std::vector<Eigen::Index> rows_;
  std::vector<Eigen::Index> features_;
  std::vector<std::pair<double, double>> pairs_;
};

double clip_prediction(double v) {
  return std::clamp(v, std::numeric_limits<double>::min(), 1.0);
}

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& x, const std::vector<Eigen::Index>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(rows[i]);
  return out;
}

Eigen::VectorXd take(const Eigen::VectorXd& y, const std::vector<Eigen::Index>& rows) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) out(static_cast<Eigen::Index>(i)) = y(rows[i]);
  return out;
}

constexpr std::array kPredictionCols{"concept_id"sv, "y_pred"sv};

}  // namespace

ForestModel grow_forest(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, int n_trees,
                        int max_depth, const ForestConfig& config, std::string schema_hash) {
  if (x.rows() != y.size()) throw Error(Errc::LengthMismatch, "feature rows differ from targets");
  if (y.size() == 0) throw Error(Errc::TooFewRows, "no training rows");
  if (n_trees < 1) throw Error(Errc::InvalidSpec, "n_trees must be positive");
  ForestModel model;
  model.n_trees = n_trees;
  model.max_depth = max_depth;
  model.seed = config.seed;
  model.schema_hash = std::move(schema_hash);
  TreeBuilder builder(x, y, max_depth, config);
  model.trees.reserve(static_cast<std::size_t>(n_trees));
  for (int t = 0; t < n_trees; ++t) {
    model.trees.push_back(builder.grow(tree_seed(config.seed, static_cast<std::size_t>(t))));
  }
  return model;
}

ForestModel train_forest(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                         const ForestConfig& config, std::string schema_hash) {
  if (x.rows() != y.size()) throw Error(Errc::LengthMismatch, "feature rows differ from targets");
  if (y.size() < 20) {
    throw Error(Errc::TooFewRows, std::to_string(y.size()) + " rows; at least 20 required");
  }
  if ((y.array() <= 0.0).any() || (y.array() > 1.0).any()) {
    throw Error(Errc::InvalidSpec, "targets must lie in (0, 1]");
  }
  if (y.maxCoeff() == y.minCoeff()) throw Error(Errc::DegenerateTarget, "all targets are equal");
  if (config.n_trees_grid.empty() || config.max_depth_grid.empty()) {
    throw Error(Errc::InvalidSpec, "empty hyperparameter grid");
  }

  std::vector<int> tree_grid = config.n_trees_grid;
  std::sort(tree_grid.begin(), tree_grid.end());
  const int max_trees = tree_grid.back();
  const bool unlimited = std::find(config.max_depth_grid.begin(), config.max_depth_grid.end(), 0) !=
                         config.max_depth_grid.end();
  const int grow_depth =
      unlimited ? 0 : *std::max_element(config.max_depth_grid.begin(), config.max_depth_grid.end());

  std::vector<CvResult> results;
  if (config.n_trees_grid.size() * config.max_depth_grid.size() > 1) {
    const int folds = std::clamp(config.cv_folds, 2, static_cast<int>(y.size()));
    std::vector<Eigen::Index> order(static_cast<std::size_t>(y.size()));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::mt19937_64 shuffle_rng(splitmix64(config.seed ^ 0xC0FFEEULL));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    const auto n_depths = config.max_depth_grid.size();
    // sse[depth][tree-grid position]
    std::vector<std::vector<double>> sse(n_depths, std::vector<double>(tree_grid.size(), 0.0));
    for (int fold = 0; fold < folds; ++fold) {
      std::vector<Eigen::Index> train_rows, val_rows;
      for (std::size_t i = 0; i < order.size(); ++i) {
        (static_cast<int>(i % static_cast<std::size_t>(folds)) == fold ? val_rows : train_rows)
            .push_back(order[i]);
      }
      std::sort(train_rows.begin(), train_rows.end());
      std::sort(val_rows.begin(), val_rows.end());
      Eigen::MatrixXd x_train = take_rows(x, train_rows);
      Eigen::VectorXd y_train = take(y, train_rows);
      Eigen::MatrixXd x_val = take_rows(x, val_rows);
      Eigen::VectorXd y_val = take(y, val_rows);

      ForestConfig fold_config = config;
      fold_config.seed = splitmix64(config.seed ^ (0xF01DULL + static_cast<std::uint64_t>(fold)));
      TreeBuilder builder(x_train, y_train, grow_depth, fold_config);
      Eigen::MatrixXd running = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_depths), x_val.rows());
      std::size_t next_checkpoint = 0;
      for (int t = 1; t <= max_trees; ++t) {
        auto tree = builder.grow(tree_seed(fold_config.seed, static_cast<std::size_t>(t - 1)));
        for (std::size_t d = 0; d < n_depths; ++d) {
          for (Eigen::Index r = 0; r < x_val.rows(); ++r) {
            running(static_cast<Eigen::Index>(d), r) += tree.predict(x_val.row(r), config.max_depth_grid[d]);
          }
        }
        while (next_checkpoint < tree_grid.size() && tree_grid[next_checkpoint] == t) {
          for (std::size_t d = 0; d < n_depths; ++d) {
            for (Eigen::Index r = 0; r < x_val.rows(); ++r) {
              const double pred = clip_prediction(running(static_cast<Eigen::Index>(d), r) / t);
              sse[d][next_checkpoint] += (pred - y_val(r)) * (pred - y_val(r));
            }
          }
          ++next_checkpoint;
        }
      }
    }
    for (int trees : config.n_trees_grid) {
      const auto ti = static_cast<std::size_t>(
          std::find(tree_grid.begin(), tree_grid.end(), trees) - tree_grid.begin());
      for (std::size_t d = 0; d < n_depths; ++d) {
        results.push_back({trees, config.max_depth_grid[d],
                           std::sqrt(sse[d][ti] / static_cast<double>(y.size()))});
      }
    }
  } else {
    results.push_back({config.n_trees_grid.front(), config.max_depth_grid.front(), 0.0});
  }

  // Lowest CV error; grid order breaks ties.
  const CvResult best = *std::min_element(results.begin(), results.end(),
                                          [](const CvResult& a, const CvResult& b) {
                                            return a.rmse < b.rmse;
                                          });
  ForestModel model = grow_forest(x, y, best.n_trees, best.max_depth, config, std::move(schema_hash));
  if (results.size() > 1) model.cv = std::move(results);
  return model;
}

Eigen::VectorXd predict_raw(const ForestModel& model, const Eigen::MatrixXd& x) {
  Eigen::VectorXd out(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    double sum = 0.0;
    for (const auto& tree : model.trees) sum += tree.predict(x.row(r));
    out(r) = clip_prediction(sum / static_cast<double>(model.trees.size()));
  }
  return out;
}

Eigen::VectorXd predict(const ForestModel& model, const FeatureMatrix& rows) {
  if (model.schema_hash != rows.schema.hash) {
    throw Error(Errc::SchemaMismatch, "model schema " + model.schema_hash + " vs features " +
                                          rows.schema.hash);
  }
  return predict_raw(model, rows.values);
}

MeanBaseline mean_baseline() { return MeanBaseline{0.5}; }

Eigen::VectorXd source_language_baseline(const FeatureMatrix& rows) {
  return rows.values.col(rows.source_normrank_column());
}

std::pair<std::vector<Eigen::Index>, std::vector<Eigen::Index>> stratified_split(
    const Eigen::VectorXd& y, double test_fraction, std::uint64_t seed) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(y.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return y(a) < y(b); });
  std::mt19937_64 rng(splitmix64(seed ^ 0x5EEDULL));
  std::vector<Eigen::Index> train, test;
  constexpr std::size_t kStrata = 10;
  const std::size_t n = order.size();
  for (std::size_t s = 0; s < kStrata; ++s) {
    const std::size_t begin = s * n / kStrata;
    const std::size_t end = (s + 1) * n / kStrata;
    std::vector<Eigen::Index> bin(order.begin() + static_cast<std::ptrdiff_t>(begin),
                                  order.begin() + static_cast<std::ptrdiff_t>(end));
    std::shuffle(bin.begin(), bin.end(), rng);
    const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(bin.size())));
    test.insert(test.end(), bin.begin(), bin.begin() + static_cast<std::ptrdiff_t>(n_test));
    train.insert(train.end(), bin.begin() + static_cast<std::ptrdiff_t>(n_test), bin.end());
  }
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return {train, test};
}

void ForestModel::save(const std::filesystem::path& file) const {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::MissingFile, "cannot write " + file.string());
  out << "format_version\t" << kFormatVersion << '\n';
  out << "schema_hash\t" << schema_hash << '\n';
  out << "n_trees\t" << n_trees << '\n';
  out << "max_depth\t" << max_depth << '\n';
  out << "seed\t" << seed << '\n';
  out << "cv\t" << cv.size() << '\n';
  for (const auto& r : cv) {
    out << r.n_trees << '\t' << r.max_depth << '\t' << tsv::format_double(r.rmse) << '\n';
  }
  for (const auto& tree : trees) {
    out << "tree\t" << tree.nodes.size() << '\n';
    for (const auto& n : tree.nodes) {
      out << n.feature << '\t' << tsv::format_double(n.threshold) << '\t' << n.left << '\t'
          << n.right << '\t' << tsv::format_double(n.value) << '\t' << n.depth << '\n';
    }
  }
}

ForestModel ForestModel::load(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error(Errc::MissingFile, file.string());
  std::string line;
  std::size_t line_no = 0;
  auto next = [&]() {
    if (!std::getline(in, line)) throw Error(Errc::MalformedRow, file.string() + ": truncated");
    ++line_no;
    return tsv::split(line);
  };
  auto keyed = [&](std::string_view key) {
    auto f = next();
    if (f.size() != 2 || f[0] != key) {
      throw Error(Errc::MalformedRow, file.string() + ": expected " + std::string(key));
    }
    return std::string(f[1]);
  };
  ForestModel m;
  if (tsv::parse_int(keyed("format_version"), file, line_no, "format_version") != kFormatVersion) {
    throw Error(Errc::StaleArtifact, file.string() + ": unsupported forest format");
  }
  m.schema_hash = keyed("schema_hash");
  m.n_trees = static_cast<int>(tsv::parse_int(keyed("n_trees"), file, line_no, "n_trees"));
  m.max_depth = static_cast<int>(tsv::parse_int(keyed("max_depth"), file, line_no, "max_depth"));
  m.seed = static_cast<std::uint64_t>(tsv::parse_int(keyed("seed"), file, line_no, "seed"));
  const auto n_cv = tsv::parse_int(keyed("cv"), file, line_no, "cv");
  for (std::int64_t i = 0; i < n_cv; ++i) {
    auto f = next();
    if (f.size() != 3) throw Error(Errc::MalformedRow, file.string() + ": bad cv row");
    m.cv.push_back({static_cast<int>(tsv::parse_int(f[0], file, line_no, "n_trees")),
                    static_cast<int>(tsv::parse_int(f[1], file, line_no, "max_depth")),
                    tsv::parse_double(f[2], file, line_no, "rmse")});
  }
  for (int t = 0; t < m.n_trees; ++t) {
    auto head = next();
    if (head.size() != 2 || head[0] != "tree") {
      throw Error(Errc::MalformedRow, file.string() + ": expected tree header");
    }
    RegressionTree tree;
    const auto count = tsv::parse_int(head[1], file, line_no, "nodes");
    for (std::int64_t i = 0; i < count; ++i) {
      auto f = next();
      if (f.size() != 6) throw Error(Errc::MalformedRow, file.string() + ": bad node row");
      TreeNode n;
      n.feature = static_cast<std::int32_t>(tsv::parse_int(f[0], file, line_no, "feature"));
      n.threshold = tsv::parse_double(f[1], file, line_no, "threshold");
      n.left = static_cast<std::int32_t>(tsv::parse_int(f[2], file, line_no, "left"));
      n.right = static_cast<std::int32_t>(tsv::parse_int(f[3], file, line_no, "right"));
      n.value = tsv::parse_double(f[4], file, line_no, "value");
      n.depth = static_cast<std::int32_t>(tsv::parse_int(f[5], file, line_no, "depth"));
      tree.nodes.push_back(n);
    }
    m.trees.push_back(std::move(tree));
  }
  return m;
}

void write_predictions(std::span<const ConceptId> ids, const Eigen::VectorXd& y_pred,
                       const std::filesystem::path& file) {
  if (static_cast<Eigen::Index>(ids.size()) != y_pred.size()) {
    throw Error(Errc::LengthMismatch, "prediction count differs from concept count");
  }
  tsv::Writer w(file, kPredictionCols);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    w.row(ids[i], tsv::format_double(y_pred(static_cast<Eigen::Index>(i))));
  }
}

std::map<ConceptId, double> read_predictions(const std::filesystem::path& file) {
  std::map<ConceptId, double> out;
  tsv::read(file, kPredictionCols, {}, [&](std::size_t line, auto f) {
    out[std::string(f[0])] = tsv::parse_double(f[1], file, line, "y_pred");
  });
  return out;
}

}  // namespace gapfinder
