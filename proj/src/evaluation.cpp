#include "gapfinder/evaluation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include <boost/math/distributions/beta.hpp>

#include "gapfinder/seeding.hpp"
#include "gapfinder/tsv.hpp"

namespace gapfinder {

using namespace std::string_view_literals;

Eigen::VectorXd average_ranks(const Eigen::VectorXd& values) {
  const auto n = values.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return values(a) < values(b); });
  Eigen::VectorXd ranks(n);
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && values(order[j]) == values(order[i])) ++j;
    const double r = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) ranks(order[k]) = r;
    i = j;
  }
  return ranks;
}

MetricReport rmse_spearman(const Eigen::VectorXd& pred, const Eigen::VectorXd& truth) {
  if (pred.size() != truth.size()) {
    throw Error(Errc::LengthMismatch, "prediction and truth lengths differ");
  }
  if (pred.size() < 2) throw Error(Errc::DegenerateInput, "need at least two points");
  MetricReport r;
  r.n = static_cast<std::size_t>(pred.size());
  r.rmse = std::sqrt((pred - truth).squaredNorm() / static_cast<double>(pred.size()));
  const Eigen::VectorXd a = average_ranks(pred);
  const Eigen::VectorXd b = average_ranks(truth);
  const Eigen::VectorXd da = a.array() - a.mean();
  const Eigen::VectorXd db = b.array() - b.mean();
  const double denom = std::sqrt(da.squaredNorm() * db.squaredNorm());
  if (denom > 0.0) r.spearman = std::clamp(da.dot(db) / denom, -1.0, 1.0);
  return r;
}

std::vector<NamedFeatureSet> family_feature_sets(const FeatureSchema& schema) {
  std::vector<NamedFeatureSet> out;
  for (FeatureFamily f : all_families()) {
    NamedFeatureSet set{std::string(family_name(f)), {}};
    for (std::size_t c = 0; c < schema.column_family.size(); ++c) {
      if (schema.column_family[c] == f) set.columns.push_back(static_cast<Eigen::Index>(c));
    }
    if (!set.columns.empty()) out.push_back(std::move(set));
  }
  return out;
}

namespace {

ForestConfig forest_config(std::uint64_t seed) {
  ForestConfig fc;
  fc.seed = seed;
  return fc;
}

double cv_rmse(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const std::vector<int>& fold_of,
               const StepwiseConfig& config) {
  double sse = 0.0;
  for (int fold = 0; fold < config.cv_folds; ++fold) {
    std::vector<Eigen::Index> train, test;
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      (fold_of[static_cast<std::size_t>(r)] == fold ? test : train).push_back(r);
    }
    if (test.empty() || train.empty()) continue;
    const Eigen::MatrixXd xt = x(train, Eigen::all);
    const Eigen::VectorXd yt = y(train);
    const auto model = grow_forest(xt, yt, config.n_trees, config.max_depth,
                                   forest_config(derive_seed(config.seed, static_cast<std::uint64_t>(fold))));
    const Eigen::VectorXd pred = predict_raw(model, x(test, Eigen::all));
    sse += (pred - y(test)).squaredNorm();
  }
  return std::sqrt(sse / static_cast<double>(x.rows()));
}

}  // namespace

std::vector<StepwiseStep> stepwise_feature_selection(std::span<const NamedFeatureSet> sets,
                                                     const Eigen::MatrixXd& x_train,
                                                     const Eigen::VectorXd& y_train,
                                                     const Eigen::MatrixXd& x_test,
                                                     const Eigen::VectorXd& y_test,
                                                     const StepwiseConfig& config) {
  if (x_train.rows() != y_train.size() || x_test.rows() != y_test.size()) {
    throw Error(Errc::LengthMismatch, "feature and target row counts differ");
  }
  if (config.cv_folds < 2) throw Error(Errc::InvalidSpec, "cv_folds must be at least 2");
  std::vector<int> fold_of(static_cast<std::size_t>(x_train.rows()));
  {
    std::vector<std::size_t> perm(fold_of.size());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::mt19937_64 rng(splitmix64(config.seed ^ 0x57E9ULL));
    std::shuffle(perm.begin(), perm.end(), rng);
    for (std::size_t i = 0; i < perm.size(); ++i) fold_of[perm[i]] = static_cast<int>(i % static_cast<std::size_t>(config.cv_folds));
  }

  std::vector<StepwiseStep> steps;
  std::vector<bool> used(sets.size(), false);
  std::vector<Eigen::Index> selected;
  for (std::size_t step = 0; step < sets.size(); ++step) {
    std::size_t best = sets.size();
    double best_rmse = std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < sets.size(); ++s) {
      if (used[s]) continue;
      auto cols = selected;
      cols.insert(cols.end(), sets[s].columns.begin(), sets[s].columns.end());
      const double rmse = cv_rmse(x_train(Eigen::all, cols), y_train, fold_of, config);
      if (rmse < best_rmse) {
        best_rmse = rmse;
        best = s;
      }
    }
    used[best] = true;
    selected.insert(selected.end(), sets[best].columns.begin(), sets[best].columns.end());
    const auto model = grow_forest(x_train(Eigen::all, selected), y_train, config.n_trees,
                                   config.max_depth, forest_config(config.seed));
    const Eigen::VectorXd pred = predict_raw(model, x_test(Eigen::all, selected));
    steps.push_back({sets[best].name, best_rmse, rmse_spearman(pred, y_test)});
  }
  return steps;
}

ArticleTopics::ArticleTopics(std::vector<std::string> titles, Eigen::MatrixXd vectors)
    : titles_(std::move(titles)), vectors_(std::move(vectors)) {
  if (static_cast<Eigen::Index>(titles_.size()) != vectors_.rows()) {
    throw Error(Errc::LengthMismatch, "one topic vector per title expected");
  }
  rows_.reserve(titles_.size());
  for (Eigen::Index r = 0; r < vectors_.rows(); ++r) {
    rows_.emplace_back(vectors_.row(r).transpose());
    if (!index_.emplace(titles_[static_cast<std::size_t>(r)], r).second) {
      throw Error(Errc::DuplicateKey, "title " + titles_[static_cast<std::size_t>(r)] + " repeated");
    }
  }
}

std::optional<Eigen::Index> ArticleTopics::row_of(const std::string& title) const {
  auto it = index_.find(title);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

const TopicVector* ArticleTopics::find(const std::string& title) const {
  auto it = index_.find(title);
  return it == index_.end() ? nullptr : &rows_[static_cast<std::size_t>(it->second)];
}

std::size_t holdout_rank(const TopicVector& interest, const ArticleTopics& topics, Eigen::Index target) {
  const Eigen::VectorXd dist = (topics.vectors().rowwise() - interest.transpose()).rowwise().norm();
  const double d = dist(target);
  const auto& title = topics.titles()[static_cast<std::size_t>(target)];
  std::size_t rank = 1;
  for (Eigen::Index r = 0; r < dist.size(); ++r) {
    if (dist(r) < d || (dist(r) == d && topics.titles()[static_cast<std::size_t>(r)] < title)) ++rank;
  }
  return rank;
}

std::pair<double, double> bootstrap_mean_ci(std::span<const double> values, const BootstrapConfig& config) {
  if (values.empty()) throw Error(Errc::DegenerateInput, "bootstrap of an empty sample");
  if (config.resamples < 1) throw Error(Errc::InvalidSpec, "resamples must be positive");
  std::vector<double> means(static_cast<std::size_t>(config.resamples));
  for (int r = 0; r < config.resamples; ++r) {
    std::mt19937_64 rng(derive_seed(config.seed, static_cast<std::uint64_t>(r)));
    std::uniform_int_distribution<std::size_t> pick(0, values.size() - 1);
    double sum = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) sum += values[pick(rng)];
    means[static_cast<std::size_t>(r)] = sum / static_cast<double>(values.size());
  }
  std::sort(means.begin(), means.end());
  const double tail = (1.0 - config.level) / 2.0;
  auto at = [&](double q) {
    const double pos = q * static_cast<double>(means.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, means.size() - 1);
    return means[lo] + (pos - static_cast<double>(lo)) * (means[hi] - means[lo]);
  };
  return {at(tail), at(1.0 - tail)};
}

MRRReport mrr_holdout(std::span<const EditHistory> editors, const ArticleTopics& topics,
                      InterestMethod method, int w, const BootstrapConfig& bootstrap) {
  MRRReport report;
  report.method = method;
  report.w = w;
  report.resamples = bootstrap.resamples;
  report.bootstrap_seed = bootstrap.seed;
  const TopicLookup lookup = [&](const std::string& title) { return topics.find(title); };
  for (const auto& editor : editors) {
    auto first = std::find_if(editor.entries.begin(), editor.entries.end(),
                              [&](const HistoryEntry& e) { return topics.find(e.source_title) != nullptr; });
    if (first == editor.entries.end()) continue;
    EditHistory rest{editor.editor_id, std::vector<HistoryEntry>(first + 1, editor.entries.end())};
    if (std::none_of(rest.entries.begin(), rest.entries.end(),
                     [&](const HistoryEntry& e) { return topics.find(e.source_title) != nullptr; })) {
      continue;
    }
    const auto iv = interest_vector(rest, lookup, method, w);
    const auto rank = holdout_rank(iv.values, topics, *topics.row_of(first->source_title));
    report.reciprocal_ranks.push_back(1.0 / static_cast<double>(rank));
  }
  if (report.reciprocal_ranks.empty()) {
    throw Error(Errc::NoEligibleEditors, "no editor has two articles with topic vectors");
  }
  report.n_editors = report.reciprocal_ranks.size();
  report.mrr = std::accumulate(report.reciprocal_ranks.begin(), report.reciprocal_ranks.end(), 0.0) /
               static_cast<double>(report.n_editors);
  std::tie(report.ci_low, report.ci_high) = bootstrap_mean_ci(report.reciprocal_ranks, bootstrap);
  return report;
}

std::vector<PrecisionStratum> precision_sample(std::span<const PoolItem> pool) {
  if (pool.size() < kPrecisionWindowSize) {
    throw Error(Errc::EmptyPool, "precision sample needs at least 20 candidates, got " +
                                     std::to_string(pool.size()));
  }
  std::vector<PrecisionStratum> out;
  for (std::size_t start : kPrecisionWindowStarts) {
    if (start > pool.size()) break;
    PrecisionStratum s;
    s.start_rank = start;
    const std::size_t end = std::min(pool.size(), start - 1 + kPrecisionWindowSize);
    s.entries.assign(pool.begin() + static_cast<std::ptrdiff_t>(start - 1),
                     pool.begin() + static_cast<std::ptrdiff_t>(end));
    out.push_back(std::move(s));
  }
  return out;
}

namespace {
constexpr std::array kPrecisionCols{"stratum"sv, "rank"sv,   "concept_id"sv, "source_title"sv,
                                    "y_pred"sv,  "strict"sv, "lenient"sv};
}

void write_precision_sample(std::span<const PrecisionStratum> strata, const std::filesystem::path& file) {
  tsv::Writer w(file, kPrecisionCols);
  for (const auto& s : strata) {
    for (std::size_t i = 0; i < s.entries.size(); ++i) {
      const auto& e = s.entries[i];
      w.row(s.start_rank, s.start_rank + i, e.concept_id, e.source_title, tsv::format_fixed(e.y_pred, 6),
            ""sv, ""sv);
    }
  }
}

std::pair<double, double> jeffreys_interval(std::size_t successes, std::size_t n, double level) {
  if (successes > n) throw Error(Errc::InvalidSpec, "more successes than trials");
  if (n == 0) return {0.0, 1.0};
  const double tail = (1.0 - level) / 2.0;
  boost::math::beta_distribution<double> prior(static_cast<double>(successes) + 0.5,
                                               static_cast<double>(n - successes) + 0.5);
  const double lo = successes == 0 ? 0.0 : boost::math::quantile(prior, tail);
  const double hi = successes == n ? 1.0 : boost::math::quantile(prior, 1.0 - tail);
  return {lo, hi};
}

PrecisionTally tally_precision(const std::filesystem::path& file) {
  PrecisionTally t;
  tsv::read(file, kPrecisionCols, {}, [&](std::size_t line, auto f) {
    if (!f[5].empty()) {
      ++t.strict_n;
      t.strict_correct += tsv::parse_bool(f[5], file, line, "strict") ? 1 : 0;
    }
    if (!f[6].empty()) {
      ++t.lenient_n;
      t.lenient_correct += tsv::parse_bool(f[6], file, line, "lenient") ? 1 : 0;
    }
  });
  t.strict_interval = jeffreys_interval(t.strict_correct, t.strict_n);
  t.lenient_interval = jeffreys_interval(t.lenient_correct, t.lenient_n);
  return t;
}

void write_mrr_sweep(std::span<const MrrSweepRow> rows, const std::filesystem::path& file) {
  static constexpr std::array header{"method"sv, "w"sv, "mrr"sv, "ci_low"sv, "ci_high"sv, "n_editors"sv};
  tsv::Writer out(file, header);
  for (const auto& r : rows) {
    out.row(to_string(r.method), r.w, tsv::format_fixed(r.report.mrr, 6), tsv::format_fixed(r.report.ci_low, 6),
            tsv::format_fixed(r.report.ci_high, 6), r.report.n_editors);
  }
}

}  // namespace gapfinder
