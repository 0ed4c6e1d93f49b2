#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "gapfinder/interest.hpp"
#include "gapfinder/matching.hpp"
#include "gapfinder/ranking.hpp"

namespace gapfinder {

struct MetricReport {
  double rmse = 0.0;
  std::optional<double> spearman;  // absent when either series is constant
  std::size_t n = 0;
};

// Average ranks (1-based) with ties sharing the mean of their positions.
Eigen::VectorXd average_ranks(const Eigen::VectorXd& values);

// Throws LengthMismatch for unequal lengths and DegenerateInput below 2 points.
MetricReport rmse_spearman(const Eigen::VectorXd& pred, const Eigen::VectorXd& truth);

struct NamedFeatureSet {
  std::string name;
  std::vector<Eigen::Index> columns;
};

struct StepwiseConfig {
  int n_trees = 50;
  int max_depth = 0;
  int cv_folds = 5;
  std::uint64_t seed = 1;
};

struct StepwiseStep {
  std::string added;
  double cv_rmse = 0.0;
  MetricReport test;
};

// Feature sets from a matrix's schema, one per family present.
std::vector<NamedFeatureSet> family_feature_sets(const FeatureSchema& schema);

// Greedy forward selection over whole sets. Each step adds the set with the
// lowest k-fold CV RMSE on the training rows and reports held-out metrics of
// a forest fit on all training rows.
std::vector<StepwiseStep> stepwise_feature_selection(std::span<const NamedFeatureSet> sets,
                                                     const Eigen::MatrixXd& x_train,
                                                     const Eigen::VectorXd& y_train,
                                                     const Eigen::MatrixXd& x_test,
                                                     const Eigen::VectorXd& y_test,
                                                     const StepwiseConfig& config);

// Topic vectors of all source-language articles, one row per title.
class ArticleTopics {
 public:
  ArticleTopics() = default;
  ArticleTopics(std::vector<std::string> titles, Eigen::MatrixXd vectors);

  const std::vector<std::string>& titles() const { return titles_; }
  const Eigen::MatrixXd& vectors() const { return vectors_; }
  Eigen::Index size() const { return vectors_.rows(); }
  std::optional<Eigen::Index> row_of(const std::string& title) const;
  const TopicVector* find(const std::string& title) const;

 private:
  std::vector<std::string> titles_;
  Eigen::MatrixXd vectors_;
  std::vector<TopicVector> rows_;
  std::unordered_map<std::string, Eigen::Index> index_;
};

struct BootstrapConfig {
  int resamples = 1000;
  double level = 0.95;
  std::uint64_t seed = 1;
};

struct MRRReport {
  InterestMethod method = InterestMethod::WeightedAverage;
  int w = 16;
  double mrr = 0.0;
  std::size_t n_editors = 0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  int resamples = 0;
  std::uint64_t bootstrap_seed = 0;
  std::vector<double> reciprocal_ranks;  // per evaluated editor, in input order

  double ci_width() const { return ci_high - ci_low; }
};

// 1-based rank of `target` among all rows of `topics` by distance to
// `interest`, ties broken by title.
std::size_t holdout_rank(const TopicVector& interest, const ArticleTopics& topics,
                         Eigen::Index target);

// Percentile bootstrap of the mean; resample r draws from derive_seed(seed, r).
std::pair<double, double> bootstrap_mean_ci(std::span<const double> values,
                                            const BootstrapConfig& config);

// Holds out each editor's most recent article, builds the interest vector from
// the next w, and ranks every source article. Editors with fewer than two
// usable entries are skipped. Throws NoEligibleEditors.
MRRReport mrr_holdout(std::span<const EditHistory> editors, const ArticleTopics& topics,
                      InterestMethod method, int w, const BootstrapConfig& bootstrap = {});

// Rank windows of the precision sample, 1-based and inclusive.
inline constexpr std::size_t kPrecisionWindowStarts[] = {1, 101, 1001, 10001, 100001};
inline constexpr std::size_t kPrecisionWindowSize = 20;

struct PrecisionStratum {
  std::size_t start_rank = 0;
  std::vector<PoolItem> entries;
};

// `pool` must already be sorted by descending y_pred. Throws EmptyPool below
// 20 items.
std::vector<PrecisionStratum> precision_sample(std::span<const PoolItem> pool);
void write_precision_sample(std::span<const PrecisionStratum> strata,
                            const std::filesystem::path& file);

struct PrecisionTally {
  std::size_t strict_n = 0;
  std::size_t strict_correct = 0;
  std::size_t lenient_n = 0;
  std::size_t lenient_correct = 0;
  std::pair<double, double> strict_interval;
  std::pair<double, double> lenient_interval;
};

// Equal-tailed Jeffreys interval for a binomial proportion.
std::pair<double, double> jeffreys_interval(std::size_t successes, std::size_t n,
                                            double level = 0.95);

// Reads a labelled precision sample; rows with blank labels are ignored.
PrecisionTally tally_precision(const std::filesystem::path& file);

struct MrrSweepRow {
  InterestMethod method;
  int w;
  MRRReport report;
};
void write_mrr_sweep(std::span<const MrrSweepRow> rows, const std::filesystem::path& file);

}  // namespace gapfinder
