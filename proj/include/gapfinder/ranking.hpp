#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "gapfinder/concept_graph.hpp"
#include "gapfinder/corpus.hpp"
#include "gapfinder/topics.hpp"

namespace gapfinder {

// ---------------------------------------------------------------------------
// Normalized page-view rank: articles sorted by increasing views, rank
// divided by the number of non-redirect articles in the language.

struct RankTarget {
  ConceptId concept_id;  // empty when the article has no sitelink
  std::string title;
  double rank = 0.0;     // average rank for ties
  std::size_t size = 0;  // |T|
  double y = 0.0;        // rank / size
};

struct LanguageRanks {
  LanguageCode lang;
  std::size_t size = 0;
  std::unordered_map<std::string, RankTarget> by_title;
  std::map<ConceptId, RankTarget> by_concept;

  // 0 when the title is absent.
  double y_of(const std::string& title) const;
};

// Throws EmptyLanguage when the language has no non-redirect article.
LanguageRanks compute_rank_targets(const Corpus& corpus, const LanguageCode& lang);

// ---------------------------------------------------------------------------
// Features

enum class FeatureFamily {
  PageViews,
  GeoViews,
  SourceLength,
  QualityImportance,
  EditActivity,
  Links,
  Topics,
};

inline constexpr std::size_t kFeatureFamilyCount = 7;
std::string_view family_name(FeatureFamily f);
std::optional<FeatureFamily> parse_family(std::string_view name);
std::vector<FeatureFamily> all_families();

struct FeatureSchema {
  LanguageCode source;
  LanguageCode target;
  std::vector<LanguageCode> view_languages;  // top by article count, target excluded
  std::vector<std::string> countries;        // top by source views; "other" pools the rest
  int n_topics = 0;
  std::vector<std::string> columns;
  std::vector<FeatureFamily> column_family;
  std::string hash;

  static constexpr std::size_t kMaxViewLanguages = 50;
  static constexpr std::size_t kMaxCountries = 30;

  // Fills columns, families and hash from the lists above.
  void finalize();
  // Rebuilds the schema from a features.tsv column header.
  static FeatureSchema from_columns(LanguageCode source, LanguageCode target,
                                    const std::vector<std::string>& columns);
};

struct FeatureRow {
  ConceptId concept_id;
  std::int64_t wikidata_count = 0;
  std::vector<double> views;     // aligned with schema.view_languages
  std::vector<double> log_views;
  std::vector<double> normrank;
  std::vector<double> geo_views;  // schema.countries then "other"
  std::int64_t source_length = 0;
  std::array<bool, 3> quality{};     // stub, good, featured
  std::array<bool, 4> importance{};  // low, mid, high, top
  std::int64_t editor_count = 0;
  std::int64_t months_since_first_edit = 0;
  std::int64_t months_since_last_edit = 0;
  std::int64_t inlinks_from_T_covered = 0;
  std::int64_t outlinks_to_T_covered = 0;
  std::int64_t total_indegree = 0;
  std::int64_t total_outdegree = 0;
  TopicVector topic_vector;

  // Flattened in schema column order.
  Eigen::VectorXd dense() const;
};

struct FeatureMatrix {
  FeatureSchema schema;
  std::vector<ConceptId> concept_ids;
  Eigen::MatrixXd values;  // rows x columns

  Eigen::Index rows() const { return values.rows(); }
  // Columns belonging to the given families, in schema order.
  std::vector<Eigen::Index> columns_of(std::span<const FeatureFamily> families) const;
  // Column index of normrank for the source language.
  Eigen::Index source_normrank_column() const;
};

FeatureMatrix to_matrix(const FeatureSchema& schema, std::span<const FeatureRow> rows);

void write_features(const FeatureMatrix& m, const std::filesystem::path& file);
// Throws StaleArtifact when the recorded hash disagrees with the header.
FeatureMatrix read_features(const std::filesystem::path& file);

// Precomputes the lookups needed to featurize concepts for one (S, T) pair.
// The graph must have components assigned. No feature reads target-language
// data about the concept itself.
class FeatureExtractor {
 public:
  FeatureExtractor(const Corpus& corpus, const CoverageGraph& graph, const TopicModel& topics);
  FeatureExtractor(const Corpus&, const CoverageGraph&, TopicModel&&) = delete;

  const FeatureSchema& schema() const { return schema_; }

  // Throws UnknownConcept when the concept has no source article in the graph.
  FeatureRow extract(const ConceptId& concept_id) const;
  std::vector<FeatureRow> extract(std::span<const ConceptId> concepts) const;

  // Topic vector of a source article, cached; zero when no tokens are known.
  const TopicVector& source_topic_vector(const std::string& title) const;

 private:
  struct Impl;
  std::shared_ptr<const Impl> impl_;
  FeatureSchema schema_;
};

std::vector<FeatureRow> extract_features(const Corpus& corpus, const CoverageGraph& graph,
                                         const TopicModel& topics,
                                         std::span<const ConceptId> concepts);

// Concepts covered in both languages with their target-language rank.
struct TrainingPair {
  ConceptId concept_id;
  std::string source_title;
  std::string target_title;
  double y = 0.0;
};
std::vector<TrainingPair> training_pairs(const CoverageGraph& graph, const LanguageRanks& target);

// ---------------------------------------------------------------------------
// Random forest regression

struct TreeNode {
  std::int32_t feature = -1;  // -1 for leaves
  double threshold = 0.0;     // go left when x <= threshold
  std::int32_t left = -1;
  std::int32_t right = -1;
  double value = 0.0;  // mean target of the node's samples
  std::int32_t depth = 0;
};

struct RegressionTree {
  std::vector<TreeNode> nodes;

  // max_depth <= 0 means unlimited.
  template <typename Derived>
  double predict(const Eigen::MatrixBase<Derived>& x, int max_depth = 0) const {
    std::size_t i = 0;
    while (nodes[i].feature >= 0 && (max_depth <= 0 || nodes[i].depth < max_depth)) {
      i = static_cast<std::size_t>(x(nodes[i].feature) <= nodes[i].threshold ? nodes[i].left
                                                                           : nodes[i].right);
    }
    return nodes[i].value;
  }
};

struct ForestConfig {
  std::vector<int> n_trees_grid{50, 100, 200};
  std::vector<int> max_depth_grid{8, 12, 16, 0};  // 0 = unlimited
  int cv_folds = 5;
  double feature_fraction = 1.0 / 3.0;  // candidates per split = ceil(p * fraction)
  int min_samples_leaf = 1;
  std::uint64_t seed = 1;
};

struct CvResult {
  int n_trees = 0;
  int max_depth = 0;
  double rmse = 0.0;
};

struct ForestModel {
  static constexpr int kFormatVersion = 1;

  std::vector<RegressionTree> trees;
  int n_trees = 0;
  int max_depth = 0;
  std::uint64_t seed = 0;
  std::string schema_hash;
  std::vector<CvResult> cv;  // grid scores, empty when no search ran

  void save(const std::filesystem::path& file) const;
  static ForestModel load(const std::filesystem::path& file);
};

// Bootstrap CART ensemble with fixed hyperparameters. Tree i draws from a
// seed derived from (seed, i) only.
ForestModel grow_forest(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, int n_trees,
                        int max_depth, const ForestConfig& config, std::string schema_hash = {});

// Grid search by k-fold CV, then a final fit on all rows. Throws TooFewRows
// (< 20 rows), DegenerateTarget (constant y) or InvalidSpec (y outside (0,1]).
ForestModel train_forest(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                         const ForestConfig& config, std::string schema_hash = {});

// Mean over trees clipped to (0, 1]. Throws SchemaMismatch.
Eigen::VectorXd predict(const ForestModel& model, const FeatureMatrix& rows);
Eigen::VectorXd predict_raw(const ForestModel& model, const Eigen::MatrixXd& x);

// Constant prediction equal to the mean normalized rank of a language.
struct MeanBaseline {
  double value = 0.5;
  Eigen::VectorXd predict(Eigen::Index n) const { return Eigen::VectorXd::Constant(n, value); }
};
MeanBaseline mean_baseline();

// y_S(c) for every row.
Eigen::VectorXd source_language_baseline(const FeatureMatrix& rows);

// 80/20-style split stratified by target decile; returns (train, test) rows.
std::pair<std::vector<Eigen::Index>, std::vector<Eigen::Index>> stratified_split(
    const Eigen::VectorXd& y, double test_fraction, std::uint64_t seed);

void write_predictions(std::span<const ConceptId> ids, const Eigen::VectorXd& y_pred,
                       const std::filesystem::path& file);
std::map<ConceptId, double> read_predictions(const std::filesystem::path& file);

}  // namespace gapfinder
