#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "gapfinder/corpus.hpp"
#include "gapfinder/evaluation.hpp"
#include "gapfinder/interest.hpp"

namespace gapfinder {

struct RunConfig {
  std::string corpus_root = "corpus";
  LanguageCode source = "en";
  LanguageCode target = "fr";

  std::size_t synth_concepts = 2000;
  std::vector<LanguageCode> synth_languages{"en", "fr"};
  std::size_t synth_editors = 50;
  std::size_t synth_editor_neighborhood = 0;  // 0: whole focus topic
  std::size_t synth_topics = 10;
  std::uint64_t synth_seed = 1;

  int n_topics = 400;
  int lda_iterations = 200;
  double lda_alpha = 0.0;  // <= 0 means 50 / n_topics
  double lda_beta = 0.01;
  int lda_inference_sweeps = 20;
  std::uint64_t lda_seed = 1;

  std::int64_t min_bytes = 1500;
  std::int64_t min_views = 1000;

  std::vector<int> forest_trees{50, 100, 200};
  std::vector<int> forest_depths{8, 12, 16, 0};
  int forest_cv_folds = 5;
  double forest_feature_fraction = 1.0 / 3.0;
  int forest_min_samples_leaf = 1;
  std::uint64_t forest_seed = 1;
  double test_fraction = 0.2;
  std::uint64_t split_seed = 1;

  int w = 16;
  InterestMethod method = InterestMethod::WeightedAverage;
  std::size_t top_K = 100000;
  int k_per_editor = 5;
  std::string matcher = "optimal";
  std::size_t max_pairs = 20'000'000;

  int bootstrap_resamples = 1000;
  std::uint64_t bootstrap_seed = 1;
  std::vector<InterestMethod> mrr_methods{InterestMethod::Average, InterestMethod::WeightedAverage,
                                          InterestMethod::WeightedMedoid};
  std::vector<int> mrr_ws{1, 2, 4, 8, 16, 32, 64};
  bool stepwise = false;
  int stepwise_trees = 50;
};

// Keys accepted in config files and as --key overrides, in file order.
const std::vector<std::string>& config_keys();
std::string config_help(const std::string& key);
// Throws ConfigError for unknown keys and unparsable values.
void set_config_value(RunConfig& config, const std::string& key, const std::string& value);
std::string get_config_value(const RunConfig& config, const std::string& key);
// Flat `key = value` lines; `#` starts a comment.
RunConfig read_config(const std::filesystem::path& file);
void write_config(const RunConfig& config, const std::filesystem::path& file);
nlohmann::json config_json(const RunConfig& config);

// Artifact names inside a work directory.
namespace artifact {
inline constexpr const char* kGroundTruth = "ground_truth.json";
inline constexpr const char* kComponents = "components.tsv";
inline constexpr const char* kMissing = "missing.tsv";
inline constexpr const char* kTopicModel = "topics.model";
inline constexpr const char* kArticleTopics = "article_topics.tsv";
inline constexpr const char* kFeaturesTrain = "features_train.tsv";
inline constexpr const char* kTargets = "targets.tsv";
inline constexpr const char* kFeaturesMissing = "features_missing.tsv";
inline constexpr const char* kRanker = "ranker.model";
inline constexpr const char* kSplit = "split.tsv";
inline constexpr const char* kTestPredictions = "test_predictions.tsv";
inline constexpr const char* kPredictions = "predictions.tsv";
inline constexpr const char* kInterests = "interests.tsv";
inline constexpr const char* kPlan = "plan.tsv";
inline constexpr const char* kReport = "report.json";
inline constexpr const char* kMrrSweep = "mrr_sweep.tsv";
inline constexpr const char* kPrecisionSample = "precision_sample.tsv";
inline constexpr const char* kPrecisionTally = "precision_tally.json";
inline constexpr const char* kStampDir = "stamps";
}  // namespace artifact

// Hex FNV-1a digest of a file's bytes.
std::string file_digest(const std::filesystem::path& file);

// Provenance of one stage run. Everything except `timing` is a pure function
// of inputs and config.
struct Stamp {
  std::string stage;
  std::map<std::string, std::string> inputs;   // workdir-relative path -> digest
  std::map<std::string, std::string> outputs;
  nlohmann::json config;
  nlohmann::json scope = nlohmann::json::object();  // language keys the outputs depend on
  nlohmann::json seed;
  nlohmann::json summary = nlohmann::json::object();
  nlohmann::json timing = nlohmann::json::object();

  nlohmann::json to_json() const;
  static Stamp from_json(const nlohmann::json& j);
};

std::filesystem::path stamp_path(const std::filesystem::path& workdir, const std::string& stage);
std::vector<Stamp> read_stamps(const std::filesystem::path& workdir);

// Title and unit topic vector of every source article with tokens.
void write_article_topics(const ArticleTopics& topics, const std::filesystem::path& file);
ArticleTopics read_article_topics(const std::filesystem::path& file);

std::vector<ComponentSummary> read_components(const std::filesystem::path& file);

// One function per subcommand. Each reads its inputs from `workdir`, refuses
// inputs whose producing stamp no longer matches the files on disk, writes its
// outputs and a stamp under workdir/stamps.
Stamp stage_gen_synth(const RunConfig& config, const std::filesystem::path& workdir);
Stamp stage_build_graph(const RunConfig& config, const std::filesystem::path& workdir);
Stamp stage_find_missing(const RunConfig& config, const std::filesystem::path& workdir);
Stamp stage_train_lda(const RunConfig& config, const std::filesystem::path& workdir);
Stamp stage_extract_features(const RunConfig& config, const std::filesystem::path& workdir);
Stamp stage_train_ranker(const RunConfig& config, const std::filesystem::path& workdir);
Stamp stage_rank(const RunConfig& config, const std::filesystem::path& workdir);
Stamp stage_build_interests(const RunConfig& config, const std::filesystem::path& workdir);
Stamp stage_match(const RunConfig& config, const std::filesystem::path& workdir);
Stamp stage_evaluate(const RunConfig& config, const std::filesystem::path& workdir);
Stamp stage_sample_precision(const RunConfig& config, const std::filesystem::path& workdir);
Stamp stage_tally_precision(const RunConfig& config, const std::filesystem::path& workdir,
                            const std::filesystem::path& labelled);

// Every stage after gen-synth, in dependency order.
std::vector<Stamp> run_pipeline(const RunConfig& config, const std::filesystem::path& workdir);

}  // namespace gapfinder
