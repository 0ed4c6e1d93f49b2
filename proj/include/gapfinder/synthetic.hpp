#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gapfinder/corpus.hpp"

namespace gapfinder {

// Parameters of the planted-structure corpus generator. The first entry of
// `languages` is the source language; every other language is a potential
// target and receives its own coverage draw and planted merge structure.
struct SyntheticSpec {
  std::size_t n_concepts = 2000;
  std::vector<LanguageCode> languages{"en", "fr"};
  // Probability that a concept has an article in the language. Languages not
  // listed use `default_coverage`; the source defaults to full coverage.
  std::map<LanguageCode, double> coverage;
  double default_coverage = 0.5;

  // Among concepts covered in both S and a target: fraction whose target
  // article hangs off a duplicate concept reached only through an
  // inter-language link, and fraction reached through a link to a redirect.
  double split_concept_rate = 0.05;
  double redirect_merge_rate = 0.05;
  double source_redirect_rate = 0.05;
  // Inter-language links between non-source languages; must never matter.
  double foreign_link_rate = 0.05;

  std::size_t n_topics = 10;
  std::size_t vocab_size = 400;
  std::size_t doc_length = 60;
  double doc_topic_concentration = 0.1;
  double topic_word_concentration = 0.05;

  // Page views: log v_L(c) = base + z_c + topic_effect_L * bias_L(c) + noise_L.
  double base_log_views = 7.0;
  double popularity_sd = 1.2;
  double source_noise_sd = 0.9;
  double other_noise_sd = 0.5;
  double target_noise_sd = 0.2;
  double topic_effect = 1.2;
  std::size_t n_countries = 8;

  std::size_t links_per_article = 4;

  std::size_t n_editors = 50;
  std::size_t edits_per_editor = 30;
  double editor_focus = 0.85;
  // When positive, focused edits stay among this many articles of the focus
  // topic nearest (in true topic mixture) to a per-editor anchor.
  std::size_t editor_neighborhood = 0;
  double negative_edit_rate = 0.1;
  double cross_language_edit_rate = 0.1;

  double coverage_of(const LanguageCode& lang) const;
};

struct GroundTruth {
  LanguageCode source;
  // Per target language: concept ids truly missing there (sorted).
  std::map<LanguageCode, std::vector<ConceptId>> missing;
  std::vector<ConceptId> concept_ids;  // row order of concept_topics
  Eigen::MatrixXd concept_topics;      // n_concepts x n_topics, rows sum to 1
  std::vector<int> dominant_topic;     // per concept
  Eigen::MatrixXd topic_word;          // n_topics x vocab, rows sum to 1
  std::vector<std::string> vocabulary;
  Eigen::VectorXd popularity;          // latent z_c per concept
  std::map<std::string, int> editor_focus;

  bool operator==(const GroundTruth& o) const;
};

struct SyntheticCorpus {
  Corpus corpus;
  GroundTruth truth;
};

// Deterministic for a fixed (spec, seed). Throws InvalidSpec.
SyntheticCorpus generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed);

void write_ground_truth(const GroundTruth& truth, const std::filesystem::path& file);
GroundTruth read_ground_truth(const std::filesystem::path& file);

// Title convention used by the generator.
std::string synthetic_title(std::size_t concept_index, const LanguageCode& lang);
std::string synthetic_concept_id(std::size_t concept_index);

}  // namespace gapfinder
