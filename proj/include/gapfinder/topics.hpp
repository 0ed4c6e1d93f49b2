#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "gapfinder/error.hpp"

namespace gapfinder {

// Unit-length topic proportions; the all-zero vector marks an empty document.
using TopicVector = Eigen::VectorXd;
using TokenBag = std::vector<std::string>;

struct LdaConfig {
  int n_topics = 400;
  int iterations = 200;
  double alpha = 0.0;  // <= 0 means 50 / n_topics
  double beta = 0.01;
  int inference_sweeps = 20;
  std::uint64_t seed = 1;

  double resolved_alpha() const { return alpha > 0.0 ? alpha : 50.0 / n_topics; }
};

class TopicModel {
 public:
  static constexpr int kFormatVersion = 1;

  TopicModel() = default;
  TopicModel(std::vector<std::string> vocabulary, Eigen::MatrixXd topic_word, double alpha,
             double beta, std::uint64_t seed, int inference_sweeps);

  int n_topics() const { return static_cast<int>(topic_word_.rows()); }
  std::size_t vocab_size() const { return vocabulary_.size(); }
  const std::vector<std::string>& vocabulary() const { return vocabulary_; }
  // -1 when unseen.
  int word_index(const std::string& token) const;
  // n_topics x vocab; each row is a probability distribution.
  const Eigen::MatrixXd& topic_word() const { return topic_word_; }
  double alpha() const { return alpha_; }
  double beta() const { return beta_; }
  std::uint64_t seed() const { return seed_; }
  int inference_sweeps() const { return inference_sweeps_; }

  std::vector<double> perplexity_trace;  // training perplexity per sweep

  void save(const std::filesystem::path& file) const;
  static TopicModel load(const std::filesystem::path& file);

 private:
  std::vector<std::string> vocabulary_;
  std::unordered_map<std::string, int> index_;
  Eigen::MatrixXd topic_word_;
  double alpha_ = 0.0;
  double beta_ = 0.0;
  std::uint64_t seed_ = 0;
  int inference_sweeps_ = 20;
};

// Collapsed Gibbs sampler state for symmetric-prior LDA.
class GibbsSampler {
 public:
  GibbsSampler(std::span<const TokenBag> docs, const LdaConfig& config);

  void sweep();
  // exp(-mean log p(w | d)) under the current count estimates.
  double perplexity() const;
  Eigen::MatrixXd topic_word() const;

  std::size_t token_count() const { return assignments_.size(); }
  int n_topics() const { return n_topics_; }
  // Totals of the three count tables; each equals token_count() when consistent.
  std::int64_t doc_topic_total() const;
  std::int64_t word_topic_total() const;
  std::int64_t topic_total() const;
  const std::vector<std::string>& vocabulary() const { return vocabulary_; }

 private:
  int n_topics_;
  double alpha_;
  double beta_;
  std::vector<std::string> vocabulary_;
  std::vector<std::int32_t> words_;        // token -> word id
  std::vector<std::int32_t> doc_of_;       // token -> doc id
  std::vector<std::int32_t> assignments_;  // token -> topic
  std::vector<std::int32_t> doc_topic_;    // docs x topics
  std::vector<std::int32_t> word_topic_;   // vocab x topics
  std::vector<std::int32_t> topic_;        // topics
  std::vector<std::int32_t> doc_length_;
  std::vector<double> weights_;
  std::mt19937_64 rng_;
};

using SweepObserver = std::function<void(const GibbsSampler&, int sweep)>;

// Throws EmptyCorpus when no document has tokens, InvalidSpec on bad config.
TopicModel train_lda(std::span<const TokenBag> docs, const LdaConfig& config,
                     const SweepObserver& observer = {});

// Frozen-topic Gibbs inference; the result is deterministic per document.
TopicVector infer_topic_vector(const TopicModel& model, const TokenBag& doc);

template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar topic_distance(const Eigen::MatrixBase<DerivedA>& a,
                                         const Eigen::MatrixBase<DerivedB>& b) {
  if (a.squaredNorm() == 0 || b.squaredNorm() == 0) {
    throw Error(Errc::ZeroVector, "topic distance of an empty-document vector");
  }
  if (a.size() != b.size()) {
    throw Error(Errc::LengthMismatch, "topic vectors differ in dimension");
  }
  return (a - b).norm();
}

// Cosine similarity of unit vectors.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar topic_similarity(const Eigen::MatrixBase<DerivedA>& a,
                                           const Eigen::MatrixBase<DerivedB>& b) {
  return a.dot(b);
}

}  // namespace gapfinder
