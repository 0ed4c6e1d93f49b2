#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "gapfinder/corpus.hpp"
#include "gapfinder/topics.hpp"

namespace gapfinder {

enum class InterestMethod { Average, WeightedAverage, WeightedMedoid };

std::string_view to_string(InterestMethod m);
std::optional<InterestMethod> parse_interest_method(std::string_view text);

struct HistoryEntry {
  ConceptId concept_id;      // empty when the source article has no sitelink
  std::string source_title;  // article whose topic vector represents the entry
  std::int64_t total_bytes = 0;
  std::int64_t last_timestamp = 0;

  bool operator==(const HistoryEntry&) const = default;
};

// One entry per source article, most recent first.
struct EditHistory {
  std::string editor_id;
  std::vector<HistoryEntry> entries;
};

// Maps any (lang, title) to the source-language article of the same concept.
class SourceArticleIndex {
 public:
  SourceArticleIndex(const Corpus& corpus, LanguageCode source);

  const LanguageCode& source() const { return source_; }
  // Source title and concept for an article in any language.
  std::optional<std::pair<std::string, ConceptId>> resolve(const LanguageCode& lang,
                                                           const std::string& title) const;

 private:
  LanguageCode source_;
  std::unordered_map<std::string, ConceptId> concept_of_;        // lang \t title -> concept
  std::unordered_map<ConceptId, std::string> source_title_;      // concept -> S title
  std::unordered_map<std::string, std::string> source_redirect_; // S redirect -> S target
  std::unordered_map<std::string, bool> source_article_;         // S title -> exists
};

// Positive byte deltas summed per source article; negative revisions are
// ignored and articles with no positive delta are dropped. `events` must
// belong to one editor in timestamp order.
EditHistory build_history(std::string editor_id, std::span<const EditEventRecord> events,
                          const SourceArticleIndex& index);

// Histories for every editor in the corpus, ordered by editor id.
std::vector<EditHistory> build_histories(const Corpus& corpus, const SourceArticleIndex& index);

struct InterestVector {
  std::string editor_id;
  TopicVector values;
  InterestMethod method = InterestMethod::WeightedAverage;
  int history_size_w = 16;
};

// Weight log(1 + bytes).
double byte_weight(std::int64_t bytes);

// Rows of `members` are unit topic vectors. Average and WeightedAverage return
// the normalized (weighted) mean; WeightedMedoid returns the member row that
// minimizes the weighted sum of Euclidean distances to all members, earliest
// row on ties.
template <typename Derived>
TopicVector aggregate_interest(const Eigen::MatrixBase<Derived>& members,
                               const Eigen::VectorXd& weights, InterestMethod method) {
  if (members.rows() == 0) throw Error(Errc::EmptyHistory, "no history members");
  if (method == InterestMethod::WeightedMedoid) {
    Eigen::Index best = 0;
    double best_cost = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < members.rows(); ++i) {
      double cost = 0.0;
      for (Eigen::Index j = 0; j < members.rows(); ++j) {
        cost += weights(j) * (members.row(i) - members.row(j)).norm();
      }
      if (cost < best_cost) {
        best_cost = cost;
        best = i;
      }
    }
    return members.row(best).transpose();
  }
  TopicVector sum = method == InterestMethod::Average
                        ? TopicVector(members.colwise().sum().transpose())
                        : TopicVector((weights.asDiagonal() * members).colwise().sum().transpose());
  const double norm = sum.norm();
  if (norm == 0.0) throw Error(Errc::ZeroVector, "interest vector has zero length");
  return sum / norm;
}

using TopicLookup = std::function<const TopicVector*(const std::string& source_title)>;

// Uses the w most recent entries that have a non-zero topic vector.
// Throws EmptyHistory when none remain.
InterestVector interest_vector(const EditHistory& history, const TopicLookup& topics,
                               InterestMethod method, int w);

struct Candidate {
  ConceptId concept_id;
  TopicVector vector;
};

struct ScoredConcept {
  ConceptId concept_id;
  double distance = 0.0;
};

// Ascending Euclidean distance, ties by concept id. Throws ZeroVector.
std::vector<ScoredConcept> score_concepts(const TopicVector& interest,
                                          std::span<const Candidate> candidates);

void write_interests(std::span<const InterestVector> interests, const std::filesystem::path& file);
std::vector<InterestVector> read_interests(const std::filesystem::path& file);

}  // namespace gapfinder
