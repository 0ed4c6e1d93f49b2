#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gapfinder/concept_graph.hpp"
#include "gapfinder/interest.hpp"

namespace gapfinder {

struct MatchConfig {
  std::size_t top_K = 100000;
  int k_per_editor = 5;
  // optimal_match refuses instances with more editor-article pairs than this.
  std::size_t max_pairs = 20'000'000;
};

struct PoolItem {
  ConceptId concept_id;
  std::string source_title;
  double y_pred = 0.0;
};

// Missing concepts by descending y_pred, ties by concept id, at most top_K.
// Concepts without a prediction are left out.
std::vector<PoolItem> candidate_pool(const MissingSet& missing,
                                     const std::map<ConceptId, double>& predictions,
                                     std::size_t top_K);

// Scores between editors (rows) and pool articles (columns).
struct MatchInstance {
  std::vector<std::string> editor_ids;
  std::vector<ConceptId> concept_ids;
  Eigen::MatrixXd scores;
};

// Cosine similarity of every editor interest vector with every article vector.
MatchInstance build_instance(std::span<const InterestVector> editors,
                             std::span<const Candidate> articles);

struct Assignment {
  std::string editor_id;
  ConceptId concept_id;
  double interest_score = 0.0;

  bool operator==(const Assignment&) const = default;
};

struct MatchPlan {
  std::vector<Assignment> assignments;  // sorted by editor, then score descending
  double objective = 0.0;               // total score

  double average() const {
    return assignments.empty() ? 0.0 : objective / static_cast<double>(assignments.size());
  }
};

// k rounds; in each round editors in ascending id order take their best
// unassigned article. Ties go to the earlier pool column.
MatchPlan greedy_match(const MatchInstance& instance, int k_per_editor);

// Maximum total score subject to editor capacity k and article capacity 1,
// solved as min-cost flow. Throws InstanceTooLarge above `max_pairs`.
MatchPlan optimal_match(const MatchInstance& instance, int k_per_editor,
                        std::size_t max_pairs = MatchConfig{}.max_pairs);

void write_plan(const MatchPlan& plan, std::span<const PoolItem> pool,
                const std::filesystem::path& file);

}  // namespace gapfinder
