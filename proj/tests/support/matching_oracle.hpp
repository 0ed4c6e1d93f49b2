#pragma once

#include <cmath>
#include <map>
#include <random>
#include <set>
#include <string>

#include "gapfinder/matching.hpp"

namespace gapfinder::testing {

// Best total score by trying every article -> (editor or nobody) choice.
inline double exhaustive_optimum(const Eigen::MatrixXd& scores, int k) {
  const auto e = scores.rows();
  const auto a = scores.cols();
  std::vector<int> load(static_cast<std::size_t>(e), 0);
  double best = 0.0;
  auto rec = [&](auto&& self, Eigen::Index col, double total) -> void {
    if (col == a) {
      best = std::max(best, total);
      return;
    }
    self(self, col + 1, total);
    for (Eigen::Index r = 0; r < e; ++r) {
      auto& l = load[static_cast<std::size_t>(r)];
      if (l == k) continue;
      ++l;
      self(self, col + 1, total + scores(r, col));
      --l;
    }
  };
  rec(rec, 0, 0.0);
  return best;
}

// Empty string when the plan is feasible for the instance, otherwise the reason.
inline std::string plan_violation(const MatchPlan& plan, const MatchInstance& inst, int k) {
  std::map<std::string, Eigen::Index> row, col;
  for (std::size_t i = 0; i < inst.editor_ids.size(); ++i) row[inst.editor_ids[i]] = static_cast<Eigen::Index>(i);
  for (std::size_t j = 0; j < inst.concept_ids.size(); ++j) col[inst.concept_ids[j]] = static_cast<Eigen::Index>(j);
  std::map<std::string, int> load;
  std::set<std::string> taken;
  double total = 0.0;
  for (const auto& a : plan.assignments) {
    if (!row.contains(a.editor_id)) return "unknown editor " + a.editor_id;
    if (!col.contains(a.concept_id)) return "unknown article " + a.concept_id;
    if (++load[a.editor_id] > k) return "editor over capacity " + a.editor_id;
    if (!taken.insert(a.concept_id).second) return "article assigned twice " + a.concept_id;
    if (a.interest_score != inst.scores(row[a.editor_id], col[a.concept_id])) return "score mismatch";
    total += a.interest_score;
  }
  if (std::abs(total - plan.objective) > 1e-9) return "objective mismatch";
  return {};
}

// Scores that are multiples of 1/1024, so sums are exact in double.
inline Eigen::MatrixXd dyadic_scores(std::mt19937_64& rng, Eigen::Index e, Eigen::Index a) {
  Eigen::MatrixXd s(e, a);
  for (Eigen::Index r = 0; r < e; ++r) {
    for (Eigen::Index c = 0; c < a; ++c) s(r, c) = static_cast<double>(rng() % 1025) / 1024.0;
  }
  return s;
}

inline MatchInstance instance_from(const Eigen::MatrixXd& scores) {
  MatchInstance inst;
  for (Eigen::Index r = 0; r < scores.rows(); ++r) inst.editor_ids.push_back("E" + std::to_string(r));
  for (Eigen::Index c = 0; c < scores.cols(); ++c) inst.concept_ids.push_back("Q" + std::to_string(100 + c));
  inst.scores = scores;
  return inst;
}

}  // namespace gapfinder::testing
