#include "gapfinder/matching.hpp"

#include <algorithm>
#include <array>
#include <limits>
#include <numeric>
#include <queue>

#include "gapfinder/tsv.hpp"

namespace gapfinder {

using namespace std::string_view_literals;

std::vector<PoolItem> candidate_pool(const MissingSet& missing,
                                     const std::map<ConceptId, double>& predictions,
                                     std::size_t top_K) {
  std::vector<PoolItem> pool;
  pool.reserve(missing.entries.size());
  for (const auto& m : missing.entries) {
    auto it = predictions.find(m.concept_id);
    if (it == predictions.end()) continue;
    pool.push_back({m.concept_id, m.source_title, it->second});
  }
  std::sort(pool.begin(), pool.end(), [](const PoolItem& a, const PoolItem& b) {
    if (a.y_pred != b.y_pred) return a.y_pred > b.y_pred;
    return a.concept_id < b.concept_id;
  });
  if (pool.size() > top_K) pool.resize(top_K);
  return pool;
}

MatchInstance build_instance(std::span<const InterestVector> editors,
                             std::span<const Candidate> articles) {
  MatchInstance inst;
  const auto n_e = static_cast<Eigen::Index>(editors.size());
  const auto n_a = static_cast<Eigen::Index>(articles.size());
  inst.scores.resize(n_e, n_a);
  if (n_e == 0 || n_a == 0) {
    for (const auto& e : editors) inst.editor_ids.push_back(e.editor_id);
    for (const auto& a : articles) inst.concept_ids.push_back(a.concept_id);
    return inst;
  }
  const auto dim = editors.front().values.size();
  Eigen::MatrixXd ev(n_e, dim);
  Eigen::MatrixXd av(n_a, dim);
  for (Eigen::Index i = 0; i < n_e; ++i) {
    const auto& v = editors[static_cast<std::size_t>(i)].values;
    if (v.size() != dim) throw Error(Errc::LengthMismatch, "interest vectors differ in length");
    const double n = v.norm();
    if (n == 0.0) throw Error(Errc::ZeroVector, "editor " + editors[static_cast<std::size_t>(i)].editor_id);
    ev.row(i) = v.transpose() / n;
    inst.editor_ids.push_back(editors[static_cast<std::size_t>(i)].editor_id);
  }
  for (Eigen::Index j = 0; j < n_a; ++j) {
    const auto& v = articles[static_cast<std::size_t>(j)].vector;
    if (v.size() != dim) throw Error(Errc::LengthMismatch, "topic vectors differ in length");
    const double n = v.norm();
    if (n == 0.0) throw Error(Errc::ZeroVector, "concept " + articles[static_cast<std::size_t>(j)].concept_id);
    av.row(j) = v.transpose() / n;
    inst.concept_ids.push_back(articles[static_cast<std::size_t>(j)].concept_id);
  }
  inst.scores.noalias() = ev * av.transpose();
  return inst;
}

namespace {

MatchPlan finish(const MatchInstance& inst, const std::vector<std::pair<Eigen::Index, Eigen::Index>>& pairs) {
  MatchPlan plan;
  for (auto [e, a] : pairs) {
    plan.assignments.push_back({inst.editor_ids[static_cast<std::size_t>(e)],
                                inst.concept_ids[static_cast<std::size_t>(a)], inst.scores(e, a)});
  }
  std::sort(plan.assignments.begin(), plan.assignments.end(), [](const Assignment& x, const Assignment& y) {
    if (x.editor_id != y.editor_id) return x.editor_id < y.editor_id;
    if (x.interest_score != y.interest_score) return x.interest_score > y.interest_score;
    return x.concept_id < y.concept_id;
  });
  for (const auto& a : plan.assignments) plan.objective += a.interest_score;
  return plan;
}

void check_instance(const MatchInstance& inst, int k) {
  if (k < 1) throw Error(Errc::InvalidSpec, "k_per_editor must be positive");
  if (inst.scores.rows() != static_cast<Eigen::Index>(inst.editor_ids.size()) ||
      inst.scores.cols() != static_cast<Eigen::Index>(inst.concept_ids.size())) {
    throw Error(Errc::LengthMismatch, "score matrix does not match editor and article lists");
  }
}

std::vector<Eigen::Index> editor_order(const MatchInstance& inst) {
  std::vector<Eigen::Index> order(inst.editor_ids.size());
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return inst.editor_ids[static_cast<std::size_t>(a)] < inst.editor_ids[static_cast<std::size_t>(b)];
  });
  return order;
}

// Residual graph for successive shortest paths with Johnson potentials.
class FlowGraph {
 public:
  explicit FlowGraph(std::size_t n) : head_(n, -1) {}

  void add(int from, int to, int cap, double cost) {
    push(from, to, cap, cost);
    push(to, from, 0, -cost);
  }

  std::size_t size() const { return head_.size(); }

  struct Arc {
    int to;
    int next;
    int cap;
    double cost;
  };
  std::vector<Arc> arcs;
  std::vector<int> head_;

 private:
  void push(int from, int to, int cap, double cost) {
    arcs.push_back({to, head_[static_cast<std::size_t>(from)], cap, cost});
    head_[static_cast<std::size_t>(from)] = static_cast<int>(arcs.size()) - 1;
  }
};

}  // namespace

MatchPlan greedy_match(const MatchInstance& instance, int k_per_editor) {
  check_instance(instance, k_per_editor);
  const Eigen::Index n_a = instance.scores.cols();
  std::vector<bool> taken(static_cast<std::size_t>(n_a), false);
  Eigen::Index remaining = n_a;
  std::vector<std::pair<Eigen::Index, Eigen::Index>> pairs;
  const auto order = editor_order(instance);
  for (int round = 0; round < k_per_editor && remaining > 0; ++round) {
    for (Eigen::Index e : order) {
      if (remaining == 0) break;
      Eigen::Index best = -1;
      for (Eigen::Index a = 0; a < n_a; ++a) {
        if (taken[static_cast<std::size_t>(a)]) continue;
        if (best < 0 || instance.scores(e, a) > instance.scores(e, best)) best = a;
      }
      taken[static_cast<std::size_t>(best)] = true;
      --remaining;
      pairs.emplace_back(e, best);
    }
  }
  return finish(instance, pairs);
}

MatchPlan optimal_match(const MatchInstance& instance, int k_per_editor, std::size_t max_pairs) {
  check_instance(instance, k_per_editor);
  const auto n_e = static_cast<int>(instance.scores.rows());
  const auto n_a = static_cast<int>(instance.scores.cols());
  if (static_cast<std::size_t>(n_e) * static_cast<std::size_t>(n_a) > max_pairs) {
    throw Error(Errc::InstanceTooLarge, std::to_string(n_e) + " editors x " + std::to_string(n_a) +
                                            " articles exceeds the exact matcher budget");
  }
  const int src = 0;
  const int sink = n_e + n_a + 1;
  auto editor_node = [](int e) { return 1 + e; };
  auto article_node = [n_e](int a) { return 1 + n_e + a; };

  FlowGraph g(static_cast<std::size_t>(sink) + 1);
  g.arcs.reserve(2 * (static_cast<std::size_t>(n_e) * static_cast<std::size_t>(n_a) + n_e + n_a));
  for (int e = 0; e < n_e; ++e) g.add(src, editor_node(e), k_per_editor, 0.0);
  for (int e = 0; e < n_e; ++e) {
    for (int a = 0; a < n_a; ++a) g.add(editor_node(e), article_node(a), 1, -instance.scores(e, a));
  }
  for (int a = 0; a < n_a; ++a) g.add(article_node(a), sink, 1, 0.0);

  // The initial network is a DAG; shortest distances give feasible potentials.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> pot(g.size(), 0.0);
  double best_sink = inf;
  for (int a = 0; a < n_a; ++a) {
    double best = n_e == 0 ? inf : 0.0;
    for (int e = 0; e < n_e; ++e) best = std::min(best, -instance.scores(e, a));
    pot[static_cast<std::size_t>(article_node(a))] = best;
    best_sink = std::min(best_sink, best);
  }
  pot[static_cast<std::size_t>(sink)] = best_sink == inf ? 0.0 : best_sink;

  std::vector<double> dist(g.size());
  std::vector<int> via(g.size());
  using Item = std::pair<double, int>;
  while (true) {
    std::fill(dist.begin(), dist.end(), inf);
    std::fill(via.begin(), via.end(), -1);
    std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
    dist[src] = 0.0;
    heap.emplace(0.0, src);
    while (!heap.empty()) {
      auto [d, u] = heap.top();
      heap.pop();
      if (d > dist[static_cast<std::size_t>(u)]) continue;
      for (int i = g.head_[static_cast<std::size_t>(u)]; i >= 0; i = g.arcs[static_cast<std::size_t>(i)].next) {
        const auto& arc = g.arcs[static_cast<std::size_t>(i)];
        if (arc.cap <= 0) continue;
        const double reduced = std::max(
            0.0, arc.cost + pot[static_cast<std::size_t>(u)] - pot[static_cast<std::size_t>(arc.to)]);
        const double nd = d + reduced;
        if (nd < dist[static_cast<std::size_t>(arc.to)]) {
          dist[static_cast<std::size_t>(arc.to)] = nd;
          via[static_cast<std::size_t>(arc.to)] = i;
          heap.emplace(nd, arc.to);
        }
      }
    }
    if (dist[static_cast<std::size_t>(sink)] == inf) break;

    double path_cost = 0.0;
    for (int v = sink; v != src;) {
      const auto& arc = g.arcs[static_cast<std::size_t>(via[static_cast<std::size_t>(v)])];
      path_cost += arc.cost;
      v = g.arcs[static_cast<std::size_t>(via[static_cast<std::size_t>(v)] ^ 1)].to;
    }
    if (path_cost > 0.0) break;

    for (std::size_t v = 0; v < g.size(); ++v) {
      if (dist[v] < inf) pot[v] += dist[v];
    }
    for (int v = sink; v != src;) {
      const int i = via[static_cast<std::size_t>(v)];
      g.arcs[static_cast<std::size_t>(i)].cap -= 1;
      g.arcs[static_cast<std::size_t>(i ^ 1)].cap += 1;
      v = g.arcs[static_cast<std::size_t>(i ^ 1)].to;
    }
  }

  std::vector<std::pair<Eigen::Index, Eigen::Index>> pairs;
  for (int e = 0; e < n_e; ++e) {
    const int u = editor_node(e);
    for (int i = g.head_[static_cast<std::size_t>(u)]; i >= 0; i = g.arcs[static_cast<std::size_t>(i)].next) {
      const auto& arc = g.arcs[static_cast<std::size_t>(i)];
      if ((i & 1) == 0 && arc.to > n_e && arc.to < sink && arc.cap == 0) {
        pairs.emplace_back(e, arc.to - 1 - n_e);
      }
    }
  }
  return finish(instance, pairs);
}

void write_plan(const MatchPlan& plan, std::span<const PoolItem> pool, const std::filesystem::path& file) {
  std::map<ConceptId, const PoolItem*> by_concept;
  for (const auto& p : pool) by_concept.emplace(p.concept_id, &p);
  static constexpr std::array header{"editor_id"sv, "concept_id"sv, "source_title"sv,
                                     "interest_score"sv, "y_pred"sv};
  tsv::Writer w(file, header);
  for (const auto& a : plan.assignments) {
    auto it = by_concept.find(a.concept_id);
    const std::string title = it == by_concept.end() ? std::string() : it->second->source_title;
    const std::string y = it == by_concept.end() ? std::string() : tsv::format_fixed(it->second->y_pred, 6);
    w.row(a.editor_id, a.concept_id, title, tsv::format_fixed(a.interest_score, 6), y);
  }
}

}  // namespace gapfinder
