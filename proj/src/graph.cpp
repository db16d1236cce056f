#include "goal/graph.hpp"

#include <algorithm>

namespace goal {

RelationalGraph::RelationalGraph(int num_nodes, int used_types)
    : k_(num_nodes), used_types_(used_types), same_job_(static_cast<std::size_t>(num_nodes) * num_nodes, 0) {
  for (auto& m : member_) m.assign(static_cast<std::size_t>(num_nodes) * num_nodes, 0);
}

void RelationalGraph::add_edge(int t, int from, int to) {
  if (from == to || member_[t][index(from, to)]) return;
  member_[t][index(from, to)] = 1;
  edges_[t].emplace_back(from, to);
}

RelationalGraph build_graph(const Instance& inst) {
  const int k_ops = inst.num_ops();
  RelationalGraph g(k_ops, inst.kind == ProblemKind::FJSP ? 3 : 2);
  constexpr int job = static_cast<int>(EdgeType::JobPrecedence);
  constexpr int conflict = static_cast<int>(EdgeType::MachineConflict);
  constexpr int overlap = static_cast<int>(EdgeType::EligibilityOverlap);

  for (int j = 0; j < inst.n_jobs; ++j) {
    for (int k = 0; k < inst.n_ops_per_job; ++k) {
      for (int k2 = 0; k2 < inst.n_ops_per_job; ++k2)
        if (k != k2) g.mark_same_job(inst.op_index(j, k), inst.op_index(j, k2));
      if (k + 1 < inst.n_ops_per_job) {
        g.add_edge(job, inst.op_index(j, k), inst.op_index(j, k + 1));
        g.add_edge(job, inst.op_index(j, k + 1), inst.op_index(j, k));
      }
    }
  }

  for (int a = 0; a < k_ops; ++a) {
    const auto ea = inst.eligible_machines(inst.job_of(a), inst.op_of(a));
    for (int b = 0; b < k_ops; ++b) {
      if (a == b) continue;
      const auto eb = inst.eligible_machines(inst.job_of(b), inst.op_of(b));
      if (inst.kind == ProblemKind::FJSP) {
        const bool intersects = std::any_of(ea.begin(), ea.end(), [&](int m) {
          return std::find(eb.begin(), eb.end(), m) != eb.end();
        });
        if (intersects) g.add_edge(overlap, a, b);
      } else if (ea[0] == eb[0]) {
        g.add_edge(conflict, a, b);
      }
    }
  }
  return g;
}

std::vector<std::vector<int>> degree_features(const RelationalGraph& g) {
  std::vector<std::vector<int>> deg(g.num_nodes(), std::vector<int>(2 * kNumEdgeTypes, 0));
  for (int t = 0; t < kNumEdgeTypes; ++t) {
    for (const auto& [from, to] : g.edges(t)) {
      ++deg[to][2 * t];
      ++deg[from][2 * t + 1];
    }
  }
  return deg;
}

std::array<std::uint8_t, kNumEdgeTypes + 1> structural_indicators(const RelationalGraph& g, int from, int to) {
  std::array<std::uint8_t, kNumEdgeTypes + 1> out{};
  if (from == to) return out;
  for (int t = 0; t < kNumEdgeTypes; ++t) out[t] = g.has_edge(t, from, to);
  out[kNumEdgeTypes] = g.same_job(from, to);
  return out;
}

}  // namespace goal
