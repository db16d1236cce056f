#pragma once
// Heterogeneous relational graph over operation nodes. Each edge type holds
// the directed pairs induced by one constraint class.

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

#include "goal/instance.hpp"

namespace goal {

enum class EdgeType : int { JobPrecedence = 0, MachineConflict = 1, EligibilityOverlap = 2 };

inline constexpr int kNumEdgeTypes = 3;

class RelationalGraph {
 public:
  RelationalGraph() = default;
  RelationalGraph(int num_nodes, int used_types);

  int num_nodes() const { return k_; }
  // 2 for JSP/FSP, 3 for FJSP. Storage always has kNumEdgeTypes slots.
  int used_types() const { return used_types_; }

  const std::vector<std::pair<int, int>>& edges(EdgeType t) const { return edges_[static_cast<int>(t)]; }
  const std::vector<std::pair<int, int>>& edges(int t) const { return edges_[t]; }
  bool has_edge(int t, int from, int to) const { return member_[t][index(from, to)] != 0; }
  bool same_job(int a, int b) const { return same_job_[index(a, b)] != 0; }

  void add_edge(int t, int from, int to);
  void mark_same_job(int a, int b) { same_job_[index(a, b)] = 1; }

 private:
  std::size_t index(int a, int b) const { return static_cast<std::size_t>(a) * k_ + b; }

  int k_ = 0;
  int used_types_ = 0;
  std::array<std::vector<std::pair<int, int>>, kNumEdgeTypes> edges_;
  std::array<std::vector<std::uint8_t>, kNumEdgeTypes> member_;
  std::vector<std::uint8_t> same_job_;
};

RelationalGraph build_graph(const Instance& inst);

// K x (2 * kNumEdgeTypes): per edge type, in-degree then out-degree.
std::vector<std::vector<int>> degree_features(const RelationalGraph& g);

// Length kNumEdgeTypes + 1: membership bit per edge type, then the same-job bit.
std::array<std::uint8_t, kNumEdgeTypes + 1> structural_indicators(const RelationalGraph& g, int from, int to);

}  // namespace goal
