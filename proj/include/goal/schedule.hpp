#pragma once
// Schedules, the decision-matrix bridge, and the two objectives.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "goal/instance.hpp"
#include "json.hpp"

namespace goal {

struct Schedule {
  std::string instance_id;
  std::vector<std::vector<int>> start;    // [job][op]
  std::vector<std::vector<int>> machine;  // [job][op]

  friend bool operator==(const Schedule&, const Schedule&) = default;
};

struct ObjectiveVector {
  double c_max = 0.0;
  double resilience = 0.0;

  friend bool operator==(const ObjectiveVector&, const ObjectiveVector&) = default;
};

// Binary K x K pairwise precedence matrix; x(a, b) = 1 means a precedes b.
class DecisionMatrix {
 public:
  DecisionMatrix() = default;
  explicit DecisionMatrix(int k, std::string instance_id = {})
      : k_(k), bits_(static_cast<std::size_t>(k) * k, 0), instance_id_(std::move(instance_id)) {}

  int size() const { return k_; }
  std::uint8_t operator()(int a, int b) const { return bits_[static_cast<std::size_t>(a) * k_ + b]; }
  std::uint8_t& operator()(int a, int b) { return bits_[static_cast<std::size_t>(a) * k_ + b]; }
  std::span<const std::uint8_t> bits() const { return bits_; }
  std::span<std::uint8_t> bits() { return bits_; }
  const std::string& instance_id() const { return instance_id_; }

  // Row-major '0'/'1' string of all K*K entries.
  std::string to_bit_string() const;
  static DecisionMatrix from_bit_string(const std::string& bits, std::string instance_id = {});

  friend bool operator==(const DecisionMatrix&, const DecisionMatrix&) = default;

 private:
  int k_ = 0;
  std::vector<std::uint8_t> bits_;
  std::string instance_id_;
};

// Priority dispatch: operations are released in descending row-sum order
// among the next unscheduled operation of every job, each starting at
// max(job predecessor finish, machine availability). FJSP operations go to
// the eligible machine with the earliest resulting start (lowest index on
// ties). Always feasible. Throws DimensionError unless scores has K*K entries.
Schedule decode(std::span<const double> scores, const Instance& inst);
Schedule decode(const DecisionMatrix& x, const Instance& inst);

// Same dispatcher driven directly by one priority per operation (higher
// first).
Schedule dispatch_by_priority(std::span<const double> priority, const Instance& inst);

// Dispatch a job-index sequence (each job repeated n_ops_per_job times).
// machine_choice, when non-empty, fixes the FJSP machine per operation.
Schedule dispatch_sequence(std::span<const int> job_sequence, std::span<const int> machine_choice,
                           const Instance& inst);

// Total order by (start, job, op). Throws LabelError for infeasible schedules.
DecisionMatrix label_decision(const Schedule& sched, const Instance& inst);

int makespan(const Schedule& sched, const Instance& inst);

// Sum of (latest - earliest start) over operations divided by the makespan,
// computed on the job + machine-sequence digraph with deadline = makespan.
double resilience(const Schedule& sched, const Instance& inst);

ObjectiveVector evaluate(const Schedule& sched, const Instance& inst);

struct FeasibilityReport {
  bool feasible = true;
  std::vector<std::string> violations;
};

FeasibilityReport is_feasible(const Schedule& sched, const Instance& inst);

// Lower bound max(longest job chain, busiest machine) for JSP/FSP.
int makespan_lower_bound(const Instance& inst);

void to_json(nlohmann::json& j, const Schedule& s);
void from_json(const nlohmann::json& j, Schedule& s);
void to_json(nlohmann::json& j, const ObjectiveVector& o);
void from_json(const nlohmann::json& j, ObjectiveVector& o);

}  // namespace goal
