#pragma once
// Scheduling problem instances for the flow shop, job shop and flexible job
// shop variants.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace goal {

enum class ProblemKind { FSP, JSP, FJSP };

std::string_view to_string(ProblemKind kind);
ProblemKind parse_problem_kind(std::string_view text);

inline constexpr int kMinProcTime = 1;
inline constexpr int kMaxProcTime = 5;

// Padding bounds of the instance feature encoder.
inline constexpr int kMaxJobs = 20;
inline constexpr int kMaxOpsPerJob = 3;
inline constexpr int kMaxMachines = 10;
inline constexpr int kFeatureLength = kMaxJobs * kMaxOpsPerJob * (1 + kMaxMachines) + 2;

struct Instance {
  ProblemKind kind = ProblemKind::JSP;
  int n_jobs = 0;
  int n_ops_per_job = 0;
  int n_machines = 0;
  std::vector<std::vector<int>> proc_time;              // [job][op]
  std::vector<std::vector<int>> machine;                // [job][op], JSP/FSP
  std::vector<std::vector<std::vector<int>>> eligible;  // [job][op] -> machines, FJSP
  std::string id;

  int num_ops() const { return n_jobs * n_ops_per_job; }
  int op_index(int job, int op) const { return job * n_ops_per_job + op; }
  int job_of(int index) const { return index / n_ops_per_job; }
  int op_of(int index) const { return index % n_ops_per_job; }

  // Machines that may process (job, op); a single machine outside FJSP.
  std::span<const int> eligible_machines(int job, int op) const;
  // Processing time on a given eligible machine (equal to the base time).
  int processing_time(int job, int op, int /*machine*/) const { return proc_time[job][op]; }
  int total_processing_time() const;
};

struct GeneratorConfig {
  ProblemKind kind = ProblemKind::JSP;
  int jobs_min = 5;
  int jobs_max = 5;
  int machines_min = 3;
  int machines_max = 3;
  int ops_per_job = 3;
  int proc_min = kMinProcTime;
  int proc_max = kMaxProcTime;
  std::uint64_t seed = 0;

  static GeneratorConfig fixed(ProblemKind kind, int jobs, int machines, std::uint64_t seed) {
    GeneratorConfig cfg;
    cfg.kind = kind;
    cfg.jobs_min = cfg.jobs_max = jobs;
    cfg.machines_min = cfg.machines_max = machines;
    cfg.seed = seed;
    return cfg;
  }
};

// Throws ConfigError on empty or out-of-bound ranges.
void check_generator_config(const GeneratorConfig& cfg);

// Deterministic in (cfg, index).
Instance generate_instance(const GeneratorConfig& cfg, std::uint64_t index);

// Empty iff every instance invariant holds.
std::vector<std::string> validate_instance(const Instance& inst);

struct InstanceFeatures {
  std::vector<double> values;
  std::vector<std::uint8_t> mask;  // 1 for real entries, 0 for padding
};

// Fixed-length encoding padded to (kMaxJobs, kMaxOpsPerJob, kMaxMachines).
// Throws DimensionError when the instance exceeds the padding bounds.
InstanceFeatures encode_instance_features(const Instance& inst);

void to_json(nlohmann::json& j, const Instance& inst);
void from_json(const nlohmann::json& j, Instance& inst);

Instance load_instance(const std::string& path);
void save_instance(const Instance& inst, const std::string& path);

}  // namespace goal
