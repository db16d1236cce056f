#pragma once
// Metrics, benchmark orchestration and report files.

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "goal/baselines.hpp"
#include "goal/diffusion.hpp"
#include "goal/schedule.hpp"
#include "json.hpp"

namespace goal {

// 100 |achieved - target| / max(|target|, kResilienceGuard)
double mape(double achieved, double target);

// Index of the candidate minimizing max(MAPE C_max, MAPE R); -1 when empty.
int best_candidate(std::span<const ObjectiveVector> candidates, const ObjectiveVector& target);

// 100 (n - unique) / n, uniqueness on exact start-time vectors.
double duplication_rate(std::span<const Schedule> candidates);

// Both relative errors within eps.
bool within_epsilon(const ObjectiveVector& achieved, const ObjectiveVector& target, double eps);

struct TrialRecord {
  std::string method;
  std::string instance_id;
  ProblemKind kind = ProblemKind::JSP;
  int n_jobs = 0;
  int n_machines = 0;
  ObjectiveVector target;
  std::vector<ObjectiveVector> candidates;
  std::vector<bool> feasible;
  // Batch methods: total sampling seconds. Streaming methods: run seconds.
  double seconds = 0.0;
  // Streaming methods only: (seconds, best max relative error) improvements.
  std::vector<std::pair<double, double>> trace;
  bool streaming = false;
  double duplication = 0.0;
  std::string candidates_hash;
};

// Milliseconds. Streaming: elapsed time at the first decision within eps.
// Batch: total sampling time divided by the number of candidates within eps.
// nullopt when nothing qualifies.
std::optional<double> time_to_epsilon(const TrialRecord& record, double eps);

// Best-candidate MAPEs of a record (nullopt when no feasible candidate).
std::optional<std::array<double, 2>> trial_mape(const TrialRecord& record);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
  int n = 0;
};
MeanStd mean_std(std::span<const double> values);

struct ReportRow {
  std::string method;
  ProblemKind kind = ProblemKind::JSP;
  int n_jobs = 0;
  int n_machines = 0;
  int trials = 0;
  double feasibility = 0.0;  // percent of feasible candidates
  MeanStd mape_cmax, mape_resilience;
  double duplication = 0.0;
  std::map<double, MeanStd> time_to_eps;  // eps -> ms over trials that hit
};

struct EvalReport {
  std::vector<ReportRow> rows;
  std::vector<TrialRecord> trials;
};

inline const std::vector<double> kDefaultEpsilons{0.05, 0.10};

EvalReport aggregate(std::vector<TrialRecord> trials, std::span<const double> epsilons = kDefaultEpsilons);

struct BenchmarkConfig {
  std::vector<std::string> methods{"goal", "nsga2", "moead"};
  std::vector<std::pair<int, int>> sizes{{5, 3}};  // (jobs, machines)
  std::vector<ProblemKind> kinds{ProblemKind::JSP};
  int n_instances = 100;
  int targets_per_instance = 1;
  std::size_t oracle_limit = 200;
  // Held-out instances are generated from this index on.
  std::uint64_t first_index = 1000000;
  std::uint64_t seed = 0;
  SamplerConfig sampler;
  int candidates = 32;
  MoeaConfig moea;
  std::vector<double> epsilons = kDefaultEpsilons;
};

// Held-out (instance, target) pairs: targets are objective pairs of oracle
// schedules of the instance, preferring pairs with non-zero resilience.
struct EvalCase {
  Instance instance;
  ObjectiveVector target;
};
std::vector<EvalCase> make_eval_cases(ProblemKind kind, int jobs, int machines, const BenchmarkConfig& cfg);

// models: problem kind -> trained model; required when "goal" is requested.
EvalReport run_benchmark(const BenchmarkConfig& cfg, const std::map<ProblemKind, GoalModel*>& models);

TrialRecord goal_trial(GoalModel& model, const EvalCase& c, const SamplerConfig& sampler, int candidates,
                       std::uint64_t seed);
TrialRecord baseline_trial(const std::string& method, const EvalCase& c, MoeaConfig moea);

void to_json(nlohmann::json& j, const TrialRecord& r);
void write_report_csv(const EvalReport& report, const std::string& path);
void write_trials_json(const EvalReport& report, const std::string& path);
// One row per (method, kind, size, eps): mean and std of time-to-eps in ms.
void write_plot_csv(const EvalReport& report, const std::string& path);

}  // namespace goal
