#pragma once
// Target-conditioned NSGA-II and MOEA/D over permutation-with-repetition
// genomes, decoded by the same dispatcher as the diffusion sampler.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "goal/instance.hpp"
#include "goal/rng.hpp"
#include "goal/schedule.hpp"

namespace goal {

// Guard for relative errors against a zero resilience target.
inline constexpr double kResilienceGuard = 1e-6;

struct Genome {
  std::vector<int> sequence;  // each job index n_ops_per_job times
  std::vector<int> machines;  // FJSP: machine per operation index; empty otherwise
};

Genome random_genome(const Instance& inst, Rng& rng);
// Number of broken genome invariants (wrong job counts, ineligible machines).
int genome_violations(const Genome& g, const Instance& inst);
Schedule decode_genome(const Genome& g, const Instance& inst);

// (|C - C*| / C*, |R - R*| / max(R*, guard))
std::array<double, 2> relative_errors(const ObjectiveVector& achieved, const ObjectiveVector& target);

// ((C - C*)/C*)^2 + ((R - R*)/max(R*, guard))^2 + penalty * feasibility violations.
double target_fitness(const Schedule& sched, const Instance& inst, const ObjectiveVector& target,
                      double penalty = 1e3);

// Fronts of indices, best first; minimization of both coordinates.
std::vector<std::vector<int>> non_dominated_sort(std::span<const std::array<double, 2>> points);
bool dominates(const std::array<double, 2>& a, const std::array<double, 2>& b);
// Crowding distance of each member of `front` (same order); boundary
// members get +infinity.
std::vector<double> crowding_distance(std::span<const std::array<double, 2>> points, std::span<const int> front);

// (i / (n - 1), 1 - i / (n - 1)) for i = 0..n-1. Throws ConfigError for n < 2.
std::vector<std::array<double, 2>> uniform_weights(int n);
// max_i w_i |f_i - z_i|
double tchebycheff(const std::array<double, 2>& f, const std::array<double, 2>& w, const std::array<double, 2>& z);

struct MoeaConfig {
  int population = 100;
  int generations = 500;
  double crossover_rate = 0.9;
  double mutation_rate = 0.2;
  double penalty = 1e3;
  int neighborhood = 10;  // MOEA/D only
  ObjectiveVector target;
  std::uint64_t seed = 0;
  // Stop once the best max relative error is at or below this value; <= 0 runs the full budget.
  double stop_at = 0.0;
};

void check_moea_config(const MoeaConfig& cfg);

// Improvement of the best-so-far max relative error.
struct TracePoint {
  double seconds = 0.0;
  long evaluations = 0;
  double max_error = 0.0;
  ObjectiveVector objectives;
};

struct BaselineResult {
  Schedule best;
  ObjectiveVector best_objectives;
  double best_max_error = 0.0;
  bool feasible = true;
  std::vector<TracePoint> trace;
  std::vector<double> generation_best;  // best max error after each generation
  std::vector<std::array<double, 2>> ideal_history;  // MOEA/D ideal point after each generation
  long evaluations = 0;
  double seconds = 0.0;
};

// Wall-clock of the first decision within eps of both targets.
std::optional<double> first_hit_seconds(const BaselineResult& r, double eps);

BaselineResult nsga2_run(const Instance& inst, const MoeaConfig& cfg);
BaselineResult moead_run(const Instance& inst, const MoeaConfig& cfg);

}  // namespace goal
