#include "goal/baselines.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

#include "goal/errors.hpp"

namespace goal {

Genome random_genome(const Instance& inst, Rng& rng) {
  Genome g;
  for (int j = 0; j < inst.n_jobs; ++j)
    for (int k = 0; k < inst.n_ops_per_job; ++k) g.sequence.push_back(j);
  std::shuffle(g.sequence.begin(), g.sequence.end(), rng.engine());
  if (inst.kind == ProblemKind::FJSP) {
    g.machines.resize(inst.num_ops());
    for (int a = 0; a < inst.num_ops(); ++a) {
      const auto el = inst.eligible_machines(inst.job_of(a), inst.op_of(a));
      g.machines[a] = el[rng.uniform_int(0, static_cast<int>(el.size()) - 1)];
    }
  }
  return g;
}

int genome_violations(const Genome& g, const Instance& inst) {
  int violations = 0;
  std::vector<int> count(inst.n_jobs, 0);
  for (int j : g.sequence) {
    if (j < 0 || j >= inst.n_jobs)
      ++violations;
    else
      ++count[j];
  }
  for (int c : count)
    if (c != inst.n_ops_per_job) ++violations;
  if (!g.machines.empty()) {
    if (static_cast<int>(g.machines.size()) != inst.num_ops()) return violations + 1;
    for (int a = 0; a < inst.num_ops(); ++a) {
      const auto el = inst.eligible_machines(inst.job_of(a), inst.op_of(a));
      if (std::find(el.begin(), el.end(), g.machines[a]) == el.end()) ++violations;
    }
  }
  return violations;
}

Schedule decode_genome(const Genome& g, const Instance& inst) { return dispatch_sequence(g.sequence, g.machines, inst); }

std::array<double, 2> relative_errors(const ObjectiveVector& achieved, const ObjectiveVector& target) {
  if (!(target.c_max > 0.0)) throw ConfigError("makespan target must be positive");
  return {std::abs(achieved.c_max - target.c_max) / target.c_max,
          std::abs(achieved.resilience - target.resilience) / std::max(target.resilience, kResilienceGuard)};
}

double target_fitness(const Schedule& sched, const Instance& inst, const ObjectiveVector& target, double penalty) {
  const auto report = is_feasible(sched, inst);
  if (!report.feasible) return penalty * static_cast<double>(report.violations.size());
  const auto e = relative_errors(evaluate(sched, inst), target);
  return e[0] * e[0] + e[1] * e[1];
}

bool dominates(const std::array<double, 2>& a, const std::array<double, 2>& b) {
  return a[0] <= b[0] && a[1] <= b[1] && (a[0] < b[0] || a[1] < b[1]);
}

std::vector<std::vector<int>> non_dominated_sort(std::span<const std::array<double, 2>> points) {
  const int n = static_cast<int>(points.size());
  std::vector<std::vector<int>> dominated_by_me(n);
  std::vector<int> dom_count(n, 0);
  std::vector<std::vector<int>> fronts(1);
  for (int p = 0; p < n; ++p) {
    for (int q = 0; q < n; ++q) {
      if (p == q) continue;
      if (dominates(points[p], points[q]))
        dominated_by_me[p].push_back(q);
      else if (dominates(points[q], points[p]))
        ++dom_count[p];
    }
    if (dom_count[p] == 0) fronts[0].push_back(p);
  }
  for (std::size_t i = 0; !fronts[i].empty(); ++i) {
    std::vector<int> next;
    for (int p : fronts[i])
      for (int q : dominated_by_me[p])
        if (--dom_count[q] == 0) next.push_back(q);
    std::sort(next.begin(), next.end());
    fronts.push_back(std::move(next));
  }
  fronts.pop_back();
  return fronts;
}

std::vector<double> crowding_distance(std::span<const std::array<double, 2>> points, std::span<const int> front) {
  const std::size_t n = front.size();
  std::vector<double> dist(n, 0.0);
  if (n <= 2) {
    std::fill(dist.begin(), dist.end(), std::numeric_limits<double>::infinity());
    return dist;
  }
  std::vector<std::size_t> order(n);
  for (int m = 0; m < 2; ++m) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return points[front[a]][m] < points[front[b]][m]; });
    const double lo = points[front[order.front()]][m];
    const double hi = points[front[order.back()]][m];
    dist[order.front()] = dist[order.back()] = std::numeric_limits<double>::infinity();
    if (hi <= lo) continue;
    for (std::size_t i = 1; i + 1 < n; ++i)
      dist[order[i]] += (points[front[order[i + 1]]][m] - points[front[order[i - 1]]][m]) / (hi - lo);
  }
  return dist;
}

std::vector<std::array<double, 2>> uniform_weights(int n) {
  if (n < 2) throw ConfigError("need at least two weight vectors");
  std::vector<std::array<double, 2>> w;
  for (int i = 0; i < n; ++i) {
    const double a = static_cast<double>(i) / (n - 1);
    w.push_back({a, 1.0 - a});
  }
  return w;
}

double tchebycheff(const std::array<double, 2>& f, const std::array<double, 2>& w, const std::array<double, 2>& z) {
  return std::max(w[0] * std::abs(f[0] - z[0]), w[1] * std::abs(f[1] - z[1]));
}

void check_moea_config(const MoeaConfig& cfg) {
  if (cfg.population < 4) throw ConfigError("population must be at least 4");
  if (cfg.generations < 0) throw ConfigError("generations must be non-negative");
  if (cfg.crossover_rate < 0.0 || cfg.crossover_rate > 1.0) throw ConfigError("crossover_rate must lie in [0, 1]");
  if (cfg.mutation_rate < 0.0 || cfg.mutation_rate > 1.0) throw ConfigError("mutation_rate must lie in [0, 1]");
  if (cfg.neighborhood < 2) throw ConfigError("neighborhood must be at least 2");
  if (!(cfg.target.c_max > 0.0)) throw ConfigError("makespan target must be positive");
  if (cfg.target.resilience < 0.0) throw ConfigError("resilience target must be non-negative");
}

std::optional<double> first_hit_seconds(const BaselineResult& r, double eps) {
  for (const auto& p : r.trace)
    if (p.max_error <= eps) return p.seconds;
  return std::nullopt;
}

namespace {

struct Individual {
  Genome genome;
  std::array<double, 2> errors{};
  double fitness = 0.0;
  int rank = 0;
  double crowding = 0.0;
};

class Search {
 public:
  Search(const Instance& inst, const MoeaConfig& cfg)
      : inst_(inst), cfg_(cfg), rng_(cfg.seed, 0xBA5E), start_(std::chrono::steady_clock::now()) {
    result_.best_max_error = std::numeric_limits<double>::infinity();
  }

  Rng& rng() { return rng_; }
  BaselineResult& result() { return result_; }
  bool done() const { return cfg_.stop_at > 0.0 && result_.best_max_error <= cfg_.stop_at; }

  void evaluate_into(Individual& ind) {
    const Schedule s = decode_genome(ind.genome, inst_);
    const auto report = is_feasible(s, inst_);
    const ObjectiveVector obj = evaluate(s, inst_);
    ind.errors = relative_errors(obj, cfg_.target);
    const int violations = genome_violations(ind.genome, inst_) + static_cast<int>(report.violations.size());
    ind.fitness = ind.errors[0] * ind.errors[0] + ind.errors[1] * ind.errors[1] + cfg_.penalty * violations;
    if (violations > 0) ind.errors = {ind.errors[0] + cfg_.penalty * violations, ind.errors[1] + cfg_.penalty * violations};
    ++result_.evaluations;
    const double max_err = std::max(ind.errors[0], ind.errors[1]);
    if (max_err < result_.best_max_error) {
      result_.best_max_error = max_err;
      result_.best = s;
      result_.best_objectives = obj;
      result_.feasible = report.feasible;
      result_.trace.push_back({elapsed(), result_.evaluations, max_err, obj});
    }
  }

  Genome crossover(const Genome& p1, const Genome& p2) {
    if (rng_.uniform() >= cfg_.crossover_rate) return p1;
    // Jobs in the random subset keep their positions from p1; the rest follow p2's order.
    std::vector<std::uint8_t> keep(inst_.n_jobs, 0);
    for (auto& k : keep) k = rng_.bernoulli(0.5) ? 1 : 0;
    Genome child;
    child.sequence.assign(p1.sequence.size(), -1);
    for (std::size_t i = 0; i < p1.sequence.size(); ++i)
      if (keep[p1.sequence[i]]) child.sequence[i] = p1.sequence[i];
    std::size_t pos = 0;
    for (int j : p2.sequence) {
      if (keep[j]) continue;
      while (child.sequence[pos] != -1) ++pos;
      child.sequence[pos] = j;
    }
    if (!p1.machines.empty()) {
      child.machines = p1.machines;
      for (std::size_t a = 0; a < child.machines.size(); ++a)
        if (rng_.bernoulli(0.5)) child.machines[a] = p2.machines[a];
    }
    return child;
  }

  void mutate(Genome& g) {
    if (rng_.uniform() >= cfg_.mutation_rate) return;
    const int n = static_cast<int>(g.sequence.size());
    if (n >= 2) std::swap(g.sequence[rng_.uniform_int(0, n - 1)], g.sequence[rng_.uniform_int(0, n - 1)]);
    if (!g.machines.empty()) {
      const int a = rng_.uniform_int(0, inst_.num_ops() - 1);
      const auto el = inst_.eligible_machines(inst_.job_of(a), inst_.op_of(a));
      g.machines[a] = el[rng_.uniform_int(0, static_cast<int>(el.size()) - 1)];
    }
  }

  void end_generation() { result_.generation_best.push_back(result_.best_max_error); }

  BaselineResult finish() {
    result_.seconds = elapsed();
    return std::move(result_);
  }

 private:
  double elapsed() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

  const Instance& inst_;
  const MoeaConfig& cfg_;
  Rng rng_;
  std::chrono::steady_clock::time_point start_;
  BaselineResult result_;
};

void assign_rank_and_crowding(std::vector<Individual>& pop) {
  std::vector<std::array<double, 2>> pts;
  for (const auto& ind : pop) pts.push_back(ind.errors);
  const auto fronts = non_dominated_sort(pts);
  for (std::size_t r = 0; r < fronts.size(); ++r) {
    const auto cd = crowding_distance(pts, fronts[r]);
    for (std::size_t i = 0; i < fronts[r].size(); ++i) {
      pop[fronts[r][i]].rank = static_cast<int>(r);
      pop[fronts[r][i]].crowding = cd[i];
    }
  }
}

bool better(const Individual& a, const Individual& b) {
  return a.rank < b.rank || (a.rank == b.rank && a.crowding > b.crowding);
}

}  // namespace

BaselineResult nsga2_run(const Instance& inst, const MoeaConfig& cfg) {
  check_moea_config(cfg);
  Search search(inst, cfg);
  const int n = cfg.population;
  std::vector<Individual> pop(n);
  for (auto& ind : pop) {
    ind.genome = random_genome(inst, search.rng());
    search.evaluate_into(ind);
  }
  assign_rank_and_crowding(pop);
  search.end_generation();

  auto tournament = [&]() -> const Individual& {
    const Individual& a = pop[search.rng().uniform_int(0, n - 1)];
    const Individual& b = pop[search.rng().uniform_int(0, n - 1)];
    return better(b, a) ? b : a;
  };

  for (int gen = 0; gen < cfg.generations && !search.done(); ++gen) {
    std::vector<Individual> merged = pop;
    for (int i = 0; i < n && !search.done(); ++i) {
      Individual child;
      child.genome = search.crossover(tournament().genome, tournament().genome);
      search.mutate(child.genome);
      search.evaluate_into(child);
      merged.push_back(std::move(child));
    }
    std::vector<std::array<double, 2>> pts;
    for (const auto& ind : merged) pts.push_back(ind.errors);
    const auto fronts = non_dominated_sort(pts);
    std::vector<Individual> next;
    for (const auto& front : fronts) {
      const auto cd = crowding_distance(pts, front);
      std::vector<std::size_t> order(front.size());
      std::iota(order.begin(), order.end(), 0);
      if (next.size() + front.size() > static_cast<std::size_t>(n))
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return cd[a] > cd[b]; });
      for (std::size_t i : order) {
        if (next.size() == static_cast<std::size_t>(n)) break;
        next.push_back(merged[front[i]]);
      }
      if (next.size() == static_cast<std::size_t>(n)) break;
    }
    pop = std::move(next);
    assign_rank_and_crowding(pop);
    search.end_generation();
  }
  return search.finish();
}

BaselineResult moead_run(const Instance& inst, const MoeaConfig& cfg) {
  check_moea_config(cfg);
  Search search(inst, cfg);
  const int n = cfg.population;
  const auto weights = uniform_weights(n);
  const int t = std::min(cfg.neighborhood, n);
  std::vector<std::vector<int>> neighbors(n);
  for (int i = 0; i < n; ++i) {
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    auto d2 = [&](int j) {
      const double a = weights[i][0] - weights[j][0], b = weights[i][1] - weights[j][1];
      return a * a + b * b;
    };
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return d2(a) < d2(b); });
    neighbors[i].assign(idx.begin(), idx.begin() + t);
  }

  std::vector<Individual> pop(n);
  std::array<double, 2> z{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
  auto update_ideal = [&](const Individual& ind) {
    z[0] = std::min(z[0], ind.errors[0]);
    z[1] = std::min(z[1], ind.errors[1]);
  };
  for (auto& ind : pop) {
    ind.genome = random_genome(inst, search.rng());
    search.evaluate_into(ind);
    update_ideal(ind);
  }
  search.end_generation();
  search.result().ideal_history.push_back(z);

  for (int gen = 0; gen < cfg.generations && !search.done(); ++gen) {
    for (int i = 0; i < n && !search.done(); ++i) {
      const auto& nb = neighbors[i];
      const int a = nb[search.rng().uniform_int(0, t - 1)];
      const int b = nb[search.rng().uniform_int(0, t - 1)];
      Individual child;
      child.genome = search.crossover(pop[a].genome, pop[b].genome);
      search.mutate(child.genome);
      search.evaluate_into(child);
      update_ideal(child);
      for (int j : nb)
        if (tchebycheff(child.errors, weights[j], z) <= tchebycheff(pop[j].errors, weights[j], z)) pop[j] = child;
    }
    search.end_generation();
    search.result().ideal_history.push_back(z);
  }
  return search.finish();
}

}  // namespace goal
