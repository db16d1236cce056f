#include "goal/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <tuple>

#include "goal/errors.hpp"
#include "goal/oracle.hpp"

namespace goal {

double mape(double achieved, double target) {
  return 100.0 * std::abs(achieved - target) / std::max(std::abs(target), kResilienceGuard);
}

int best_candidate(std::span<const ObjectiveVector> candidates, const ObjectiveVector& target) {
  int best = -1;
  double best_score = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const double score = std::max(mape(candidates[i].c_max, target.c_max),
                                  mape(candidates[i].resilience, target.resilience));
    if (score < best_score) {
      best_score = score;
      best = static_cast<int>(i);
    }
  }
  return best;
}

double duplication_rate(std::span<const Schedule> candidates) {
  if (candidates.empty()) throw ConfigError("duplication_rate needs at least one candidate");
  std::set<std::vector<std::vector<int>>> unique;
  for (const auto& s : candidates) unique.insert(s.start);
  const double n = static_cast<double>(candidates.size());
  return 100.0 * (n - static_cast<double>(unique.size())) / n;
}

bool within_epsilon(const ObjectiveVector& achieved, const ObjectiveVector& target, double eps) {
  const auto e = relative_errors(achieved, target);
  return e[0] <= eps && e[1] <= eps;
}

std::optional<double> time_to_epsilon(const TrialRecord& record, double eps) {
  if (record.streaming) {
    for (const auto& [seconds, err] : record.trace)
      if (err <= eps) return seconds * 1000.0;
    return std::nullopt;
  }
  int hits = 0;
  for (std::size_t i = 0; i < record.candidates.size(); ++i) {
    const bool feasible = i < record.feasible.size() ? record.feasible[i] : true;
    if (feasible && within_epsilon(record.candidates[i], record.target, eps)) ++hits;
  }
  if (hits == 0) return std::nullopt;
  return record.seconds * 1000.0 / hits;
}

std::optional<std::array<double, 2>> trial_mape(const TrialRecord& record) {
  std::vector<ObjectiveVector> feasible;
  for (std::size_t i = 0; i < record.candidates.size(); ++i)
    if (i >= record.feasible.size() || record.feasible[i]) feasible.push_back(record.candidates[i]);
  const int best = best_candidate(feasible, record.target);
  if (best < 0) return std::nullopt;
  return std::array<double, 2>{mape(feasible[best].c_max, record.target.c_max),
                               mape(feasible[best].resilience, record.target.resilience)};
}

MeanStd mean_std(std::span<const double> values) {
  MeanStd out;
  out.n = static_cast<int>(values.size());
  if (values.empty()) return out;
  double sum = 0.0;
  for (double v : values) sum += v;
  out.mean = sum / out.n;
  if (out.n > 1) {
    double sq = 0.0;
    for (double v : values) sq += (v - out.mean) * (v - out.mean);
    out.std = std::sqrt(sq / (out.n - 1));
  }
  return out;
}

EvalReport aggregate(std::vector<TrialRecord> trials, std::span<const double> epsilons) {
  using Key = std::tuple<std::string, int, int, int>;
  std::map<Key, std::vector<const TrialRecord*>> groups;
  for (const auto& t : trials) groups[{t.method, static_cast<int>(t.kind), t.n_jobs, t.n_machines}].push_back(&t);

  EvalReport report;
  for (const auto& [key, members] : groups) {
    ReportRow row;
    row.method = std::get<0>(key);
    row.kind = static_cast<ProblemKind>(std::get<1>(key));
    row.n_jobs = std::get<2>(key);
    row.n_machines = std::get<3>(key);
    row.trials = static_cast<int>(members.size());
    std::size_t n_cand = 0, n_feasible = 0;
    std::vector<double> mc, mr, dup;
    std::map<double, std::vector<double>> tte;
    for (const auto* t : members) {
      n_cand += t->candidates.size();
      for (std::size_t i = 0; i < t->candidates.size(); ++i)
        if (i >= t->feasible.size() || t->feasible[i]) ++n_feasible;
      if (const auto m = trial_mape(*t)) {
        mc.push_back((*m)[0]);
        mr.push_back((*m)[1]);
      }
      dup.push_back(t->duplication);
      for (double eps : epsilons)
        if (const auto ms = time_to_epsilon(*t, eps)) tte[eps].push_back(*ms);
    }
    row.feasibility = n_cand == 0 ? 0.0 : 100.0 * static_cast<double>(n_feasible) / static_cast<double>(n_cand);
    row.mape_cmax = mean_std(mc);
    row.mape_resilience = mean_std(mr);
    row.duplication = mean_std(dup).mean;
    for (double eps : epsilons) row.time_to_eps[eps] = mean_std(tte[eps]);
    report.rows.push_back(std::move(row));
  }
  report.trials = std::move(trials);
  return report;
}

std::vector<EvalCase> make_eval_cases(ProblemKind kind, int jobs, int machines, const BenchmarkConfig& cfg) {
  const auto gen = GeneratorConfig::fixed(kind, jobs, machines, cfg.seed);
  std::vector<EvalCase> cases;
  for (int i = 0; i < cfg.n_instances; ++i) {
    const std::uint64_t index = cfg.first_index + static_cast<std::uint64_t>(i);
    const Instance inst = generate_instance(gen, index);
    const auto schedules = enumerate_feasible(inst, cfg.oracle_limit, mix_seed(cfg.seed ^ 0xE7A1, index));
    std::vector<ObjectiveVector> pool, positive;
    for (const auto& s : schedules) {
      pool.push_back(evaluate(s, inst));
      if (pool.back().resilience > 0.0) positive.push_back(pool.back());
    }
    const auto& from = positive.empty() ? pool : positive;
    Rng rng(cfg.seed ^ 0x7A6E7, index);
    for (int k = 0; k < cfg.targets_per_instance; ++k)
      cases.push_back({inst, from[rng.uniform_int(0, static_cast<int>(from.size()) - 1)]});
  }
  return cases;
}

namespace {

std::string hash_matrices(const std::vector<Candidate>& cands) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto& c : cands) {
    for (auto b : c.x.bits()) {
      h ^= b;
      h *= 1099511628211ULL;
    }
    h ^= 0xFF;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

TrialRecord base_record(const std::string& method, const EvalCase& c) {
  TrialRecord r;
  r.method = method;
  r.instance_id = c.instance.id;
  r.kind = c.instance.kind;
  r.n_jobs = c.instance.n_jobs;
  r.n_machines = c.instance.n_machines;
  r.target = c.target;
  return r;
}

}  // namespace

TrialRecord goal_trial(GoalModel& model, const EvalCase& c, const SamplerConfig& sampler, int candidates,
                       std::uint64_t seed) {
  const auto ctx = make_context(c.instance);
  const auto res = sample(model, *ctx, normalize_targets(c.target, c.instance), sampler, candidates, seed);
  TrialRecord r = base_record("goal", c);
  std::vector<Schedule> schedules;
  for (const auto& cand : res.candidates) {
    r.candidates.push_back(cand.objectives);
    r.feasible.push_back(is_feasible(cand.schedule, c.instance).feasible);
    schedules.push_back(cand.schedule);
  }
  r.seconds = res.seconds;
  r.duplication = duplication_rate(schedules);
  r.candidates_hash = hash_matrices(res.candidates);
  return r;
}

TrialRecord baseline_trial(const std::string& method, const EvalCase& c, MoeaConfig moea) {
  moea.target = c.target;
  BaselineResult res;
  if (method == "nsga2")
    res = nsga2_run(c.instance, moea);
  else if (method == "moead")
    res = moead_run(c.instance, moea);
  else
    throw ConfigError("unknown method '" + method + "'");
  TrialRecord r = base_record(method, c);
  r.candidates.push_back(res.best_objectives);
  r.feasible.push_back(res.feasible);
  r.seconds = res.seconds;
  r.streaming = true;
  for (const auto& p : res.trace) r.trace.emplace_back(p.seconds, p.max_error);
  return r;
}

EvalReport run_benchmark(const BenchmarkConfig& cfg, const std::map<ProblemKind, GoalModel*>& models) {
  if (cfg.n_instances < 1 || cfg.targets_per_instance < 1) throw ConfigError("need at least one evaluation case");
  if (cfg.candidates < 1) throw ConfigError("candidates must be at least 1");
  for (const auto& m : cfg.methods)
    if (m != "goal" && m != "nsga2" && m != "moead") throw ConfigError("unknown method '" + m + "'");
  const bool with_goal = std::find(cfg.methods.begin(), cfg.methods.end(), "goal") != cfg.methods.end();
  if (with_goal)
    for (auto kind : cfg.kinds) {
      const auto it = models.find(kind);
      if (it == models.end() || it->second == nullptr || !it->second->covers(kind))
        throw ConfigError("no checkpoint covers " + std::string(to_string(kind)));
    }

  std::vector<TrialRecord> trials;
  for (auto kind : cfg.kinds)
    for (const auto& [jobs, machines] : cfg.sizes) {
      const auto cases = make_eval_cases(kind, jobs, machines, cfg);
      for (const auto& method : cfg.methods) {
        if (method == "goal") {
          // Untimed warm-up so first-touch allocation is not charged to a trial.
          goal_trial(*models.at(kind), cases.front(), cfg.sampler, cfg.candidates, cfg.seed);
        }
        for (std::size_t i = 0; i < cases.size(); ++i) {
          const std::uint64_t seed = mix_seed(cfg.seed, i);
          if (method == "goal") {
            trials.push_back(goal_trial(*models.at(kind), cases[i], cfg.sampler, cfg.candidates, seed));
          } else {
            MoeaConfig moea = cfg.moea;
            moea.seed = seed;
            trials.push_back(baseline_trial(method, cases[i], moea));
          }
        }
      }
    }
  return aggregate(std::move(trials), cfg.epsilons);
}

void to_json(nlohmann::json& j, const TrialRecord& r) {
  j = {{"method", r.method},
       {"instance", r.instance_id},
       {"kind", to_string(r.kind)},
       {"n_jobs", r.n_jobs},
       {"n_machines", r.n_machines},
       {"target", r.target},
       {"candidates", r.candidates},
       {"feasible", r.feasible},
       {"seconds", r.seconds},
       {"streaming", r.streaming},
       {"duplication", r.duplication},
       {"candidates_hash", r.candidates_hash}};
  nlohmann::json trace = nlohmann::json::array();
  for (const auto& [s, e] : r.trace) trace.push_back({s, e});
  j["trace"] = trace;
  nlohmann::json tte = nlohmann::json::object();
  for (double eps : kDefaultEpsilons) {
    const auto v = time_to_epsilon(r, eps);
    tte[std::to_string(eps).substr(0, 4)] = v ? nlohmann::json(*v) : nlohmann::json(nullptr);
  }
  j["time_to_epsilon_ms"] = tte;
  if (const auto m = trial_mape(r))
    j["best_mape"] = {(*m)[0], (*m)[1]};
  else
    j["best_mape"] = nullptr;
}

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path);
  return out;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

}  // namespace

void write_report_csv(const EvalReport& report, const std::string& path) {
  auto out = open_out(path);
  std::set<double> eps;
  for (const auto& row : report.rows)
    for (const auto& [e, _] : row.time_to_eps) eps.insert(e);
  out << "method,kind,jobs,machines,trials,feasibility,mape_cmax_mean,mape_cmax_std,mape_r_mean,mape_r_std,"
         "mape_n,duplication";
  for (double e : eps) {
    const std::string tag = fmt(e * 100);
    out << ",tte" << tag << "_ms_mean,tte" << tag << "_ms_std,tte" << tag << "_hits";
  }
  out << '\n';
  for (const auto& row : report.rows) {
    out << row.method << ',' << to_string(row.kind) << ',' << row.n_jobs << ',' << row.n_machines << ','
        << row.trials << ',' << fmt(row.feasibility) << ',';
    if (row.mape_cmax.n > 0)
      out << fmt(row.mape_cmax.mean) << ',' << fmt(row.mape_cmax.std) << ',' << fmt(row.mape_resilience.mean) << ','
          << fmt(row.mape_resilience.std);
    else
      out << "NA,NA,NA,NA";
    out << ',' << row.mape_cmax.n << ',' << fmt(row.duplication);
    for (double e : eps) {
      const auto it = row.time_to_eps.find(e);
      if (it == row.time_to_eps.end() || it->second.n == 0)
        out << ",NA,NA,0";
      else
        out << ',' << fmt(it->second.mean) << ',' << fmt(it->second.std) << ',' << it->second.n;
    }
    out << '\n';
  }
}

void write_trials_json(const EvalReport& report, const std::string& path) {
  auto out = open_out(path);
  out << nlohmann::json(report.trials).dump(1) << '\n';
}

void write_plot_csv(const EvalReport& report, const std::string& path) {
  auto out = open_out(path);
  out << "method,kind,size,epsilon,mean_ms,std_ms,n\n";
  for (const auto& row : report.rows)
    for (const auto& [e, ms] : row.time_to_eps) {
      out << row.method << ',' << to_string(row.kind) << ',' << row.n_jobs << 'x' << row.n_machines << ','
          << fmt(e) << ',';
      if (ms.n == 0)
        out << "NA,NA,0\n";
      else
        out << fmt(ms.mean) << ',' << fmt(ms.std) << ',' << ms.n << '\n';
    }
}

}  // namespace goal
