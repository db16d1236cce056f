// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any fails. Pass criterion names as arguments to run a subset.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "goal/baselines.hpp"
#include "goal/eval.hpp"
#include "goal/kernels.hpp"
#include "gradcheck.hpp"
#include "support.hpp"

using namespace goal;
using namespace goal::testing;

namespace {

constexpr double kAlgebraTol = 1e-12;
constexpr double kGradTol = 1e-4;
constexpr double kGradStep = 1e-5;
constexpr double kDeskMapeMax = 5.0;  // percent, both objectives
constexpr double kUnseenRatioMax = 2.0;
constexpr int kRoundTripSchedules = 1000;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

void progress(const std::string& msg) { std::cerr << "  .. " << msg << std::endl; }

Outcome diffusion_algebra() {
  const auto s = NoiseSchedule::linear(1000);
  double p1 = 1.0, p0 = 0.0, worst = 0.0;
  for (int t = 1; t <= 1000; ++t) {
    const double f = s.flip(t);
    p1 = p1 * (1 - f) + (1 - p1) * f;
    p0 = p0 * (1 - f) + (1 - p0) * f;
    for (int x0 : {0, 1}) {
      const double closed = s.alpha_bar(t) * x0 + (1 - s.alpha_bar(t)) / 2;
      worst = std::max(worst, std::abs((x0 ? p1 : p0) - closed));
    }
  }
  return {worst < kAlgebraTol, fmt("max |composed - closed form| = %.3e over t in [1,1000]", worst)};
}

Outcome gradient_fidelity() {
  DenoiserConfig cfg;
  cfg.hidden = 8;
  cfg.embed_dim = 8;
  cfg.cond_dim = 8;
  cfg.layers = 2;
  cfg.seed = 21;
  Denoiser<double> net(cfg);
  Rng rng(8);
  auto bits = [&](int k) {
    std::vector<std::uint8_t> x(static_cast<std::size_t>(k) * k, 0);
    for (int a = 0; a < k; ++a)
      for (int b = 0; b < k; ++b)
        if (a != b) x[a * k + b] = rng.bernoulli(0.5);
    return x;
  };
  const auto jsp = make_context(generate_instance(GeneratorConfig::fixed(ProblemKind::JSP, 2, 3, 5), 0));
  Instance fj;
  fj.kind = ProblemKind::FJSP;
  fj.n_jobs = 3;
  fj.n_ops_per_job = 2;
  fj.n_machines = 3;
  fj.proc_time = {{2, 4}, {3, 1}, {5, 2}};
  fj.eligible = {{{0, 1}, {2}}, {{1}, {0, 2}}, {{0}, {1, 2}}};
  fj.id = "fjsp-3x2";
  const auto fjsp = make_context(fj);
  const auto x0 = bits(6), x1 = bits(6);
  const std::vector<DenoiserInput> inputs{{jsp.get(), x0, 40, {0.55, 0.3}}, {fjsp.get(), x1, 3, {0.7, 0.1}}};
  const auto batch = make_batch(inputs, net.config());
  Tensor<double> target(batch.edges, 1);
  for (auto& v : target.data) v = rng.bernoulli(0.5);
  for (auto& p : net.store().params())
    if (p->name.find(".gamma") != std::string::npos || p->name.find(".beta") != std::string::npos)
      for (auto& v : p->value.data) v += rng.normal(0, 0.1);
  std::string worst_name;
  const double err = grad_check(
      net.store(), [&](Tape<double>& t) { return t.bce_with_logits(net.forward(t, batch, true), target); }, kGradStep,
      &worst_name);
  return {err < kGradTol, fmt("max relative error %.3e over %zu parameters (worst %s), K = 6", err,
                              net.store().parameter_count(), worst_name.c_str())};
}

Outcome oracle_equivalence() {
  Rng rng(99);
  int instances = 0, mismatches = 0;
  long schedules = 0;
  auto compare = [&](const Instance& inst) {
    const auto bf = brute_force(inst);
    const auto ours = enumerate_feasible(inst, 1000000, 0, {.exhaustive = true});
    std::set<std::vector<int>> got;
    int best = 1 << 30;
    for (const auto& s : ours) {
      got.insert(flat_starts(s));
      best = std::min(best, makespan(s, inst));
    }
    if (got.size() != ours.size() || got != bf.starts || best != bf.min_cmax) ++mismatches;
    schedules += static_cast<long>(ours.size());
    ++instances;
  };
  for (int ops = 1; ops <= 6; ++ops)
    for (int jobs = 1; jobs * ops <= 6; ++jobs)
      for (int machines = 1; machines <= 4; ++machines)
        for (int rep = 0; rep < 10; ++rep) compare(random_jsp(rng, jobs, ops, machines));
  for (int jobs = 1; jobs <= 2; ++jobs)
    for (int machines = 1; machines <= 4; ++machines)
      for (std::uint64_t i = 0; i < 10; ++i)
        compare(generate_instance(GeneratorConfig::fixed(ProblemKind::JSP, jobs, machines, 3), i));
  const auto two = two_by_two();
  int min_two = 1 << 30;
  for (const auto& s : enumerate_feasible(two, 100, 0, {.exhaustive = true}))
    min_two = std::min(min_two, makespan(s, two));
  return {mismatches == 0 && min_two == 7,
          fmt("%d instances, %ld schedules, %d mismatches; 2x2 min C_max = %d", instances, schedules, mismatches,
              min_two)};
}

Outcome round_trip() {
  struct Size {
    ProblemKind kind;
    int jobs, machines;
  };
  const std::vector<Size> sizes{{ProblemKind::JSP, 3, 3},   {ProblemKind::JSP, 5, 3},  {ProblemKind::JSP, 10, 5},
                                {ProblemKind::JSP, 20, 10}, {ProblemKind::FSP, 5, 3},  {ProblemKind::FSP, 10, 10},
                                {ProblemKind::FJSP, 5, 3},  {ProblemKind::FJSP, 10, 6}};
  int checked = 0, failures = 0;
  for (std::uint64_t i = 0; checked < kRoundTripSchedules; ++i) {
    const auto& sz = sizes[i % sizes.size()];
    const auto inst = generate_instance(GeneratorConfig::fixed(sz.kind, sz.jobs, sz.machines, 17), i);
    for (const auto& s : enumerate_feasible(inst, 25, i)) {
      const auto obj = evaluate(s, inst);
      const auto back = evaluate(decode(label_decision(s, inst), inst), inst);
      if (back.c_max != obj.c_max || back.resilience != obj.resilience) ++failures;
      if (++checked == kRoundTripSchedules) break;
    }
  }
  return {failures == 0, fmt("%d schedules over %zu size/kind pairs, %d mismatches", checked, sizes.size(), failures)};
}

const ReportRow* find_row(const EvalReport& rep, const std::string& method, ProblemKind kind, int jobs,
                          int machines) {
  for (const auto& r : rep.rows)
    if (r.method == method && r.kind == kind && r.n_jobs == jobs && r.n_machines == machines) return &r;
  return nullptr;
}

// Shared by the desk-quality and baseline-ordering checks.
struct DeskRun {
  bool done = false;
  GoalModel model;
  EvalReport main;   // goal and nsga2 on 5x3
  EvalReport small;  // goal on 3x3
  double train_seconds = 0.0;
};

DeskRun& desk_run() {
  static DeskRun run;
  if (run.done) return run;
  const auto data = build_dataset(GeneratorConfig::fixed(ProblemKind::JSP, 5, 3, 11), 200, 50, 11);
  auto tc = TrainConfig::profile("desk");
  run.model = make_model(tc, {ProblemKind::JSP});
  progress(fmt("training desk profile on %zu samples for %d epochs", data.samples.size(), tc.epochs));
  run.train_seconds = train(run.model, data, tc, [](const TrainProgress& p) {
                        if (p.step == p.total_steps) progress(fmt("final step loss %.4f", p.loss));
                      }).seconds;
  BenchmarkConfig bc;
  bc.methods = {"goal", "nsga2"};
  bc.sizes = {{5, 3}};
  bc.n_instances = 50;
  bc.candidates = 32;
  bc.sampler.guidance = 2.0;
  bc.seed = 5;
  std::map<ProblemKind, GoalModel*> models{{ProblemKind::JSP, &run.model}};
  progress("evaluating 5x3 against NSGA-II");
  run.main = run_benchmark(bc, models);
  bc.methods = {"goal"};
  bc.sizes = {{3, 3}};
  progress("evaluating 3x3");
  run.small = run_benchmark(bc, models);
  run.done = true;
  return run;
}

Outcome desk_quality() {
  const auto& run = desk_run();
  const auto* big = find_row(run.main, "goal", ProblemKind::JSP, 5, 3);
  const auto* small = find_row(run.small, "goal", ProblemKind::JSP, 3, 3);
  if (!big || !small) return {false, "missing report rows"};
  const bool pass = big->feasibility == 100.0 && small->feasibility == 100.0 &&
                    big->mape_cmax.mean <= kDeskMapeMax && big->mape_resilience.mean <= kDeskMapeMax &&
                    small->duplication > big->duplication;
  return {pass, fmt("train %.0fs; 5x3: feasibility %.2f%%, MAPE C_max %.2f%%, R %.2f%%, duplication %.2f%%; "
                    "3x3 duplication %.2f%%",
                    run.train_seconds, big->feasibility, big->mape_cmax.mean, big->mape_resilience.mean,
                    big->duplication, small->duplication)};
}

Outcome baseline_ordering() {
  const auto& run = desk_run();
  const auto* goal = find_row(run.main, "goal", ProblemKind::JSP, 5, 3);
  const auto* ga = find_row(run.main, "nsga2", ProblemKind::JSP, 5, 3);
  if (!goal || !ga) return {false, "missing report rows"};
  const auto& g = goal->time_to_eps.at(0.05);
  const auto& n = ga->time_to_eps.at(0.05);
  const bool pass = g.n > 0 && n.n > 0 && g.mean < n.mean;
  return {pass, fmt("time-to-5%%: GOAL %.2f ms (%d/%d trials hit), NSGA-II %.2f ms (%d/%d trials hit)", g.mean, g.n,
                    goal->trials, n.mean, n.n, ga->trials)};
}

Outcome cross_variant() {
  std::vector<DatasetShard> shards;
  for (auto kind : {ProblemKind::JSP, ProblemKind::FSP, ProblemKind::FJSP})
    shards.push_back(build_dataset(GeneratorConfig::fixed(kind, 5, 3, 23), 60, 30, 23));
  const auto data = merge_shards(shards);
  auto tc = TrainConfig::profile("desk");
  tc.epochs = 10;
  auto model = make_model(tc, {ProblemKind::JSP, ProblemKind::FSP, ProblemKind::FJSP});
  progress(fmt("training one checkpoint on %zu JSP/FSP/FJSP samples", data.samples.size()));
  const auto res = train(model, data, tc);
  BenchmarkConfig bc;
  bc.methods = {"goal"};
  bc.kinds = {ProblemKind::JSP, ProblemKind::FSP, ProblemKind::FJSP};
  bc.sizes = {{5, 3}};
  bc.n_instances = 20;
  bc.seed = 7;
  progress("evaluating each kind");
  const auto rep = run_benchmark(bc, {{ProblemKind::JSP, &model}, {ProblemKind::FSP, &model}, {ProblemKind::FJSP, &model}});
  bool pass = res.epoch_loss.back() < res.epoch_loss.front() && rep.rows.size() == 3;
  std::ostringstream detail;
  detail << fmt("loss %.4f -> %.4f;", res.epoch_loss.front(), res.epoch_loss.back());
  for (const auto& r : rep.rows) {
    pass = pass && r.feasibility == 100.0 && std::isfinite(r.mape_cmax.mean) && std::isfinite(r.mape_resilience.mean);
    detail << fmt(" %s feasibility %.0f%% MAPE %.2f%%/%.2f%%;", std::string(to_string(r.kind)).c_str(), r.feasibility,
                  r.mape_cmax.mean, r.mape_resilience.mean);
  }
  return {pass, detail.str()};
}

Outcome held_out_machines() {
  const std::vector<int> seen{4, 5, 6, 8, 10}, unseen{7, 9};
  std::vector<DatasetShard> shards;
  for (int m : seen) shards.push_back(build_dataset(GeneratorConfig::fixed(ProblemKind::JSP, 10, m, 31), 40, 20, 31));
  const auto data = merge_shards(shards);
  auto tc = TrainConfig::profile("desk");
  tc.epochs = 8;
  auto model = make_model(tc, {ProblemKind::JSP});
  progress(fmt("training on %zu 10-job samples with machine counts 4,5,6,8,10", data.samples.size()));
  train(model, data, tc);
  BenchmarkConfig bc;
  bc.methods = {"goal"};
  for (int m : seen) bc.sizes.emplace_back(10, m);
  for (int m : unseen) bc.sizes.emplace_back(10, m);
  bc.n_instances = 12;
  bc.seed = 13;
  progress("evaluating seen and unseen machine counts");
  const auto rep = run_benchmark(bc, {{ProblemKind::JSP, &model}});
  auto average = [&](const std::vector<int>& counts, bool cmax) {
    double sum = 0;
    for (int m : counts) {
      const auto* r = find_row(rep, "goal", ProblemKind::JSP, 10, m);
      sum += cmax ? r->mape_cmax.mean : r->mape_resilience.mean;
    }
    return sum / static_cast<double>(counts.size());
  };
  bool feasible = true;
  for (const auto& r : rep.rows) feasible = feasible && r.feasibility == 100.0;
  const double sc = average(seen, true), sr = average(seen, false);
  const double uc = average(unseen, true), ur = average(unseen, false);
  const bool pass = feasible && uc <= kUnseenRatioMax * sc && ur <= kUnseenRatioMax * sr;
  return {pass, fmt("feasibility %s; MAPE C_max unseen %.2f%% vs seen %.2f%%, R unseen %.2f%% vs seen %.2f%%",
                    feasible ? "100%" : "<100%", uc, sc, ur, sr)};
}

Outcome metric_suite() {
  int failed = 0;
  auto expect = [&](bool ok) { failed += ok ? 0 : 1; };
  expect(mape(10, 10) == 0.0);
  expect(mape(11, 10) == 10.0);
  {
    const std::vector<ObjectiveVector> c{{7, 0.5}, {9, 0.5}};
    const int best = best_candidate(c, {8, 0.5});
    expect(best >= 0 && mape(c[best].c_max, 8) == 12.5);
  }
  {
    Schedule a, b, c;
    a.start = {{0, 1}};
    b.start = {{0, 2}};
    c.start = {{1, 2}};
    expect(duplication_rate(std::vector<Schedule>{a, a, b, c}) == 25.0);
    expect(duplication_rate(std::vector<Schedule>{a, b, c}) == 0.0);
    expect(duplication_rate(std::vector<Schedule>{a, a, a, a}) == 75.0);
  }
  {
    TrialRecord batch;
    batch.target = {10, 0.5};
    batch.candidates = {{10, 0.5}, {20, 0.5}, {10, 0.5}, {10, 0.5}};
    batch.feasible.assign(4, true);
    batch.seconds = 0.090;
    const auto t = time_to_epsilon(batch, 0.05);
    expect(t && std::abs(*t - 30.0) < 1e-9);
    batch.candidates = {{20, 0.5}};
    batch.feasible = {true};
    expect(!time_to_epsilon(batch, 0.05));
    TrialRecord stream;
    stream.streaming = true;
    stream.target = {10, 0.5};
    stream.trace = {{0.004, 0.01}};
    const auto s = time_to_epsilon(stream, 0.05);
    expect(s && std::abs(*s - 4.0) < 1e-9);
  }
  {
    const auto fronts = non_dominated_sort(std::vector<std::array<double, 2>>{{1, 2}, {2, 1}, {3, 3}});
    auto f0 = fronts.empty() ? std::vector<int>{} : fronts[0];
    std::sort(f0.begin(), f0.end());
    expect(fronts.size() == 2 && f0 == std::vector<int>{0, 1} && fronts[1] == std::vector<int>{2});
  }
  {
    const auto err = relative_errors({12, 0.4}, {10, 0.5});
    expect(std::abs(tchebycheff(err, {1, 0}, {0, 0}) - std::abs(12.0 - 10.0) / 10.0) < 1e-15);
  }
  return {failed == 0, fmt("%d example groups failed", failed)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"diffusion-algebra", diffusion_algebra},   {"gradient-fidelity", gradient_fidelity},
      {"oracle-equivalence", oracle_equivalence}, {"round-trip", round_trip},
      {"desk-quality", desk_quality},             {"baseline-ordering", baseline_ordering},
      {"cross-variant", cross_variant},           {"held-out-machines", held_out_machines},
      {"metric-suite", metric_suite},
  };
  const std::set<std::string> wanted(argv + 1, argv + argc);
  std::cerr << "kernels: " << kernels::isa_name(kernels::active_isa()) << std::endl;
  int failures = 0;
  for (const auto& [name, check] : criteria) {
    if (!wanted.empty() && !wanted.count(name)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << " (" << fmt("%.1fs", secs) << "): " << o.detail << std::endl;
    failures += o.pass ? 0 : 1;
  }
  return failures == 0 ? 0 : 1;
}
