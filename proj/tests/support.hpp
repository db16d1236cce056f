#pragma once
// Shared fixtures and independent reference computations for the test suites.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <vector>

#include "goal/instance.hpp"
#include "goal/rng.hpp"
#include "goal/schedule.hpp"

namespace goal::testing {

inline Instance make_jsp(const std::vector<std::vector<std::pair<int, int>>>& jobs, int n_machines,
                         std::string id = "t") {
  Instance inst;
  inst.kind = ProblemKind::JSP;
  inst.n_jobs = static_cast<int>(jobs.size());
  inst.n_ops_per_job = jobs.empty() ? 0 : static_cast<int>(jobs[0].size());
  inst.n_machines = n_machines;
  inst.id = std::move(id);
  for (const auto& job : jobs) {
    inst.machine.emplace_back();
    inst.proc_time.emplace_back();
    for (auto [m, p] : job) {
      inst.machine.back().push_back(m);
      inst.proc_time.back().push_back(p);
    }
  }
  return inst;
}

// J1:(M0,3),(M1,2); J2:(M1,2),(M0,4)
inline Instance two_by_two() { return make_jsp({{{0, 3}, {1, 2}}, {{1, 2}, {0, 4}}}, 2, "2x2"); }

inline Instance serial_chain() { return make_jsp({{{0, 2}, {1, 3}, {2, 1}}}, 3, "chain"); }

// Random JSP with arbitrary (possibly repeated) machine visits.
inline Instance random_jsp(Rng& rng, int jobs, int ops, int machines) {
  std::vector<std::vector<std::pair<int, int>>> spec(jobs);
  for (auto& job : spec)
    for (int k = 0; k < ops; ++k) job.emplace_back(rng.uniform_int(0, machines - 1), rng.uniform_int(1, 5));
  return make_jsp(spec, machines, "r");
}

// Every start vector reachable by serial list scheduling of an operation
// permutation that respects job order: start = max(job ready, machine ready).
// These are exactly the semi-active schedules.
struct BruteForce {
  std::set<std::vector<int>> starts;
  int min_cmax = 0;
};

inline BruteForce brute_force(const Instance& inst) {
  const int k = inst.num_ops();
  std::vector<int> perm(k);
  std::iota(perm.begin(), perm.end(), 0);
  BruteForce out;
  out.min_cmax = 1 << 30;
  do {
    std::vector<int> next_op(inst.n_jobs, 0);
    bool ok = true;
    for (int a : perm) {
      if (inst.op_of(a) != next_op[inst.job_of(a)]) {
        ok = false;
        break;
      }
      ++next_op[inst.job_of(a)];
    }
    if (!ok) continue;
    std::vector<int> job_ready(inst.n_jobs, 0), machine_ready(inst.n_machines, 0), start(k, 0);
    int cmax = 0;
    for (int a : perm) {
      const int j = inst.job_of(a), o = inst.op_of(a), m = inst.machine[j][o];
      start[a] = std::max(job_ready[j], machine_ready[m]);
      job_ready[j] = machine_ready[m] = start[a] + inst.proc_time[j][o];
      cmax = std::max(cmax, job_ready[j]);
    }
    out.starts.insert(start);
    out.min_cmax = std::min(out.min_cmax, cmax);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return out;
}

inline std::vector<int> flat_starts(const Schedule& s) {
  std::vector<int> v;
  for (const auto& row : s.start) v.insert(v.end(), row.begin(), row.end());
  return v;
}

}  // namespace goal::testing
