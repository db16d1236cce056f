#include "goal/schedule.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <queue>
#include <tuple>

#include "goal/errors.hpp"

namespace goal {

std::string DecisionMatrix::to_bit_string() const {
  std::string out(bits_.size(), '0');
  for (std::size_t i = 0; i < bits_.size(); ++i)
    if (bits_[i]) out[i] = '1';
  return out;
}

DecisionMatrix DecisionMatrix::from_bit_string(const std::string& bits, std::string instance_id) {
  int k = 0;
  while (static_cast<std::size_t>(k) * k < bits.size()) ++k;
  if (static_cast<std::size_t>(k) * k != bits.size())
    throw DimensionError("bit string length is not a perfect square");
  DecisionMatrix x(k, std::move(instance_id));
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i] != '0' && bits[i] != '1') throw FormatError("bit string contains non-binary character");
    x.bits_[i] = bits[i] == '1';
  }
  return x;
}

namespace {

class Dispatcher {
 public:
  explicit Dispatcher(const Instance& inst)
      : inst_(inst),
        next_op_(inst.n_jobs, 0),
        job_ready_(inst.n_jobs, 0),
        machine_ready_(inst.n_machines, 0) {
    sched_.instance_id = inst.id;
    sched_.start.assign(inst.n_jobs, std::vector<int>(inst.n_ops_per_job, 0));
    sched_.machine.assign(inst.n_jobs, std::vector<int>(inst.n_ops_per_job, 0));
  }

  bool job_done(int job) const { return next_op_[job] >= inst_.n_ops_per_job; }
  int next_op(int job) const { return next_op_[job]; }

  // Appends the next operation of `job`; machine < 0 selects greedily.
  void schedule_next(int job, int machine = -1) {
    const int op = next_op_[job];
    if (machine < 0) {
      int best_start = std::numeric_limits<int>::max();
      for (int m : inst_.eligible_machines(job, op)) {
        const int s = std::max(job_ready_[job], machine_ready_[m]);
        if (s < best_start || (s == best_start && m < machine)) {
          best_start = s;
          machine = m;
        }
      }
    }
    const int s = std::max(job_ready_[job], machine_ready_[machine]);
    const int finish = s + inst_.processing_time(job, op, machine);
    sched_.start[job][op] = s;
    sched_.machine[job][op] = machine;
    job_ready_[job] = finish;
    machine_ready_[machine] = finish;
    ++next_op_[job];
  }

  Schedule take() { return std::move(sched_); }

 private:
  const Instance& inst_;
  std::vector<int> next_op_;
  std::vector<int> job_ready_;
  std::vector<int> machine_ready_;
  Schedule sched_;
};

}  // namespace

Schedule dispatch_by_priority(std::span<const double> priority, const Instance& inst) {
  const int k_ops = inst.num_ops();
  if (static_cast<int>(priority.size()) != k_ops) throw DimensionError("priority vector has wrong length");
  Dispatcher d(inst);
  for (int step = 0; step < k_ops; ++step) {
    int best_job = -1;
    double best = 0.0;
    for (int j = 0; j < inst.n_jobs; ++j) {
      if (d.job_done(j)) continue;
      const double p = priority[inst.op_index(j, d.next_op(j))];
      if (best_job < 0 || p > best) {
        best_job = j;
        best = p;
      }
    }
    d.schedule_next(best_job);
  }
  return d.take();
}

Schedule decode(std::span<const double> scores, const Instance& inst) {
  const int k_ops = inst.num_ops();
  if (scores.size() != static_cast<std::size_t>(k_ops) * k_ops)
    throw DimensionError("decision matrix must be K x K with K = " + std::to_string(k_ops));
  std::vector<double> row_sum(k_ops, 0.0);
  for (int a = 0; a < k_ops; ++a)
    for (int b = 0; b < k_ops; ++b)
      if (a != b) row_sum[a] += scores[static_cast<std::size_t>(a) * k_ops + b];
  return dispatch_by_priority(row_sum, inst);
}

Schedule decode(const DecisionMatrix& x, const Instance& inst) {
  std::vector<double> scores(x.bits().begin(), x.bits().end());
  if (x.size() != inst.num_ops())
    throw DimensionError("decision matrix must be K x K with K = " + std::to_string(inst.num_ops()));
  return decode(scores, inst);
}

Schedule dispatch_sequence(std::span<const int> job_sequence, std::span<const int> machine_choice,
                           const Instance& inst) {
  if (static_cast<int>(job_sequence.size()) != inst.num_ops())
    throw DimensionError("job sequence has wrong length");
  if (!machine_choice.empty() && static_cast<int>(machine_choice.size()) != inst.num_ops())
    throw DimensionError("machine choice vector has wrong length");
  Dispatcher d(inst);
  for (int job : job_sequence) {
    if (job < 0 || job >= inst.n_jobs || d.job_done(job))
      throw DimensionError("job sequence is not a permutation with repetition");
    const int m = machine_choice.empty() ? -1 : machine_choice[inst.op_index(job, d.next_op(job))];
    d.schedule_next(job, m);
  }
  return d.take();
}

FeasibilityReport is_feasible(const Schedule& sched, const Instance& inst) {
  FeasibilityReport rep;
  auto fail = [&](std::string msg) {
    rep.feasible = false;
    rep.violations.push_back(std::move(msg));
  };
  if (static_cast<int>(sched.start.size()) != inst.n_jobs || static_cast<int>(sched.machine.size()) != inst.n_jobs) {
    fail("schedule shape does not match instance");
    return rep;
  }
  for (int j = 0; j < inst.n_jobs; ++j) {
    if (static_cast<int>(sched.start[j].size()) != inst.n_ops_per_job ||
        static_cast<int>(sched.machine[j].size()) != inst.n_ops_per_job) {
      fail("schedule shape does not match instance");
      return rep;
    }
  }

  struct Slot {
    int start, finish, job, op;
  };
  std::vector<std::vector<Slot>> per_machine(inst.n_machines);
  for (int j = 0; j < inst.n_jobs; ++j) {
    for (int k = 0; k < inst.n_ops_per_job; ++k) {
      const int s = sched.start[j][k];
      const int m = sched.machine[j][k];
      const std::string where = " at job " + std::to_string(j) + " op " + std::to_string(k);
      if (s < 0) fail("negative start" + where);
      const auto elig = inst.eligible_machines(j, k);
      if (std::find(elig.begin(), elig.end(), m) == elig.end()) {
        fail("ineligible machine" + where);
        continue;
      }
      if (k > 0) {
        const int prev_finish =
            sched.start[j][k - 1] + inst.processing_time(j, k - 1, sched.machine[j][k - 1]);
        if (s < prev_finish) fail("job precedence violated" + where);
      }
      per_machine[m].push_back({s, s + inst.processing_time(j, k, m), j, k});
    }
  }
  for (int m = 0; m < inst.n_machines; ++m) {
    auto& slots = per_machine[m];
    std::sort(slots.begin(), slots.end(), [](const Slot& a, const Slot& b) { return a.start < b.start; });
    for (std::size_t i = 1; i < slots.size(); ++i)
      if (slots[i].start < slots[i - 1].finish)
        fail("overlap on machine " + std::to_string(m));
  }
  return rep;
}

namespace {

std::vector<int> start_order(const Schedule& sched, const Instance& inst) {
  std::vector<int> order(inst.num_ops());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const int ja = inst.job_of(a), ka = inst.op_of(a);
    const int jb = inst.job_of(b), kb = inst.op_of(b);
    return std::tie(sched.start[ja][ka], ja, ka) < std::tie(sched.start[jb][kb], jb, kb);
  });
  return order;
}

}  // namespace

DecisionMatrix label_decision(const Schedule& sched, const Instance& inst) {
  const auto rep = is_feasible(sched, inst);
  if (!rep.feasible) throw LabelError("cannot label infeasible schedule: " + rep.violations.front());
  const int k_ops = inst.num_ops();
  const auto order = start_order(sched, inst);
  DecisionMatrix x(k_ops, inst.id);
  for (int i = 0; i < k_ops; ++i)
    for (int j = i + 1; j < k_ops; ++j) x(order[i], order[j]) = 1;
  return x;
}

int makespan(const Schedule& sched, const Instance& inst) {
  int c_max = 0;
  for (int j = 0; j < inst.n_jobs; ++j)
    for (int k = 0; k < inst.n_ops_per_job; ++k)
      c_max = std::max(c_max, sched.start[j][k] + inst.processing_time(j, k, sched.machine[j][k]));
  return c_max;
}

double resilience(const Schedule& sched, const Instance& inst) {
  const int k_ops = inst.num_ops();
  if (k_ops == 0) return 0.0;
  std::vector<int> dur(k_ops);
  for (int a = 0; a < k_ops; ++a)
    dur[a] = inst.processing_time(inst.job_of(a), inst.op_of(a), sched.machine[inst.job_of(a)][inst.op_of(a)]);

  std::vector<std::vector<int>> succ(k_ops);
  std::vector<int> indegree(k_ops, 0);
  auto add_edge = [&](int a, int b) {
    succ[a].push_back(b);
    ++indegree[b];
  };
  for (int j = 0; j < inst.n_jobs; ++j)
    for (int k = 0; k + 1 < inst.n_ops_per_job; ++k) add_edge(inst.op_index(j, k), inst.op_index(j, k + 1));
  std::vector<std::vector<int>> on_machine(inst.n_machines);
  for (int a : start_order(sched, inst)) on_machine[sched.machine[inst.job_of(a)][inst.op_of(a)]].push_back(a);
  for (const auto& seq : on_machine)
    for (std::size_t i = 1; i < seq.size(); ++i) add_edge(seq[i - 1], seq[i]);

  // Kahn topological order.
  std::vector<int> topo;
  topo.reserve(k_ops);
  std::queue<int> ready;
  for (int a = 0; a < k_ops; ++a)
    if (indegree[a] == 0) ready.push(a);
  while (!ready.empty()) {
    const int a = ready.front();
    ready.pop();
    topo.push_back(a);
    for (int b : succ[a])
      if (--indegree[b] == 0) ready.push(b);
  }
  if (static_cast<int>(topo.size()) != k_ops) throw InternalError("schedule induces a cyclic precedence digraph");

  std::vector<int> es(k_ops, 0);
  for (int a : topo)
    for (int b : succ[a]) es[b] = std::max(es[b], es[a] + dur[a]);

  const int deadline = makespan(sched, inst);
  if (deadline == 0) return 0.0;
  std::vector<int> ls(k_ops, 0);
  for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
    const int a = *it;
    int latest_finish = deadline;
    for (int b : succ[a]) latest_finish = std::min(latest_finish, ls[b]);
    ls[a] = latest_finish - dur[a];
  }
  long slack = 0;
  for (int a = 0; a < k_ops; ++a) slack += ls[a] - es[a];
  return static_cast<double>(slack) / deadline;
}

ObjectiveVector evaluate(const Schedule& sched, const Instance& inst) {
  return {static_cast<double>(makespan(sched, inst)), resilience(sched, inst)};
}

int makespan_lower_bound(const Instance& inst) {
  int bound = 0;
  for (const auto& row : inst.proc_time) bound = std::max(bound, std::accumulate(row.begin(), row.end(), 0));
  if (inst.kind != ProblemKind::FJSP) {
    std::vector<int> load(inst.n_machines, 0);
    for (int j = 0; j < inst.n_jobs; ++j)
      for (int k = 0; k < inst.n_ops_per_job; ++k) load[inst.machine[j][k]] += inst.proc_time[j][k];
    for (int l : load) bound = std::max(bound, l);
  }
  return bound;
}

void to_json(nlohmann::json& j, const Schedule& s) {
  j = nlohmann::json{{"instance_id", s.instance_id}, {"start", s.start}, {"machine", s.machine}};
}

void from_json(const nlohmann::json& j, Schedule& s) {
  try {
    s.instance_id = j.value("instance_id", std::string{});
    s.start = j.at("start").get<std::vector<std::vector<int>>>();
    s.machine = j.at("machine").get<std::vector<std::vector<int>>>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed schedule: ") + e.what());
  }
}

void to_json(nlohmann::json& j, const ObjectiveVector& o) {
  j = nlohmann::json{{"c_max", o.c_max}, {"resilience", o.resilience}};
}

void from_json(const nlohmann::json& j, ObjectiveVector& o) {
  o.c_max = j.at("c_max").get<double>();
  o.resilience = j.at("resilience").get<double>();
}

}  // namespace goal
