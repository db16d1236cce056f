#include "goal/instance.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>

#include "goal/errors.hpp"
#include "goal/rng.hpp"

namespace goal {

std::string_view to_string(ProblemKind kind) {
  switch (kind) {
    case ProblemKind::FSP: return "fsp";
    case ProblemKind::JSP: return "jsp";
    case ProblemKind::FJSP: return "fjsp";
  }
  return "jsp";
}

ProblemKind parse_problem_kind(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "fsp") return ProblemKind::FSP;
  if (lower == "jsp") return ProblemKind::JSP;
  if (lower == "fjsp") return ProblemKind::FJSP;
  throw ConfigError("unknown problem kind '" + std::string(text) + "'");
}

std::span<const int> Instance::eligible_machines(int job, int op) const {
  if (kind == ProblemKind::FJSP) return eligible[job][op];
  return {&machine[job][op], 1};
}

int Instance::total_processing_time() const {
  int total = 0;
  for (const auto& row : proc_time) total = std::accumulate(row.begin(), row.end(), total);
  return total;
}

void check_generator_config(const GeneratorConfig& cfg) {
  if (cfg.jobs_min < 1 || cfg.jobs_max < cfg.jobs_min)
    throw ConfigError("job range must be non-empty and positive");
  if (cfg.machines_min < 1 || cfg.machines_max < cfg.machines_min)
    throw ConfigError("machine range must be non-empty and positive");
  if (cfg.ops_per_job < 1) throw ConfigError("ops_per_job must be positive");
  if (cfg.proc_min < 1 || cfg.proc_max < cfg.proc_min)
    throw ConfigError("processing time range must be non-empty and positive");
}

namespace {

std::vector<int> distinct_machines(Rng& rng, int count, int n_machines) {
  std::vector<int> seq;
  if (count <= n_machines) {
    std::vector<int> pool(n_machines);
    std::iota(pool.begin(), pool.end(), 0);
    // partial Fisher-Yates
    for (int i = 0; i < count; ++i) {
      const int pick = rng.uniform_int(i, n_machines - 1);
      std::swap(pool[i], pool[pick]);
      seq.push_back(pool[i]);
    }
  } else {
    for (int i = 0; i < count; ++i) seq.push_back(rng.uniform_int(0, n_machines - 1));
  }
  return seq;
}

}  // namespace

Instance generate_instance(const GeneratorConfig& cfg, std::uint64_t index) {
  check_generator_config(cfg);
  Rng rng(cfg.seed, index);

  Instance inst;
  inst.kind = cfg.kind;
  inst.n_jobs = rng.uniform_int(cfg.jobs_min, cfg.jobs_max);
  inst.n_machines = rng.uniform_int(cfg.machines_min, cfg.machines_max);
  inst.n_ops_per_job = cfg.ops_per_job;

  inst.proc_time.assign(inst.n_jobs, std::vector<int>(inst.n_ops_per_job));
  for (auto& row : inst.proc_time)
    for (auto& p : row) p = rng.uniform_int(cfg.proc_min, cfg.proc_max);

  switch (cfg.kind) {
    case ProblemKind::FSP: {
      const auto seq = distinct_machines(rng, inst.n_ops_per_job, inst.n_machines);
      inst.machine.assign(inst.n_jobs, seq);
      break;
    }
    case ProblemKind::JSP: {
      inst.machine.resize(inst.n_jobs);
      for (auto& row : inst.machine) row = distinct_machines(rng, inst.n_ops_per_job, inst.n_machines);
      break;
    }
    case ProblemKind::FJSP: {
      inst.eligible.assign(inst.n_jobs, std::vector<std::vector<int>>(inst.n_ops_per_job));
      for (auto& row : inst.eligible) {
        for (auto& set : row) {
          const int size = rng.uniform_int(1, inst.n_machines);
          set = distinct_machines(rng, size, inst.n_machines);
          std::sort(set.begin(), set.end());
        }
      }
      break;
    }
  }

  std::ostringstream id;
  id << to_string(cfg.kind) << '-' << inst.n_jobs << 'x' << inst.n_machines << "-s" << cfg.seed << "-i"
     << index;
  inst.id = id.str();
  return inst;
}

std::vector<std::string> validate_instance(const Instance& inst) {
  std::vector<std::string> out;
  if (inst.n_jobs < 0 || inst.n_ops_per_job < 0 || inst.n_machines < 0) {
    out.emplace_back("negative dimension");
    return out;
  }
  if (static_cast<int>(inst.proc_time.size()) != inst.n_jobs) {
    out.emplace_back("proc_time has wrong number of jobs");
    return out;
  }
  bool range_reported = false;
  for (const auto& row : inst.proc_time) {
    if (static_cast<int>(row.size()) != inst.n_ops_per_job) {
      out.emplace_back("proc_time has wrong number of operations");
      return out;
    }
    for (int p : row) {
      if ((p < kMinProcTime || p > kMaxProcTime) && !range_reported) {
        out.emplace_back("proc_time out of range");
        range_reported = true;
      }
    }
  }

  if (inst.kind == ProblemKind::FJSP) {
    if (static_cast<int>(inst.eligible.size()) != inst.n_jobs) {
      out.emplace_back("eligible has wrong number of jobs");
      return out;
    }
    for (int j = 0; j < inst.n_jobs; ++j) {
      if (static_cast<int>(inst.eligible[j].size()) != inst.n_ops_per_job) {
        out.emplace_back("eligible has wrong number of operations");
        return out;
      }
      for (int k = 0; k < inst.n_ops_per_job; ++k) {
        const auto& set = inst.eligible[j][k];
        if (set.empty()) out.push_back("empty eligible set at job " + std::to_string(j) + " op " + std::to_string(k));
        for (int m : set)
          if (m < 0 || m >= inst.n_machines) out.emplace_back("machine index out of range");
      }
    }
    return out;
  }

  if (static_cast<int>(inst.machine.size()) != inst.n_jobs) {
    out.emplace_back("machine has wrong number of jobs");
    return out;
  }
  for (const auto& row : inst.machine) {
    if (static_cast<int>(row.size()) != inst.n_ops_per_job) {
      out.emplace_back("machine has wrong number of operations");
      return out;
    }
    for (int m : row)
      if (m < 0 || m >= inst.n_machines) out.emplace_back("machine index out of range");
  }
  if (inst.kind == ProblemKind::FSP) {
    for (int j = 1; j < inst.n_jobs; ++j) {
      if (inst.machine[j] != inst.machine[0]) {
        out.emplace_back("flow shop jobs do not share a machine sequence");
        break;
      }
    }
  }
  return out;
}

InstanceFeatures encode_instance_features(const Instance& inst) {
  if (inst.n_jobs > kMaxJobs || inst.n_ops_per_job > kMaxOpsPerJob || inst.n_machines > kMaxMachines)
    throw DimensionError("instance " + inst.id + " exceeds the encoder padding bounds");
  constexpr int stride = 1 + kMaxMachines;
  InstanceFeatures f;
  f.values.assign(kFeatureLength, 0.0);
  f.mask.assign(kFeatureLength, 0);
  for (int j = 0; j < inst.n_jobs; ++j) {
    for (int k = 0; k < inst.n_ops_per_job; ++k) {
      const int base = (j * kMaxOpsPerJob + k) * stride;
      f.values[base] = static_cast<double>(inst.proc_time[j][k]) / kMaxProcTime;
      for (int m : inst.eligible_machines(j, k)) f.values[base + 1 + m] = 1.0;
      for (int i = 0; i < 1 + inst.n_machines; ++i) f.mask[base + i] = 1;
    }
  }
  f.values[kFeatureLength - 2] = static_cast<double>(inst.n_jobs) / kMaxJobs;
  f.values[kFeatureLength - 1] = static_cast<double>(inst.n_machines) / kMaxMachines;
  f.mask[kFeatureLength - 2] = 1;
  f.mask[kFeatureLength - 1] = 1;
  return f;
}

void to_json(nlohmann::json& j, const Instance& inst) {
  j = nlohmann::json{{"kind", to_string(inst.kind)},
                     {"n_jobs", inst.n_jobs},
                     {"n_ops_per_job", inst.n_ops_per_job},
                     {"n_machines", inst.n_machines},
                     {"proc_time", inst.proc_time},
                     {"id", inst.id}};
  if (inst.kind == ProblemKind::FJSP)
    j["eligible"] = inst.eligible;
  else
    j["machine"] = inst.machine;
}

void from_json(const nlohmann::json& j, Instance& inst) {
  try {
    inst.kind = parse_problem_kind(j.at("kind").get<std::string>());
    inst.n_jobs = j.at("n_jobs").get<int>();
    inst.n_ops_per_job = j.at("n_ops_per_job").get<int>();
    inst.n_machines = j.at("n_machines").get<int>();
    inst.proc_time = j.at("proc_time").get<std::vector<std::vector<int>>>();
    inst.id = j.value("id", std::string{});
    inst.machine.clear();
    inst.eligible.clear();
    if (inst.kind == ProblemKind::FJSP)
      inst.eligible = j.at("eligible").get<std::vector<std::vector<std::vector<int>>>>();
    else
      inst.machine = j.at("machine").get<std::vector<std::vector<int>>>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed instance: ") + e.what());
  }
}

Instance load_instance(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open instance file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("cannot parse " + path + ": " + e.what());
  }
  return j.get<Instance>();
}

void save_instance(const Instance& inst, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write instance file " + path);
  out << nlohmann::json(inst).dump(2) << '\n';
}

}  // namespace goal
