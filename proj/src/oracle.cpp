#include "goal/oracle.hpp"

#include <algorithm>
#include <filesystem>
#include <map>
#include <fstream>
#include <numeric>
#include <queue>
#include <set>

#include "goal/errors.hpp"
#include "goal/rng.hpp"

namespace goal {

namespace {

std::vector<int> start_key(const Schedule& s) {
  std::vector<int> key;
  for (const auto& row : s.start) key.insert(key.end(), row.begin(), row.end());
  return key;
}

// Semi-active starts for fixed per-machine orders; false when the orders
// together with job precedence contain a cycle.
bool semi_active_starts(const Instance& inst, const std::vector<std::vector<int>>& machine_orders,
                        std::vector<int>& start) {
  const int k_ops = inst.num_ops();
  std::vector<std::vector<int>> succ(k_ops);
  std::vector<int> indeg(k_ops, 0);
  for (int j = 0; j < inst.n_jobs; ++j)
    for (int k = 0; k + 1 < inst.n_ops_per_job; ++k) {
      succ[inst.op_index(j, k)].push_back(inst.op_index(j, k + 1));
      ++indeg[inst.op_index(j, k + 1)];
    }
  for (const auto& seq : machine_orders)
    for (std::size_t i = 1; i < seq.size(); ++i) {
      succ[seq[i - 1]].push_back(seq[i]);
      ++indeg[seq[i]];
    }
  start.assign(k_ops, 0);
  std::queue<int> ready;
  for (int a = 0; a < k_ops; ++a)
    if (indeg[a] == 0) ready.push(a);
  int seen = 0;
  while (!ready.empty()) {
    const int a = ready.front();
    ready.pop();
    ++seen;
    const int finish = start[a] + inst.proc_time[inst.job_of(a)][inst.op_of(a)];
    for (int b : succ[a]) {
      start[b] = std::max(start[b], finish);
      if (--indeg[b] == 0) ready.push(b);
    }
  }
  return seen == k_ops;
}

std::vector<Schedule> enumerate_exhaustive(const Instance& inst, std::size_t limit) {
  if (inst.kind == ProblemKind::FJSP) throw ConfigError("exhaustive enumeration supports JSP/FSP only");
  if (inst.num_ops() > kMaxExhaustiveOps)
    throw ConfigError("exhaustive enumeration requires K <= " + std::to_string(kMaxExhaustiveOps));

  std::vector<std::vector<int>> orders(inst.n_machines);
  for (int a = 0; a < inst.num_ops(); ++a) orders[inst.machine[inst.job_of(a)][inst.op_of(a)]].push_back(a);
  for (auto& seq : orders) std::sort(seq.begin(), seq.end());

  std::vector<Schedule> out;
  std::vector<int> start;
  // Odometer over next_permutation of each machine's sequence.
  while (out.size() < limit) {
    if (semi_active_starts(inst, orders, start)) {
      Schedule s;
      s.instance_id = inst.id;
      s.start.assign(inst.n_jobs, std::vector<int>(inst.n_ops_per_job));
      s.machine = inst.machine;
      for (int a = 0; a < inst.num_ops(); ++a) s.start[inst.job_of(a)][inst.op_of(a)] = start[a];
      out.push_back(std::move(s));
    }
    std::size_t m = 0;
    for (; m < orders.size(); ++m)
      if (std::next_permutation(orders[m].begin(), orders[m].end())) break;
    if (m == orders.size()) break;
  }
  return out;
}

}  // namespace

std::vector<Schedule> enumerate_feasible(const Instance& inst, std::size_t limit, std::uint64_t seed,
                                         const EnumerateOptions& opts) {
  if (limit < 1) throw ConfigError("limit must be at least 1");
  if (opts.exhaustive) return enumerate_exhaustive(inst, limit);

  Rng rng(seed, 0x0A11CE);
  std::set<std::vector<int>> seen;
  std::vector<Schedule> out;
  std::vector<double> priority(inst.num_ops());
  const std::size_t attempts = limit * static_cast<std::size_t>(std::max(1, opts.attempts_per_schedule));
  for (std::size_t attempt = 0; attempt < attempts && out.size() < limit; ++attempt) {
    for (auto& p : priority) p = rng.uniform();
    Schedule s = dispatch_by_priority(priority, inst);
    // Canonicalize to a fixed point of decode(label(.)); identity for JSP/FSP.
    bool fixed = false;
    for (int iter = 0; iter < 8 && !fixed; ++iter) {
      Schedule next = decode(label_decision(s, inst), inst);
      fixed = next == s;
      s = std::move(next);
    }
    if (!fixed) continue;
    if (seen.insert(start_key(s)).second) out.push_back(std::move(s));
  }
  return out;
}

Target normalize_targets(const ObjectiveVector& obj, const Instance& inst) {
  const int total = inst.total_processing_time();
  if (total <= 0) throw ConfigError("instance has no processing time");
  return {obj.c_max / total, obj.resilience};
}

ObjectiveVector denormalize_targets(const Target& u, const Instance& inst) {
  return {u[0] * inst.total_processing_time(), u[1]};
}

std::string_view to_string(Split split) { return split == Split::Train ? "train" : "test"; }

Split parse_split(std::string_view text) {
  if (text == "train") return Split::Train;
  if (text == "test") return Split::Test;
  throw ConfigError("unknown split '" + std::string(text) + "'");
}

DatasetShard build_dataset(const GeneratorConfig& cfg, int n_instances, std::size_t limit, std::uint64_t seed,
                           std::uint64_t first_index, Split split) {
  check_generator_config(cfg);
  if (n_instances < 0) throw ConfigError("n_instances must be non-negative");
  DatasetShard shard;
  shard.split = split;
  for (int i = 0; i < n_instances; ++i) {
    const std::uint64_t index = first_index + static_cast<std::uint64_t>(i);
    Instance inst = generate_instance(cfg, index);
    const auto schedules = enumerate_feasible(inst, limit, mix_seed(seed, index));
    const int inst_idx = static_cast<int>(shard.instances.size());
    for (const auto& s : schedules) {
      LabeledSample sample;
      sample.instance = inst_idx;
      sample.x = label_decision(s, inst);
      sample.objectives = evaluate(s, inst);
      sample.u = normalize_targets(sample.objectives, inst);
      shard.samples.push_back(std::move(sample));
    }
    shard.instances.push_back(std::move(inst));
  }
  return shard;
}

DatasetShard merge_shards(const std::vector<DatasetShard>& shards) {
  DatasetShard out;
  if (!shards.empty()) out.split = shards.front().split;
  for (const auto& shard : shards) {
    const int offset = static_cast<int>(out.instances.size());
    out.instances.insert(out.instances.end(), shard.instances.begin(), shard.instances.end());
    for (auto sample : shard.samples) {
      sample.instance += offset;
      out.samples.push_back(std::move(sample));
    }
  }
  return out;
}

ShardFiles write_shard(const DatasetShard& shard, const std::string& dir, const std::string& name) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  ShardFiles files{name, name + ".instances.jsonl", name + ".samples.jsonl"};
  std::ofstream inst_out(fs::path(dir) / files.instances_file);
  std::ofstream samp_out(fs::path(dir) / files.samples_file);
  if (!inst_out || !samp_out) throw FormatError("cannot write shard files in " + dir);
  for (const auto& inst : shard.instances) inst_out << nlohmann::json(inst).dump() << '\n';
  for (const auto& s : shard.samples) {
    nlohmann::json rec{{"instance", shard.instances[s.instance].id},
                       {"x", s.x.to_bit_string()},
                       {"c_max", s.objectives.c_max},
                       {"resilience", s.objectives.resilience},
                       {"u", s.u}};
    samp_out << rec.dump() << '\n';
  }
  return files;
}

DatasetShard read_shard(const std::string& instances_file, const std::string& samples_file, Split split) {
  DatasetShard shard;
  shard.split = split;
  std::map<std::string, int> by_id;
  std::ifstream inst_in(instances_file);
  if (!inst_in) throw FormatError("cannot open " + instances_file);
  std::string line;
  while (std::getline(inst_in, line)) {
    if (line.empty()) continue;
    Instance inst = nlohmann::json::parse(line).get<Instance>();
    by_id[inst.id] = static_cast<int>(shard.instances.size());
    shard.instances.push_back(std::move(inst));
  }
  std::ifstream samp_in(samples_file);
  if (!samp_in) throw FormatError("cannot open " + samples_file);
  while (std::getline(samp_in, line)) {
    if (line.empty()) continue;
    const auto rec = nlohmann::json::parse(line);
    const auto it = by_id.find(rec.at("instance").get<std::string>());
    if (it == by_id.end()) throw FormatError("sample references unknown instance");
    LabeledSample s;
    s.instance = it->second;
    s.x = DecisionMatrix::from_bit_string(rec.at("x").get<std::string>(), it->first);
    if (s.x.size() != shard.instances[s.instance].num_ops()) throw FormatError("decision matrix size mismatch");
    s.objectives = {rec.at("c_max").get<double>(), rec.at("resilience").get<double>()};
    s.u = rec.at("u").get<Target>();
    shard.samples.push_back(std::move(s));
  }
  return shard;
}

namespace {

nlohmann::json entry_to_json(const ManifestEntry& e) {
  return {{"name", e.files.name},
          {"instances_file", e.files.instances_file},
          {"samples_file", e.files.samples_file},
          {"split", to_string(e.split)},
          {"kind", e.kind},
          {"n_instances", e.n_instances},
          {"n_samples", e.n_samples}};
}

}  // namespace

void update_manifest(const std::string& dir, const ManifestEntry& entry) {
  namespace fs = std::filesystem;
  const fs::path path = fs::path(dir) / "manifest.json";
  std::vector<ManifestEntry> entries;
  if (fs::exists(path)) entries = read_manifest(path.string());
  std::erase_if(entries, [&](const ManifestEntry& e) { return e.files.name == entry.files.name; });
  entries.push_back(entry);
  nlohmann::json j{{"version", 1}, {"shards", nlohmann::json::array()}};
  for (const auto& e : entries) j["shards"].push_back(entry_to_json(e));
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

std::vector<ManifestEntry> read_manifest(const std::string& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw FormatError("cannot open manifest " + manifest_path);
  nlohmann::json j;
  try {
    in >> j;
    std::vector<ManifestEntry> out;
    for (const auto& s : j.at("shards")) {
      ManifestEntry e;
      e.files = {s.at("name").get<std::string>(), s.at("instances_file").get<std::string>(),
                 s.at("samples_file").get<std::string>()};
      e.split = parse_split(s.at("split").get<std::string>());
      e.kind = s.value("kind", std::string{});
      e.n_instances = s.value("n_instances", 0);
      e.n_samples = s.value("n_samples", 0);
      out.push_back(std::move(e));
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("malformed manifest " + manifest_path + ": " + e.what());
  }
}

DatasetShard load_split(const std::string& manifest_path, Split split) {
  namespace fs = std::filesystem;
  const fs::path dir = fs::path(manifest_path).parent_path();
  std::vector<DatasetShard> shards;
  for (const auto& e : read_manifest(manifest_path)) {
    if (e.split != split) continue;
    shards.push_back(read_shard((dir / e.files.instances_file).string(), (dir / e.files.samples_file).string(), split));
  }
  DatasetShard merged = merge_shards(shards);
  merged.split = split;
  return merged;
}

}  // namespace goal
