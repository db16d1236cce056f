#pragma once
// Feasible-schedule enumeration and labeled dataset assembly.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "goal/instance.hpp"
#include "goal/schedule.hpp"

namespace goal {

struct EnumerateOptions {
  // Enumerate every acyclic combination of per-machine orders instead of
  // sampling. JSP/FSP only, K <= kMaxExhaustiveOps.
  bool exhaustive = false;
  // Random mode gives up after limit * attempts_per_schedule dispatches.
  int attempts_per_schedule = 50;
};

inline constexpr int kMaxExhaustiveOps = 9;

// Distinct (by start-time vector) feasible schedules, at most `limit`.
// Random mode dispatches random priority keys and keeps only schedules that
// are fixed points of decode(label_decision(.)), so every returned schedule
// round-trips exactly.
std::vector<Schedule> enumerate_feasible(const Instance& inst, std::size_t limit, std::uint64_t seed,
                                         const EnumerateOptions& opts = {});

// Normalized conditioning target: (c_max / total processing time, resilience).
using Target = std::array<double, 2>;
Target normalize_targets(const ObjectiveVector& obj, const Instance& inst);
ObjectiveVector denormalize_targets(const Target& u, const Instance& inst);

enum class Split { Train, Test };
std::string_view to_string(Split split);
Split parse_split(std::string_view text);

struct LabeledSample {
  int instance = 0;  // index into DatasetShard::instances
  DecisionMatrix x;
  ObjectiveVector objectives;
  Target u{};
};

struct DatasetShard {
  Split split = Split::Train;
  std::vector<Instance> instances;
  std::vector<LabeledSample> samples;
};

// Instances generate_instance(cfg, first_index + i) for i < n_instances, each
// labeled with up to `limit` oracle schedules. Deterministic in (cfg, seed).
DatasetShard build_dataset(const GeneratorConfig& cfg, int n_instances, std::size_t limit, std::uint64_t seed,
                           std::uint64_t first_index = 0, Split split = Split::Train);

// Concatenates shards (instance indices are rebased).
DatasetShard merge_shards(const std::vector<DatasetShard>& shards);

// Writes <dir>/<name>.instances.jsonl and <dir>/<name>.samples.jsonl.
struct ShardFiles {
  std::string name;
  std::string instances_file;
  std::string samples_file;
};
ShardFiles write_shard(const DatasetShard& shard, const std::string& dir, const std::string& name);
DatasetShard read_shard(const std::string& instances_file, const std::string& samples_file, Split split);

struct ManifestEntry {
  ShardFiles files;
  Split split = Split::Train;
  std::string kind;
  int n_instances = 0;
  int n_samples = 0;
};

// manifest.json in `dir`; existing entries with the same name are replaced.
void update_manifest(const std::string& dir, const ManifestEntry& entry);
std::vector<ManifestEntry> read_manifest(const std::string& manifest_path);
// Loads and merges every shard of the given split listed in a manifest.
DatasetShard load_split(const std::string& manifest_path, Split split);

}  // namespace goal
