// goal: dataset generation, training, sampling, evaluation and serving.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "goal/diffusion.hpp"
#include "goal/errors.hpp"
#include "goal/eval.hpp"
#include "goal/kernels.hpp"
#include "goal/oracle.hpp"
#include "goal/service.hpp"

namespace fs = std::filesystem;
using namespace goal;

namespace {

std::string env_or(const char* name, const std::string& fallback) {
  const char* v = std::getenv(name);
  return v != nullptr && *v != '\0' ? std::string(v) : fallback;
}

std::string data_dir() { return env_or("GOAL_DATA_DIR", "data"); }
std::string checkpoint_dir() { return env_or("GOAL_CHECKPOINT_DIR", "checkpoints"); }

std::vector<std::pair<int, int>> parse_sizes(const std::vector<std::string>& items) {
  std::vector<std::pair<int, int>> out;
  for (const auto& s : items) {
    const auto x = s.find('x');
    if (x == std::string::npos) throw ConfigError("size '" + s + "' must look like JOBSxMACHINES");
    try {
      out.emplace_back(std::stoi(s.substr(0, x)), std::stoi(s.substr(x + 1)));
    } catch (const std::exception&) {
      throw ConfigError("size '" + s + "' must look like JOBSxMACHINES");
    }
  }
  return out;
}

std::string sizes_text(const std::vector<std::pair<int, int>>& sizes) {
  std::string s;
  for (const auto& [j, m] : sizes) s += (s.empty() ? "" : ",") + std::to_string(j) + "x" + std::to_string(m);
  return s;
}

struct GenOpts {
  std::string kind = "jsp";
  int jobs = 5, machines = 3;
  int jobs_max = 0, machines_max = 0;
  int instances = 10;
  std::size_t limit = 50;
  std::uint64_t seed = 0;
  std::uint64_t first_index = 0;
  std::string split = "train";
  std::string out;
  std::string name;
};

int run_gen(const GenOpts& o) {
  GeneratorConfig cfg;
  cfg.kind = parse_problem_kind(o.kind);
  cfg.jobs_min = o.jobs;
  cfg.jobs_max = o.jobs_max > 0 ? o.jobs_max : o.jobs;
  cfg.machines_min = o.machines;
  cfg.machines_max = o.machines_max > 0 ? o.machines_max : o.machines;
  cfg.seed = o.seed;
  const Split split = parse_split(o.split);
  const std::string dir = o.out.empty() ? data_dir() : o.out;
  std::string name = o.name;
  if (name.empty())
    name = o.kind + "-" + std::to_string(cfg.jobs_min) + "x" + std::to_string(cfg.machines_min) + "-" + o.split +
           "-s" + std::to_string(o.seed);
  const auto shard = build_dataset(cfg, o.instances, o.limit, o.seed, o.first_index, split);
  const auto files = write_shard(shard, dir, name);
  update_manifest(dir, {files, split, o.kind, static_cast<int>(shard.instances.size()),
                        static_cast<int>(shard.samples.size())});
  std::cout << "wrote " << shard.samples.size() << " samples for " << shard.instances.size() << " instances to "
            << (fs::path(dir) / files.samples_file).string() << '\n';
  return 0;
}

struct TrainOpts {
  std::string profile = "desk";
  std::string data;
  std::string out;
  std::string loss_log;
  int epochs = -1, batch = -1, hidden = -1, layers = -1, timesteps = -1;
  double lr = -1.0;
  std::uint64_t seed = 0;
  int log_every = 50;
};

int run_train(const TrainOpts& o) {
  TrainConfig cfg = TrainConfig::profile(o.profile);
  if (o.epochs >= 0) cfg.epochs = o.epochs;
  if (o.batch > 0) cfg.batch = o.batch;
  if (o.hidden > 0) cfg.model.hidden = o.hidden;
  if (o.layers > 0) cfg.model.layers = o.layers;
  if (o.timesteps > 0) cfg.timesteps = o.timesteps;
  if (o.lr > 0.0) cfg.lr = o.lr;
  cfg.seed = o.seed;
  const std::string manifest = o.data.empty() ? (fs::path(data_dir()) / "manifest.json").string() : o.data;
  const auto data = load_split(manifest, Split::Train);
  if (data.samples.empty()) throw ConfigError("no training samples in " + manifest);
  std::set<ProblemKind> kinds;
  for (const auto& inst : data.instances) kinds.insert(inst.kind);
  GoalModel model = make_model(cfg, {kinds.begin(), kinds.end()});
  model.id = o.profile + "-s" + std::to_string(o.seed);
  model.metadata["profile"] = o.profile;
  model.metadata["samples"] = data.samples.size();
  std::cerr << "training " << model.net->store().parameter_count() << " parameters on " << data.samples.size()
            << " samples (" << kernels::isa_name(kernels::active_isa()) << ")\n";
  const auto result = train(model, data, cfg, [&](const TrainProgress& p) {
    if (o.log_every > 0 && (p.step % o.log_every == 0 || p.step == p.total_steps))
      std::cerr << "epoch " << p.epoch + 1 << " step " << p.step << "/" << p.total_steps << " loss " << p.loss << '\n';
  });
  model.metadata["final_loss"] = result.epoch_loss.empty() ? 0.0 : result.epoch_loss.back();
  const std::string out = o.out.empty() ? (fs::path(checkpoint_dir()) / ("goal-" + o.profile + ".ckpt")).string() : o.out;
  if (fs::path(out).has_parent_path()) fs::create_directories(fs::path(out).parent_path());
  save_model(model, out);
  if (!o.loss_log.empty()) {
    std::ofstream log(o.loss_log);
    if (!log) throw FormatError("cannot write " + o.loss_log);
    log << "step,loss\n";
    for (std::size_t i = 0; i < result.step_loss.size(); ++i) log << i + 1 << ',' << result.step_loss[i] << '\n';
  }
  std::cout << "saved " << out << " after " << result.seconds << " s\n";
  return 0;
}

struct SampleOpts {
  std::string checkpoint, instance, out;
  double cmax = 0.0, resilience = 0.0;
  int candidates = 32;
  SamplerConfig sampler;
  std::string schedule = "linear";
  std::uint64_t seed = 0;
};

int run_sample(SampleOpts o) {
  GoalModel model = load_model(o.checkpoint);
  const Instance inst = load_instance(o.instance);
  if (const auto v = validate_instance(inst); !v.empty()) throw ConfigError("invalid instance: " + v.front());
  if (!model.covers(inst.kind))
    throw ConfigError("checkpoint was not trained on " + std::string(to_string(inst.kind)) + " instances");
  if (!(o.cmax > 0.0) || o.resilience < 0.0) throw ConfigError("--cmax must be positive and --resilience >= 0");
  o.sampler.schedule = parse_tau_schedule(o.schedule);
  const ObjectiveVector target{o.cmax, o.resilience};
  const auto ctx = make_context(inst);
  const auto res = sample(model, *ctx, normalize_targets(target, inst), o.sampler, o.candidates, o.seed);
  nlohmann::json list = nlohmann::json::array();
  for (const auto& c : res.candidates)
    list.push_back({{"schedule", c.schedule},
                    {"objectives", c.objectives},
                    {"feasible", is_feasible(c.schedule, inst).feasible},
                    {"mape_cmax", mape(c.objectives.c_max, target.c_max)},
                    {"mape_resilience", mape(c.objectives.resilience, target.resilience)}});
  const nlohmann::json doc{{"instance_id", inst.id},
                           {"target", target},
                           {"sampling_ms", res.seconds * 1000.0},
                           {"candidates", list}};
  if (o.out.empty()) {
    std::cout << doc.dump(2) << '\n';
  } else {
    std::ofstream out(o.out);
    if (!out) throw FormatError("cannot write " + o.out);
    out << doc.dump(2) << '\n';
  }
  return 0;
}

struct EvalOpts {
  std::vector<std::string> checkpoints;
  std::vector<std::string> methods;
  std::vector<std::string> kinds{"jsp"};
  std::vector<std::string> sizes{"5x3"};
  int instances = 100, targets = 1, candidates = 32;
  int population = 100, generations = 500;
  SamplerConfig sampler;
  std::string schedule = "linear";
  std::uint64_t seed = 0;
  std::string out_dir = "report";
};

int run_eval(EvalOpts o, bool plot) {
  BenchmarkConfig cfg;
  cfg.methods = o.methods;
  cfg.sizes = parse_sizes(o.sizes);
  cfg.kinds.clear();
  for (const auto& k : o.kinds) cfg.kinds.push_back(parse_problem_kind(k));
  cfg.n_instances = o.instances;
  cfg.targets_per_instance = o.targets;
  cfg.candidates = o.candidates;
  cfg.seed = o.seed;
  cfg.sampler = o.sampler;
  cfg.sampler.schedule = parse_tau_schedule(o.schedule);
  cfg.moea.population = o.population;
  cfg.moea.generations = o.generations;

  std::vector<std::unique_ptr<GoalModel>> owned;
  std::map<ProblemKind, GoalModel*> models;
  for (const auto& path : o.checkpoints) {
    owned.push_back(std::make_unique<GoalModel>(load_model(path)));
    for (auto k : owned.back()->kinds) models.emplace(k, owned.back().get());
  }
  std::cerr << "evaluating " << sizes_text(cfg.sizes) << " with " << cfg.n_instances << " instances\n";
  const auto report = run_benchmark(cfg, models);
  fs::create_directories(o.out_dir);
  write_report_csv(report, (fs::path(o.out_dir) / "report.csv").string());
  write_trials_json(report, (fs::path(o.out_dir) / "trials.json").string());
  if (plot) write_plot_csv(report, (fs::path(o.out_dir) / "time_to_epsilon.csv").string());
  std::ifstream csv(fs::path(o.out_dir) / "report.csv");
  std::cout << csv.rdbuf();
  return 0;
}

struct ServeOpts {
  ServiceConfig service;
  std::vector<std::string> checkpoints;
  std::string schedule = "linear";
};

int run_serve(ServeOpts o) {
  o.service.sampler.schedule = parse_tau_schedule(o.schedule);
  Service svc(o.service);
  std::vector<std::string> paths = o.checkpoints;
  if (paths.empty() && fs::is_directory(checkpoint_dir()))
    for (const auto& e : fs::directory_iterator(checkpoint_dir()))
      if (e.path().extension() == ".ckpt") paths.push_back(e.path().string());
  for (const auto& p : paths) {
    GoalModel m = load_model(p);
    if (m.id.empty()) m.id = fs::path(p).stem().string();
    svc.add_model(std::move(m));
  }
  std::cerr << "serving " << svc.model_count() << " model(s) on " << o.service.host << ":" << o.service.port << '\n';
  svc.run();
  return 0;
}

void add_sampler_flags(CLI::App* cmd, SamplerConfig& s, std::string& schedule) {
  cmd->add_option("--steps", s.steps, "Reverse diffusion steps M")->capture_default_str();
  cmd->add_option("--schedule", schedule, "Timestep subsequence")
      ->check(CLI::IsMember({"linear", "cosine"}))
      ->capture_default_str();
  cmd->add_option("--guidance", s.guidance, "Guidance strength (>= 1)")->capture_default_str();
  cmd->add_option("--threshold", s.threshold, "Final-step probability threshold")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Target-conditioned diffusion scheduler"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  GenOpts gen;
  auto* gen_cmd = app.add_subcommand("gen", "Generate instances and labeled oracle schedules");
  gen_cmd->add_option("--kind", gen.kind, "Problem kind")->check(CLI::IsMember({"jsp", "fsp", "fjsp"}))->capture_default_str();
  gen_cmd->add_option("--jobs", gen.jobs, "Jobs (minimum when --jobs-max is given)")->capture_default_str();
  gen_cmd->add_option("--jobs-max", gen.jobs_max, "Maximum jobs (defaults to --jobs)");
  gen_cmd->add_option("--machines", gen.machines, "Machines (minimum when --machines-max is given)")->capture_default_str();
  gen_cmd->add_option("--machines-max", gen.machines_max, "Maximum machines (defaults to --machines)");
  gen_cmd->add_option("--instances", gen.instances, "Number of instances")->capture_default_str();
  gen_cmd->add_option("--limit", gen.limit, "Schedules per instance")->capture_default_str();
  gen_cmd->add_option("--seed", gen.seed, "Random seed")->capture_default_str();
  gen_cmd->add_option("--first-index", gen.first_index, "Index of the first generated instance")->capture_default_str();
  gen_cmd->add_option("--split", gen.split, "Dataset split")->check(CLI::IsMember({"train", "test"}))->capture_default_str();
  gen_cmd->add_option("--out", gen.out, "Output directory (default $GOAL_DATA_DIR or ./data)");
  gen_cmd->add_option("--name", gen.name, "Shard name");

  TrainOpts tr;
  auto* train_cmd = app.add_subcommand("train", "Train the denoiser on the train split of a manifest");
  train_cmd->add_option("--profile", tr.profile, "Model/training profile")
      ->check(CLI::IsMember({"desk", "paper"}))
      ->capture_default_str();
  train_cmd->add_option("--data", tr.data, "Manifest path (default $GOAL_DATA_DIR/manifest.json)");
  train_cmd->add_option("--out", tr.out, "Checkpoint path (default $GOAL_CHECKPOINT_DIR/goal-<profile>.ckpt)");
  train_cmd->add_option("--loss-log", tr.loss_log, "Write per-step losses as CSV");
  train_cmd->add_option("--epochs", tr.epochs, "Override profile epochs");
  train_cmd->add_option("--batch", tr.batch, "Override profile batch size");
  train_cmd->add_option("--lr", tr.lr, "Override profile learning rate");
  train_cmd->add_option("--hidden", tr.hidden, "Override hidden width H");
  train_cmd->add_option("--layers", tr.layers, "Override layer count L");
  train_cmd->add_option("--timesteps", tr.timesteps, "Override diffusion horizon T");
  train_cmd->add_option("--seed", tr.seed, "Random seed")->capture_default_str();
  train_cmd->add_option("--log-every", tr.log_every, "Progress line every N steps (0 = quiet)")->capture_default_str();

  SampleOpts sm;
  auto* sample_cmd = app.add_subcommand("sample", "Sample schedules for an instance and objective target");
  sample_cmd->add_option("--checkpoint", sm.checkpoint, "Checkpoint path")->required();
  sample_cmd->add_option("--instance", sm.instance, "Instance JSON file")->required();
  sample_cmd->add_option("--cmax", sm.cmax, "Target makespan")->required();
  sample_cmd->add_option("--resilience", sm.resilience, "Target resilience")->required();
  sample_cmd->add_option("--candidates", sm.candidates, "Number of candidates")->capture_default_str();
  sample_cmd->add_option("--seed", sm.seed, "Random seed")->capture_default_str();
  sample_cmd->add_option("--out", sm.out, "Output JSON (default stdout)");
  add_sampler_flags(sample_cmd, sm.sampler, sm.schedule);

  EvalOpts ev;
  EvalOpts bn;
  bn.methods = {"goal", "nsga2", "moead"};
  auto add_eval_flags = [](CLI::App* cmd, EvalOpts& o) {
    cmd->add_option("--checkpoint", o.checkpoints, "Checkpoint path (repeatable)");
    cmd->add_option("--methods", o.methods, "goal, nsga2 and/or moead")
        ->check(CLI::IsMember({"goal", "nsga2", "moead"}))
        ->capture_default_str();
    cmd->add_option("--kinds", o.kinds, "Problem kinds")->check(CLI::IsMember({"jsp", "fsp", "fjsp"}))->capture_default_str();
    cmd->add_option("--sizes", o.sizes, "Sizes as JOBSxMACHINES")->capture_default_str();
    cmd->add_option("--instances", o.instances, "Held-out instances per size")->capture_default_str();
    cmd->add_option("--targets", o.targets, "Targets per instance")->capture_default_str();
    cmd->add_option("--candidates", o.candidates, "Diffusion candidates per trial")->capture_default_str();
    cmd->add_option("--population", o.population, "Baseline population")->capture_default_str();
    cmd->add_option("--generations", o.generations, "Baseline generations")->capture_default_str();
    cmd->add_option("--seed", o.seed, "Random seed")->capture_default_str();
    cmd->add_option("--out-dir", o.out_dir, "Report directory")->capture_default_str();
    add_sampler_flags(cmd, o.sampler, o.schedule);
  };
  ev.methods = {"goal"};
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate methods on held-out targets (report.csv, trials.json)");
  add_eval_flags(eval_cmd, ev);
  auto* bench_cmd = app.add_subcommand("bench", "Compare against the baselines and emit time-to-epsilon plot data");
  add_eval_flags(bench_cmd, bn);

  ServeOpts sv;
  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP service");
  serve_cmd->add_option("--port", sv.service.port, "Port")->capture_default_str();
  serve_cmd->add_option("--host", sv.service.host, "Bind address")->capture_default_str();
  serve_cmd->add_option("--checkpoint", sv.checkpoints, "Checkpoint path (repeatable; default all in $GOAL_CHECKPOINT_DIR)");
  serve_cmd->add_option("--ui-dir", sv.service.ui_dir, "Static UI directory served under /");
  serve_cmd->add_option("--seed", sv.service.seed, "Default sampling seed")->capture_default_str();
  add_sampler_flags(serve_cmd, sv.service.sampler, sv.schedule);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*gen_cmd) return run_gen(gen);
    if (*train_cmd) return run_train(tr);
    if (*sample_cmd) return run_sample(sm);
    if (*eval_cmd) return run_eval(ev, false);
    if (*bench_cmd) return run_eval(bn, true);
    if (*serve_cmd) return run_serve(sv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
