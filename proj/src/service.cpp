#include "goal/service.hpp"

#include <algorithm>

#include "goal/errors.hpp"
#include "goal/eval.hpp"
#include "goal/kernels.hpp"
#include "goal/oracle.hpp"
#include "httplib.h"

namespace goal {

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

template <typename U>
U field(const nlohmann::json& j, const char* key, U fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<U>();
  } catch (const nlohmann::json::exception&) {
    throw ServiceError(400, std::string("field '") + key + "' has the wrong type");
  }
}

}  // namespace

Service::Service(ServiceConfig cfg) : cfg_(std::move(cfg)) {}
Service::~Service() = default;

void Service::add_model(GoalModel model) {
  if (!model.net) throw ConfigError("model has no network");
  if (model.id.empty()) model.id = "model-" + std::to_string(models_.size());
  models_.push_back({std::move(model), std::make_unique<std::mutex>()});
}

nlohmann::json Service::health() const {
  return {{"status", "ok"}, {"models", models_.size()}, {"isa", kernels::isa_name(kernels::active_isa())}};
}

nlohmann::json Service::models() const {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& e : models_) {
    nlohmann::json kinds = nlohmann::json::array();
    for (auto k : e.model.kinds) kinds.push_back(to_string(k));
    out.push_back({{"id", e.model.id},
                   {"kinds", kinds},
                   {"config", e.model.net->config()},
                   {"timesteps", e.model.schedule.timesteps()}});
  }
  return out;
}

Instance Service::remember(Instance inst) {
  std::lock_guard<std::mutex> guard(cache_lock_);
  instances_[inst.id] = inst;
  return inst;
}

Instance Service::lookup_instance(const std::string& id) {
  std::lock_guard<std::mutex> guard(cache_lock_);
  const auto it = instances_.find(id);
  if (it == instances_.end()) throw ServiceError(404, "unknown instance '" + id + "'");
  return it->second;
}

nlohmann::json Service::create_instance(const nlohmann::json& request) {
  if (!request.is_object()) throw ServiceError(400, "request body must be a JSON object");
  GeneratorConfig cfg;
  try {
    cfg.kind = parse_problem_kind(field<std::string>(request, "kind", "jsp"));
  } catch (const ConfigError& e) {
    throw ServiceError(400, e.what());
  }
  const int jobs = field<int>(request, "jobs", 5);
  const int machines = field<int>(request, "machines", 3);
  cfg.jobs_min = cfg.jobs_max = jobs;
  cfg.machines_min = cfg.machines_max = machines;
  cfg.ops_per_job = field<int>(request, "ops_per_job", 3);
  cfg.seed = field<std::uint64_t>(request, "seed", 0);
  const auto index = field<std::uint64_t>(request, "index", 0);
  if (jobs > kMaxJobs || machines > kMaxMachines || cfg.ops_per_job > kMaxOpsPerJob)
    throw ServiceError(400, "instance exceeds the supported size (" + std::to_string(kMaxJobs) + " jobs, " +
                                std::to_string(kMaxMachines) + " machines, " + std::to_string(kMaxOpsPerJob) +
                                " operations per job)");
  try {
    check_generator_config(cfg);
  } catch (const ConfigError& e) {
    throw ServiceError(400, e.what());
  }
  return remember(generate_instance(cfg, index));
}

nlohmann::json Service::instance_range(const std::string& id) {
  {
    std::lock_guard<std::mutex> guard(cache_lock_);
    if (const auto it = ranges_.find(id); it != ranges_.end()) return it->second;
  }
  const Instance inst = lookup_instance(id);
  const auto schedules = enumerate_feasible(inst, cfg_.range_limit, mix_seed(cfg_.seed, fnv1a(id)));
  double cmin = 0, cmax = 0, rmin = 0, rmax = 0;
  bool first = true;
  for (const auto& s : schedules) {
    const auto o = evaluate(s, inst);
    if (first) {
      cmin = cmax = o.c_max;
      rmin = rmax = o.resilience;
      first = false;
    }
    cmin = std::min(cmin, o.c_max);
    cmax = std::max(cmax, o.c_max);
    rmin = std::min(rmin, o.resilience);
    rmax = std::max(rmax, o.resilience);
  }
  nlohmann::json out{{"instance_id", id},
                     {"samples", schedules.size()},
                     {"c_max", {{"min", cmin}, {"max", cmax}}},
                     {"resilience", {{"min", rmin}, {"max", rmax}}}};
  std::lock_guard<std::mutex> guard(cache_lock_);
  ranges_[id] = out;
  return out;
}

nlohmann::json Service::solve(const nlohmann::json& request) {
  if (!request.is_object()) throw ServiceError(400, "request body must be a JSON object");
  Instance inst;
  if (request.contains("instance") && request.at("instance").is_object()) {
    try {
      inst = request.at("instance").get<Instance>();
    } catch (const std::exception& e) {
      throw ServiceError(400, std::string("malformed instance: ") + e.what());
    }
    if (const auto v = validate_instance(inst); !v.empty()) throw ServiceError(400, "invalid instance: " + v.front());
    if (inst.n_jobs > kMaxJobs || inst.n_machines > kMaxMachines || inst.n_ops_per_job > kMaxOpsPerJob)
      throw ServiceError(400, "instance exceeds the supported size");
    if (inst.id.empty()) inst.id = "inline-" + std::to_string(fnv1a(request.at("instance").dump()));
    remember(inst);
  } else if (request.contains("instance_id")) {
    inst = lookup_instance(field<std::string>(request, "instance_id", ""));
  } else {
    throw ServiceError(400, "request needs 'instance' or 'instance_id'");
  }

  if (!request.contains("target") || !request.at("target").is_object())
    throw ServiceError(400, "request needs a 'target' object");
  ObjectiveVector target;
  target.c_max = field<double>(request.at("target"), "c_max", 0.0);
  target.resilience = field<double>(request.at("target"), "resilience", 0.0);
  if (!(target.c_max > 0.0) || target.resilience < 0.0)
    throw ServiceError(400, "target needs c_max > 0 and resilience >= 0");

  const int candidates = field<int>(request, "candidates", cfg_.default_candidates);
  if (candidates < 1 || candidates > kMaxCandidates)
    throw ServiceError(400, "candidates must lie in [1, " + std::to_string(kMaxCandidates) + "]");
  SamplerConfig sampler = cfg_.sampler;
  sampler.guidance = field<double>(request, "guidance", sampler.guidance);
  sampler.steps = field<int>(request, "steps", sampler.steps);
  sampler.threshold = field<double>(request, "threshold", sampler.threshold);
  try {
    sampler.schedule = parse_tau_schedule(field<std::string>(request, "schedule", std::string(to_string(sampler.schedule))));
  } catch (const ConfigError& e) {
    throw ServiceError(400, e.what());
  }
  const auto seed = field<std::uint64_t>(request, "seed", cfg_.seed);
  const std::string wanted = field<std::string>(request, "model", "");

  Entry* entry = nullptr;
  for (auto& e : models_)
    if (e.model.covers(inst.kind) && (wanted.empty() || wanted == e.model.id)) {
      entry = &e;
      break;
    }
  if (entry == nullptr)
    throw ServiceError(409, "no checkpoint covers " + std::string(to_string(inst.kind)) + " instances");
  try {
    check_sampler_config(sampler, entry->model.schedule.timesteps());
  } catch (const ConfigError& e) {
    throw ServiceError(400, e.what());
  }

  const auto ctx = make_context(inst);
  SampleResult res;
  {
    std::lock_guard<std::mutex> guard(*entry->lock);
    res = sample(entry->model, *ctx, normalize_targets(target, inst), sampler, candidates, seed);
  }

  struct Row {
    nlohmann::json body;
    double key;
  };
  std::vector<Row> rows;
  for (const auto& c : res.candidates) {
    const double mc = mape(c.objectives.c_max, target.c_max);
    const double mr = mape(c.objectives.resilience, target.resilience);
    rows.push_back({{{"schedule", c.schedule},
                     {"objectives", c.objectives},
                     {"mape_cmax", mc},
                     {"mape_resilience", mr},
                     {"feasible", is_feasible(c.schedule, inst).feasible}},
                    std::max(mc, mr)});
  }
  std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.key < b.key; });
  nlohmann::json list = nlohmann::json::array();
  for (auto& r : rows) list.push_back(std::move(r.body));
  return {{"instance_id", inst.id},
          {"target", target},
          {"candidates", list},
          {"sampling_ms", res.seconds * 1000.0},
          {"model", entry->model.id}};
}

void Service::install(httplib::Server& server) {
  server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                              {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                              {"Access-Control-Allow-Headers", "Content-Type"}});
  server.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

  auto wrap = [](auto&& fn) {
    return [fn](const httplib::Request& req, httplib::Response& res) {
      try {
        res.set_content(fn(req).dump(), "application/json");
      } catch (const ServiceError& e) {
        res.status = e.status();
        res.set_content(nlohmann::json{{"error", e.what()}}.dump(), "application/json");
      } catch (const nlohmann::json::exception& e) {
        res.status = 400;
        res.set_content(nlohmann::json{{"error", std::string("bad JSON: ") + e.what()}}.dump(), "application/json");
      } catch (const std::invalid_argument& e) {
        res.status = 400;
        res.set_content(nlohmann::json{{"error", e.what()}}.dump(), "application/json");
      } catch (const std::exception& e) {
        res.status = 500;
        res.set_content(nlohmann::json{{"error", e.what()}}.dump(), "application/json");
      }
    };
  };

  server.Get("/api/health", wrap([this](const httplib::Request&) { return health(); }));
  server.Get("/api/models", wrap([this](const httplib::Request&) { return models(); }));
  server.Post("/api/instances", wrap([this](const httplib::Request& req) {
                return create_instance(nlohmann::json::parse(req.body));
              }));
  server.Get(R"(/api/instances/([^/]+)/range)",
             wrap([this](const httplib::Request& req) { return instance_range(req.matches[1].str()); }));
  server.Post("/api/solve", wrap([this](const httplib::Request& req) { return solve(nlohmann::json::parse(req.body)); }));
  if (!cfg_.ui_dir.empty() && !server.set_mount_point("/", cfg_.ui_dir))
    throw ConfigError("UI directory " + cfg_.ui_dir + " does not exist");
}

void Service::run() {
  httplib::Server server;
  install(server);
  if (!server.listen(cfg_.host, cfg_.port))
    throw std::runtime_error("cannot listen on " + cfg_.host + ":" + std::to_string(cfg_.port));
}

}  // namespace goal
