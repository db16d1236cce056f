#pragma once
// JSON-over-HTTP front end: instance generation, attainable-range hints and
// conditioned sampling.

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <vector>

#include "goal/diffusion.hpp"
#include "json.hpp"

namespace httplib {
class Server;
}

namespace goal {

struct ServiceConfig {
  std::string host = "0.0.0.0";
  int port = 8080;
  std::string ui_dir;  // served under / when non-empty
  std::size_t range_limit = 200;
  std::uint64_t seed = 0;
  SamplerConfig sampler;  // defaults for fields a solve request omits
  int default_candidates = 32;
};

inline constexpr int kMaxCandidates = 256;

// Carries the HTTP status to report.
class ServiceError : public std::runtime_error {
 public:
  ServiceError(int status, const std::string& msg) : std::runtime_error(msg), status_(status) {}
  int status() const { return status_; }

 private:
  int status_;
};

class Service {
 public:
  explicit Service(ServiceConfig cfg);
  ~Service();

  void add_model(GoalModel model);
  std::size_t model_count() const { return models_.size(); }

  // Request handlers; throw ServiceError with the status to return.
  nlohmann::json health() const;
  nlohmann::json models() const;
  nlohmann::json create_instance(const nlohmann::json& request);
  nlohmann::json instance_range(const std::string& id);
  nlohmann::json solve(const nlohmann::json& request);

  // Registers all routes (with CORS) on `server`.
  void install(httplib::Server& server);
  // Blocks serving on cfg.host:cfg.port.
  void run();

  const ServiceConfig& config() const { return cfg_; }

 private:
  struct Entry {
    GoalModel model;
    std::unique_ptr<std::mutex> lock;
  };

  Instance lookup_instance(const std::string& id);
  Instance remember(Instance inst);

  ServiceConfig cfg_;
  std::vector<Entry> models_;
  std::mutex cache_lock_;
  std::map<std::string, Instance> instances_;
  std::map<std::string, nlohmann::json> ranges_;
};

}  // namespace goal
