#include <algorithm>
#include <thread>

#include "doctest.h"
#include "goal/errors.hpp"
#include "goal/service.hpp"
#include "httplib.h"
#include "support.hpp"

using namespace goal;
using namespace goal::testing;
using nlohmann::json;

namespace {

GoalModel small_model(std::vector<ProblemKind> kinds, std::string id) {
  TrainConfig cfg;
  cfg.model.hidden = 8;
  cfg.model.embed_dim = 8;
  cfg.model.cond_dim = 8;
  cfg.model.layers = 2;
  cfg.timesteps = 50;
  auto m = make_model(cfg, std::move(kinds));
  m.id = std::move(id);
  return m;
}

// Starts `svc` on a loopback port for the lifetime of the object.
struct LiveServer {
  httplib::Server server;
  std::thread thread;
  int port = 0;

  explicit LiveServer(Service& svc) {
    svc.install(server);
    port = server.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  ~LiveServer() {
    server.stop();
    thread.join();
  }
};

int lower_bound_cmax(const Instance& inst) {
  int lb = 0;
  std::vector<int> load(inst.n_machines, 0);
  for (int j = 0; j < inst.n_jobs; ++j) {
    int sum = 0;
    for (int o = 0; o < inst.n_ops_per_job; ++o) {
      sum += inst.proc_time[j][o];
      load[inst.machine[j][o]] += inst.proc_time[j][o];
    }
    lb = std::max(lb, sum);
  }
  return std::max(lb, *std::max_element(load.begin(), load.end()));
}

}  // namespace

TEST_SUITE("service") {
  TEST_CASE("handlers") {
    ServiceConfig cfg;
    cfg.sampler.steps = 5;
    Service svc(cfg);
    svc.add_model(small_model({ProblemKind::JSP, ProblemKind::FSP}, "shop"));

    CHECK(svc.health()["status"] == "ok");
    const auto models = svc.models();
    REQUIRE(models.size() == 1);
    CHECK(models[0]["id"] == "shop");
    CHECK(models[0]["kinds"] == json{"jsp", "fsp"});
    CHECK(models[0]["timesteps"] == 50);

    const auto a = svc.create_instance({{"kind", "jsp"}, {"jobs", 5}, {"machines", 3}, {"seed", 4}});
    const auto b = svc.create_instance({{"kind", "jsp"}, {"jobs", 5}, {"machines", 3}, {"seed", 4}});
    CHECK(a == b);
    const auto inst = a.get<Instance>();
    CHECK(inst.num_ops() == 15);

    const auto range = svc.instance_range(inst.id);
    CHECK(range["c_max"]["min"].get<double>() >= lower_bound_cmax(inst));
    CHECK(range["c_max"]["min"].get<double>() <= range["c_max"]["max"].get<double>());
    CHECK(range["resilience"]["min"].get<double>() >= 0.0);

    auto status_of = [](auto&& fn) {
      try {
        fn();
      } catch (const ServiceError& e) {
        return e.status();
      }
      return 200;
    };
    CHECK(status_of([&] { svc.create_instance({{"jobs", 50}}); }) == 400);
    CHECK(status_of([&] { svc.create_instance({{"kind", "openshop"}}); }) == 400);
    CHECK(status_of([&] { svc.instance_range("nope"); }) == 404);
    CHECK(status_of([&] { svc.solve({{"instance_id", "nope"}, {"target", {{"c_max", 5}}}}); }) == 404);
    CHECK(status_of([&] { svc.solve({{"instance_id", inst.id}}); }) == 400);
    CHECK(status_of([&] {
            svc.solve({{"instance_id", inst.id}, {"target", {{"c_max", 20}, {"resilience", 0.2}}}, {"candidates", 0}});
          }) == 400);
    const auto fjsp = svc.create_instance({{"kind", "fjsp"}, {"jobs", 3}, {"machines", 3}});
    CHECK(status_of([&] {
            svc.solve({{"instance_id", fjsp["id"]}, {"target", {{"c_max", 20}, {"resilience", 0.2}}}});
          }) == 409);
  }

  TEST_CASE("serial chain has a single attainable point") {
    Service svc(ServiceConfig{});
    svc.add_model(small_model({ProblemKind::JSP}, "jsp"));
    const auto out = svc.solve({{"instance", json(serial_chain())},
                                {"target", {{"c_max", 6}, {"resilience", 0}}},
                                {"candidates", 4},
                                {"steps", 3}});
    const auto range = svc.instance_range("chain");
    CHECK(range["c_max"]["min"] == 6.0);
    CHECK(range["c_max"]["max"] == 6.0);
    CHECK(range["resilience"]["min"] == 0.0);
    CHECK(range["resilience"]["max"] == 0.0);
    for (const auto& c : out["candidates"]) {
      CHECK(c["mape_cmax"] == 0.0);
      CHECK(c["mape_resilience"] == 0.0);
    }
  }

  TEST_CASE("http routes") {
    ServiceConfig cfg;
    cfg.sampler.steps = 5;
    Service svc(cfg);
    svc.add_model(small_model({ProblemKind::JSP}, "jsp"));
    LiveServer live(svc);
    httplib::Client cli("127.0.0.1", live.port);

    auto health = cli.Get("/api/health");
    REQUIRE(health);
    CHECK(health->status == 200);
    CHECK(health->get_header_value("Access-Control-Allow-Origin") == "*");
    CHECK(json::parse(health->body)["models"] == 1);

    auto models = cli.Get("/api/models");
    REQUIRE(models);
    CHECK(json::parse(models->body).size() == 1);

    const json req{{"kind", "jsp"}, {"jobs", 5}, {"machines", 3}, {"seed", 2}};
    auto created = cli.Post("/api/instances", req.dump(), "application/json");
    REQUIRE(created);
    CHECK(created->status == 200);
    auto again = cli.Post("/api/instances", req.dump(), "application/json");
    CHECK(again->body == created->body);
    const auto inst = json::parse(created->body).get<Instance>();
    CHECK(inst.num_ops() == 15);

    auto too_big = cli.Post("/api/instances", json{{"jobs", 50}}.dump(), "application/json");
    REQUIRE(too_big);
    CHECK(too_big->status == 400);
    CHECK(json::parse(too_big->body).contains("error"));
    auto garbage = cli.Post("/api/instances", "{not json", "application/json");
    CHECK(garbage->status == 400);

    auto range = cli.Get("/api/instances/" + inst.id + "/range");
    REQUIRE(range);
    CHECK(range->status == 200);
    CHECK(json::parse(range->body)["c_max"]["min"].get<double>() >= lower_bound_cmax(inst));
    CHECK(cli.Get("/api/instances/missing/range")->status == 404);

    const json solve{{"instance_id", inst.id},
                     {"target", {{"c_max", lower_bound_cmax(inst) + 5}, {"resilience", 0.3}}},
                     {"candidates", 8},
                     {"seed", 1}};
    auto solved = cli.Post("/api/solve", solve.dump(), "application/json");
    REQUIRE(solved);
    CHECK(solved->status == 200);
    const auto body = json::parse(solved->body);
    REQUIRE(body["candidates"].size() == 8);
    double prev = -1.0;
    for (const auto& c : body["candidates"]) {
      CHECK(c["feasible"] == true);
      const double key = std::max(c["mape_cmax"].get<double>(), c["mape_resilience"].get<double>());
      CHECK(key >= prev);
      prev = key;
    }
    CHECK(body["model"] == "jsp");

    auto fsp = json::parse(cli.Post("/api/instances", json{{"kind", "fsp"}}.dump(), "application/json")->body);
    auto uncovered = cli.Post("/api/solve", json{{"instance_id", fsp["id"]}, {"target", {{"c_max", 30}}}}.dump(),
                              "application/json");
    CHECK(uncovered->status == 409);

    auto preflight = cli.Options("/api/solve");
    REQUIRE(preflight);
    CHECK(preflight->status == 204);
    CHECK(preflight->get_header_value("Access-Control-Allow-Origin") == "*");
  }
}
