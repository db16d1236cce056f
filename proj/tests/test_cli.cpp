#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "doctest.h"
#include "goal/diffusion.hpp"
#include "goal/oracle.hpp"

using namespace goal;
namespace fs = std::filesystem;

namespace {

struct Scratch {
  fs::path dir;
  Scratch() {
    dir = fs::temp_directory_path() / ("goal_cli_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Scratch() { fs::remove_all(dir); }
};

int run(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(GOAL_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("gen, train, sample") {
    Scratch s;
    const auto log = s.dir / "log.txt";
    const auto data = s.dir / "data";
    REQUIRE(run("gen --kind jsp --jobs 5 --machines 3 --instances 10 --limit 50 --seed 1 --out " + data.string(), log) ==
            0);
    const auto shard = load_split((data / "manifest.json").string(), Split::Train);
    CHECK(shard.instances.size() == 10);
    CHECK(shard.samples.size() == 500);

    const auto ckpt = s.dir / "desk.ckpt";
    REQUIRE(run("train --profile desk --epochs 0 --log-every 0 --data " + (data / "manifest.json").string() +
                    " --out " + ckpt.string(),
                log) == 0);
    const auto model = load_model(ckpt.string());
    CHECK(model.net->config().hidden == 32);
    CHECK(model.net->config().layers == 4);
    CHECK(model.schedule.timesteps() == 200);
    CHECK(model.covers(ProblemKind::JSP));
    CHECK_FALSE(model.covers(ProblemKind::FJSP));

    const auto inst_path = s.dir / "inst.json";
    {
      std::ofstream out(inst_path);
      out << nlohmann::json(shard.instances.front()).dump();
    }
    const auto out = s.dir / "sample.json";
    REQUIRE(run("sample --checkpoint " + ckpt.string() + " --instance " + inst_path.string() +
                    " --cmax 12 --resilience 0.3 --candidates 32 --steps 5 --out " + out.string(),
                log) == 0);
    const auto doc = nlohmann::json::parse(slurp(out));
    REQUIRE(doc["candidates"].size() == 32);
    for (const auto& c : doc["candidates"]) CHECK(c["feasible"] == true);
  }

  TEST_CASE("exit codes") {
    Scratch s;
    const auto log = s.dir / "log.txt";
    CHECK(run("--help", log) == 0);
    CHECK(run("gen --no-such-flag", log) == 2);
    CHECK(run("gen --kind openshop", log) == 2);
    CHECK(run("sample --checkpoint x.ckpt", log) == 2);
    CHECK(run("sample --checkpoint " + (s.dir / "missing.ckpt").string() + " --instance x.json --cmax 5 --resilience 0",
              log) == 1);
    CHECK(slurp(log).rfind("error:", 0) == 0);
    CHECK(run("train --data " + (s.dir / "none.json").string(), log) == 1);
  }
}
