#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>

#include "doctest.h"
#include "goal/errors.hpp"
#include "goal/graph.hpp"
#include "goal/instance.hpp"
#include "goal/oracle.hpp"
#include "goal/schedule.hpp"
#include "support.hpp"

using namespace goal;
using namespace goal::testing;

TEST_SUITE("instance") {
  TEST_CASE("generation is deterministic in (config, index)") {
    const auto cfg = GeneratorConfig::fixed(ProblemKind::JSP, 5, 3, 7);
    const nlohmann::json a = generate_instance(cfg, 0), b = generate_instance(cfg, 0);
    CHECK(a.dump() == b.dump());
    CHECK(nlohmann::json(generate_instance(cfg, 1)).dump() != a.dump());
  }

  TEST_CASE("generated instances satisfy every invariant") {
    for (auto kind : {ProblemKind::JSP, ProblemKind::FSP, ProblemKind::FJSP})
      for (std::uint64_t i = 0; i < 50; ++i) {
        GeneratorConfig cfg;
        cfg.kind = kind;
        cfg.jobs_min = 5;
        cfg.jobs_max = 20;
        cfg.machines_min = 3;
        cfg.machines_max = 10;
        cfg.seed = 3;
        const auto inst = generate_instance(cfg, i);
        CHECK(validate_instance(inst).empty());
        CHECK(inst.n_jobs >= 5);
        CHECK(inst.n_jobs <= 20);
        CHECK(inst.n_machines >= 3);
        CHECK(inst.n_machines <= 10);
        if (kind != ProblemKind::FJSP) {
          Instance as_jsp = inst;
          as_jsp.kind = ProblemKind::JSP;
          CHECK(validate_instance(as_jsp).empty());
        }
      }
  }

  TEST_CASE("FSP jobs share one machine sequence") {
    const auto inst = generate_instance(GeneratorConfig::fixed(ProblemKind::FSP, 5, 3, 1), 4);
    for (int j = 1; j < inst.n_jobs; ++j) CHECK(inst.machine[j] == inst.machine[0]);
  }

  TEST_CASE("10x3 JSP has 30 operations") {
    CHECK(generate_instance(GeneratorConfig::fixed(ProblemKind::JSP, 10, 3, 0), 0).num_ops() == 30);
  }

  TEST_CASE("FJSP eligible sets are non-empty and in range") {
    const auto inst = generate_instance(GeneratorConfig::fixed(ProblemKind::FJSP, 8, 4, 2), 0);
    for (int j = 0; j < inst.n_jobs; ++j)
      for (int k = 0; k < inst.n_ops_per_job; ++k) {
        const auto e = inst.eligible_machines(j, k);
        CHECK(!e.empty());
        CHECK(std::all_of(e.begin(), e.end(), [&](int m) { return m >= 0 && m < inst.n_machines; }));
      }
  }

  TEST_CASE("processing times are uniform on 1..5") {
    std::map<int, int> counts;
    int n = 0;
    for (std::uint64_t i = 0; i < 700; ++i) {
      const auto inst = generate_instance(GeneratorConfig::fixed(ProblemKind::JSP, 5, 3, 11), i);
      for (const auto& row : inst.proc_time)
        for (int p : row) {
          ++counts[p];
          ++n;
        }
    }
    REQUIRE(n >= 10000);
    const double sigma = std::sqrt(n * 0.2 * 0.8);
    for (int p = 1; p <= 5; ++p) CHECK(std::abs(counts[p] - 0.2 * n) < 3 * sigma);
    CHECK(counts.size() == 5);
  }

  TEST_CASE("validation reports injected faults") {
    auto inst = generate_instance(GeneratorConfig::fixed(ProblemKind::JSP, 5, 3, 0), 0);
    CHECK(validate_instance(inst).empty());
    inst.proc_time[1][1] = 0;
    CHECK(validate_instance(inst) == std::vector<std::string>{"proc_time out of range"});
    auto fj = generate_instance(GeneratorConfig::fixed(ProblemKind::FJSP, 5, 3, 0), 0);
    fj.eligible[0][0].clear();
    CHECK(validate_instance(fj).size() == 1);
  }

  TEST_CASE("invalid generator ranges are rejected") {
    auto cfg = GeneratorConfig::fixed(ProblemKind::JSP, 5, 3, 0);
    cfg.jobs_max = 4;
    CHECK_THROWS_AS(generate_instance(cfg, 0), ConfigError);
  }

  TEST_CASE("feature encoding layout") {
    const auto inst = generate_instance(GeneratorConfig::fixed(ProblemKind::JSP, 5, 3, 0), 0);
    const auto f = encode_instance_features(inst);
    REQUIRE(f.values.size() == 662);
    REQUIRE(kFeatureLength == 662);
    for (int i = 5 * 3 * 11; i < 660; ++i) {
      CHECK(f.values[i] == 0.0);
      CHECK(f.mask[i] == 0);
    }
    for (int j = 0; j < 5; ++j)
      for (int k = 0; k < 3; ++k) {
        const int base = (j * 3 + k) * 11;
        CHECK(f.values[base] == doctest::Approx(inst.proc_time[j][k] / 5.0));
        CHECK(f.values[base + 1 + inst.machine[j][k]] == 1.0);
      }
    auto five = make_jsp({{{0, 5}}}, 1);
    CHECK(encode_instance_features(five).values[0] == 1.0);
    CHECK(encode_instance_features(inst).values == f.values);
    CHECK_THROWS_AS(encode_instance_features(generate_instance(GeneratorConfig::fixed(ProblemKind::JSP, 21, 3, 0), 0)),
                    DimensionError);
  }

  TEST_CASE("json round trip") {
    for (auto kind : {ProblemKind::JSP, ProblemKind::FJSP}) {
      const auto inst = generate_instance(GeneratorConfig::fixed(kind, 6, 4, 5), 3);
      const Instance back = nlohmann::json(inst).get<Instance>();
      CHECK(nlohmann::json(back).dump() == nlohmann::json(inst).dump());
    }
  }
}

TEST_SUITE("schedule") {
  TEST_CASE("serial chain decodes to back-to-back starts") {
    const auto inst = serial_chain();
    Rng rng(1);
    std::vector<double> scores(9);
    for (auto& s : scores) s = rng.normal();
    const auto s = decode(scores, inst);
    CHECK(s.start[0] == std::vector<int>{0, 2, 5});
    CHECK(makespan(s, inst) == 6);
    CHECK(resilience(s, inst) == 0.0);
  }

  TEST_CASE("single machine orders by row sum") {
    const auto inst = make_jsp({{{0, 2}}, {{0, 3}}}, 1);
    DecisionMatrix x(2);
    x(1, 0) = 1;  // job 1 first
    const auto s = decode(x, inst);
    CHECK(s.start[1][0] == 0);
    CHECK(s.start[0][0] == 3);
    CHECK(makespan(s, inst) == 5);
    std::vector<double> wrong(3);
    CHECK_THROWS_AS(decode(wrong, inst), DimensionError);
  }

  TEST_CASE("2x2 worked instance reaches makespan 7") {
    const auto inst = two_by_two();
    int best = 1 << 30;
    for (const auto& s : enumerate_feasible(inst, 100, 0, {.exhaustive = true})) {
      const auto back = decode(label_decision(s, inst), inst);
      CHECK(back == s);
      best = std::min(best, makespan(s, inst));
    }
    CHECK(best == 7);
    CHECK(brute_force(inst).min_cmax == 7);
  }

  TEST_CASE("labeling a chain gives an upper triangle") {
    const auto inst = serial_chain();
    const auto s = decode(DecisionMatrix(3), inst);
    const auto x = label_decision(s, inst);
    CHECK(x.to_bit_string() == "011001000");
  }

  TEST_CASE("labels are total orders") {
    Rng rng(4);
    for (std::uint64_t i = 0; i < 20; ++i) {
      const auto inst = generate_instance(GeneratorConfig::fixed(ProblemKind::FJSP, 6, 3, 9), i);
      for (const auto& s : enumerate_feasible(inst, 10, i)) {
        const auto x = label_decision(s, inst);
        for (int a = 0; a < x.size(); ++a) {
          CHECK(x(a, a) == 0);
          for (int b = 0; b < x.size(); ++b)
            if (a != b) CHECK(x(a, b) + x(b, a) == 1);
        }
      }
    }
  }

  TEST_CASE("hand computed resilience") {
    const auto inst = make_jsp({{{0, 2}}, {{1, 4}}}, 2);
    const auto s = decode(DecisionMatrix(2), inst);
    CHECK(makespan(s, inst) == 4);
    CHECK(resilience(s, inst) == doctest::Approx(0.5).epsilon(1e-15));
  }

  TEST_CASE("empty instance has zero makespan") {
    Instance inst;
    inst.n_machines = 1;
    Schedule s;
    CHECK(makespan(s, inst) == 0);
  }

  TEST_CASE("decoder totality over random real matrices") {
    Rng rng(8);
    for (auto kind : {ProblemKind::JSP, ProblemKind::FSP, ProblemKind::FJSP})
      for (std::uint64_t i = 0; i < 40; ++i) {
        const auto inst = generate_instance(GeneratorConfig::fixed(kind, 2 + int(i % 9), 3 + int(i % 5), 21), i);
        const int k = inst.num_ops();
        std::vector<double> scores(static_cast<std::size_t>(k) * k);
        for (auto& v : scores) v = rng.normal(0, 10);
        const auto s = decode(scores, inst);
        const auto rep = is_feasible(s, inst);
        CHECK(rep.feasible);
        const auto obj = evaluate(s, inst);
        CHECK(obj.resilience >= 0.0);
        if (kind != ProblemKind::FJSP) CHECK(obj.c_max >= makespan_lower_bound(inst));
      }
  }

  TEST_CASE("feasibility checker catches violations") {
    const auto inst = two_by_two();
    auto s = decode(DecisionMatrix(4), inst);
    REQUIRE(is_feasible(s, inst).feasible);
    auto overlap = s;
    overlap.start[1][1] = overlap.start[0][0];  // both on M0
    overlap.start[1][0] = 0;
    CHECK_FALSE(is_feasible(overlap, inst).feasible);
    auto early = s;
    early.start[0][1] = 0;
    CHECK_FALSE(is_feasible(early, inst).feasible);
    CHECK_THROWS_AS(label_decision(early, inst), LabelError);
  }

  TEST_CASE("a schedule forming one chain has zero resilience") {
    const auto inst = make_jsp({{{0, 2}, {0, 1}}, {{0, 3}, {0, 2}}}, 1);
    for (const auto& s : enumerate_feasible(inst, 50, 0, {.exhaustive = true}))
      CHECK(resilience(s, inst) == 0.0);
  }

  TEST_CASE("bit string round trip") {
    DecisionMatrix x(3);
    x(0, 2) = 1;
    x(2, 1) = 1;
    CHECK(DecisionMatrix::from_bit_string(x.to_bit_string()) == x);
    CHECK_THROWS_AS(DecisionMatrix::from_bit_string("0101"
                                                    "1"),
                    DimensionError);
  }
}

TEST_SUITE("graph") {
  TEST_CASE("job chains are bidirectional") {
    const auto inst = make_jsp({{{0, 1}, {1, 1}, {2, 1}}, {{2, 1}, {1, 1}, {0, 1}}}, 3);
    const auto g = build_graph(inst);
    CHECK(g.edges(EdgeType::JobPrecedence).size() == 8);
    CHECK(g.used_types() == 2);
    const auto deg = degree_features(g);
    CHECK(deg[1][0] == 2);
    CHECK(deg[1][1] == 2);
  }

  TEST_CASE("machine conflicts form cliques") {
    const auto inst = make_jsp({{{0, 1}, {0, 1}, {0, 1}}, {{0, 1}, {0, 1}, {0, 1}}}, 1);
    const auto g = build_graph(inst);
    CHECK(g.edges(EdgeType::MachineConflict).size() == 30);
    const auto deg = degree_features(g);
    for (const auto& row : deg) {
      CHECK(row[2] == 5);
      CHECK(row[3] == 5);
    }
    const auto ind = structural_indicators(g, 0, 1);
    CHECK(ind[0] == 1);
    CHECK(ind[1] == 1);
    CHECK(ind[3] == 1);
  }

  TEST_CASE("indicators and isolated nodes") {
    const auto inst = make_jsp({{{0, 1}}, {{1, 1}}, {{0, 2}}}, 2);
    const auto g = build_graph(inst);
    CHECK(degree_features(g)[1] == std::vector<int>(6, 0));
    const auto conflict = structural_indicators(g, 0, 2);
    CHECK(conflict == std::array<std::uint8_t, 4>{0, 1, 0, 0});
    CHECK(structural_indicators(g, 0, 1) == std::array<std::uint8_t, 4>{0, 0, 0, 0});
  }

  TEST_CASE("FJSP overlap edges follow eligibility") {
    Instance inst;
    inst.kind = ProblemKind::FJSP;
    inst.n_jobs = 3;
    inst.n_ops_per_job = 1;
    inst.n_machines = 3;
    inst.proc_time = {{1}, {2}, {3}};
    inst.eligible = {{{0, 1}}, {{2}}, {{1, 2}}};
    const auto g = build_graph(inst);
    CHECK(g.used_types() == 3);
    CHECK(g.edges(EdgeType::MachineConflict).empty());
    CHECK_FALSE(g.has_edge(2, 0, 1));
    CHECK(g.has_edge(2, 0, 2));
    CHECK(g.has_edge(2, 2, 0));
    CHECK(g.has_edge(2, 1, 2));
  }

  TEST_CASE("conflict edges are symmetric and FSP equals its JSP embedding") {
    for (std::uint64_t i = 0; i < 20; ++i) {
      const auto inst = generate_instance(GeneratorConfig::fixed(ProblemKind::FSP, 6, 4, 5), i);
      const auto g = build_graph(inst);
      for (int t = 0; t < kNumEdgeTypes; ++t)
        for (auto [a, b] : g.edges(t)) CHECK(g.has_edge(t, b, a));
      Instance as_jsp = inst;
      as_jsp.kind = ProblemKind::JSP;
      const auto h = build_graph(as_jsp);
      for (int t = 0; t < kNumEdgeTypes; ++t) CHECK(g.edges(t) == h.edges(t));
    }
  }
}

TEST_SUITE("oracle") {
  TEST_CASE("two orderings on one machine") {
    const auto inst = make_jsp({{{0, 2}}, {{0, 3}}}, 1);
    CHECK(enumerate_feasible(inst, 10, 0, {.exhaustive = true}).size() == 2);
  }

  TEST_CASE("exhaustive mode matches an independent brute force for K <= 6") {
    Rng rng(2024);
    int checked = 0;
    for (int ops = 1; ops <= 3; ++ops)
      for (int jobs = 1; jobs * ops <= 6; ++jobs)
        for (int machines = 1; machines <= 3; ++machines)
          for (int rep = 0; rep < 6; ++rep) {
            const auto inst = random_jsp(rng, jobs, ops, machines);
            const auto bf = brute_force(inst);
            const auto ours = enumerate_feasible(inst, 100000, 0, {.exhaustive = true});
            std::set<std::vector<int>> got;
            int best = 1 << 30;
            for (const auto& s : ours) {
              CHECK(is_feasible(s, inst).feasible);
              got.insert(flat_starts(s));
              best = std::min(best, makespan(s, inst));
            }
            CHECK(got.size() == ours.size());
            CHECK(got == bf.starts);
            CHECK(best == bf.min_cmax);
            ++checked;
          }
    CHECK(checked > 100);
  }

  TEST_CASE("random mode yields distinct round-tripping schedules") {
    const auto inst = generate_instance(GeneratorConfig::fixed(ProblemKind::JSP, 5, 3, 0), 0);
    const auto out = enumerate_feasible(inst, 200, 1);
    CHECK(out.size() == 200);
    std::set<std::vector<int>> keys;
    for (const auto& s : out) {
      keys.insert(flat_starts(s));
      CHECK(evaluate(decode(label_decision(s, inst), inst), inst) == evaluate(s, inst));
    }
    CHECK(keys.size() == 200);
  }

  TEST_CASE("dataset assembly") {
    const auto shard = build_dataset(GeneratorConfig::fixed(ProblemKind::JSP, 5, 3, 1), 2, 3, 1);
    CHECK(shard.samples.size() == 6);
    for (const auto& smp : shard.samples) {
      const auto& inst = shard.instances[smp.instance];
      const auto s = decode(smp.x, inst);
      CHECK(evaluate(s, inst) == smp.objectives);
      CHECK(smp.u == normalize_targets(smp.objectives, inst));
    }
    const auto again = build_dataset(GeneratorConfig::fixed(ProblemKind::JSP, 5, 3, 1), 2, 3, 1);
    for (std::size_t i = 0; i < 6; ++i) CHECK(again.samples[i].x == shard.samples[i].x);
  }

  TEST_CASE("serial chains give zero resilience targets") {
    auto cfg = GeneratorConfig::fixed(ProblemKind::FSP, 1, 3, 0);
    const auto shard = build_dataset(cfg, 3, 5, 0);
    REQUIRE(!shard.samples.empty());
    for (const auto& s : shard.samples) {
      CHECK(s.objectives.resilience == 0.0);
      CHECK(s.u[0] == 1.0);
    }
  }

  TEST_CASE("target normalization") {
    const auto inst = make_jsp({{{0, 5}, {1, 5}}, {{1, 5}, {0, 5}}}, 2);
    const auto u = normalize_targets({10, 0.25}, inst);
    CHECK(u[0] == 0.5);
    CHECK(u[1] == 0.25);
    CHECK(denormalize_targets(u, inst).c_max == 10);
  }

  TEST_CASE("shards and manifests round trip on disk") {
    const auto dir = std::filesystem::temp_directory_path() / "goal_test_manifest";
    std::filesystem::remove_all(dir);
    const auto train = build_dataset(GeneratorConfig::fixed(ProblemKind::JSP, 4, 3, 1), 3, 4, 1);
    const auto test = build_dataset(GeneratorConfig::fixed(ProblemKind::JSP, 4, 3, 1), 2, 4, 1, 1000, Split::Test);
    for (const auto& [shard, name] : {std::pair{&train, "a"}, std::pair{&test, "b"}}) {
      const auto files = write_shard(*shard, dir.string(), name);
      update_manifest(dir.string(), {files, shard->split, "jsp", int(shard->instances.size()),
                                     int(shard->samples.size())});
    }
    const auto manifest = (dir / "manifest.json").string();
    CHECK(read_manifest(manifest).size() == 2);
    const auto back = load_split(manifest, Split::Train);
    REQUIRE(back.samples.size() == train.samples.size());
    for (std::size_t i = 0; i < back.samples.size(); ++i) {
      CHECK(back.samples[i].x == train.samples[i].x);
      CHECK(back.samples[i].objectives == train.samples[i].objectives);
    }
    CHECK(load_split(manifest, Split::Test).instances.size() == 2);
    std::filesystem::remove_all(dir);
  }
}
