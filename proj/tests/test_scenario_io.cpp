#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include <json.hpp>

#include "coagflow/io.hpp"
#include "coagflow/scenario.hpp"

using namespace coagflow;

TEST_CASE("canonical scenario parses and validates") {
  Scenario sc = scenario_from_json_text(canonical_scenario_json(), "builtin");
  CHECK(sc.name == "canonical");
  CHECK(sc.domain->dim() == 1);
  CHECK(sc.kernel->bound() == 1.0);
  CHECK(sc.deloc->cell_count() == 64);
  CHECK(sc.flow->residence_bound() == doctest::Approx(1.1));
  CHECK(sc.knots.size() == 12);
  CHECK(tv_norm(sc.initial_measure()) == 0.0);
}

TEST_CASE("config errors carry their location") {
  CHECK_THROWS_AS((void)scenario_from_json_text("{ not json", "broken.json"),
                  ConfigError);
  try {
    (void)scenario_from_json_text(R"({"schema_version": 1, "domain": {"dimension": 1, "length": 1.0},
      "velocity": {"name": "constant", "params": [1.0]},
      "delocalisation": {"form": "cells", "cells": 8},
      "horizon": 1.0, "numerics": {"dt": 0.01, "grid_cells": 8}})",
                                  "nokernel.json");
    FAIL("expected a config error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("kernel") != std::string::npos);
  }

  // dt exceeding a tenth of the residence bound is rejected.
  nlohmann::json j = nlohmann::json::parse(canonical_scenario_json());
  j["numerics"]["dt"] = 0.5;
  CHECK_THROWS_AS((void)scenario_from_json_text(j.dump(), "bigdt"), ConfigError);

  // Grid cells must refine the delocalisation cells.
  j = nlohmann::json::parse(canonical_scenario_json());
  j["numerics"]["grid_cells"] = 96;
  CHECK_THROWS_AS((void)scenario_from_json_text(j.dump(), "misaligned"), ConfigError);

  j = nlohmann::json::parse(canonical_scenario_json());
  j["schema_version"] = 2;
  CHECK_THROWS_AS((void)scenario_from_json_text(j.dump(), "version"), ConfigError);
}

TEST_CASE("measure text round trip") {
  GridSpec g{1, 1.0, {1.0, 1.0}, 8};
  auto bins = TypeBinning::geometric(1.0, 64.0, std::pow(2.0, 0.25), {1.0});
  SpatialMeasure m = SpatialMeasure::zero_grid(g, bins, 0.75);
  m.deposit(1, 1.0, 0.123456789012345);
  m.deposit(5, 3.7, -0.25);
  SpatialMeasure back = measure_from_text(measure_to_text(m));
  REQUIRE(back.is_grid());
  CHECK(back.time == m.time);
  CHECK(back.grid == m.grid);
  REQUIRE(back.nbins() == m.nbins());
  for (std::size_t k = 0; k < m.masses.size(); ++k)
    CHECK(back.masses[k] == m.masses[k]);

  SpatialMeasure ens = SpatialMeasure::from_atoms(
      {{{0.125, 0, 0}, 2.0, 0.5}, {{0.875, 0, 0}, 1.0, -0.25}}, nullptr, 1.5);
  SpatialMeasure ens_back = measure_from_text(measure_to_text(ens));
  REQUIRE(ens_back.atoms.size() == 2);
  CHECK(ens_back.atoms[1].weight == -0.25);
  CHECK(ens_back.time == 1.5);
}

TEST_CASE("deterministic outputs are byte-identical across reruns") {
  Scenario sc = scenario_from_json_text(plugflow_scenario_json(64), "plug");
  auto run = [&] {
    SolveResult r = direct_solve(sc.initial_measure(), 1.0, sc.schedule(),
                                 *sc.inception, {0.5, 1.0});
    std::string all;
    for (const auto& m : r.trajectory.values) all += measure_to_text(m);
    all += pairings_csv(r.trajectory, sc.dictionary());
    return all;
  };
  CHECK(run() == run());
}

TEST_CASE("trajectory files and manifests are written") {
  Scenario sc = scenario_from_json_text(plugflow_scenario_json(64), "plug");
  SolveResult r = direct_solve(sc.initial_measure(), 0.5, sc.schedule(),
                               *sc.inception, {0.25, 0.5});
  const std::string dir = "/tmp/coagflow_io_test";
  std::filesystem::remove_all(dir);
  auto files = write_trajectory(dir, "traj", r.trajectory);
  CHECK(files.size() == r.trajectory.size());
  for (const auto& f : files) CHECK(std::filesystem::exists(dir + "/" + f));

  const std::string manifest =
      run_manifest(sc.raw_config, r.windows, r.warnings, 1.25, 7, 2);
  auto j = nlohmann::json::parse(manifest);
  CHECK(j["seed"] == 7);
  CHECK(j["config"]["name"] == "plugflow");

  const std::string rep = replica_manifest(9, 3, 100);
  auto jr = nlohmann::json::parse(rep);
  CHECK(jr["replicas"].size() == 3);
  std::filesystem::remove_all(dir);
}

TEST_CASE("profile and exits CSV shapes") {
  GridSpec g{1, 1.0, {1.0, 1.0}, 4};
  auto bins = TypeBinning::geometric(1.0, 8.0, 2.0);
  SpatialMeasure m = SpatialMeasure::zero_grid(g, bins);
  m.deposit(0, 1.0, 0.5);
  const std::string csv = profile_csv(m);
  CHECK(csv.find("x,number_density,mass_density") == 0);

  std::vector<ExitEvent> exits = {{0.5, {1.0, 0, 0}, 2.0}};
  const std::string e = exits_csv(exits);
  CHECK(e.find("time,x1") == 0);
  CHECK(e.find("0.5,1,0,0,2") != std::string::npos);
}
