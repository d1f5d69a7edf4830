#include <doctest.h>

#include <cmath>
#include <memory>

#include <json.hpp>

#include "coagflow/scenario.hpp"
#include "coagflow/stoch_solver.hpp"

using namespace coagflow;

namespace {

// Interaction-free box: two particles in one uniform cell, no flow.
StochModels still_models() {
  auto dom = std::make_shared<BoxDomain>(1, 1.0);
  StochModels m;
  m.kernel = std::make_shared<ConstantKernel>(1.0, 1.0);
  m.deloc = std::make_shared<UniformDelocalisation>(*dom, 1.0);
  m.flow = std::make_shared<FlowMap>(std::make_shared<ZeroField>(1), dom);
  m.inception = std::make_shared<InceptionModel>(
      std::vector<InteriorInceptionComponent>{},
      std::vector<BoundaryInceptionComponent>{}, 0.0);
  return m;
}

SpatialMeasure two_particles() {
  return SpatialMeasure::from_atoms(
      {{{0.3, 0, 0}, 1.0, 1.0}, {{0.6, 0, 0}, 1.0, 1.0}});
}

}  // namespace

TEST_CASE("pair rate of two particles in one cell is one") {
  // lambda = (1/(2N)) sum_{i != j} K h = 1 with K = h = N = 1: across many
  // replicas the first-event time is Exp(1), so P(coagulated by T) = 1-e^-T.
  StochModels m = still_models();
  const double T = 1.0;
  int coagulated = 0;
  const int reps = 4000;
  for (int r = 0; r < reps; ++r) {
    StochResult res = simulate(two_particles(), T, 1, 555, std::uint64_t(r), m, {T});
    coagulated += (res.accepted_events == 1);
  }
  const double p = double(coagulated) / reps;
  const double expect = 1.0 - std::exp(-1.0);
  CHECK(std::abs(p - expect) < 4.0 * std::sqrt(expect * (1 - expect) / reps));
}

TEST_CASE("boundary inception rate scales with N") {
  // Total boundary rate 3, N = 10: insertions over [0,1] are Poisson(30).
  nlohmann::json j = nlohmann::json::parse(plugflow_scenario_json(64));
  j["inception"]["boundary"][0]["rate_per_area"] = 3.0;
  j["inception"]["flux_bound"] = 3.0;
  Scenario sc = scenario_from_json_text(j.dump(), "poisson");
  double total = 0.0, sq = 0.0;
  const int reps = 400;
  for (int r = 0; r < reps; ++r) {
    StochResult res = simulate(sc.initial_measure(), 1.0, 10, 777, std::uint64_t(r),
                               sc.stoch_models(), {1.0});
    total += double(res.boundary_inceptions);
    sq += double(res.boundary_inceptions) * double(res.boundary_inceptions);
  }
  const double mean = total / reps;
  const double var = sq / reps - mean * mean;
  CHECK(mean == doctest::Approx(30.0).epsilon(0.05));
  CHECK(var == doctest::Approx(30.0).epsilon(0.25));  // Poisson: var = mean
}

TEST_CASE("free streaming conserves the particle count") {
  // K = 0, I = 0, u = 1: particles starting left of 1 - T never exit.
  nlohmann::json j = nlohmann::json::parse(plugflow_scenario_json(64));
  j["inception"]["boundary"] = nlohmann::json::array();
  j["inception"]["flux_bound"] = 0.0;
  j["initial"] = {{"kind", "uniform"}, {"density", 1.0}, {"to", 0.45},
                  {"types", {{{"mass", 1.0}, {"weight", 1.0}}}}};
  Scenario sc = scenario_from_json_text(j.dump(), "stream");
  StochResult res = simulate(sc.initial_measure(), 0.5, 200, 31, 0,
                             sc.stoch_models(), {0.5});
  CHECK(res.final_particles == res.initial_particles);
  CHECK(res.exits.empty());
  CHECK(res.accepted_events == 0);
}

TEST_CASE("outflow exit times match the deterministic characteristics") {
  nlohmann::json j = nlohmann::json::parse(plugflow_scenario_json(64));
  j["inception"]["boundary"] = nlohmann::json::array();
  j["inception"]["flux_bound"] = 0.0;
  Scenario sc = scenario_from_json_text(j.dump(), "exits");
  std::vector<EnsembleAtom> atoms;
  for (double x : {0.9, 0.8, 0.7, 0.55}) atoms.push_back({{x, 0, 0}, 1.0, 1.0});
  SpatialMeasure c0 = SpatialMeasure::from_atoms(atoms);
  StochResult res = simulate(c0, 0.6, 1, 99, 0, sc.stoch_models(), {0.6});
  REQUIRE(res.exits.size() == 4);
  for (const auto& e : res.exits) {
    // u = 1: exit time = 1 - x0; recover x0 from the logged exit.
    CHECK(e.position[0] == doctest::Approx(1.0).epsilon(1e-9));
    bool matched = false;
    for (double x : {0.9, 0.8, 0.7, 0.55})
      if (std::abs(e.time - (1.0 - x)) < 1e-6) matched = true;
    CHECK(matched);
  }
}

TEST_CASE("coagulation events conserve mass and decrement counts") {
  Scenario sc = scenario_from_json_text(canonical_scenario_json(), "canonical");
  const long n = 2000;
  StochResult res = simulate(sc.initial_measure(), 1.5, n, 1234, 0,
                             sc.stoch_models(), {1.5});
  CHECK(res.final_particles ==
        res.initial_particles + res.interior_inceptions + res.boundary_inceptions -
            long(res.exits.size()) - res.accepted_events);
  // <y, empirical> = (all incepted mass - exited mass) / N.
  double exited_mass = 0.0;
  for (const auto& e : res.exits) exited_mass += e.mass;
  const double expected =
      (double(res.boundary_inceptions) * 1.0 - exited_mass) / double(n);
  CHECK(total_mass_pairing(res.snapshots.back()) ==
        doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("thinning acceptance tracks the kernel mean") {
  nlohmann::json j = nlohmann::json::parse(canonical_scenario_json());
  j["kernel"] = {{"name", "capped_product"}, {"params", {0.2}}, {"bound", 1.0}};
  Scenario sc = scenario_from_json_text(j.dump(), "thin");
  StochResult res = simulate(sc.initial_measure(), 2.0, 4000, 42, 0,
                             sc.stoch_models(), {2.0});
  REQUIRE(res.proposed_events > 200);
  const double frac = double(res.accepted_events) / double(res.proposed_events);
  const double mean_k = res.kernel_sum_on_proposals /
                        (double(res.proposed_events) * sc.kernel->bound());
  CHECK(frac == doctest::Approx(mean_k)
                    .epsilon(5.0 / std::sqrt(double(res.proposed_events))));
}

TEST_CASE("empirical measure weights") {
  // Initial ensembles carry the empirical weights 1/N.
  SpatialMeasure four = SpatialMeasure::from_atoms({{{0.1, 0, 0}, 1.0, 0.25},
                                                    {{0.2, 0, 0}, 1.0, 0.25},
                                                    {{0.3, 0, 0}, 1.0, 0.25},
                                                    {{0.4, 0, 0}, 1.0, 0.25}});
  auto zerok = still_models();
  zerok.kernel = std::make_shared<ConstantKernel>(0.0, 0.0);
  StochResult res = simulate(four, 0.1, 4, 5, 0, zerok, {0.1});
  CHECK(res.initial_particles == 4);
  CHECK(total_weight(empirical_measure(res, 0.1)) == doctest::Approx(1.0));

  StochResult empty = simulate(SpatialMeasure::from_atoms({}), 0.1, 4, 5, 0,
                               zerok, {0.1});
  CHECK(total_weight(empirical_measure(empty, 0.1)) == 0.0);

  SpatialMeasure three = SpatialMeasure::from_atoms({{{0.1, 0, 0}, 1.0, 0.5},
                                                     {{0.2, 0, 0}, 1.0, 0.5},
                                                     {{0.3, 0, 0}, 1.0, 0.5}});
  StochResult r3 = simulate(three, 0.1, 2, 5, 0, zerok, {0.1});
  CHECK(r3.initial_particles == 3);
  CHECK(total_weight(empirical_measure(r3, 0.1)) == doctest::Approx(1.5));
}

TEST_CASE("stratified initial sampling is exact at t = 0") {
  Scenario sc = scenario_from_json_text(canonical_scenario_json(), "canonical");
  SpatialMeasure c0 = SpatialMeasure::zero_grid(sc.grid, sc.bins, 0.0);
  for (int i = 0; i < sc.grid.cells; ++i) c0.deposit(i, 1.0, 1.0 / sc.grid.cells);
  StochResult res = simulate(c0, 0.01, 1000, 7, 0, sc.stoch_models(), {0.0, 0.01});
  CHECK(total_weight(res.snapshots.at(0.0)) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("replica determinism and stderr behaviour") {
  Scenario sc = scenario_from_json_text(canonical_scenario_json(), "canonical");
  Dictionary dict = smooth_subset(sc.dictionary());

  // Identical (seed, replica) reproduces the run byte-for-byte.
  StochResult a = simulate(sc.initial_measure(), 1.0, 500, 11, 3,
                           sc.stoch_models(), {1.0});
  StochResult b = simulate(sc.initial_measure(), 1.0, 500, 11, 3,
                           sc.stoch_models(), {1.0});
  REQUIRE(a.snapshots.back().atoms.size() == b.snapshots.back().atoms.size());
  CHECK(a.accepted_events == b.accepted_events);
  bool identical = true;
  for (std::size_t i = 0; i < a.snapshots.back().atoms.size(); ++i) {
    const auto& pa = a.snapshots.back().atoms[i];
    const auto& pb = b.snapshots.back().atoms[i];
    identical = identical && pa.x[0] == pb.x[0] && pa.mass == pb.mass;
  }
  CHECK(identical);

  // A deterministic scenario has zero spread across replicas.
  nlohmann::json j = nlohmann::json::parse(plugflow_scenario_json(64));
  j["inception"]["boundary"] = nlohmann::json::array();
  j["inception"]["flux_bound"] = 0.0;
  j["initial"] = {{"kind", "uniform"}, {"density", 1.0}, {"to", 0.4},
                  {"types", {{{"mass", 1.0}, {"weight", 1.0}}}}};
  Scenario det = scenario_from_json_text(j.dump(), "det");
  ReplicaMoments zero = replica_moments(det.initial_measure(), 0.5, 200, 8, 3,
                                        det.stoch_models(), {0.5}, dict, 2);
  for (const auto& row : zero.stderr_)
    for (double s : row) CHECK(s == doctest::Approx(0.0).epsilon(1e-14));

  // stderr shrinks roughly like 1/sqrt(R).
  ReplicaMoments r16 = replica_moments(sc.initial_measure(), 1.0, 200, 16, 101,
                                       sc.stoch_models(), {1.0}, dict, 2);
  ReplicaMoments r64 = replica_moments(sc.initial_measure(), 1.0, 200, 64, 202,
                                       sc.stoch_models(), {1.0}, dict, 2);
  const double ratio = r16.stderr_[0][0] / r64.stderr_[0][0];
  CHECK(ratio > 1.4);
  CHECK(ratio < 2.6);
}

TEST_CASE("smooth delocalisation thins by h over its bound") {
  nlohmann::json j = nlohmann::json::parse(canonical_scenario_json());
  j["delocalisation"] = {{"form", "gaussian"}, {"amplitude", 1.0}, {"width", 0.15}};
  j["numerics"]["grid_cells"] = 128;
  Scenario sc = scenario_from_json_text(j.dump(), "smooth");
  StochResult res = simulate(sc.initial_measure(), 1.5, 2000, 808, 0,
                             sc.stoch_models(), {1.5});
  REQUIRE(res.proposed_events > 100);
  // Pairs are proposed across the whole domain, so most are rejected.
  CHECK(res.accepted_events < res.proposed_events);
  const double frac = double(res.accepted_events) / double(res.proposed_events);
  const double mean_p = res.accept_prob_sum / double(res.proposed_events);
  CHECK(frac == doctest::Approx(mean_p)
                    .epsilon(6.0 / std::sqrt(double(res.proposed_events))));
}

TEST_CASE("event-rate overflow raises a scale error") {
  nlohmann::json j = nlohmann::json::parse(plugflow_scenario_json(64));
  j["inception"]["boundary"][0]["rate_per_area"] = 1e16;
  j["inception"]["flux_bound"] = 1e16;
  Scenario sc = scenario_from_json_text(j.dump(), "overflow");
  CHECK_THROWS_AS((void)simulate(sc.initial_measure(), 0.1, 1, 1, 0,
                                 sc.stoch_models(), {0.1}),
                  ScaleError);
}

TEST_CASE("shear flow carries particles at their lane speed") {
  auto dom = std::make_shared<BoxDomain>(2, 1.0, std::array<double, 2>{1.0, 1.0});
  StochModels m;
  m.kernel = std::make_shared<ConstantKernel>(0.0, 0.0);
  m.deloc = std::make_shared<CellDelocalisation>(*dom, 8);
  m.flow = std::make_shared<FlowMap>(
      make_velocity_field("shear", 2, {1.0, 0.5}, *dom), dom);
  m.inception = std::make_shared<InceptionModel>(
      std::vector<InteriorInceptionComponent>{},
      std::vector<BoundaryInceptionComponent>{}, 0.0);

  SpatialMeasure c0 = SpatialMeasure::from_atoms(
      {{{0.2, 0.2, 0}, 1.0, 0.5}, {{0.2, 0.8, 0}, 1.0, 0.5}});
  StochResult res = simulate(c0, 1.0, 2, 17, 0, m, {1.0});
  REQUIRE(res.exits.size() == 2);
  for (const auto& e : res.exits) {
    // u1 = 1 + 0.5 x2, so the exit time from x1 = 0.2 is 0.8 / u1(x2).
    const double u1 = 1.0 + 0.5 * e.position[1];
    CHECK(e.time == doctest::Approx(0.8 / u1).epsilon(1e-6));
    CHECK(e.position[0] == doctest::Approx(1.0));
  }
}
