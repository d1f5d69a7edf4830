#include <doctest.h>

#include <chrono>
#include <cmath>
#include <cstdio>

#include <json.hpp>

#include "coagflow/verify.hpp"
#include "oracles.hpp"

using namespace coagflow;

namespace {

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
        .count();
  }
};

void announce(int criterion, const std::string& name, bool pass,
              const std::string& detail) {
  std::printf("[acceptance] criterion-%d %-28s %s  %s\n", criterion, name.c_str(),
              pass ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
}

Scenario canonical() {
  return scenario_from_json_text(canonical_scenario_json(), "canonical");
}

}  // namespace

TEST_CASE("criterion 1: constant-kernel decay oracle") {
  Timer timer;
  Scenario sc = scenario_from_json_text(homogeneous_scenario_json(), "homogeneous");
  REQUIRE(sc.numerics.dt == 0.001);
  SolveResult run = direct_solve(sc.initial_measure(), 4.0, sc.schedule(),
                                 *sc.inception, {1.0, 2.0, 4.0});
  const std::vector<double> times = {1.0, 2.0, 4.0};
  auto oracle = oracle::constant_kernel_totals(1.0, 1.0, times, 128, 1e-3);
  bool pass = true;
  std::string detail;
  for (std::size_t k = 0; k < times.size(); ++k) {
    const double n = total_weight(run.trajectory.at(times[k] + 1e-9));
    const double analytic = 1.0 / (1.0 + times[k] / 2.0);
    const double rel = std::abs(n - analytic) / analytic;
    const double rel_oracle = std::abs(n - oracle[k]) / oracle[k];
    pass = pass && rel <= 0.02 && rel_oracle <= 0.02;
    detail += "t=" + std::to_string(times[k]).substr(0, 3) + " rel=" +
              std::to_string(rel).substr(0, 8) + " ";
    CHECK(rel <= 0.02);
    CHECK(rel_oracle <= 0.02);
  }
  const double wall = timer.seconds();
  pass = pass && wall < 10.0;
  CHECK(wall < 10.0);
  announce(1, "constant-kernel-oracle", pass,
           detail + "wall=" + std::to_string(wall).substr(0, 5) + "s");
}

TEST_CASE("criteria 2 and 3: positivity, global bound, picard windows") {
  Timer timer;
  Scenario sc = canonical();
  SolveResult run = picard_solve(sc.initial_measure(), sc.horizon,
                                 sc.numerics.picard, sc.schedule(), *sc.inception,
                                 sc.knots);
  const double wall = timer.seconds();

  PropertyReport pos = check_positivity(sc, run);
  PropertyReport glob = check_global_bound(sc, run);
  CHECK(pos.pass);
  CHECK(glob.pass);
  const bool c2 = pos.pass && glob.pass && wall < 60.0;
  CHECK(wall < 60.0);
  announce(2, "positivity-and-global-bound", c2,
           "min_bin=" + std::to_string(-pos.measured) +
               " excess=" + std::to_string(glob.measured) +
               " wall=" + std::to_string(wall).substr(0, 5) + "s");

  PropertyReport formula = check_window_formula(sc, run);
  PropertyReport ratio = check_contraction(run);
  CHECK(formula.pass);
  CHECK(formula.measured == 0.0);  // tau_M reproduced exactly
  CHECK(ratio.pass);
  announce(3, "picard-window-contraction", formula.pass && ratio.pass,
           "windows=" + std::to_string(run.windows.size()) +
               " max_ratio=" + std::to_string(ratio.measured).substr(0, 8));
}

TEST_CASE("criterion 4: lipschitz dependence on initial data") {
  Scenario sc = canonical();
  PropertyReport r = check_lipschitz(sc, 0.1, 1.5);
  CHECK(r.pass);
  announce(4, "lipschitz-initial-data", r.pass, r.detail);
}

TEST_CASE("criterion 5: inflow boundary condition under refinement") {
  PropertyReport r = check_boundary_condition_refinement();
  CHECK(r.pass);
  announce(5, "boundary-condition", r.pass, r.detail);
}

TEST_CASE("criterion 6: flow-map identity battery") {
  Timer timer;
  auto reports = check_flow_identities();
  bool pass = true;
  for (const auto& r : reports) {
    CHECK(r.pass);
    CHECK(r.measured <= 1e-6);
    pass = pass && r.pass;
  }
  const double wall = timer.seconds();
  pass = pass && wall < 5.0;
  CHECK(wall < 5.0);
  announce(6, "flow-map-identities", pass,
           std::to_string(reports.size()) + " identities, wall=" +
               std::to_string(wall).substr(0, 5) + "s");
}

TEST_CASE("criterion 7: stochastic convergence to the deterministic solution") {
  Timer timer;
  SuiteOptions opt;
  opt.workers = 2;
  PropertyReport r = check_stochastic_convergence(opt);
  const double wall = timer.seconds();
  CHECK(r.pass);
  const bool pass = r.pass && wall < 600.0;
  CHECK(wall < 600.0);
  announce(7, "stochastic-convergence", pass,
           r.detail + " wall=" + std::to_string(wall).substr(0, 6) + "s");
}

TEST_CASE("criterion 8: one-dimensional derivative stability") {
  SuiteOptions opt;
  auto reports = check_1d_derivative_battery(opt);
  REQUIRE(reports.size() == 2);
  CHECK(reports[0].pass);  // compatible data stays in the refinement band
  CHECK(reports[1].pass);  // incompatible data is flagged as unstable
  announce(8, "derivative-1d-stability", reports[0].pass && reports[1].pass,
           reports[0].detail + " | " + reports[1].detail);
}

TEST_CASE("criterion 9: duality of the splitting on functions and measures") {
  Scenario sc = canonical();
  PropertyReport r = check_duality(sc);
  CHECK(r.pass);
  CHECK(r.measured <= 1e-3);
  announce(9, "duality-consistency", r.pass, r.detail);
}
