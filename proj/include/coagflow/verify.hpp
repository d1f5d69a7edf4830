#pragma once

#include <string>
#include <vector>

#include "coagflow/scenario.hpp"

namespace coagflow {

// One executable property: pass iff measured <= bound + tolerance (or the
// stated predicate, recorded in `detail`).
struct PropertyReport {
  std::string property_id;
  std::string scenario_id;
  double measured = 0.0;
  double bound = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  std::string detail;
};

struct SuiteOptions {
  bool include_stochastic = true;
  int workers = 1;
  std::vector<long> n_list = {1000, 10000, 100000};
  int replicas = 32;
};

// Flow-map identity battery on linear fields (composition, determinant
// reciprocity, det = Liouville weight, two-sided gradient bound, entry/advect
// round trip), each to 1e-6.
std::vector<PropertyReport> check_flow_identities();

// ||H~[mu]c||_TV <= (3/2) K C1 ||mu|| ||c|| on randomised measures.
PropertyReport check_coag_norm_bound(const Scenario& sc);

// Transport contraction and the residence-time cutoff.
PropertyReport check_transport_cutoff(const Scenario& sc);

// |<f, A~ c> - <A f, c>| <= 1e-3 ||f|| ||c|| with the same splitting applied
// to functions and measures on small ensemble instances.
PropertyReport check_duality(const Scenario& sc);

// Fixed-point map norm estimate on a configured instance
// (K = C1 = 1, ||mu|| = 2, ||c0|| = 1, sup||I|| = 3, t = 0.5).
PropertyReport check_psi_bound();

// Density bound of one boundary-inception deposit window.
PropertyReport check_boundary_deposit_bound(const Scenario& sc);

// Checks on a solver result for the given scenario.
PropertyReport check_positivity(const Scenario& sc, const SolveResult& run);
PropertyReport check_global_bound(const Scenario& sc, const SolveResult& run);
PropertyReport check_window_formula(const Scenario& sc, const SolveResult& run);
PropertyReport check_contraction(const SolveResult& run);
PropertyReport check_density_bound(const Scenario& sc, const SolveResult& run);
PropertyReport check_dstar_quotient(const Scenario& sc, const SolveResult& run);

// Lipschitz dependence on the initial data: solves the scenario and a
// perturbed copy (uniform extra density `tv_perturb`).
PropertyReport check_lipschitz(const Scenario& sc, double tv_perturb,
                               double horizon);

// Inflow boundary condition: extrapolates the near-boundary density from the
// first two cells and compares u.c against the boundary intensity.
// Returns the relative residual at the last knot.
PropertyReport check_boundary_condition(const Trajectory& traj,
                                        const InceptionModel& inception,
                                        const FlowMap& flow);
// Plug-flow refinement battery (64/128/256 cells).
PropertyReport check_boundary_condition_refinement();

// Finite-difference x-derivative of the cell densities.
double derivative_sup(const Trajectory& traj);
// Stability of the density gradient under grid refinement.
PropertyReport check_1d_derivative(const Trajectory& coarse, const Trajectory& fine);
// Compatible initial data passes; a constructed incompatible one must fail.
std::vector<PropertyReport> check_1d_derivative_battery(const SuiteOptions& opt);

PropertyReport check_stochastic_convergence(const SuiteOptions& opt);

std::vector<PropertyReport> run_suite(const Scenario& canonical,
                                      const SuiteOptions& opt);

bool all_pass(const std::vector<PropertyReport>& reports);
std::string reports_text(const std::vector<PropertyReport>& reports);
std::string reports_json(const std::vector<PropertyReport>& reports);

}  // namespace coagflow
