#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "coagflow/measures.hpp"

namespace coagflow {

enum class Splitting { lie, strang };
enum class CoagSubstepKind { euler, exponential };

// Splitting realisation of the parameterised propagator: transport substeps
// alternating with bounded coagulation substeps, plus inception deposits.
struct PropagatorSchedule {
  double dt = 1e-2;
  Splitting splitting = Splitting::lie;
  CoagSubstepKind coag_substep = CoagSubstepKind::euler;
  std::shared_ptr<const Kernel> kernel;
  std::shared_ptr<const Delocalisation> deloc;
  std::shared_ptr<const FlowMap> flow;

  void validate() const;
};

struct FixedPointConfig {
  double containment_radius = 1.0;  // M
  double tolerance = 1e-9;          // sup-TV stopping threshold
  int max_iterations = 60;
};

struct SubstepDiagnostics {
  double t = 0.0;
  double tv = 0.0;
  double moi = 0.0;
  double min_mass = 0.0;
  double weight = 0.0;       // <1, c>
  double mass = 0.0;         // <y, c>
  double incepted_weight = 0.0;
  double incepted_mass = 0.0;
  double outflow_weight = 0.0;
  double outflow_mass = 0.0;
  long clip_events = 0;
  long overflow_events = 0;
};

struct WindowInfo {
  double start = 0.0;
  double length = 0.0;
  double tau_m = 0.0;   // containment horizon from the configured constants
  double r_m = 0.0;
  int iterations = 0;
  int halvings = 0;
  std::vector<double> ratios;
  double max_ratio = 0.0;
  double final_diff = 0.0;
};

struct SolveResult {
  Trajectory trajectory;  // measures at the requested output knots
  std::vector<SubstepDiagnostics> trace;
  std::vector<WindowInfo> windows;
  std::vector<std::string> warnings;
  long total_substeps = 0;
};

// Containment horizon of the fixed-point map for the given constants:
// r_M (||c0|| + 2 sup||I|| / (3 K C1 M)) = M,  tau_M = 2 log(r_M) / (3 K C1 M).
struct ContainmentWindow {
  double r_m = 0.0;
  double tau_m = 0.0;
};
ContainmentWindow containment_window(double c0_tv, double sup_inception,
                                     double k_inf, double c1, double m);

// Uniform substep partition of [a, b] with step at most dt (shared by the
// measure-side splitting and its function-side mirror).
std::vector<double> substep_times(double a, double b, double dt);

// One application of the splitting propagator A~^{t,s}[mu] to c; zero measure
// when t - s exceeds the residence bound by more than a step.
SpatialMeasure propagator_apply(const Trajectory& mu_param, const SpatialMeasure& c,
                                double s, double t, const PropagatorSchedule& sched,
                                SolveResult* log = nullptr);

// The fixed-point map: evolves c0 over [t_begin, t_end] with the coagulation
// generator parameterised by mu_param and inception deposited per substep.
// The returned trajectory has a knot at t_begin and at every substep end.
Trajectory psi_apply(const Trajectory& mu_param, const SpatialMeasure& c0,
                     double t_begin, double t_end, const PropagatorSchedule& sched,
                     const InceptionModel& inception, SolveResult* log = nullptr);

// Adds the inflow-boundary inception of one substep (t, t+dt] to c: per
// destination cell, the mass that entered through Gamma_in during the window
// in which its backward characteristic meets the boundary.
SpatialMeasure inception_boundary_deposit(const SpatialMeasure& c, double t,
                                          double dt, const InceptionModel& inception,
                                          const FlowMap& flow);

// Picard iteration over containment windows; the contraction is verified
// empirically per window and the window is halved when it fails.
SolveResult picard_solve(const SpatialMeasure& c0, double horizon,
                         const FixedPointConfig& cfg, const PropagatorSchedule& sched,
                         const InceptionModel& inception,
                         const std::vector<double>& output_knots);

// Self-consistent stepper: the parameter measure is the current state.
SolveResult direct_solve(const SpatialMeasure& c0, double horizon,
                         const PropagatorSchedule& sched,
                         const InceptionModel& inception,
                         const std::vector<double>& output_knots);

struct LipschitzReport {
  std::vector<double> times;
  std::vector<double> lhs;      // ||mu_t - nu_t||_TV
  std::vector<double> log_rhs;  // log of the certified bound
  double m_used = 0.0;
  double c4 = 0.0;  // growth constant (may be astronomically large)
  bool pass = false;
};

// Solves from both initial conditions and instantiates the
// Lipschitz-in-initial-data inequality at every knot (log-space comparison).
LipschitzReport lipschitz_initialdata_check(const SpatialMeasure& c0a,
                                            const SpatialMeasure& c0b,
                                            double horizon,
                                            const FixedPointConfig& cfg,
                                            const PropagatorSchedule& sched,
                                            const InceptionModel& inception,
                                            double slack = 1e-6);

}  // namespace coagflow
