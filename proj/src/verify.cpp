#include "coagflow/verify.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "coagflow/io.hpp"

namespace coagflow {

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

PropertyReport make_report(std::string id, std::string scenario, double measured,
                           double bound, double tol, bool pass, std::string detail) {
  return {std::move(id), std::move(scenario), measured, bound, tol, pass,
          std::move(detail)};
}

PropertyReport bound_report(std::string id, std::string scenario, double measured,
                            double bound, double tol, std::string detail = "") {
  const bool pass = measured <= bound + tol;
  return make_report(std::move(id), std::move(scenario), measured, bound, tol, pass,
                     std::move(detail));
}

Scenario tweaked_canonical(int grid_cells, double dt, double bin_ratio,
                           const char* initial_kind = nullptr,
                           double initial_density = 0.0) {
  nlohmann::json j = nlohmann::json::parse(canonical_scenario_json());
  j["numerics"]["grid_cells"] = grid_cells;
  j["numerics"]["dt"] = dt;
  j["numerics"]["bin_ratio"] = bin_ratio;
  if (initial_kind) {
    j["initial"]["kind"] = initial_kind;
    if (std::string(initial_kind) == "uniform") {
      j["initial"]["density"] = initial_density;
      j["initial"]["types"] = {{{"mass", 1.0}, {"weight", 1.0}}};
    }
  }
  return scenario_from_json_text(j.dump(), "canonical-variant");
}

}  // namespace

std::vector<PropertyReport> check_flow_identities() {
  std::vector<PropertyReport> out;
  const double tol = 1e-6;

  struct Case {
    std::string label;
    std::shared_ptr<const BoxDomain> domain;
    std::shared_ptr<const VelocityField> field;
    std::vector<Vec> points;
    double r, s, t;
  };
  std::vector<Case> cases;
  {
    auto dom = std::make_shared<BoxDomain>(1, 1.0);
    auto f = make_velocity_field("linear", 1, {1.0, 1.0}, *dom);  // u = 1 + x
    cases.push_back({"axial-linear", dom, f,
                     {Vec{0.05, 0, 0}, Vec{0.2, 0, 0}, Vec{0.4, 0, 0}},
                     0.0, 0.15, 0.3});
  }
  {
    auto dom = std::make_shared<BoxDomain>(2, 1.0, std::array<double, 2>{1.0, 1.0});
    auto f = make_velocity_field(
        "linear", 2, {0.2, 0.1, 0.05, -0.3, 1.0, 0.05}, *dom);
    cases.push_back({"planar-linear", dom, f,
                     {Vec{0.1, 0.4, 0}, Vec{0.3, 0.6, 0}, Vec{0.2, 0.2, 0}},
                     0.0, 0.1, 0.2});
  }

  double worst_comp = 0.0, worst_recip = 0.0, worst_det = 0.0, worst_bound = 0.0,
         worst_entry = 0.0;
  for (const auto& c : cases) {
    FlowMapConfig fc;
    fc.step = 1e-3;
    FlowMap flow(c.field, c.domain, fc);
    const int d = c.field->dim();
    for (const Vec& x : c.points) {
      auto mid = flow.advect(c.r, c.s, x);
      auto full = flow.advect(c.r, c.t, x);
      auto two = flow.advect(c.s, c.t, mid.position);
      if (mid.exited || full.exited || two.exited)
        throw FlowAssumptionViolation("flow battery point leaves the domain");
      double err = 0.0;
      for (int i = 0; i < d; ++i)
        err = std::max(err, std::abs(two.position[i] - full.position[i]));
      worst_comp = std::max(worst_comp, err);

      const double lw = flow.liouville_weight(c.s, c.t, x);
      const Vec y = flow.advect(c.s, c.t, x).position;
      const double lw_back = flow.liouville_weight(c.t, c.s, y);
      worst_recip = std::max(worst_recip, std::abs(lw * lw_back - 1.0));

      const Mat j = flow.flow_gradient(c.s, c.t, x);
      worst_det = std::max(worst_det, std::abs(mat_det(j, d) - lw));

      const double opn = mat_opnorm(j, d);
      const double g = c.field->bounds().sup_grad_opnorm;
      const double upper = std::exp(g * (c.t - c.s));
      const double lower = std::exp(-g * (c.t - c.s));
      double viol = 0.0;
      if (opn > upper) viol = opn - upper;
      if (opn < lower) viol = std::max(viol, lower - opn);
      worst_bound = std::max(worst_bound, viol);

      // Entry data followed by forward advection returns to the start point.
      EntryData e = flow.entry_data(c.t + 1.0, x);
      auto back = flow.advect(e.time, c.t + 1.0, e.position);
      if (back.exited)
        throw FlowAssumptionViolation("entry round trip left the domain");
      double rerr = 0.0;
      for (int i = 0; i < d; ++i)
        rerr = std::max(rerr, std::abs(back.position[i] - x[i]));
      worst_entry = std::max(worst_entry, rerr);
    }
  }
  out.push_back(bound_report("flow-composition", "flow-battery", worst_comp, 0.0, tol));
  out.push_back(bound_report("flow-det-reciprocity", "flow-battery", worst_recip, 0.0, tol));
  out.push_back(bound_report("flow-gradient-det", "flow-battery", worst_det, 0.0, tol));
  out.push_back(bound_report("flow-gradient-two-sided", "flow-battery", worst_bound, 0.0, tol));
  out.push_back(bound_report("flow-entry-roundtrip", "flow-battery", worst_entry, 0.0, tol));
  return out;
}

PropertyReport check_coag_norm_bound(const Scenario& sc) {
  Philox rng(sc.numerics.seed, 77);
  const double k_inf = sc.kernel->bound();
  const double c1 = sc.deloc->c1();
  double worst_ratio = 0.0;
  for (int trial = 0; trial < 8; ++trial) {
    SpatialMeasure c = SpatialMeasure::zero_grid(sc.grid, sc.bins, 0.0);
    SpatialMeasure mu = SpatialMeasure::zero_grid(sc.grid, sc.bins, 0.0);
    for (int k = 0; k < 200; ++k) {
      const int cell = int(rng.uniform_below(std::uint64_t(sc.grid.cells)));
      const int bin = int(rng.uniform_below(std::uint64_t(sc.bins->size())));
      c.at(cell, bin) += rng.uniform_range(-1.0, 1.0) * 0.05;
      const int cell2 = int(rng.uniform_below(std::uint64_t(sc.grid.cells)));
      mu.at(cell2, bin) += rng.uniform_range(-1.0, 1.0) * 0.05;
    }
    const SpatialMeasure hc = coag_generator_apply(c, mu, *sc.kernel, *sc.deloc);
    const double denom = 1.5 * k_inf * c1 * tv_norm(mu) * tv_norm(c);
    if (denom > 0.0) worst_ratio = std::max(worst_ratio, tv_norm(hc) / denom);
  }
  return bound_report("coag-operator-norm", sc.name, worst_ratio, 1.0, 1e-9,
                      "sup ||H~[mu]c|| / ((3/2) K C1 ||mu|| ||c||) over random signed measures");
}

PropertyReport check_transport_cutoff(const Scenario& sc) {
  const double t0 = sc.flow->residence_bound();
  SpatialMeasure c = SpatialMeasure::zero_grid(sc.grid, sc.bins, 0.0);
  for (int i = 0; i < sc.grid.cells; ++i) c.deposit(i, 1.0, 1.0 / sc.grid.cells);
  const double tv0 = tv_norm(c);
  double worst = 0.0;
  for (double t : {0.1 * t0, 0.5 * t0, 0.9 * t0}) {
    auto r = transport_pushforward(c, 0.0, t, *sc.flow);
    worst = std::max(worst, tv_norm(r.measure) - tv0);
  }
  auto beyond = transport_pushforward(c, 0.0, t0 * 1.01, *sc.flow);
  const double residual = tv_norm(beyond.measure);
  const bool pass = worst <= 1e-12 && residual <= 1e-12;
  return make_report("transport-residence-cutoff", sc.name,
                     std::max(worst, residual), 0.0, 1e-12, pass,
                     "TV non-increase under pushforward and zero measure beyond the residence bound");
}

namespace {

// Function-side mirror of the splitting propagator, built lazily.
TestFn dual_transport(TestFn g, std::shared_ptr<const FlowMap> flow, double a,
                      double b) {
  return [g = std::move(g), flow, a, b](const Vec& x, double y) {
    AdvectResult r = flow->advect(a, b, x);
    if (r.exited) return 0.0;
    return g(r.position, y);
  };
}

TestFn dual_coag(TestFn g, SpatialMeasure mu, std::shared_ptr<const Kernel> kernel,
                 std::shared_ptr<const Delocalisation> h, double delta) {
  return [g = std::move(g), mu = std::move(mu), kernel, h, delta](const Vec& x,
                                                                  double y) {
    double gain = 0.0, lossrate = 0.0;
    for (const auto& p : mu.atoms) {
      const double k = kernel->evaluate(y, p.mass);
      if (k == 0.0) continue;
      const double h12 = h->evaluate(x, p.x);
      const double h21 = h->evaluate(p.x, x);
      if (h12 != 0.0) gain += 0.5 * k * h12 * p.weight * g(x, y + p.mass);
      lossrate += 0.5 * k * (h12 + h21) * p.weight;
    }
    return g(x, y) + delta * (gain - lossrate * g(x, y));
  };
}

TestFn dual_propagator(TestFn f, const Trajectory& mu_param, double s, double t,
                       const PropagatorSchedule& sched) {
  const auto ts = substep_times(s, t, sched.dt);
  TestFn g = std::move(f);
  for (std::size_t k = ts.size() - 1; k-- > 0;) {
    const double a = ts[k], b = ts[k + 1];
    if (sched.splitting == Splitting::lie) {
      g = dual_coag(std::move(g), mu_param.at(a), sched.kernel, sched.deloc, b - a);
      g = dual_transport(std::move(g), sched.flow, a, b);
    } else {
      const double mid = 0.5 * (a + b);
      g = dual_transport(std::move(g), sched.flow, mid, b);
      g = dual_coag(std::move(g), mu_param.at(mid), sched.kernel, sched.deloc, b - a);
      g = dual_transport(std::move(g), sched.flow, a, mid);
    }
  }
  return g;
}

}  // namespace

PropertyReport check_duality(const Scenario& sc) {
  // Small ensemble instance: 4 atoms against a 3-atom parameter measure.
  std::vector<EnsembleAtom> catoms = {
      {{0.10, 0, 0}, 1.0, 0.30},
      {{0.35, 0, 0}, 2.0, 0.20},
      {{0.60, 0, 0}, 1.0, 0.25},
      {{0.85, 0, 0}, 3.0, 0.25},
  };
  std::vector<EnsembleAtom> matoms = {
      {{0.15, 0, 0}, 1.0, 0.4},
      {{0.40, 0, 0}, 2.0, 0.3},
      {{0.70, 0, 0}, 1.0, 0.3},
  };
  SpatialMeasure c = SpatialMeasure::from_atoms(catoms, nullptr, 0.0);
  Trajectory mu;
  mu.push(0.0, SpatialMeasure::from_atoms(matoms, nullptr, 0.0));

  PropagatorSchedule sched = sc.schedule();
  sched.dt = 0.05;
  const double s = 0.0, t = 0.2;

  double worst = 0.0;
  const double tvc = tv_norm(c);
  const Dictionary dict = sc.dictionary();
  for (const auto& f : dict) {
    const SpatialMeasure pushed = propagator_apply(mu, c, s, t, sched);
    const double lhs = pair(f.f, pushed);
    const TestFn af = dual_propagator(f.f, mu, s, t, sched);
    const double rhs = pair(af, c);
    const double scale = std::max(1e-30, f.sup * tvc);
    worst = std::max(worst, std::abs(lhs - rhs) / scale);
  }
  return bound_report("duality-pairing", sc.name, worst, 0.0, 1e-3,
                      "|<f, A~c> - <Af, c>| / (||f|| ||c||) with mirrored splitting");
}

PropertyReport check_psi_bound() {
  // Instance with K = C1 = 1, ||mu|| = 2, ||c0|| = 1, sup||I|| = 3, t = 0.5.
  const std::string json = R"({
    "schema_version": 1,
    "name": "psi-bound",
    "domain": {"dimension": 1, "length": 1.0},
    "velocity": {"name": "constant", "params": [1.0]},
    "kernel": {"name": "constant", "params": [1.0], "bound": 1.0},
    "delocalisation": {"form": "uniform", "value": 1.0},
    "inception": {
      "boundary": [{"rate_per_area": 3.0, "types": [{"mass": 1.0, "weight": 1.0}]}],
      "flux_bound": 3.0
    },
    "initial": {"kind": "uniform", "density": 1.0, "types": [{"mass": 1.0, "weight": 1.0}]},
    "horizon": 0.5,
    "numerics": {
      "dt": 0.01, "grid_cells": 16, "mass_max": 64.0, "flow_step": 0.001,
      "picard": {"containment_radius": 4.0}, "seed": 5
    },
    "output": {"knots": [0.5]}
  })";
  Scenario sc = scenario_from_json_text(json, "psi-bound");
  SpatialMeasure c0 = sc.initial_measure();

  Trajectory mu;
  mu.push(0.0, scaled(c0, 2.0));  // constant parameter path with ||mu|| = 2

  Trajectory psi = psi_apply(mu, c0, 0.0, 0.5, sc.schedule(), *sc.inception);
  const double measured = tv_norm(psi.back());
  const double t0 = sc.flow->residence_bound();
  const double t = 0.5;
  const double norm_mu = 2.0, norm_c0 = 1.0, sup_i = 3.0;
  double bound = std::exp(1.5 * norm_mu * std::min(t, t0)) *
                 ((t <= t0 ? norm_c0 : 0.0) + 2.0 * sup_i / (3.0 * norm_mu));
  return bound_report("psi-norm-bound", sc.name, measured, bound, 1e-9,
                      "||Psi(mu)(0.5)|| against the exponential norm estimate " + fmt(bound));
}

PropertyReport check_boundary_deposit_bound(const Scenario& sc) {
  SpatialMeasure empty = SpatialMeasure::zero_grid(sc.grid, sc.bins, 0.0);
  const double dt = 8.0 * sc.numerics.dt;
  SpatialMeasure dep = inception_boundary_deposit(empty, 1.0, dt, *sc.inception,
                                                  *sc.flow);
  const double t0 = sc.flow->residence_bound();
  const double div_sup = sc.velocity->bounds().sup_divergence;
  const double i_star = sc.inception->flux_bound();
  const double bound = i_star * std::exp(div_sup * std::min(dt, t0));
  return bound_report("boundary-deposit-density", sc.name, moi_norm(dep), bound, 1e-9,
                      "M_{0,inf} norm of one deposit window");
}

PropertyReport check_positivity(const Scenario& sc, const SolveResult& run) {
  double min_mass = 0.0;
  for (const auto& d : run.trace) min_mass = std::min(min_mass, d.min_mass);
  return bound_report("positivity", sc.name, -min_mass, 0.0, 1e-12,
                      "negative part of the smallest bin mass over all knots");
}

PropertyReport check_global_bound(const Scenario& sc, const SolveResult& run) {
  const double t0 = sc.flow->residence_bound();
  const double sup_i = sc.inception->sup_total(*sc.domain);
  const double c0_tv = tv_norm(sc.initial_measure());
  double worst = -kInf;
  for (const auto& d : run.trace) {
    const double bound =
        (d.t <= t0 ? c0_tv : 0.0) + std::min(d.t, t0) * sup_i;
    worst = std::max(worst, d.tv - bound);
  }
  return bound_report("global-mass-bound", sc.name, worst, 0.0, 1e-6,
                      "max over knots of ||c_t|| minus the residence-time bound");
}

PropertyReport check_window_formula(const Scenario& sc, const SolveResult& run) {
  const double k_inf = sc.kernel->bound();
  const double c1 = sc.deloc->c1();
  const double m = sc.numerics.picard.containment_radius;
  double worst = 0.0;
  for (const auto& w : run.windows) {
    if (!std::isfinite(w.r_m)) continue;
    const double denom = 3.0 * k_inf * c1 * m;
    const double expect = 2.0 * std::log(w.r_m) / denom;
    worst = std::max(worst, std::abs(w.tau_m - expect));
  }
  return bound_report("picard-window-formula", sc.name, worst, 0.0, 0.0,
                      "tau_M recomputed from (r_M, K, C1, M) over " +
                          std::to_string(run.windows.size()) + " windows");
}

PropertyReport check_contraction(const SolveResult& run) {
  double worst = 0.0;
  for (const auto& w : run.windows) worst = std::max(worst, w.max_ratio);
  return bound_report("picard-contraction-ratio", "picard", worst, 0.95, 0.0,
                      "max empirical ratio over " + std::to_string(run.windows.size()) +
                          " windows");
}

PropertyReport check_density_bound(const Scenario& sc, const SolveResult& run) {
  const double t0 = sc.flow->residence_bound();
  const double div_sup = sc.velocity->bounds().sup_divergence;
  const double i_star = sc.inception->flux_bound();
  double sup_int_moi = 0.0;
  for (const auto& comp : sc.inception->interior())
    sup_int_moi += comp.rate_density;
  const double c0_moi = moi_norm(sc.initial_measure());
  const double factor = std::exp(div_sup * std::min(3.0 * t0, t0));
  const double bound = factor * (c0_moi + i_star + t0 * sup_int_moi);
  double measured = 0.0;
  for (const auto& d : run.trace) measured = std::max(measured, d.moi);
  return bound_report("density-sup-bound", sc.name, measured, bound, 1e-9,
                      "sup_t of the position-density TV against the smoothing bound");
}

PropertyReport check_dstar_quotient(const Scenario& sc, const SolveResult& run) {
  const Dictionary dict = sc.dictionary();
  const double k_inf = sc.kernel->bound();
  const double c1 = sc.deloc->c1();
  const double u_sup = sc.velocity->bounds().sup_speed;
  const double sup_i = sc.inception->sup_total(*sc.domain);
  double measured = 0.0, bound = 0.0;
  const auto& traj = run.trajectory;
  for (std::size_t k = 0; k + 1 < traj.size(); ++k) {
    const double dtk = traj.knots[k + 1] - traj.knots[k];
    SpatialMeasure diff = axpy(traj.values[k + 1], traj.values[k], -1.0);
    measured = std::max(measured, dstar_norm_surrogate(diff, dict) / dtk);
    const double tvk = std::max(tv_norm(traj.values[k]), tv_norm(traj.values[k + 1]));
    bound = std::max(bound, sup_i + (u_sup + 1.5 * k_inf * c1 * tvk) * tvk);
  }
  return bound_report("dstar-difference-quotient", sc.name, measured, bound, 1e-9,
                      "surrogate-norm difference quotients against the derivative estimate");
}

PropertyReport check_lipschitz(const Scenario& sc, double tv_perturb, double horizon) {
  SpatialMeasure c0a = sc.initial_measure();
  SpatialMeasure c0b = c0a;
  const double density = tv_perturb / sc.domain->volume();
  for (int i = 0; i < c0b.grid.cells; ++i)
    c0b.deposit(i, 1.0, density * c0b.grid.cell_volume());

  FixedPointConfig cfg = sc.numerics.picard;
  cfg.containment_radius += tv_perturb;
  LipschitzReport rep = lipschitz_initialdata_check(c0a, c0b, horizon, cfg,
                                                    sc.schedule(), *sc.inception);
  double worst = -kInf;
  for (std::size_t k = 0; k < rep.times.size(); ++k) {
    const double lhs_log = std::log(std::max(rep.lhs[k], 1e-300));
    worst = std::max(worst, lhs_log - rep.log_rhs[k]);
  }
  return make_report("lipschitz-initial-data", sc.name, worst, 0.0, 1e-6, rep.pass,
                     "log-space margin of the initial-data growth bound, C4 = " +
                         fmt(rep.c4));
}

PropertyReport check_boundary_condition(const Trajectory& traj,
                                        const InceptionModel& inception,
                                        const FlowMap& flow) {
  if (traj.empty()) throw Error("empty trajectory");
  const SpatialMeasure& m = traj.back();
  m.require_grid("check_boundary_condition");
  const double vol = m.grid.cell_volume();
  auto cell_tv = [&](int i) {
    double s = 0.0;
    for (int b = 0; b < m.nbins(); ++b) s += std::abs(m.at(i, b));
    return s / vol;
  };
  // Linear extrapolation from the first two cell averages to x1 = 0.
  const double c_at_0 = 1.5 * cell_tv(0) - 0.5 * cell_tv(1);
  Vec xi = zero_vec();
  const double u0 = flow.field().value(traj.knots.back(), xi)[0];
  const double q = inception.boundary_rate_per_area(traj.knots.back());
  if (q <= 0.0) {
    return bound_report("boundary-inflow-condition", "custom",
                        std::abs(c_at_0) * u0, 0.0, 1e-8,
                        "no boundary intensity: extrapolated density must vanish");
  }
  const double residual = std::abs(u0 * c_at_0 * m.grid.cross_area() -
                                   q * flow.domain().inflow_area()) /
                          (q * flow.domain().inflow_area());
  return bound_report("boundary-inflow-condition", "custom", residual, 0.05, 0.0,
                      "relative residual of u.c = I_bdry at Gamma_in");
}

PropertyReport check_boundary_condition_refinement() {
  std::vector<int> grids = {64, 128, 256};
  std::vector<double> residuals;
  for (int g : grids) {
    Scenario sc = scenario_from_json_text(plugflow_scenario_json(g), "plugflow");
    SolveResult run = direct_solve(sc.initial_measure(), sc.horizon, sc.schedule(),
                                   *sc.inception, sc.knots);
    PropertyReport r = check_boundary_condition(run.trajectory, *sc.inception, *sc.flow);
    residuals.push_back(r.measured);
  }
  const double floor = 1e-8;
  bool decreasing = true;
  for (std::size_t k = 1; k < residuals.size(); ++k) {
    if (residuals[k] > std::max(residuals[k - 1] * (1.0 + 1e-9), floor))
      decreasing = false;
  }
  const bool pass = residuals.back() <= 0.05 && decreasing;
  std::ostringstream det;
  det << "plug-flow residuals at 64/128/256 cells:";
  for (double r : residuals) det << ' ' << fmt(r);
  return make_report("boundary-inflow-condition", "plugflow", residuals.back(), 0.05,
                     0.0, pass, det.str());
}

double derivative_sup(const Trajectory& traj) {
  double worst = 0.0;
  for (const auto& m : traj.values) {
    if (!m.is_grid()) throw RepresentationError("derivative_sup needs grid form");
    if (m.grid.dim != 1) throw NotApplicableError("derivative diagnostic is 1-d only");
    const double w = m.grid.cell_width();
    const double vol = m.grid.cell_volume();
    for (int i = 0; i + 1 < m.grid.cells; ++i) {
      double d = 0.0;
      for (int b = 0; b < m.nbins(); ++b)
        d += std::abs(m.at(i + 1, b) - m.at(i, b));
      worst = std::max(worst, d / vol / w);
    }
  }
  return worst;
}

PropertyReport check_1d_derivative(const Trajectory& coarse, const Trajectory& fine) {
  const double d_coarse = derivative_sup(coarse);
  const double d_fine = derivative_sup(fine);
  const double ratio = d_coarse > 0.0 ? d_fine / d_coarse : 1.0;
  const bool pass = ratio >= 0.8 && ratio <= 1.25;
  return make_report("derivative-1d-stability", "refinement-pair", ratio, 1.25, 0.0,
                     pass,
                     "sup|dc/dx| at h/2 over h: " + fmt(d_fine) + " / " + fmt(d_coarse));
}

std::vector<PropertyReport> check_1d_derivative_battery(const SuiteOptions&) {
  std::vector<PropertyReport> out;
  // Compatible data: uniform density matching u.c = I_bdry at the boundary.
  Scenario compat_h = tweaked_canonical(128, 1.0 / 128.0, 1.189207115002721,
                                        "uniform", 1.0);
  Scenario compat_h2 = tweaked_canonical(256, 1.0 / 256.0, 1.189207115002721,
                                         "uniform", 1.0);
  SolveResult rc = direct_solve(compat_h.initial_measure(), compat_h.horizon,
                                compat_h.schedule(), *compat_h.inception,
                                compat_h.knots);
  SolveResult rf = direct_solve(compat_h2.initial_measure(), compat_h2.horizon,
                                compat_h2.schedule(), *compat_h2.inception,
                                compat_h2.knots);
  PropertyReport ok = check_1d_derivative(rc.trajectory, rf.trajectory);
  ok.scenario_id = "canonical-compatible";
  out.push_back(ok);

  // Incompatible data (zero initial state against a positive inflow trace):
  // the gradient must blow up under refinement and the check must FAIL.
  Scenario incompat_h = tweaked_canonical(128, 1.0 / 128.0, 1.189207115002721);
  Scenario incompat_h2 = tweaked_canonical(256, 1.0 / 256.0, 1.189207115002721);
  SolveResult ic = direct_solve(incompat_h.initial_measure(), incompat_h.horizon,
                                incompat_h.schedule(), *incompat_h.inception,
                                incompat_h.knots);
  SolveResult if2 = direct_solve(incompat_h2.initial_measure(), incompat_h2.horizon,
                                 incompat_h2.schedule(), *incompat_h2.inception,
                                 incompat_h2.knots);
  PropertyReport bad = check_1d_derivative(ic.trajectory, if2.trajectory);
  PropertyReport flipped = make_report(
      "derivative-1d-incompatible-detected", "canonical-incompatible", bad.measured,
      1.25, 0.0, !bad.pass,
      "incompatible initial data must fail the stability band; ratio " +
          fmt(bad.measured));
  out.push_back(flipped);
  return out;
}

PropertyReport check_stochastic_convergence(const SuiteOptions& opt) {
  // Deterministic reference: joint Richardson extrapolation in (h, dt).
  const double r8 = std::pow(2.0, 0.125);
  Scenario ref_coarse = tweaked_canonical(256, 1.0 / 256.0, r8);
  Scenario ref_fine = tweaked_canonical(512, 1.0 / 512.0, r8);
  const std::vector<double> sel = {1.5, 2.25, 3.0};
  const Dictionary dict = smooth_subset(ref_coarse.dictionary());

  auto pairings = [&](const Scenario& sc) {
    SolveResult run = direct_solve(sc.initial_measure(), sc.horizon, sc.schedule(),
                                   *sc.inception, sel);
    std::vector<std::vector<double>> vals(sel.size(),
                                          std::vector<double>(dict.size(), 0.0));
    for (std::size_t k = 0; k < sel.size(); ++k) {
      const SpatialMeasure& m = run.trajectory.at(sel[k] + 1e-12);
      for (std::size_t f = 0; f < dict.size(); ++f)
        vals[k][f] = pair(dict[f].f, m);
    }
    return vals;
  };
  const auto pc = pairings(ref_coarse);
  const auto pf = pairings(ref_fine);
  std::vector<std::vector<double>> ref(sel.size(),
                                       std::vector<double>(dict.size(), 0.0));
  for (std::size_t k = 0; k < sel.size(); ++k)
    for (std::size_t f = 0; f < dict.size(); ++f)
      ref[k][f] = 2.0 * pf[k][f] - pc[k][f];

  // Monte Carlo runs.  The weak error of the empirical measure at scale N is
  // measured as the RMS over replicas and knots of the single-realisation
  // pairing deviation from the reference; the replicas exist to resolve that
  // expectation, which scales like 1/sqrt(N).
  Scenario stoch = scenario_from_json_text(canonical_scenario_json(), "canonical");
  std::vector<std::vector<double>> err(opt.n_list.size(),
                                       std::vector<double>(dict.size(), 0.0));
  for (std::size_t ni = 0; ni < opt.n_list.size(); ++ni) {
    ReplicaMoments mom = replica_moments(
        stoch.initial_measure(), stoch.horizon, opt.n_list[ni], opt.replicas,
        stoch.numerics.seed + ni, stoch.stoch_models(), sel, dict, opt.workers);
    for (std::size_t f = 0; f < dict.size(); ++f) {
      double acc = 0.0;
      for (std::size_t k = 0; k < sel.size(); ++k)
        for (int r = 0; r < opt.replicas; ++r) {
          const double e = mom.raw[std::size_t(r)][k][f] - ref[k][f];
          acc += e * e;
        }
      err[ni][f] = std::sqrt(acc / double(sel.size() * std::size_t(opt.replicas)));
    }
  }

  int good = 0;
  std::ostringstream det;
  det.precision(4);
  for (std::size_t f = 0; f < dict.size(); ++f) {
    bool monotone = true;
    for (std::size_t ni = 1; ni < opt.n_list.size(); ++ni)
      if (err[ni][f] >= err[ni - 1][f]) monotone = false;
    // Least-squares slope of log10(err) against log10(N).
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = double(opt.n_list.size());
    for (std::size_t ni = 0; ni < opt.n_list.size(); ++ni) {
      const double x = std::log10(double(opt.n_list[ni]));
      const double y = std::log10(std::max(err[ni][f], 1e-300));
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
    }
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    const bool ok = monotone && slope >= -0.65 && slope <= -0.35;
    if (ok) ++good;
    det << dict[f].name << ": slope " << slope << (monotone ? "" : " (not monotone)")
        << (ok ? " ok; " : " FAIL; ");
  }
  return make_report("stochastic-convergence", "canonical", double(good), 3.0, 0.0,
                     good >= 3, det.str());
}

std::vector<PropertyReport> run_suite(const Scenario& canonical,
                                      const SuiteOptions& opt) {
  std::vector<PropertyReport> out;
  for (auto& r : check_flow_identities()) out.push_back(std::move(r));
  out.push_back(check_coag_norm_bound(canonical));
  out.push_back(check_transport_cutoff(canonical));
  out.push_back(check_duality(canonical));
  out.push_back(check_psi_bound());
  out.push_back(check_boundary_deposit_bound(canonical));

  SolveResult run = picard_solve(canonical.initial_measure(), canonical.horizon,
                                 canonical.numerics.picard, canonical.schedule(),
                                 *canonical.inception, canonical.knots);
  out.push_back(check_positivity(canonical, run));
  out.push_back(check_global_bound(canonical, run));
  out.push_back(check_window_formula(canonical, run));
  out.push_back(check_contraction(run));
  out.push_back(check_density_bound(canonical, run));
  out.push_back(check_dstar_quotient(canonical, run));
  {
    // Global-horizon solvability with the positive-data radius.
    bool ok = !run.windows.empty();
    double sup_tv = 0.0;
    for (const auto& d : run.trace) sup_tv = std::max(sup_tv, d.tv);
    ok = ok && sup_tv <= canonical.numerics.picard.containment_radius + 1e-9;
    out.push_back(make_report("global-horizon-windows", canonical.name, sup_tv,
                              canonical.numerics.picard.containment_radius, 1e-9, ok,
                              std::to_string(run.windows.size()) +
                                  " windows cover the horizon inside the ball"));
  }
  out.push_back(check_lipschitz(canonical, 0.1, 1.5));
  out.push_back(check_boundary_condition_refinement());
  {
    PropertyReport r = check_boundary_condition(run.trajectory, *canonical.inception,
                                                *canonical.flow);
    r.scenario_id = canonical.name;
    out.push_back(std::move(r));
  }
  for (auto& r : check_1d_derivative_battery(opt)) out.push_back(std::move(r));
  if (opt.include_stochastic) out.push_back(check_stochastic_convergence(opt));
  return out;
}

bool all_pass(const std::vector<PropertyReport>& reports) {
  for (const auto& r : reports)
    if (!r.pass) return false;
  return true;
}

std::string reports_text(const std::vector<PropertyReport>& reports) {
  std::ostringstream os;
  for (const auto& r : reports) {
    os << (r.pass ? "PASS" : "FAIL") << "  " << r.property_id << " [" << r.scenario_id
       << "] measured=" << fmt(r.measured) << " bound=" << fmt(r.bound)
       << " tol=" << fmt(r.tolerance);
    if (!r.detail.empty()) os << "  -- " << r.detail;
    os << "\n";
  }
  return os.str();
}

std::string reports_json(const std::vector<PropertyReport>& reports) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : reports) {
    arr.push_back({{"property", r.property_id},
                   {"scenario", r.scenario_id},
                   {"measured", r.measured},
                   {"bound", r.bound},
                   {"tolerance", r.tolerance},
                   {"pass", r.pass},
                   {"detail", r.detail}});
  }
  return arr.dump(2) + "\n";
}

}  // namespace coagflow
