#include "coagflow/det_solver.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace coagflow {

void PropagatorSchedule::validate() const {
  if (!(dt > 0.0)) throw ConfigError("schedule step must be positive");
  if (!kernel || !deloc || !flow) throw ConfigError("schedule is missing a model");
  const double t0 = flow->residence_bound();
  if (std::isfinite(t0) && dt > t0 / 10.0 * (1.0 + 1e-12))
    throw ConfigError("schedule step must not exceed a tenth of the residence bound");
}

ContainmentWindow containment_window(double c0_tv, double sup_inception,
                                     double k_inf, double c1, double m) {
  const double denom = 3.0 * k_inf * c1 * m;
  if (denom <= 0.0) return {kInf, kInf};
  const double base = c0_tv + 2.0 * sup_inception / denom;
  if (!(m > base))
    throw ConfigError("containment radius too small for the initial state");
  ContainmentWindow w;
  w.r_m = m / base;
  w.tau_m = 2.0 * std::log(w.r_m) / denom;
  return w;
}

namespace {

// Internal stepper: one splitting substep with cached edge geometry.
class Stepper {
 public:
  Stepper(const PropagatorSchedule& sched, const InceptionModel* inception)
      : sched_(sched), inception_(inception) {
    time_independent_ = sched.flow->field().time_independent();
  }

  // Advances c over [a, b]; mu_hat is the coagulation parameter measure.
  SpatialMeasure substep(SpatialMeasure c, double a, double b,
                         const SpatialMeasure& mu_hat, SubstepDiagnostics& diag) {
    const double delta = b - a;
    diag = SubstepDiagnostics{};
    diag.t = b;
    if (sched_.splitting == Splitting::lie) {
      c = transport(std::move(c), a, b, diag);
      c = coag(std::move(c), mu_hat, delta, diag);
    } else {
      const double mid = 0.5 * (a + b);
      c = transport(std::move(c), a, mid, diag);
      c = coag(std::move(c), mu_hat, delta, diag);
      c = transport(std::move(c), mid, b, diag);
    }
    if (inception_ && !inception_->empty() && c.is_grid()) {
      const double before_w = total_weight(c);
      const double before_m = total_mass_pairing(c);
      c = deposit_interior(std::move(c), a, delta);
      c = deposit_boundary(std::move(c), a, b);
      diag.incepted_weight = total_weight(c) - before_w;
      diag.incepted_mass = total_mass_pairing(c) - before_m;
    }
    c.time = b;
    diag.tv = tv_norm(c);
    if (c.is_grid()) {
      diag.moi = moi_norm(c);
      diag.min_mass = min_grid_mass(c);
    }
    diag.weight = total_weight(c);
    diag.mass = total_mass_pairing(c);
    return c;
  }

  SpatialMeasure deposit_boundary(SpatialMeasure c, double a, double b) {
    if (!inception_) return c;
    const double q_area = inception_->boundary_rate_per_area(a);
    if (q_area == 0.0) return c;
    const auto& flow = *sched_.flow;
    const auto& domain = flow.domain();
    if (flow.field().is_zero())
      throw FlowAssumptionViolation("boundary inception needs an inward flow");
    {
      const Vec n = domain.outward_normal(BoundaryClass::inflow);
      Vec xi = zero_vec();
      const double inward = -dot(flow.field().value(a, xi), n, domain.dim());
      if (inward <= 0.0)
        throw FlowAssumptionViolation("velocity not inward on Gamma_in");
    }
    c.require_grid("boundary inception deposit");
    const auto& ages = edge_ages(c.grid, b);
    const double area = domain.inflow_area();
    for (int i = 0; i < c.grid.cells; ++i) {
      // Entry window of destination cell i within (a, b].
      const double s_hi = b - ages[i];
      const double s_lo = std::max(a, b - ages[i + 1]);
      if (s_hi <= s_lo) break;  // ages increase along the axis
      const double win = std::min(s_hi, b) - s_lo;
      for (const auto& comp : inception_->boundary()) {
        const double number = comp.rate_per_area * area * win;
        for (std::size_t k = 0; k < comp.types.masses.size(); ++k)
          c.deposit(i, comp.types.masses[k], number * comp.types.weights[k]);
      }
    }
    return c;
  }

 private:
  SpatialMeasure transport(SpatialMeasure c, double a, double b,
                           SubstepDiagnostics& diag) {
    if (a == b || sched_.flow->field().is_zero()) {
      c.time = b;
      return c;
    }
    PushforwardResult r;
    if (c.is_grid() && time_independent_) {
      const EdgeFeet& feet = feet_for(c.grid, b - a);
      r = grid_remap(c, feet, b);
    } else {
      r = transport_pushforward(c, a, b, *sched_.flow);
    }
    diag.outflow_weight += r.outflow_weight;
    diag.outflow_mass += r.outflow_mass;
    return std::move(r.measure);
  }

  SpatialMeasure coag(SpatialMeasure c, const SpatialMeasure& mu_hat, double delta,
                      SubstepDiagnostics& diag) {
    if (sched_.kernel->is_zero()) return c;
    if (tv_norm(mu_hat) == 0.0) return c;
    CoagRates rates = compute_coag_rates(c, mu_hat, *sched_.kernel, *sched_.deloc);
    diag.overflow_events += rates.overflow_events;
    if (!c.is_grid()) {
      // Plain Euler on atoms (small instances only).
      SpatialMeasure out = c;
      for (auto& g : rates.gain.atoms) {
        g.weight *= delta;
        out.atoms.push_back(g);
      }
      for (auto& l : rates.loss.atoms) {
        l.weight *= -delta;
        out.atoms.push_back(l);
      }
      return out;
    }
    const std::size_t n = c.masses.size();
    if (sched_.coag_substep == CoagSubstepKind::euler) {
      for (std::size_t k = 0; k < n; ++k) {
        const double m = c.masses[k];
        double removed = delta * rates.loss.masses[k];
        if (m >= 0.0 && removed > m) {
          removed = m;  // loss clipping keeps the positive cone invariant
          ++diag.clip_events;
        }
        c.masses[k] = m - removed + delta * rates.gain.masses[k];
      }
    } else {
      for (std::size_t k = 0; k < n; ++k) {
        const double m = c.masses[k];
        if (m != 0.0) {
          const double lambda = rates.loss.masses[k] / m;
          c.masses[k] = m * std::exp(-delta * lambda);
        }
        c.masses[k] += delta * rates.gain.masses[k];
      }
    }
    return c;
  }

  SpatialMeasure deposit_interior(SpatialMeasure c, double a, double delta) {
    const double cellvol = c.grid.cell_volume();
    for (const auto& comp : inception_->interior()) {
      if (comp.rate_density == 0.0) continue;
      const double number = comp.rate_density * cellvol * delta;
      (void)a;
      for (int i = 0; i < c.grid.cells; ++i)
        for (std::size_t k = 0; k < comp.types.masses.size(); ++k)
          c.deposit(i, comp.types.masses[k], number * comp.types.weights[k]);
    }
    return c;
  }

  const EdgeFeet& feet_for(const GridSpec& grid, double delta) {
    const long key = std::lround(delta * 1e15);
    auto it = feet_cache_.find(key);
    if (it != feet_cache_.end()) return it->second;
    EdgeFeet feet = backward_edge_feet(grid, 0.0, delta, *sched_.flow, false);
    return feet_cache_.emplace(key, std::move(feet)).first->second;
  }

  const std::vector<double>& edge_ages(const GridSpec& grid, double t_end) {
    if (time_independent_ && !edge_ages_.empty()) return edge_ages_;
    const double t0 = sched_.flow->residence_bound();
    const double horizon = std::isfinite(t0) ? 2.0 * t0 + 1.0 : 1e6;
    std::vector<double> ages(grid.cells + 1);
    for (int e = 0; e <= grid.cells; ++e) {
      Vec x = grid.cell_center(0);
      x[0] = std::min(e * grid.cell_width(), grid.length * (1.0 - 1e-15));
      if (x[0] == 0.0) {
        ages[e] = 0.0;
        continue;
      }
      AdvectResult r = sched_.flow->advect(horizon, 0.0, x);
      if (!r.exited || r.exit.boundary != BoundaryClass::inflow)
        throw FlowAssumptionViolation(
            "backward characteristic from a grid edge does not reach Gamma_in");
      ages[e] = horizon - r.exit.time;
    }
    (void)t_end;
    if (time_independent_) edge_ages_ = ages;
    static thread_local std::vector<double> scratch;
    if (!time_independent_) {
      scratch = std::move(ages);
      return scratch;
    }
    return edge_ages_;
  }

  const PropagatorSchedule& sched_;
  const InceptionModel* inception_;
  bool time_independent_ = true;
  std::map<long, EdgeFeet> feet_cache_;
  std::vector<double> edge_ages_;
};

void warn_noncontractive(const Trajectory& mu_param, const PropagatorSchedule& sched,
                         SolveResult* log) {
  if (!log) return;
  for (const auto& w : log->warnings)
    if (w.rfind("non-contractive", 0) == 0) return;
  double sup = 0.0;
  for (const auto& m : mu_param.values) sup = std::max(sup, tv_norm(m));
  const double factor =
      1.5 * sched.kernel->bound() * sched.deloc->c1() * sup * sched.dt;
  if (factor > 0.5) {
    log->warnings.push_back(
        "non-contractive coagulation substep: (3/2) K C1 sup||mu|| dt = " +
        std::to_string(factor) + " > 0.5");
  }
}

}  // namespace

std::vector<double> substep_times(double a, double b, double dt) {
  std::vector<double> ts;
  ts.push_back(a);
  const double span = b - a;
  const long n = std::max(1L, long(std::ceil(span / dt - 1e-12)));
  for (long k = 1; k <= n; ++k) ts.push_back(a + span * double(k) / double(n));
  ts.back() = b;
  return ts;
}

SpatialMeasure propagator_apply(const Trajectory& mu_param, const SpatialMeasure& c,
                                double s, double t, const PropagatorSchedule& sched,
                                SolveResult* log) {
  if (t < s) throw Error("propagator_apply needs s <= t");
  const double t0 = sched.flow->residence_bound();
  if (t - s > t0 + sched.dt) {
    if (c.is_grid()) return SpatialMeasure::zero_grid(c.grid, c.bins, t);
    return SpatialMeasure::from_atoms({}, c.bins, t);
  }
  warn_noncontractive(mu_param, sched, log);
  Stepper stepper(sched, nullptr);
  SpatialMeasure cur = c;
  const auto ts = substep_times(s, t, sched.dt);
  for (std::size_t k = 0; k + 1 < ts.size(); ++k) {
    SubstepDiagnostics diag;
    const double mid = (sched.splitting == Splitting::strang)
                           ? 0.5 * (ts[k] + ts[k + 1])
                           : ts[k];
    cur = stepper.substep(std::move(cur), ts[k], ts[k + 1], mu_param.at(mid), diag);
    if (log) {
      log->trace.push_back(diag);
      ++log->total_substeps;
    }
  }
  return cur;
}

Trajectory psi_apply(const Trajectory& mu_param, const SpatialMeasure& c0,
                     double t_begin, double t_end, const PropagatorSchedule& sched,
                     const InceptionModel& inception, SolveResult* log) {
  warn_noncontractive(mu_param, sched, log);
  Stepper stepper(sched, &inception);
  Trajectory out;
  SpatialMeasure cur = c0;
  cur.time = t_begin;
  out.push(t_begin, cur);
  const auto ts = substep_times(t_begin, t_end, sched.dt);
  for (std::size_t k = 0; k + 1 < ts.size(); ++k) {
    SubstepDiagnostics diag;
    const double mid = (sched.splitting == Splitting::strang)
                           ? 0.5 * (ts[k] + ts[k + 1])
                           : ts[k];
    cur = stepper.substep(std::move(cur), ts[k], ts[k + 1], mu_param.at(mid), diag);
    if (log) {
      log->trace.push_back(diag);
      ++log->total_substeps;
    }
    out.push(ts[k + 1], cur);
  }
  return out;
}

SpatialMeasure inception_boundary_deposit(const SpatialMeasure& c, double t,
                                          double dt, const InceptionModel& inception,
                                          const FlowMap& flow) {
  if (dt > flow.residence_bound() + 1e-12)
    throw ConfigError("boundary deposit window must not exceed the residence bound");
  PropagatorSchedule sched;
  sched.dt = dt;
  sched.kernel = std::make_shared<ConstantKernel>(0.0, 0.0);
  sched.deloc = std::make_shared<UniformDelocalisation>(flow.domain(), 1.0);
  sched.flow = std::shared_ptr<const FlowMap>(&flow, [](const FlowMap*) {});
  Stepper stepper(sched, &inception);
  SpatialMeasure out = stepper.deposit_boundary(c, t, t + dt);
  out.time = t + dt;
  return out;
}

namespace {

double sup_tv_difference(const Trajectory& a, const Trajectory& b) {
  if (a.size() != b.size()) throw Error("trajectory knot mismatch");
  double worst = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k)
    worst = std::max(worst, tv_distance(a.values[k], b.values[k]));
  return worst;
}

Trajectory constant_trajectory(const SpatialMeasure& c, double t) {
  Trajectory tr;
  SpatialMeasure m = c;
  m.time = t;
  tr.push(t, std::move(m));
  return tr;
}

void record_knots(const Trajectory& window, const std::vector<double>& knots,
                  Trajectory& out, double window_end) {
  for (double k : knots) {
    if (k <= window_end + 1e-12 && (out.empty() || k > out.knots.back() + 1e-12) &&
        k >= window.knots.front() - 1e-12) {
      SpatialMeasure m = window.at(k + 1e-12);
      if (out.empty() || m.time > out.knots.back()) out.push(m.time, std::move(m));
    }
  }
}

}  // namespace

SolveResult picard_solve(const SpatialMeasure& c0, double horizon,
                         const FixedPointConfig& cfg, const PropagatorSchedule& sched,
                         const InceptionModel& inception,
                         const std::vector<double>& output_knots) {
  sched.validate();
  SolveResult res;
  const double k_inf = sched.kernel->bound();
  const double c1 = sched.deloc->c1();
  const double sup_i = inception.sup_total(sched.flow->domain());
  const double m_radius = cfg.containment_radius;

  SpatialMeasure c_start = c0;
  c_start.time = 0.0;
  res.trajectory.push(0.0, c_start);
  double t = 0.0;
  while (t < horizon - 1e-12) {
    ContainmentWindow cw;
    try {
      cw = containment_window(tv_norm(c_start), sup_i, k_inf, c1, m_radius);
    } catch (const ConfigError& e) {
      if (t > 0.0) throw ContainmentError(e.what());
      throw;
    }
    double tau = std::min(cw.tau_m, horizon - t);
    if (!(tau > 1e-9 * horizon) || t + tau == t)
      throw ContainmentError(
          "containment horizon collapsed; the radius is too small for the "
          "growing state");
    WindowInfo window;
    window.start = t;
    window.tau_m = cw.tau_m;
    window.r_m = cw.r_m;

    bool accepted = false;
    Trajectory accepted_traj;
    for (int attempt = 0; attempt < 10 && !accepted; ++attempt) {
      Trajectory mu = constant_trajectory(c_start, t);
      double prev_diff = -1.0;
      std::vector<double> ratios;
      double final_diff = 0.0;
      int iters = 0;
      bool contractive = true;
      SolveResult iter_log;
      for (int j = 1; j <= cfg.max_iterations; ++j) {
        iter_log = SolveResult{};
        Trajectory next = psi_apply(mu, c_start, t, t + tau, sched, inception,
                                    &iter_log);
        for (const auto& m : next.values) {
          if (tv_norm(m) > m_radius * (1.0 + 1e-9))
            throw ContainmentError("iterate left the containment ball");
        }
        double diff = (mu.size() == next.size())
                          ? sup_tv_difference(mu, next)
                          : kInf;  // first iterate has different knots
        if (mu.size() != next.size()) {
          // Compare against the constant initial guess at matching knots.
          diff = 0.0;
          for (std::size_t k = 0; k < next.size(); ++k)
            diff = std::max(diff, tv_distance(next.values[k], mu.at(next.knots[k])));
        }
        iters = j;
        final_diff = diff;
        if (prev_diff > 0.0 && prev_diff > 50.0 * cfg.tolerance)
          ratios.push_back(diff / prev_diff);
        mu = std::move(next);
        if (diff < cfg.tolerance) break;
        if (j == cfg.max_iterations) {
          if (!ratios.empty() && ratios.back() >= 1.0) {
            contractive = false;
            break;
          }
          throw NoConvergenceError(
              "fixed-point iteration did not reach tolerance; last ratio " +
              std::to_string(ratios.empty() ? -1.0 : ratios.back()));
        }
        prev_diff = diff;
      }
      if (!ratios.empty() && *std::max_element(ratios.begin(), ratios.end()) >= 1.0)
        contractive = false;
      if (!contractive) {
        tau *= 0.5;  // the guaranteed contraction horizon may be below tau_M
        ++window.halvings;
        continue;
      }
      accepted = true;
      window.iterations = iters;
      window.ratios = ratios;
      window.max_ratio = ratios.empty() ? 0.0 : *std::max_element(ratios.begin(), ratios.end());
      window.final_diff = final_diff;
      accepted_traj = std::move(mu);
      for (auto& d : iter_log.trace) res.trace.push_back(d);
      res.total_substeps += iter_log.total_substeps;
      for (auto& w : iter_log.warnings) res.warnings.push_back(std::move(w));
    }
    if (!accepted)
      throw NoConvergenceError("window halving failed to restore contraction");
    window.length = tau;
    res.windows.push_back(std::move(window));
    record_knots(accepted_traj, output_knots, res.trajectory, t + tau);
    c_start = accepted_traj.back();
    t += tau;
  }
  return res;
}

SolveResult direct_solve(const SpatialMeasure& c0, double horizon,
                         const PropagatorSchedule& sched,
                         const InceptionModel& inception,
                         const std::vector<double>& output_knots) {
  sched.validate();
  SolveResult res;
  Stepper stepper(sched, &inception);
  SpatialMeasure cur = c0;
  cur.time = 0.0;
  res.trajectory.push(0.0, cur);
  auto next_knot = output_knots.begin();
  const auto ts = substep_times(0.0, horizon, sched.dt);
  for (std::size_t k = 0; k + 1 < ts.size(); ++k) {
    SubstepDiagnostics diag;
    const SpatialMeasure param = cur;  // self-consistent parameter
    cur = stepper.substep(std::move(cur), ts[k], ts[k + 1], param, diag);
    res.trace.push_back(diag);
    ++res.total_substeps;
    while (next_knot != output_knots.end() && ts[k + 1] >= *next_knot - 1e-12) {
      res.trajectory.push(ts[k + 1], cur);
      ++next_knot;
      break;
    }
  }
  return res;
}

LipschitzReport lipschitz_initialdata_check(const SpatialMeasure& c0a,
                                            const SpatialMeasure& c0b,
                                            double horizon,
                                            const FixedPointConfig& cfg,
                                            const PropagatorSchedule& sched,
                                            const InceptionModel& inception,
                                            double slack) {
  std::vector<double> knots;
  const int n = std::max(4, int(horizon / (8.0 * sched.dt)));
  for (int k = 1; k <= n; ++k) knots.push_back(horizon * double(k) / n);

  SolveResult a = picard_solve(c0a, horizon, cfg, sched, inception, knots);
  SolveResult b = picard_solve(c0b, horizon, cfg, sched, inception, knots);

  double m_used = 0.0;
  for (const auto& d : a.trace) m_used = std::max(m_used, d.tv);
  for (const auto& d : b.trace) m_used = std::max(m_used, d.tv);
  m_used = std::max(m_used, std::max(tv_norm(c0a), tv_norm(c0b)));

  const double k_inf = sched.kernel->bound();
  const double c1 = sched.deloc->c1();
  const double t0 = sched.flow->residence_bound();
  const double sup_i = inception.sup_total(sched.flow->domain());
  const double c4 = 1.5 * k_inf * c1 * std::exp(std::min(700.0, 1.5 * k_inf * c1 * m_used * t0)) *
                    (tv_norm(c0a) + t0 * sup_i);

  LipschitzReport rep;
  rep.m_used = m_used;
  rep.c4 = c4;
  rep.pass = true;
  const double d0 = tv_distance(c0a, c0b);
  for (double t : knots) {
    const SpatialMeasure& ma = a.trajectory.at(t + 1e-12);
    const SpatialMeasure& mb = b.trajectory.at(t + 1e-12);
    const double lhs = tv_distance(ma, mb);
    const double log_rhs =
        std::log(std::max(d0, 1e-300)) + 1.5 * k_inf * c1 * m_used * std::min(t, t0) + c4 * t;
    rep.times.push_back(t);
    rep.lhs.push_back(lhs);
    rep.log_rhs.push_back(log_rhs);
    const double lhs_log = std::log(std::max(lhs - slack, 1e-300));
    if (lhs_log > log_rhs) rep.pass = false;
  }
  return rep;
}

}  // namespace coagflow
