#include "coagflow/flowfield.hpp"

#include <algorithm>
#include <cmath>

namespace coagflow {

double VelocityField::divergence(double t, const Vec& x) const {
  Mat g = gradient(t, x);
  double d = 0.0;
  for (int i = 0; i < dim(); ++i) d += g[i][i];
  return d;
}

LinearField::LinearField(int dim, Mat a, Vec b, Vec box_lo, Vec box_hi)
    : dim_(dim), a_(a), b_(b) {
  // |u| is convex in x, so the supremum over the closed box is at a corner.
  double sup_speed = 0.0;
  const int corners = 1 << dim;
  for (int c = 0; c < corners; ++c) {
    Vec x = zero_vec();
    for (int i = 0; i < dim; ++i) x[i] = (c >> i & 1) ? box_hi[i] : box_lo[i];
    sup_speed = std::max(sup_speed, norm2(value(0.0, x), dim));
  }
  double div = 0.0;
  for (int i = 0; i < dim; ++i) div += a[i][i];
  bounds_ = {sup_speed, std::abs(div), mat_opnorm(a, dim), 0.0};
}

Vec LinearField::value(double, const Vec& x) const {
  Vec u = mat_vec(a_, x, dim_);
  for (int i = 0; i < dim_; ++i) u[i] += b_[i];
  return u;
}

ShearField::ShearField(int dim, double a, double b, double width2)
    : dim_(dim), a_(a), b_(b) {
  double sup = std::max(std::abs(a), std::abs(a + b * width2));
  bounds_ = {sup, 0.0, std::abs(b), 0.0};
}

Vec ShearField::value(double, const Vec& x) const {
  Vec u = zero_vec();
  u[0] = a_ + b_ * x[1];
  return u;
}

Mat ShearField::gradient(double, const Vec&) const {
  Mat g = zero_mat();
  g[0][1] = b_;
  return g;
}

PolynomialField1D::PolynomialField1D(std::vector<double> coeffs, double length)
    : coeffs_(std::move(coeffs)) {
  double sup = 0.0, supd = 0.0, supdd = 0.0;
  const int n = 4096;
  for (int i = 0; i <= n; ++i) {
    double x = length * double(i) / n;
    sup = std::max(sup, std::abs(eval_poly(x)));
    supd = std::max(supd, std::abs(eval_dpoly(x)));
    double ddp = 0.0;
    for (std::size_t k = 2; k < coeffs_.size(); ++k)
      ddp += coeffs_[k] * double(k) * double(k - 1) * std::pow(x, double(k - 2));
    supdd = std::max(supdd, std::abs(ddp));
  }
  const double margin = 1.0 + 1e-6;
  bounds_ = {sup * margin, supd * margin, supd * margin, supdd * margin};
}

double PolynomialField1D::eval_poly(double x) const {
  double v = 0.0;
  for (std::size_t k = coeffs_.size(); k-- > 0;) v = v * x + coeffs_[k];
  return v;
}

double PolynomialField1D::eval_dpoly(double x) const {
  double v = 0.0;
  for (std::size_t k = coeffs_.size(); k-- > 1;)
    v = v * x + coeffs_[k] * double(k);
  return v;
}

Vec PolynomialField1D::value(double, const Vec& x) const {
  Vec u = zero_vec();
  u[0] = eval_poly(x[0]);
  return u;
}

Mat PolynomialField1D::gradient(double, const Vec& x) const {
  Mat g = zero_mat();
  g[0][0] = eval_dpoly(x[0]);
  return g;
}

std::string to_string(BoundaryClass c) {
  switch (c) {
    case BoundaryClass::inflow: return "inflow";
    case BoundaryClass::side: return "side";
    case BoundaryClass::outflow: return "outflow";
  }
  return "?";
}

BoxDomain::BoxDomain(int dim, double length, std::array<double, 2> widths)
    : dim_(dim), length_(length), widths_(widths) {
  if (dim < 1 || dim > kMaxDim) throw ConfigError("domain dimension must be 1..3");
  if (length <= 0.0) throw ConfigError("domain length must be positive");
}

double BoxDomain::diameter() const {
  double d2 = length_ * length_;
  for (int i = 1; i < dim_; ++i) d2 += widths_[i - 1] * widths_[i - 1];
  return std::sqrt(d2);
}

double BoxDomain::volume() const {
  double v = length_;
  for (int i = 1; i < dim_; ++i) v *= widths_[i - 1];
  return v;
}

double BoxDomain::inflow_area() const {
  double a = 1.0;
  for (int i = 1; i < dim_; ++i) a *= widths_[i - 1];
  return a;
}

bool BoxDomain::contains(const Vec& x, double side_tol) const {
  if (!(x[0] >= 0.0 && x[0] < length_)) return false;
  for (int i = 1; i < dim_; ++i) {
    if (!(x[i] >= -side_tol && x[i] <= widths_[i - 1] + side_tol)) return false;
  }
  return true;
}

BoundaryClass BoxDomain::classify_exit(const Vec& x, double side_tol) const {
  if (x[0] >= length_) return BoundaryClass::outflow;
  if (x[0] < 0.0) return BoundaryClass::inflow;
  (void)side_tol;
  return BoundaryClass::side;
}

Vec BoxDomain::outward_normal(BoundaryClass which) const {
  Vec n = zero_vec();
  if (which == BoundaryClass::inflow) n[0] = -1.0;
  else if (which == BoundaryClass::outflow) n[0] = 1.0;
  return n;
}

Vec BoxDomain::clamp_to_boundary(Vec x, BoundaryClass which) const {
  if (which == BoundaryClass::inflow) x[0] = 0.0;
  if (which == BoundaryClass::outflow) x[0] = length_;
  for (int i = 1; i < dim_; ++i)
    x[i] = std::clamp(x[i], 0.0, widths_[i - 1]);
  return x;
}

FlowMap::FlowMap(std::shared_ptr<const VelocityField> field,
                 std::shared_ptr<const BoxDomain> domain, FlowMapConfig cfg)
    : field_(std::move(field)), domain_(std::move(domain)), cfg_(cfg) {
  if (field_->dim() != domain_->dim())
    throw ConfigError("velocity field and domain dimensions differ");
}

FlowMap::State FlowMap::rk4_step(double t, double h, const State& s,
                                 bool with_jac) const {
  const int d = field_->dim();
  auto rhs = [&](double tau, const State& st, State& out) {
    out.x = field_->value(tau, st.x);
    out.divint = field_->divergence(tau, st.x);
    if (with_jac) out.jac = mat_mul(field_->gradient(tau, st.x), st.jac, d);
  };
  State k1{}, k2{}, k3{}, k4{}, tmp{};
  rhs(t, s, k1);
  auto blend = [&](const State& base, const State& k, double a, State& out) {
    for (int i = 0; i < d; ++i) out.x[i] = base.x[i] + a * k.x[i];
    out.divint = base.divint + a * k.divint;
    if (with_jac)
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) out.jac[i][j] = base.jac[i][j] + a * k.jac[i][j];
  };
  tmp = s;
  blend(s, k1, h / 2, tmp);
  rhs(t + h / 2, tmp, k2);
  blend(s, k2, h / 2, tmp);
  rhs(t + h / 2, tmp, k3);
  blend(s, k3, h, tmp);
  rhs(t + h, tmp, k4);
  State out = s;
  for (int i = 0; i < d; ++i)
    out.x[i] += h / 6 * (k1.x[i] + 2 * k2.x[i] + 2 * k3.x[i] + k4.x[i]);
  out.divint += h / 6 * (k1.divint + 2 * k2.divint + 2 * k3.divint + k4.divint);
  if (with_jac)
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j)
        out.jac[i][j] +=
            h / 6 * (k1.jac[i][j] + 2 * k2.jac[i][j] + 2 * k3.jac[i][j] + k4.jac[i][j]);
  if (!std::isfinite(out.x[0]) || !std::isfinite(out.divint))
    throw FieldEvaluationError("non-finite field value along characteristic");
  return out;
}

namespace {
double dist(const Vec& a, const Vec& b, int d) {
  double s = 0.0;
  for (int i = 0; i < d; ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}
}  // namespace

FlowMap::TraceResult FlowMap::trace(double s, double t, const Vec& x,
                                    bool with_jac) const {
  const double side_tol = cfg_.boundary_tol;
  State st{x, identity_mat(), 0.0};
  TraceResult res;
  if (s == t) {
    res.state = st;
    return res;
  }
  if (!domain_->contains(x, side_tol) &&
      !(x[0] >= 0.0 && x[0] <= domain_->length()))
    throw FlowAssumptionViolation("start position outside the domain closure");

  const double dir = (t > s) ? 1.0 : -1.0;
  const double total = std::abs(t - s);
  const double h0 = std::min(cfg_.step, total);
  long steps_taken = 0;
  double tau = 0.0;  // elapsed |time| from s
  while (tau < total) {
    if (++steps_taken > cfg_.step_budget)
      throw IntegrationBudgetError("flow integration exceeded step budget");
    const double h = std::min(h0, total - tau) * dir;
    const double t_now = s + dir * tau;
    State next = rk4_step(t_now, h, st, with_jac);
    if (!domain_->contains(next.x, side_tol)) {
      // Locate the crossing inside this step by bisection on the fraction.
      double lo = 0.0, hi = 1.0;
      State st_hi = next;
      Vec x_lo = st.x;
      while (dist(x_lo, st_hi.x, field_->dim()) > cfg_.boundary_tol) {
        const double mid = 0.5 * (lo + hi);
        State st_mid = rk4_step(t_now, h * mid, st, with_jac);
        if (domain_->contains(st_mid.x, side_tol)) {
          lo = mid;
          x_lo = st_mid.x;
        } else {
          hi = mid;
          st_hi = st_mid;
        }
      }
      res.exited = true;
      res.exit_time = t_now + h * hi;
      res.exit_boundary = domain_->classify_exit(st_hi.x, side_tol);
      res.exit_position = domain_->clamp_to_boundary(st_hi.x, res.exit_boundary);
      st_hi.x = res.exit_position;
      res.state = st_hi;
      return res;
    }
    st = next;
    tau += std::abs(h);
  }
  res.state = st;
  return res;
}

AdvectResult FlowMap::advect(double s, double t, const Vec& x) const {
  TraceResult tr = trace(s, t, x, false);
  AdvectResult out;
  if (tr.exited) {
    out.exited = true;
    out.exit = {tr.exit_time, tr.exit_position, tr.exit_boundary};
  } else {
    out.position = tr.state.x;
  }
  return out;
}

double FlowMap::liouville_weight(double s, double t, const Vec& x) const {
  TraceResult tr = trace(s, t, x, false);
  if (tr.exited)
    throw FlowAssumptionViolation(
        "liouville_weight: trajectory leaves the domain before the end time");
  return std::exp(tr.state.divint);
}

Mat FlowMap::flow_gradient(double s, double t, const Vec& x) const {
  TraceResult tr = trace(s, t, x, true);
  if (tr.exited)
    throw FlowAssumptionViolation(
        "flow_gradient: trajectory leaves the domain before the end time");
  return tr.state.jac;
}

EntryData FlowMap::entry_data(double t, const Vec& x) const {
  if (field_->is_zero()) return {0.0, x, EntryKind::initial};
  TraceResult tr = trace(t, 0.0, x, false);
  EntryData e;
  if (!tr.exited) {
    e.time = 0.0;
    e.position = tr.state.x;
    e.entered_through = EntryKind::initial;
    return e;
  }
  if (tr.exit_boundary != BoundaryClass::inflow)
    throw FlowAssumptionViolation(
        "backward characteristic leaves through " + to_string(tr.exit_boundary));
  e.time = tr.exit_time;
  e.position = tr.exit_position;
  e.entered_through = EntryKind::inflow;
  return e;
}

double FlowMap::residence_bound() const {
  if (residence_cache_ >= 0.0) return residence_cache_;
  if (field_->is_zero()) {
    residence_cache_ = kInf;
    return residence_cache_;
  }
  const int d = field_->dim();
  const int n = cfg_.residence_grid;
  std::vector<double> start_times = {0.0};
  if (!field_->time_independent()) start_times = {0.0, 0.37, 1.13};

  double worst = 0.0;
  auto probe = [&](const Vec& x0, double t_start) {
    // Forward until exit; the budget bounds the admissible residence time.
    const double horizon = cfg_.step * double(cfg_.step_budget);
    TraceResult tr = trace(t_start, t_start + horizon, x0, false);
    if (!tr.exited)
      throw FlowAssumptionViolation(
          "sampled trajectory failed to leave the domain within the budget");
    worst = std::max(worst, tr.exit_time - t_start);
  };

  for (double t0 : start_times) {
    // Grid over the closure (covers Gamma_in at x1 = 0 and interior points).
    if (d == 1) {
      for (int i = 0; i < n; ++i) {
        Vec x = zero_vec();
        x[0] = domain_->length() * double(i) / n;
        probe(x, t0);
      }
    } else {
      const int m = std::max(3, n / 4);
      for (int i = 0; i < m; ++i)
        for (int j = 0; j <= m; ++j) {
          Vec x = zero_vec();
          x[0] = domain_->length() * double(i) / m;
          x[1] = domain_->width(1) * double(j) / m;
          if (d == 3) x[2] = 0.5 * domain_->width(2);
          probe(x, t0);
        }
    }
  }
  residence_cache_ = worst * cfg_.residence_safety;
  return residence_cache_;
}

Vec FlowMap::step_position(double t, double h, const Vec& x) const {
  const int d = field_->dim();
  const Vec k1 = field_->value(t, x);
  Vec tmp;
  for (int i = 0; i < d; ++i) tmp[i] = x[i] + 0.5 * h * k1[i];
  const Vec k2 = field_->value(t + 0.5 * h, tmp);
  for (int i = 0; i < d; ++i) tmp[i] = x[i] + 0.5 * h * k2[i];
  const Vec k3 = field_->value(t + 0.5 * h, tmp);
  for (int i = 0; i < d; ++i) tmp[i] = x[i] + h * k3[i];
  const Vec k4 = field_->value(t + h, tmp);
  Vec out = x;
  for (int i = 0; i < d; ++i)
    out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  return out;
}

Vec FlowMap::advance_position(double s, double t, Vec x, double step_hint) const {
  if (s == t || field_->is_zero()) return x;
  const double dir = t > s ? 1.0 : -1.0;
  double remaining = std::abs(t - s);
  double tau = s;
  const double h0 = std::min(std::abs(step_hint), remaining);
  while (remaining > 0.0) {
    const double h = std::min(h0, remaining) * dir;
    x = step_position(tau, h, x);
    tau += h;
    remaining -= std::abs(h);
  }
  return x;
}

FlowMap::IntervalExit FlowMap::first_slab_exit(double t, Vec x, double lo,
                                               double hi,
                                               double march_step) const {
  const double tol = cfg_.boundary_tol;
  auto inside = [&](const Vec& y) {
    return y[0] >= lo && y[0] < hi && domain_->contains(y, tol);
  };
  long budget = cfg_.step_budget;
  double tau = t;
  while (budget-- > 0) {
    Vec next = step_position(tau, march_step, x);
    if (inside(next)) {
      x = next;
      tau += march_step;
      continue;
    }
    // Bisect the step fraction for the crossing.
    double a = 0.0, b = 1.0;
    Vec xa = x, xb = next;
    while (std::abs(xb[0] - xa[0]) > tol && b - a > 1e-14) {
      const double m = 0.5 * (a + b);
      Vec xm = step_position(tau, march_step * m, x);
      if (inside(xm)) {
        a = m;
        xa = xm;
      } else {
        b = m;
        xb = xm;
      }
    }
    return {tau + march_step * b, xb};
  }
  throw IntegrationBudgetError("slab exit search exceeded the step budget");
}

double FlowMap::entry_time_gradient_estimate() const {
  if (field_->is_zero()) return 0.0;
  const double t0 = residence_bound();
  const double t_probe = std::min(2.0 * t0, t0 + 1.0);
  const double h = 1e-5 * domain_->length();
  double worst = 0.0;
  const int n = 17;
  for (int i = 1; i < n; ++i) {
    Vec x = zero_vec();
    x[0] = domain_->length() * double(i) / n;
    Vec xp = x;
    xp[0] += h;
    if (!domain_->contains(xp)) continue;
    double s0 = entry_data(t_probe, x).time;
    double s1 = entry_data(t_probe, xp).time;
    worst = std::max(worst, std::abs(s1 - s0) / h);
  }
  return worst;
}

std::shared_ptr<const VelocityField> make_velocity_field(
    const std::string& name, int dim, const std::vector<double>& params,
    const BoxDomain& domain) {
  Vec lo = zero_vec();
  Vec hi = zero_vec();
  hi[0] = domain.length();
  for (int i = 1; i < dim; ++i) hi[i] = domain.width(i);

  if (name == "zero") return std::make_shared<ZeroField>(dim);
  if (name == "constant") {
    Vec u = zero_vec();
    for (int i = 0; i < dim && i < int(params.size()); ++i) u[i] = params[i];
    return std::make_shared<ConstantField>(dim, u);
  }
  if (name == "linear") {
    Mat a = zero_mat();
    Vec b = zero_vec();
    if (dim == 1) {
      if (params.size() != 2) throw ConfigError("linear field (1-d) takes [a, b] with u = a + b*x");
      b[0] = params[0];
      a[0][0] = params[1];
    } else {
      const std::size_t need = std::size_t(dim) * dim + dim;
      if (params.size() != need) throw ConfigError("linear field takes row-major A then b");
      std::size_t k = 0;
      for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) a[i][j] = params[k++];
      for (int i = 0; i < dim; ++i) b[i] = params[k++];
    }
    return std::make_shared<LinearField>(dim, a, b, lo, hi);
  }
  if (name == "shear") {
    if (dim < 2) throw ConfigError("shear field requires dimension >= 2");
    if (params.size() != 2) throw ConfigError("shear field takes [a, b] with u1 = a + b*x2");
    return std::make_shared<ShearField>(dim, params[0], params[1], domain.width(1));
  }
  if (name == "polynomial") {
    if (dim != 1) throw ConfigError("polynomial field is 1-d only");
    if (params.empty()) throw ConfigError("polynomial field needs coefficients");
    return std::make_shared<PolynomialField1D>(params, domain.length());
  }
  throw ConfigError("unknown velocity field: " + name);
}

}  // namespace coagflow
