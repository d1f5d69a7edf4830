#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "coagflow/common.hpp"

namespace coagflow {

// Certified supremum bounds of a velocity field over [0,inf) x closure(X).
struct FieldBounds {
  double sup_speed = 0.0;       // sup |u|
  double sup_divergence = 0.0;  // sup |div u|
  double sup_grad_opnorm = 0.0; // sup of the operator norm of grad u
  double sup_grad_div = 0.0;    // sup |grad div u|
};

class VelocityField {
 public:
  virtual ~VelocityField() = default;
  virtual int dim() const = 0;
  virtual Vec value(double t, const Vec& x) const = 0;
  virtual Mat gradient(double t, const Vec& x) const = 0;
  virtual double divergence(double t, const Vec& x) const;
  virtual FieldBounds bounds() const = 0;
  virtual bool time_independent() const { return true; }
  virtual bool is_zero() const { return false; }
  // u = (u1(t, x1), 0, ...): the structure the axial grid remap requires.
  virtual bool axially_uniform() const { return false; }
  virtual std::string name() const = 0;
};

// u = 0.  Homogeneous test mode: no transport, no outflow, infinite residence.
class ZeroField final : public VelocityField {
 public:
  explicit ZeroField(int dim) : dim_(dim) {}
  int dim() const override { return dim_; }
  Vec value(double, const Vec&) const override { return zero_vec(); }
  Mat gradient(double, const Vec&) const override { return zero_mat(); }
  FieldBounds bounds() const override { return {}; }
  bool is_zero() const override { return true; }
  bool axially_uniform() const override { return true; }
  std::string name() const override { return "zero"; }

 private:
  int dim_;
};

class ConstantField final : public VelocityField {
 public:
  ConstantField(int dim, Vec u) : dim_(dim), u_(u) {}
  int dim() const override { return dim_; }
  Vec value(double, const Vec&) const override { return u_; }
  Mat gradient(double, const Vec&) const override { return zero_mat(); }
  FieldBounds bounds() const override {
    return {norm2(u_, dim_), 0.0, 0.0, 0.0};
  }
  bool axially_uniform() const override {
    for (int i = 1; i < dim_; ++i)
      if (u_[i] != 0.0) return false;
    return true;
  }
  std::string name() const override { return "constant"; }

 private:
  int dim_;
  Vec u_;
};

// u(x) = b + A x on the closure of the box domain with corners `lo`, `hi`.
class LinearField final : public VelocityField {
 public:
  LinearField(int dim, Mat a, Vec b, Vec box_lo, Vec box_hi);
  int dim() const override { return dim_; }
  Vec value(double, const Vec& x) const override;
  Mat gradient(double, const Vec&) const override { return a_; }
  FieldBounds bounds() const override { return bounds_; }
  bool axially_uniform() const override { return dim_ == 1; }
  std::string name() const override { return "linear"; }

 private:
  int dim_;
  Mat a_;
  Vec b_;
  FieldBounds bounds_;
};

// Axial shear: u1 = a + b*x2, other components zero (dim >= 2).
class ShearField final : public VelocityField {
 public:
  ShearField(int dim, double a, double b, double width2);
  int dim() const override { return dim_; }
  Vec value(double, const Vec& x) const override;
  Mat gradient(double, const Vec&) const override;
  FieldBounds bounds() const override { return bounds_; }
  std::string name() const override { return "shear"; }

 private:
  int dim_;
  double a_, b_;
  FieldBounds bounds_;
};

// 1-d axial field u1(x1) = sum_k c_k x1^k.  Bounds certified by dense
// sampling on [0, L] with a small safety margin.
class PolynomialField1D final : public VelocityField {
 public:
  PolynomialField1D(std::vector<double> coeffs, double length);
  int dim() const override { return 1; }
  Vec value(double, const Vec& x) const override;
  Mat gradient(double, const Vec& x) const override;
  FieldBounds bounds() const override { return bounds_; }
  bool axially_uniform() const override { return true; }
  std::string name() const override { return "polynomial"; }

 private:
  double eval_poly(double x) const;
  double eval_dpoly(double x) const;
  std::vector<double> coeffs_;
  FieldBounds bounds_;
};

enum class BoundaryClass { inflow, side, outflow };

std::string to_string(BoundaryClass c);

// Product domain [0, L) x cross-section, the cross-section being a box of
// side widths w2 (, w3).  The inflow face x1 = 0 belongs to X; the side and
// outflow faces do not.  d = 1 has no side faces.
class BoxDomain {
 public:
  BoxDomain(int dim, double length, std::array<double, 2> widths = {1.0, 1.0});

  int dim() const { return dim_; }
  double length() const { return length_; }
  double width(int axis) const { return widths_[axis - 1]; }  // axis in {1,2}
  double diameter() const;
  double volume() const;
  double inflow_area() const;  // surface measure of Gamma_in (1 when d = 1)

  bool contains(const Vec& x, double side_tol = 0.0) const;
  BoundaryClass classify_exit(const Vec& x, double side_tol) const;
  Vec outward_normal(BoundaryClass which) const;
  Vec clamp_to_boundary(Vec x, BoundaryClass which) const;

 private:
  int dim_;
  double length_;
  std::array<double, 2> widths_;
};

struct ExitRecord {
  double time = 0.0;
  Vec position = zero_vec();
  BoundaryClass boundary = BoundaryClass::outflow;
};

struct AdvectResult {
  bool exited = false;
  Vec position = zero_vec();        // end position when !exited
  ExitRecord exit;                  // valid when exited
};

enum class EntryKind { initial, inflow };

struct EntryData {
  double time = 0.0;   // s(t, x)
  Vec position = zero_vec();  // xi(t, x)
  EntryKind entered_through = EntryKind::initial;
};

struct FlowMapConfig {
  double step = 1e-3;           // integrator step (time)
  double boundary_tol = 1e-8;   // event localisation tolerance (position)
  long step_budget = 4'000'000; // hard cap per trajectory
  int residence_grid = 33;      // sampling points per axis for certification
  double residence_safety = 1.1;
};

// Characteristics of the velocity field on the box domain: forward/backward
// advection with boundary-event localisation, Liouville determinants,
// flow-map gradients and entry data.  All operations are pure.
class FlowMap {
 public:
  FlowMap(std::shared_ptr<const VelocityField> field,
          std::shared_ptr<const BoxDomain> domain, FlowMapConfig cfg = {});

  const VelocityField& field() const { return *field_; }
  const BoxDomain& domain() const { return *domain_; }
  const FlowMapConfig& config() const { return cfg_; }

  AdvectResult advect(double s, double t, const Vec& x) const;
  double liouville_weight(double s, double t, const Vec& x) const;
  Mat flow_gradient(double s, double t, const Vec& x) const;
  EntryData entry_data(double t, const Vec& x) const;

  // Certified-by-sampling residence bound (times the safety factor).
  // Infinite for the zero field.  The value is cached after the first call.
  double residence_bound() const;

  // Sampled estimate of sup |grad s(t,x)| by finite differences of entry
  // times; diagnostic only (no constructive bound is available).
  double entry_time_gradient_estimate() const;

  // Position-only single RK4 step (no divergence or Jacobian integration);
  // the lean path used by the event-driven particle solver.
  Vec step_position(double t, double h, const Vec& x) const;

  // Advance a position with steps of at most `step_hint`.
  Vec advance_position(double s, double t, Vec x, double step_hint) const;

  // First time after t at which the trajectory leaves the axial slab
  // [lo, hi) intersected with the domain, marching with `march_step` and
  // localising the crossing by bisection to the boundary tolerance.
  struct IntervalExit {
    double time = 0.0;
    Vec position = zero_vec();
  };
  IntervalExit first_slab_exit(double t, Vec x, double lo, double hi,
                               double march_step) const;

 private:
  struct State {
    Vec x;
    Mat jac;        // d Phi / d x
    double divint;  // integral of div u along the characteristic
  };

  struct TraceResult {
    bool exited = false;
    double exit_time = 0.0;
    Vec exit_position = zero_vec();
    BoundaryClass exit_boundary = BoundaryClass::outflow;
    State state;  // at the end time (or at exit when exited)
  };

  State rk4_step(double t, double h, const State& s, bool with_jac) const;
  TraceResult trace(double s, double t, const Vec& x, bool with_jac) const;

  std::shared_ptr<const VelocityField> field_;
  std::shared_ptr<const BoxDomain> domain_;
  FlowMapConfig cfg_;
  mutable double residence_cache_ = -1.0;
};

// Velocity catalogue lookup used by the scenario layer.
std::shared_ptr<const VelocityField> make_velocity_field(
    const std::string& name, int dim, const std::vector<double>& params,
    const BoxDomain& domain);

}  // namespace coagflow
