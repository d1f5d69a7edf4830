#pragma once

#include <memory>
#include <string>
#include <vector>

#include "coagflow/common.hpp"
#include "coagflow/flowfield.hpp"
#include "coagflow/rng.hpp"

namespace coagflow {

// Type space v1: scalar mass.  Solvers and measures only use merge/mass, so a
// marked type can replace this without touching them.
struct ParticleType {
  double mass = 0.0;
};

inline ParticleType merge(ParticleType a, ParticleType b) {
  return {a.mass + b.mass};
}

// Symmetric nonnegative rate function with a declared bound.
class Kernel {
 public:
  virtual ~Kernel() = default;
  virtual double evaluate(double y1, double y2) const = 0;
  virtual double bound() const = 0;  // K_inf
  virtual std::string name() const = 0;
  bool is_zero() const { return bound() == 0.0; }
};

class ConstantKernel final : public Kernel {
 public:
  ConstantKernel(double value, double bound) : value_(value), bound_(bound) {}
  double evaluate(double, double) const override { return value_; }
  double bound() const override { return bound_; }
  std::string name() const override { return "constant"; }

 private:
  double value_, bound_;
};

// K(y1,y2) = min(scale * y1 * y2, cap)
class CappedProductKernel final : public Kernel {
 public:
  CappedProductKernel(double scale, double cap) : scale_(scale), cap_(cap) {}
  double evaluate(double y1, double y2) const override {
    return std::min(scale_ * y1 * y2, cap_);
  }
  double bound() const override { return cap_; }
  std::string name() const override { return "capped_product"; }

 private:
  double scale_, cap_;
};

// K(y1,y2) = min(scale * (y1 + y2), cap)
class CappedSumKernel final : public Kernel {
 public:
  CappedSumKernel(double scale, double cap) : scale_(scale), cap_(cap) {}
  double evaluate(double y1, double y2) const override {
    return std::min(scale_ * (y1 + y2), cap_);
  }
  double bound() const override { return cap_; }
  std::string name() const override { return "capped_sum"; }

 private:
  double scale_, cap_;
};

// Checks sup K <= K_inf on quasi-random sample pairs (Halton bases 2 and 3
// over (0, mass_max]^2).  Returns the largest value found.
double kernel_bound_certify(const Kernel& k, long samples,
                            double mass_max = 1024.0);

enum class DelocalisationForm { cells, smooth };

// Spatial weight h making coagulation between separated particles possible.
// The cell form partitions [0, L) into equal axial slabs with
// h = 1{same cell} / vol(cell); smooth forms evaluate a mollifier.
class Delocalisation {
 public:
  virtual ~Delocalisation() = default;
  virtual DelocalisationForm form() const = 0;
  virtual double evaluate(const Vec& x1, const Vec& x2) const = 0;
  virtual double c1() const = 0;  // sup_x ||h(x,.)||_inf and ||h(.,x)||_inf
  virtual double c2() const = 0;  // declared derivative constant
  // Cell structure (one global cell for smooth forms).
  virtual int cell_count() const = 0;
  virtual int cell_index(const Vec& x) const = 0;
  virtual double cell_volume(int cell) const = 0;
  // x1-interval of a cell for the axial partition.
  virtual std::pair<double, double> cell_span(int cell) const = 0;
  virtual std::string name() const = 0;
};

class CellDelocalisation final : public Delocalisation {
 public:
  CellDelocalisation(const BoxDomain& domain, int cells);
  DelocalisationForm form() const override { return DelocalisationForm::cells; }
  double evaluate(const Vec& x1, const Vec& x2) const override;
  double c1() const override { return 1.0 / cell_vol_; }
  double c2() const override { return c2_; }
  int cell_count() const override { return cells_; }
  int cell_index(const Vec& x) const override;
  double cell_volume(int) const override { return cell_vol_; }
  std::pair<double, double> cell_span(int cell) const override;
  std::string name() const override { return "cells"; }

 private:
  double length_;
  int cells_;
  double cell_vol_;
  double cross_area_;
  double c2_;
};

// Spatially constant h (value c1, c2 = 0); one global cell.
class UniformDelocalisation final : public Delocalisation {
 public:
  UniformDelocalisation(const BoxDomain& domain, double value);
  DelocalisationForm form() const override { return DelocalisationForm::smooth; }
  double evaluate(const Vec&, const Vec&) const override { return value_; }
  double c1() const override { return value_; }
  double c2() const override { return 0.0; }
  int cell_count() const override { return 1; }
  int cell_index(const Vec&) const override { return 0; }
  double cell_volume(int) const override { return volume_; }
  std::pair<double, double> cell_span(int) const override { return {0.0, length_}; }
  std::string name() const override { return "uniform"; }

 private:
  double value_, volume_, length_;
};

// h(x1,x2) = amp * exp(-|x1-x2|^2 / (2 w^2)); one global cell.
class GaussianDelocalisation final : public Delocalisation {
 public:
  GaussianDelocalisation(const BoxDomain& domain, double amplitude, double width);
  DelocalisationForm form() const override { return DelocalisationForm::smooth; }
  double evaluate(const Vec& x1, const Vec& x2) const override;
  double c1() const override { return amp_; }
  double c2() const override { return amp_ / (width_ * std::exp(0.5)); }
  int cell_count() const override { return 1; }
  int cell_index(const Vec&) const override { return 0; }
  double cell_volume(int) const override { return volume_; }
  std::pair<double, double> cell_span(int) const override { return {0.0, length_}; }
  std::string name() const override { return "gaussian"; }

 private:
  int dim_;
  double amp_, width_, volume_, length_;
};

// Finite mixture of point masses in type space; weights sum to 1.
struct TypeMixture {
  std::vector<double> masses;
  std::vector<double> weights;

  void validate() const;
  double sample(Philox& rng) const;
  // Masses that must be exact bins.
  const std::vector<double>& anchors() const { return masses; }
};

struct InteriorInceptionComponent {
  double rate_density = 0.0;  // per unit volume and time, uniform over X
  TypeMixture types;
};

struct BoundaryInceptionComponent {
  double rate_per_area = 0.0;  // per unit inflow surface measure and time
  TypeMixture types;
};

// Interior intensity and inflow-boundary intensity with the flux bound
// ||I_bdry(t,xi,.)|| <= I_* |u_t(xi).n(xi)| on Gamma_in.
class InceptionModel {
 public:
  InceptionModel(std::vector<InteriorInceptionComponent> interior,
                 std::vector<BoundaryInceptionComponent> boundary,
                 double flux_bound);

  const std::vector<InteriorInceptionComponent>& interior() const { return interior_; }
  const std::vector<BoundaryInceptionComponent>& boundary() const { return boundary_; }
  double flux_bound() const { return flux_bound_; }
  bool empty() const { return interior_.empty() && boundary_.empty(); }

  // (interior total rate, boundary total rate) at time t; both by quadrature
  // over the respective domains (exact for the uniform catalogue).
  std::pair<double, double> totals(double t, const BoxDomain& domain) const;

  // sup_t ||I_t||_TV = interior total + boundary total.
  double sup_total(const BoxDomain& domain) const;

  // Boundary intensity per unit surface measure at (t, xi); v1 catalogue is
  // uniform over Gamma_in and constant in time.
  double boundary_rate_per_area(double t) const;

  // Sampled check of the flux bound; throws CertificationError on failure.
  void certify_flux_bound(const VelocityField& field, const BoxDomain& domain,
                          int samples = 1000) const;

  std::vector<double> anchor_masses() const;

 private:
  std::vector<InteriorInceptionComponent> interior_;
  std::vector<BoundaryInceptionComponent> boundary_;
  double flux_bound_;
};

std::shared_ptr<const Kernel> make_kernel(const std::string& name,
                                          const std::vector<double>& params,
                                          double bound);

}  // namespace coagflow
