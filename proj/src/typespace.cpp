#include "coagflow/typespace.hpp"

#include <algorithm>
#include <cmath>

namespace coagflow {

namespace {

// Halton sequence in the given base, index starting at 1.
double halton(long index, int base) {
  double f = 1.0, r = 0.0;
  while (index > 0) {
    f /= base;
    r += f * (index % base);
    index /= base;
  }
  return r;
}

}  // namespace

double kernel_bound_certify(const Kernel& k, long samples, double mass_max) {
  if (samples < 1) throw ConfigError("kernel_bound_certify needs samples >= 1");
  double worst = 0.0;
  for (long i = 1; i <= samples; ++i) {
    const double y1 = mass_max * std::max(halton(i, 2), 1e-12);
    const double y2 = mass_max * std::max(halton(i, 3), 1e-12);
    const double v = k.evaluate(y1, y2);
    if (v < 0.0)
      throw CertificationError("kernel takes a negative value");
    worst = std::max(worst, v);
    if (worst > k.bound())
      throw CertificationError("kernel sample " + std::to_string(v) +
                               " exceeds the declared bound " +
                               std::to_string(k.bound()));
  }
  return worst;
}

CellDelocalisation::CellDelocalisation(const BoxDomain& domain, int cells)
    : length_(domain.length()), cells_(cells) {
  if (cells < 1) throw ConfigError("cell delocalisation needs >= 1 cell");
  cross_area_ = domain.inflow_area();
  cell_vol_ = length_ / cells_ * cross_area_;
  // For the axial equal-cell partition the weak derivative of each indicator
  // is two unit atoms; the declared constant records atoms / cell width.
  c2_ = 2.0 * cells_ / length_;
}

int CellDelocalisation::cell_index(const Vec& x) const {
  int i = int(std::floor(x[0] / length_ * cells_));
  return std::clamp(i, 0, cells_ - 1);
}

double CellDelocalisation::evaluate(const Vec& x1, const Vec& x2) const {
  return (cell_index(x1) == cell_index(x2)) ? 1.0 / cell_vol_ : 0.0;
}

std::pair<double, double> CellDelocalisation::cell_span(int cell) const {
  const double w = length_ / cells_;
  return {cell * w, (cell + 1) * w};
}

UniformDelocalisation::UniformDelocalisation(const BoxDomain& domain, double value)
    : value_(value), volume_(domain.volume()), length_(domain.length()) {
  if (value <= 0.0) throw ConfigError("uniform delocalisation needs a positive value");
}

GaussianDelocalisation::GaussianDelocalisation(const BoxDomain& domain,
                                               double amplitude, double width)
    : dim_(domain.dim()), amp_(amplitude), width_(width),
      volume_(domain.volume()), length_(domain.length()) {
  if (amplitude <= 0.0 || width <= 0.0)
    throw ConfigError("gaussian delocalisation needs positive amplitude and width");
}

double GaussianDelocalisation::evaluate(const Vec& x1, const Vec& x2) const {
  double r2 = 0.0;
  for (int i = 0; i < dim_; ++i) r2 += (x1[i] - x2[i]) * (x1[i] - x2[i]);
  return amp_ * std::exp(-r2 / (2.0 * width_ * width_));
}

void TypeMixture::validate() const {
  if (masses.size() != weights.size() || masses.empty())
    throw ConfigError("type mixture needs matching non-empty masses/weights");
  double total = 0.0;
  for (std::size_t i = 0; i < masses.size(); ++i) {
    if (masses[i] <= 0.0) throw ModelError("type mixture mass must be positive");
    if (weights[i] < 0.0) throw ModelError("type mixture weight must be nonnegative");
    total += weights[i];
  }
  if (std::abs(total - 1.0) > 1e-12)
    throw ConfigError("type mixture weights must sum to 1");
}

double TypeMixture::sample(Philox& rng) const {
  double u = rng.uniform();
  for (std::size_t i = 0; i + 1 < masses.size(); ++i) {
    if (u < weights[i]) return masses[i];
    u -= weights[i];
  }
  return masses.back();
}

InceptionModel::InceptionModel(std::vector<InteriorInceptionComponent> interior,
                               std::vector<BoundaryInceptionComponent> boundary,
                               double flux_bound)
    : interior_(std::move(interior)), boundary_(std::move(boundary)),
      flux_bound_(flux_bound) {
  for (const auto& c : interior_) {
    if (c.rate_density < 0.0) throw ModelError("interior intensity must be nonnegative");
    c.types.validate();
  }
  for (const auto& c : boundary_) {
    if (c.rate_per_area < 0.0) throw ModelError("boundary intensity must be nonnegative");
    c.types.validate();
  }
}

std::pair<double, double> InceptionModel::totals(double, const BoxDomain& domain) const {
  double interior_total = 0.0;
  for (const auto& c : interior_) interior_total += c.rate_density * domain.volume();
  double boundary_total = 0.0;
  for (const auto& c : boundary_) boundary_total += c.rate_per_area * domain.inflow_area();
  return {interior_total, boundary_total};
}

double InceptionModel::sup_total(const BoxDomain& domain) const {
  auto [a, b] = totals(0.0, domain);
  return a + b;
}

double InceptionModel::boundary_rate_per_area(double) const {
  double r = 0.0;
  for (const auto& c : boundary_) r += c.rate_per_area;
  return r;
}

void InceptionModel::certify_flux_bound(const VelocityField& field,
                                        const BoxDomain& domain,
                                        int samples) const {
  if (boundary_.empty()) return;
  const Vec n = domain.outward_normal(BoundaryClass::inflow);
  for (int i = 0; i < samples; ++i) {
    Vec xi = zero_vec();
    if (domain.dim() >= 2)
      xi[1] = domain.width(1) * (double(i) + 0.5) / samples;
    const double t = 0.1 * double(i % 7);
    const double inward = -dot(field.value(t, xi), n, field.dim());
    if (inward <= 0.0)
      throw FlowAssumptionViolation("velocity does not flow inward on Gamma_in");
    const double rate = boundary_rate_per_area(t);
    if (rate > flux_bound_ * inward + 1e-12)
      throw CertificationError("boundary intensity exceeds the declared flux bound");
  }
}

std::vector<double> InceptionModel::anchor_masses() const {
  std::vector<double> anchors;
  for (const auto& c : interior_)
    anchors.insert(anchors.end(), c.types.masses.begin(), c.types.masses.end());
  for (const auto& c : boundary_)
    anchors.insert(anchors.end(), c.types.masses.begin(), c.types.masses.end());
  std::sort(anchors.begin(), anchors.end());
  anchors.erase(std::unique(anchors.begin(), anchors.end()), anchors.end());
  return anchors;
}

std::shared_ptr<const Kernel> make_kernel(const std::string& name,
                                          const std::vector<double>& params,
                                          double bound) {
  if (name == "constant") {
    const double v = params.empty() ? bound : params[0];
    return std::make_shared<ConstantKernel>(v, bound);
  }
  if (name == "capped_product") {
    const double scale = params.empty() ? 1.0 : params[0];
    return std::make_shared<CappedProductKernel>(scale, bound);
  }
  if (name == "capped_sum") {
    const double scale = params.empty() ? 1.0 : params[0];
    return std::make_shared<CappedSumKernel>(scale, bound);
  }
  throw ConfigError("unknown kernel: " + name);
}

}  // namespace coagflow
