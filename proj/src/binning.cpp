#include "coagflow/binning.hpp"

#include <algorithm>
#include <cmath>

namespace coagflow {

TypeBinning::TypeBinning(double mass_min, double mass_max, double ratio,
                         std::vector<double> anchors) {
  if (!(mass_min > 0.0) || !(mass_max > mass_min))
    throw ConfigError("type bins need 0 < mass_min < mass_max");
  if (!(ratio > 1.0)) throw ConfigError("type bin ratio must exceed 1");
  std::vector<double> p;
  for (double m = mass_min; m < mass_max * (1.0 + 1e-12); m *= ratio) {
    // Accumulated rounding can drift a pivot off a representable integer
    // (e.g. 2.0000000000000004 after four factors of 2^(1/4)); snap it.
    const double r = std::round(m);
    p.push_back(std::abs(m - r) < 1e-9 * m && r > 0.0 ? r : m);
  }
  for (double a : anchors) {
    if (a > 0.0 && a <= mass_max) p.push_back(a);
  }
  std::sort(p.begin(), p.end());
  // Merge pivots that coincide up to rounding (e.g. anchors on the grid).
  pivots_.push_back(p.front());
  for (double m : p) {
    if (m > pivots_.back() * (1.0 + 1e-12)) pivots_.push_back(m);
  }
}

std::shared_ptr<const TypeBinning> TypeBinning::geometric(
    double mass_min, double mass_max, double ratio,
    std::vector<double> anchors) {
  return std::make_shared<TypeBinning>(mass_min, mass_max, ratio,
                                       std::move(anchors));
}

std::shared_ptr<const TypeBinning> TypeBinning::from_pivots(
    std::vector<double> pivots) {
  if (pivots.empty()) throw ConfigError("from_pivots needs at least one pivot");
  auto b = std::make_shared<TypeBinning>(pivots.front(), pivots.front() * 2.0, 2.0,
                                         pivots);
  b->pivots_ = std::move(pivots);
  return b;
}

int TypeBinning::exact_index(double m) const {
  auto it = std::lower_bound(pivots_.begin(), pivots_.end(), m * (1.0 - 1e-12));
  if (it != pivots_.end() && *it <= m * (1.0 + 1e-12))
    return int(it - pivots_.begin());
  return -1;
}

int TypeBinning::containing_index(double m) const {
  auto it = std::upper_bound(pivots_.begin(), pivots_.end(), m);
  if (it == pivots_.begin()) return 0;
  if (it == pivots_.end()) return int(pivots_.size()) - 1;
  const int hi = int(it - pivots_.begin());
  return (m - pivots_[hi - 1] <= pivots_[hi] - m) ? hi - 1 : hi;
}

TypeBinning::Split TypeBinning::split(double m) const {
  Split s;
  const int n = size();
  if (m <= pivots_.front()) {
    s.lo = s.hi = 0;
    s.w_lo = 1.0;
    return s;
  }
  if (m >= pivots_.back()) {
    s.lo = s.hi = n - 1;
    s.w_lo = m / pivots_.back();
    s.overflow = m > pivots_.back() * (1.0 + 1e-12);
    return s;
  }
  auto it = std::upper_bound(pivots_.begin(), pivots_.end(), m);
  int hi = int(it - pivots_.begin());
  int lo = hi - 1;
  if (m == pivots_[lo]) {
    s.lo = s.hi = lo;
    s.w_lo = 1.0;
    return s;
  }
  s.lo = lo;
  s.hi = hi;
  // Two-point deposition: conserves both number and mass.
  s.w_lo = (pivots_[hi] - m) / (pivots_[hi] - pivots_[lo]);
  s.w_hi = 1.0 - s.w_lo;
  return s;
}

bool TypeBinning::same_grid(const TypeBinning& other) const {
  return pivots_ == other.pivots_;
}

}  // namespace coagflow
