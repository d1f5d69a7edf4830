#pragma once

#include <memory>
#include <vector>

#include "coagflow/common.hpp"

namespace coagflow {

// Geometric pivot grid over particle mass with exact pivots at the inception
// masses.  Deposition of a mass between two pivots is split so that both
// number and mass are conserved; a mass above the top pivot is assigned
// number mass/top there (mass-conserving) and counted as an overflow.
class TypeBinning {
 public:
  TypeBinning(double mass_min, double mass_max, double ratio,
              std::vector<double> anchors);

  static std::shared_ptr<const TypeBinning> geometric(
      double mass_min, double mass_max, double ratio,
      std::vector<double> anchors = {});
  static std::shared_ptr<const TypeBinning> from_pivots(std::vector<double> pivots);

  int size() const { return int(pivots_.size()); }
  double pivot(int i) const { return pivots_[i]; }
  const std::vector<double>& pivots() const { return pivots_; }

  // Index of the pivot equal to m (within 1 ulp-ish tolerance), or -1.
  int exact_index(double m) const;

  // Bin index whose pivot interval contains m (nearest for out-of-range).
  int containing_index(double m) const;

  struct Split {
    int lo = 0, hi = 0;
    double w_lo = 0.0, w_hi = 0.0;  // number fractions, w_lo + w_hi = 1
    bool overflow = false;
  };
  Split split(double m) const;

  bool same_grid(const TypeBinning& other) const;

 private:
  std::vector<double> pivots_;
};

}  // namespace coagflow
