#include "coagflow/dictionary.hpp"

#include <cmath>

namespace coagflow {

Dictionary make_dictionary(const BoxDomain& domain) {
  const double L = domain.length();
  const double pi = std::acos(-1.0);
  Dictionary d;
  d.push_back({"one_tapered",
               [L](const Vec& x, double) { return 1.0 - x[0] / L; }, 1.0, 1.0 / L, true});
  d.push_back({"taper_sq",
               [L](const Vec& x, double) {
                 const double s = 1.0 - x[0] / L;
                 return s * s;
               },
               1.0, 2.0 / L, true});
  d.push_back({"cos_half",
               [L, pi](const Vec& x, double) { return std::cos(0.5 * pi * x[0] / L); },
               1.0, 0.5 * pi / L, true});
  d.push_back({"sin_full",
               [L, pi](const Vec& x, double) { return std::sin(pi * x[0] / L); },
               1.0, pi / L, true});
  d.push_back({"taper_exp_y",
               [L](const Vec& x, double y) { return (1.0 - x[0] / L) * std::exp(-y / 8.0); },
               1.0, 1.0 / L, true});
  d.push_back({"taper_mass_cap",
               [L](const Vec& x, double y) {
                 return (1.0 - x[0] / L) * std::min(y, 4.0) / 4.0;
               },
               1.0, 1.0 / L, true});
  d.push_back({"bump_exp_y",
               [L](const Vec& x, double y) {
                 return (x[0] / L) * (1.0 - x[0] / L) * std::exp(-y / 8.0);
               },
               0.25, 1.0 / L, true});
  d.push_back({"cos_small_mass",
               [L, pi](const Vec& x, double y) {
                 return (y <= 2.5) ? std::cos(0.5 * pi * x[0] / L) : 0.0;
               },
               1.0, 0.5 * pi / L, false});
  return d;
}

Dictionary smooth_subset(const Dictionary& dict) {
  Dictionary out;
  for (const auto& f : dict)
    if (f.smooth_in_y) out.push_back(f);
  return out;
}

double dstar_norm_surrogate(const SpatialMeasure& mu, const Dictionary& dict) {
  double best = 0.0;
  for (const auto& f : dict) {
    const double denom = f.sup + f.grad_sup;
    if (denom <= 0.0) continue;
    best = std::max(best, std::abs(pair(f.f, mu)) / denom);
  }
  return best;
}

}  // namespace coagflow
