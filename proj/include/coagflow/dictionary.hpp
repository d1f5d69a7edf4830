#pragma once

#include <string>
#include <vector>

#include "coagflow/measures.hpp"

namespace coagflow {

// A test function with exact norm metadata.  Every catalogue entry is
// differentiable in x, bounded measurable in y, and vanishes at Gamma_out,
// so it is admissible for the D-norm based diagnostics.
struct TestFunction {
  std::string name;
  TestFn f;
  double sup = 1.0;       // ||f||_inf
  double grad_sup = 0.0;  // ||grad_x f||_inf
  bool smooth_in_y = true;
};

using Dictionary = std::vector<TestFunction>;

// Fixed declared dictionary over the given domain.
Dictionary make_dictionary(const BoxDomain& domain);

// Smooth-in-y subset used for weak-error measurements.
Dictionary smooth_subset(const Dictionary& dict);

// Declared-dictionary surrogate of the D-dual norm:
// max_f |<f, mu>| / (||f||_inf + ||grad f||_inf).  A lower bound of the true
// dual norm by construction.
double dstar_norm_surrogate(const SpatialMeasure& mu, const Dictionary& dict);

}  // namespace coagflow
