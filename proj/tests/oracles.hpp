#pragma once
#include <vector>
namespace coagflow::oracle {
// Independent discrete constant-kernel integrator on integer masses:
// dn_k/dt = (1/2) sum_{i+j=k} K n_i n_j - K n_k sum_i n_i, RK4 stepping.
// Returns total number concentrations at the requested times.
std::vector<double> constant_kernel_totals(double n0, double k_rate,
                                           const std::vector<double>& times,
                                           int max_mass, double dt);
}  // namespace coagflow::oracle
