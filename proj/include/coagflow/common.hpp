#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace coagflow {

inline constexpr int kMaxDim = 3;

// Position / velocity vector. Components beyond the active dimension are zero.
using Vec = std::array<double, kMaxDim>;
using Mat = std::array<std::array<double, kMaxDim>, kMaxDim>;

inline Vec zero_vec() { return Vec{0.0, 0.0, 0.0}; }

inline Mat zero_mat() {
  Mat m{};
  return m;
}

inline Mat identity_mat() {
  Mat m{};
  for (int i = 0; i < kMaxDim; ++i) m[i][i] = 1.0;
  return m;
}

inline double dot(const Vec& a, const Vec& b, int dim) {
  double s = 0.0;
  for (int i = 0; i < dim; ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(const Vec& a, int dim) { return std::sqrt(dot(a, a, dim)); }

inline Mat mat_mul(const Mat& a, const Mat& b, int dim) {
  Mat c{};
  for (int i = 0; i < dim; ++i)
    for (int k = 0; k < dim; ++k)
      for (int j = 0; j < dim; ++j) c[i][j] += a[i][k] * b[k][j];
  return c;
}

inline Vec mat_vec(const Mat& a, const Vec& x, int dim) {
  Vec y = zero_vec();
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) y[i] += a[i][j] * x[j];
  return y;
}

inline double mat_det(const Mat& a, int dim) {
  switch (dim) {
    case 1:
      return a[0][0];
    case 2:
      return a[0][0] * a[1][1] - a[0][1] * a[1][0];
    case 3:
      return a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) -
             a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0]) +
             a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
    default:
      throw std::logic_error("mat_det: unsupported dimension");
  }
}

// Spectral (operator 2-) norm via power iteration on A^T A.
inline double mat_opnorm(const Mat& a, int dim) {
  if (dim == 1) return std::abs(a[0][0]);
  Mat ata{};
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j)
      for (int k = 0; k < dim; ++k) ata[i][j] += a[k][i] * a[k][j];
  Vec v = zero_vec();
  for (int i = 0; i < dim; ++i) v[i] = 1.0 / std::sqrt(double(dim));
  double lambda = 0.0;
  for (int it = 0; it < 200; ++it) {
    Vec w = mat_vec(ata, v, dim);
    double n = norm2(w, dim);
    if (n == 0.0) return 0.0;
    for (int i = 0; i < dim; ++i) v[i] = w[i] / n;
    lambda = n;
  }
  return std::sqrt(lambda);
}

// Deterministic pairwise tree summation: order independent of worker count
// and better conditioned than naive accumulation.
inline double pairwise_sum(std::span<const double> xs) {
  const std::size_t n = xs.size();
  if (n == 0) return 0.0;
  if (n <= 8) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s;
  }
  const std::size_t half = n / 2;
  return pairwise_sum(xs.subspan(0, half)) + pairwise_sum(xs.subspan(half));
}

inline double pairwise_sum(const std::vector<double>& xs) {
  return pairwise_sum(std::span<const double>(xs.data(), xs.size()));
}

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct FieldEvaluationError : Error { using Error::Error; };
struct IntegrationBudgetError : Error { using Error::Error; };
struct FlowAssumptionViolation : Error { using Error::Error; };
struct CertificationError : Error { using Error::Error; };
struct ModelError : Error { using Error::Error; };
struct RepresentationError : Error { using Error::Error; };
struct NoConvergenceError : Error { using Error::Error; };
struct ContainmentError : Error { using Error::Error; };
struct ScaleError : Error { using Error::Error; };
struct NotApplicableError : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };

inline constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace coagflow
