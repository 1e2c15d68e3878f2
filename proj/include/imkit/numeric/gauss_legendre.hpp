#pragma once

#include <boost/math/quadrature/gauss.hpp>

#include <array>
#include <cstddef>

namespace imkit::gl {

inline constexpr std::size_t kNodes = 8;

struct Rule {
  std::array<double, kNodes> x{};   // ascending nodes on [-1, 1]
  std::array<double, kNodes> w{};   // quadrature weights
  std::array<double, kNodes> bary{};  // barycentric interpolation weights
  /// cumulative[i][j] = integral over [-1, x_i] of the j-th Lagrange basis polynomial.
  std::array<std::array<double, kNodes>, kNodes> cumulative{};
};

namespace detail {

inline double lagrange(const Rule& r, std::size_t j, double s) {
  double v = 1.0;
  for (std::size_t m = 0; m < kNodes; ++m) {
    if (m != j) v *= (s - r.x[m]) / (r.x[j] - r.x[m]);
  }
  return v;
}

inline Rule build_rule() {
  using G = boost::math::quadrature::gauss<double, kNodes>;
  Rule r;
  const auto& a = G::abscissa();
  const auto& wt = G::weights();
  constexpr std::size_t half = kNodes / 2;
  for (std::size_t i = 0; i < half; ++i) {
    r.x[half - 1 - i] = -a[i];
    r.w[half - 1 - i] = wt[i];
    r.x[half + i] = a[i];
    r.w[half + i] = wt[i];
  }
  for (std::size_t j = 0; j < kNodes; ++j) {
    double prod = 1.0;
    for (std::size_t m = 0; m < kNodes; ++m) {
      if (m != j) prod *= r.x[j] - r.x[m];
    }
    r.bary[j] = 1.0 / prod;
  }
  // Degree-7 integrands: the 8-point rule mapped onto [-1, x_i] is exact.
  for (std::size_t i = 0; i < kNodes; ++i) {
    const double lo = -1.0, hi = r.x[i];
    const double c = 0.5 * (hi - lo), m = 0.5 * (hi + lo);
    for (std::size_t j = 0; j < kNodes; ++j) {
      double s = 0;
      for (std::size_t q = 0; q < kNodes; ++q) s += r.w[q] * lagrange(r, j, m + c * r.x[q]);
      r.cumulative[i][j] = c * s;
    }
  }
  return r;
}

}  // namespace detail

inline const Rule& rule() {
  static const Rule r = detail::build_rule();
  return r;
}

/// Lagrange basis values at s in [-1, 1] (barycentric form, exact at the nodes).
inline std::array<double, kNodes> basis_at(double s) {
  const Rule& r = rule();
  std::array<double, kNodes> out{};
  for (std::size_t j = 0; j < kNodes; ++j) {
    if (s == r.x[j]) {
      out[j] = 1.0;
      return out;
    }
  }
  double denom = 0;
  for (std::size_t j = 0; j < kNodes; ++j) {
    out[j] = r.bary[j] / (s - r.x[j]);
    denom += out[j];
  }
  for (auto& v : out) v /= denom;
  return out;
}

}  // namespace imkit::gl
