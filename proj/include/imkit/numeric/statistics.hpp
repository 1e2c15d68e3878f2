#pragma once

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace imkit {

inline double normal_cdf(double z) {
  static const boost::math::normal_distribution<double> n01;
  if (z == -INFINITY) return 0.0;
  if (z == INFINITY) return 1.0;
  return boost::math::cdf(n01, z);
}

inline double normal_quantile(double p) {
  static const boost::math::normal_distribution<double> n01;
  return boost::math::quantile(n01, p);
}

/// One-sided Kolmogorov-Smirnov distance measuring how far a sample of
/// plausibility-like values falls *below* Uniform(0,1): sup_t (F_n(t) - t)^+.
/// Zero when the sample is stochastically no smaller than uniform.
inline double ks_one_sided_below_uniform(std::span<const double> values) {
  if (values.empty()) return 0.0;
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    worst = std::max(worst, static_cast<double>(i + 1) / n - sorted[i]);
  }
  return worst;
}

/// Asymptotic one-sided KS critical value, sqrt(-ln(alpha) / (2n)).
inline double ks_one_sided_critical(std::size_t n, double alpha = 0.01) {
  return std::sqrt(-std::log(alpha) / (2.0 * static_cast<double>(n)));
}

inline double binomial_se(double p, std::size_t n) {
  return n == 0 ? 0.0 : std::sqrt(std::max(0.0, p * (1.0 - p)) / static_cast<double>(n));
}

}  // namespace imkit
