#pragma once

#include <algorithm>
#include <cmath>

namespace imkit {

/// Default central-difference step for a coordinate of magnitude |x|.
inline double default_fd_step(double x) { return 1e-6 * std::max(1.0, std::abs(x)); }

template <class F>
double central_difference(F&& f, double x, double h) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

/// Fourth-order five-point stencil.
template <class F>
double five_point_difference(F&& f, double x, double h) {
  return (-f(x + 2 * h) + 8 * f(x + h) - 8 * f(x - h) + f(x - 2 * h)) / (12.0 * h);
}

/// Step for the five-point stencil, balancing O(h^4) truncation against rounding.
inline double five_point_step(double x) { return 1e-3 * std::max(1.0, std::abs(x)); }

}  // namespace imkit
