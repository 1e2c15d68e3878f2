#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <initializer_list>
#include <vector>

namespace imkit {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline Vec make_vec(std::initializer_list<double> values) {
  Vec v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) v[i++] = x;
  return v;
}

inline Vec to_vec(const std::vector<double>& values) {
  return Eigen::Map<const Vec>(values.data(), static_cast<Eigen::Index>(values.size()));
}

inline std::vector<double> to_std(const Vec& v) { return {v.data(), v.data() + v.size()}; }

inline Vec unit_vec(Eigen::Index n, Eigen::Index k) {
  Vec e = Vec::Zero(n);
  e[k] = 1.0;
  return e;
}

inline bool all_finite(const Vec& v) { return v.allFinite(); }

}  // namespace imkit
