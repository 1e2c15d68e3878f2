#pragma once

#include "imkit/association.hpp"
#include "imkit/numeric/statistics.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

namespace imkit {

/// n iid N(0, sd^2) coordinates.
inline AuxiliaryDistribution normal_aux(std::size_t n, double sd = 1.0) {
  if (!(sd > 0)) throw DomainError("normal auxiliary needs sd > 0");
  AuxiliaryDistribution d;
  d.name = sd == 1.0 ? "standard-normal" : "normal";
  d.dim = n;
  d.sample = [n, sd](Engine& eng) {
    Vec u(static_cast<Eigen::Index>(n));
    for (auto& v : u) v = sd * standard_normal(eng);
    return u;
  };
  d.log_density = [sd](const Vec& u) {
    const double c = -0.5 * std::log(2 * std::numbers::pi) - std::log(sd);
    return static_cast<double>(u.size()) * c - 0.5 * u.squaredNorm() / (sd * sd);
  };
  d.marginal_cdf = [sd](std::size_t, double x) { return normal_cdf(x / sd); };
  d.marginal_quantile = [sd](std::size_t, double p) { return sd * normal_quantile(p); };
  d.support.assign(n, Interval{});
  return d;
}

inline AuxiliaryDistribution standard_normal_aux(std::size_t n) { return normal_aux(n, 1.0); }

/// n iid Uniform(0, 1) coordinates.
inline AuxiliaryDistribution uniform01_aux(std::size_t n) {
  AuxiliaryDistribution d;
  d.name = "uniform";
  d.dim = n;
  d.sample = [n](Engine& eng) {
    Vec u(static_cast<Eigen::Index>(n));
    for (auto& v : u) v = uniform01(eng);
    return u;
  };
  d.log_density = [](const Vec& u) {
    for (double v : u) {
      if (!(v > 0 && v < 1)) return -kInf;
    }
    return 0.0;
  };
  d.marginal_cdf = [](std::size_t, double x) { return std::clamp(x, 0.0, 1.0); };
  d.marginal_quantile = [](std::size_t, double p) { return p; };
  d.support.assign(n, Interval{0.0, 1.0});
  return d;
}

/// n iid chi-square(dof) coordinates.
inline AuxiliaryDistribution chi_square_aux(std::size_t n, double dof = 1.0) {
  if (!(dof > 0)) throw DomainError("chi-square auxiliary needs dof > 0");
  AuxiliaryDistribution d;
  d.name = "chi-square";
  d.dim = n;
  d.sample = [n, dof](Engine& eng) {
    std::gamma_distribution<double> g(0.5 * dof, 2.0);
    Vec u(static_cast<Eigen::Index>(n));
    for (auto& v : u) v = g(eng);
    return u;
  };
  d.log_density = [dof](const Vec& u) {
    const double k = 0.5 * dof;
    const double c = -k * std::log(2.0) - std::lgamma(k);
    double s = 0;
    for (double v : u) {
      if (!(v > 0)) return -kInf;
      s += c + (k - 1) * std::log(v) - 0.5 * v;
    }
    return s;
  };
  d.marginal_cdf = [dof](std::size_t, double x) {
    return x <= 0 ? 0.0 : boost::math::gamma_p(0.5 * dof, 0.5 * x);
  };
  d.marginal_quantile = [dof](std::size_t, double p) {
    return boost::math::quantile(boost::math::chi_squared_distribution<double>(dof), p);
  };
  d.support.assign(n, Interval{0.0, kInf});
  return d;
}

/// Log of a chi-square(1) variable, density exp(w/2 - e^w/2) / sqrt(2 pi).
inline double log_chi_square1_log_density(double w) {
  return -0.5 * std::log(2 * std::numbers::pi) + 0.5 * w - 0.5 * std::exp(w);
}

inline double log_chi_square1_cdf(double w) {
  if (w == -kInf) return 0.0;
  if (w == kInf) return 1.0;
  return boost::math::gamma_p(0.5, 0.5 * std::exp(w));
}

inline double log_chi_square1_quantile(double p) {
  return std::log(boost::math::quantile(boost::math::chi_squared_distribution<double>(1.0), p));
}

/// n iid ln(chi-square(1)) coordinates.
inline AuxiliaryDistribution log_chi_square1_aux(std::size_t n) {
  AuxiliaryDistribution d;
  d.name = "log-chi-square-1";
  d.dim = n;
  d.sample = [n](Engine& eng) {
    Vec u(static_cast<Eigen::Index>(n));
    for (auto& v : u) {
      const double z = standard_normal(eng);
      v = std::log(z * z);
    }
    return u;
  };
  d.log_density = [](const Vec& u) {
    double s = 0;
    for (double w : u) s += log_chi_square1_log_density(w);
    return s;
  };
  d.marginal_cdf = [](std::size_t, double w) { return log_chi_square1_cdf(w); };
  d.marginal_quantile = [](std::size_t, double p) { return log_chi_square1_quantile(p); };
  d.support.assign(n, Interval{});
  return d;
}

}  // namespace imkit
