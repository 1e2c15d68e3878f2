#pragma once

#include "imkit/errors.hpp"
#include "imkit/linalg.hpp"
#include "imkit/numeric/finite_difference.hpp"
#include "imkit/random.hpp"

#include <boost/math/tools/roots.hpp>

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace imkit {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Open interval (lower, upper); either end may be infinite.
struct Interval {
  double lower = -kInf;
  double upper = kInf;

  bool contains(double v) const { return v > lower && v < upper; }
  bool bounded() const { return std::isfinite(lower) && std::isfinite(upper); }
};

/// Theta, a product of open intervals in R^p.
class ParameterSpace {
 public:
  ParameterSpace() = default;

  explicit ParameterSpace(std::vector<Interval> bounds, std::vector<std::string> names = {})
      : bounds_(std::move(bounds)), names_(std::move(names)) {
    if (bounds_.empty()) throw DomainError("parameter space must have dimension >= 1");
    for (std::size_t k = 0; k < bounds_.size(); ++k) {
      if (!(bounds_[k].lower < bounds_[k].upper)) {
        throw DomainError("parameter bound " + std::to_string(k + 1) + " has lower >= upper");
      }
    }
    if (names_.empty()) {
      for (std::size_t k = 0; k < bounds_.size(); ++k) names_.push_back("theta_" + std::to_string(k + 1));
    }
    if (names_.size() != bounds_.size()) throw DomainError("parameter names/bounds size mismatch");
  }

  std::size_t dim() const { return bounds_.size(); }
  const Interval& bound(std::size_t k) const { return bounds_.at(k); }
  const std::string& name(std::size_t k) const { return names_.at(k); }

  bool contains(const Vec& theta) const {
    if (static_cast<std::size_t>(theta.size()) != dim()) return false;
    for (std::size_t k = 0; k < dim(); ++k) {
      if (!bounds_[k].contains(theta[static_cast<Eigen::Index>(k)])) return false;
    }
    return true;
  }

  /// Throws DomainError naming the first coordinate outside its open interval.
  void check(const Vec& theta) const {
    if (static_cast<std::size_t>(theta.size()) != dim()) {
      throw DomainError("theta has dimension " + std::to_string(theta.size()) + ", expected " +
                        std::to_string(dim()));
    }
    for (std::size_t k = 0; k < dim(); ++k) {
      const double v = theta[static_cast<Eigen::Index>(k)];
      if (!bounds_[k].contains(v)) {
        std::ostringstream msg;
        msg.precision(17);
        msg << "parameter " << names_[k] << " = " << v << " outside open interval (" << bounds_[k].lower
            << ", " << bounds_[k].upper << ")";
        throw DomainError(msg.str());
      }
    }
  }

 private:
  std::vector<Interval> bounds_;
  std::vector<std::string> names_;
};

/// P_U: a fully known distribution on the auxiliary space R^n.
struct AuxiliaryDistribution {
  std::string name;
  std::size_t dim = 0;
  std::function<Vec(Engine&)> sample;
  std::function<double(const Vec&)> log_density;
  /// Optional per-coordinate marginal CDF F_i(v); empty when unavailable.
  std::function<double(std::size_t, double)> marginal_cdf;
  /// Optional per-coordinate marginal quantile F_i^{-1}(p).
  std::function<double(std::size_t, double)> marginal_quantile;
  /// Per-coordinate support (open intervals).
  std::vector<Interval> support;
  /// Coordinates mutually independent (product measure).
  bool independent = true;

  bool has_marginal_cdf() const { return static_cast<bool>(marginal_cdf); }
};

/// The association X = a(U, theta) with its unique inverse u(x, theta).
struct Association {
  std::string name;
  std::size_t n_data = 0;
  ParameterSpace params;
  AuxiliaryDistribution aux;
  std::function<Vec(const Vec& u, const Vec& theta)> forward_map;
  std::function<Vec(const Vec& x, const Vec& theta)> inverse_map;
  /// Optional analytic n x p matrix of d u_i / d theta_k.
  std::function<Mat(const Vec& x, const Vec& theta)> du_dtheta_map;

  std::size_t param_dim() const { return params.dim(); }
};

inline Vec forward(const Association& assoc, const Vec& u, const Vec& theta) {
  assoc.params.check(theta);
  if (static_cast<std::size_t>(u.size()) != assoc.aux.dim) {
    throw DomainError(assoc.name + ": auxiliary vector has wrong dimension");
  }
  return assoc.forward_map(u, theta);
}

inline Vec inverse(const Association& assoc, const Vec& x, const Vec& theta) {
  assoc.params.check(theta);
  if (static_cast<std::size_t>(x.size()) != assoc.n_data) {
    throw DomainError(assoc.name + ": data vector has length " + std::to_string(x.size()) + ", expected " +
                      std::to_string(assoc.n_data));
  }
  Vec u = assoc.inverse_map(x, theta);
  if (!u.allFinite()) throw InversionError(assoc.name + ": data outside the range of the forward map");
  return u;
}

/// Central finite differences of the inverse map. `step` overrides the default
/// 1e-6 * max(1, |theta_k|) per coordinate.
inline Mat du_dtheta_fd(const Association& assoc, const Vec& x, const Vec& theta,
                        std::optional<double> step = std::nullopt) {
  assoc.params.check(theta);
  const auto p = static_cast<Eigen::Index>(assoc.param_dim());
  Mat out(static_cast<Eigen::Index>(assoc.aux.dim), p);
  for (Eigen::Index k = 0; k < p; ++k) {
    const double h = step ? *step : default_fd_step(theta[k]);
    const Interval& b = assoc.params.bound(static_cast<std::size_t>(k));
    if (!b.contains(theta[k] - h) || !b.contains(theta[k] + h)) {
      throw StencilError("finite-difference stencil for " + assoc.params.name(static_cast<std::size_t>(k)) +
                         " crosses the parameter boundary");
    }
    Vec tp = theta, tm = theta;
    tp[k] += h;
    tm[k] -= h;
    out.col(k) = (assoc.inverse_map(x, tp) - assoc.inverse_map(x, tm)) / (2.0 * h);
  }
  return out;
}

/// d u(x, theta) / d theta: analytic when the model supplies it, else central differences.
inline Mat du_dtheta(const Association& assoc, const Vec& x, const Vec& theta,
                     std::optional<double> step = std::nullopt) {
  if (assoc.du_dtheta_map) {
    assoc.params.check(theta);
    return assoc.du_dtheta_map(x, theta);
  }
  return du_dtheta_fd(assoc, x, theta, step);
}

/// x = a(U, theta) with U drawn from stream `stream` of `seed`.
inline Vec sample_data(const Association& assoc, const Vec& theta, std::uint64_t seed, std::uint64_t stream = 0) {
  Engine eng = make_engine(seed, stream);
  return forward(assoc, assoc.aux.sample(eng), theta);
}

namespace detail {

/// Solves g(u) = target for u in the open interval `support`, g monotone.
template <class G>
double monotone_solve(G&& g, double target, const Interval& support, const std::string& what) {
  auto f = [&](double u) { return g(u) - target; };
  double a, b;
  if (support.bounded()) {
    const double pad = 1e-12 * (support.upper - support.lower);
    a = support.lower + pad;
    b = support.upper - pad;
  } else if (std::isfinite(support.lower)) {
    a = support.lower + 1e-300;
    b = support.lower + 1.0;
  } else if (std::isfinite(support.upper)) {
    a = support.upper - 1.0;
    b = support.upper - 1e-300;
  } else {
    a = -1.0;
    b = 1.0;
  }
  double fa = f(a), fb = f(b);
  for (int expand = 0; fa * fb > 0 && expand < 2000; ++expand) {
    if (support.bounded()) break;
    if (std::isfinite(support.lower)) {
      b = support.lower + 2.0 * (b - support.lower);
      fb = f(b);
    } else if (std::isfinite(support.upper)) {
      a = support.upper - 2.0 * (support.upper - a);
      fa = f(a);
    } else {
      a *= 2.0;
      b *= 2.0;
      fa = f(a);
      fb = f(b);
    }
    if (!std::isfinite(a) || !std::isfinite(b)) break;
  }
  if (fa == 0.0) return a;
  if (fb == 0.0) return b;
  if (!(fa * fb < 0)) throw InversionError(what + ": data value outside the range of the component map");
  std::uintmax_t iters = 200;
  auto r = boost::math::tools::toms748_solve(f, a, b, fa, fb, boost::math::tools::eps_tolerance<double>(52), iters);
  return 0.5 * (r.first + r.second);
}

}  // namespace detail

/// Builds an association whose i-th coordinate is x_i = g(i, u_i, theta), with
/// g strictly monotone in u_i. The inverse is solved coordinate-wise by bracketing
/// root finding over the auxiliary support.
inline Association make_coordinatewise_association(
    std::string name, ParameterSpace params, AuxiliaryDistribution aux,
    std::function<double(std::size_t, double, const Vec&)> component) {
  Association a;
  a.name = std::move(name);
  a.n_data = aux.dim;
  a.params = std::move(params);
  a.aux = std::move(aux);
  auto support = a.aux.support;
  if (support.empty()) support.assign(a.aux.dim, Interval{});
  a.forward_map = [component](const Vec& u, const Vec& theta) {
    Vec x(u.size());
    for (Eigen::Index i = 0; i < u.size(); ++i) x[i] = component(static_cast<std::size_t>(i), u[i], theta);
    return x;
  };
  const std::string label = a.name;
  a.inverse_map = [component, support, label](const Vec& x, const Vec& theta) {
    Vec u(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const auto idx = static_cast<std::size_t>(i);
      u[i] = detail::monotone_solve([&](double v) { return component(idx, v, theta); }, x[i], support[idx],
                                    label + " coordinate " + std::to_string(i + 1));
    }
    return u;
  };
  return a;
}

}  // namespace imkit
