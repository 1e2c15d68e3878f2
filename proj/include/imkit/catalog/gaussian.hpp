#pragma once

#include "imkit/association.hpp"
#include "imkit/distributions.hpp"
#include "imkit/engine.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace imkit::catalog {

/// X_i = mu + sigma U_i, U_i iid N(0, 1), sigma known.
inline Association gaussian_mean_model(std::size_t n = 1, double sigma = 1.0) {
  if (n < 1) throw DomainError("gaussian-mean needs n >= 1");
  if (!(sigma > 0)) throw DomainError("gaussian-mean needs sigma > 0");
  Association a;
  a.name = "gaussian-mean";
  a.n_data = n;
  a.params = ParameterSpace({Interval{}}, {"mu"});
  a.aux = standard_normal_aux(n);
  a.forward_map = [sigma](const Vec& u, const Vec& th) -> Vec { return (th[0] + sigma * u.array()).matrix(); };
  a.inverse_map = [sigma](const Vec& x, const Vec& th) -> Vec { return ((x.array() - th[0]) / sigma).matrix(); };
  a.du_dtheta_map = [n, sigma](const Vec&, const Vec&) -> Mat {
    return Mat::Constant(static_cast<Eigen::Index>(n), 1, -1.0 / sigma);
  };
  return a;
}

/// Conditional IM for the Gaussian mean: T(x) = xbar = mu + V with V ~ N(0, sigma^2 / n),
/// conditioning on the fully observed differences (x_1 - x_j) / sigma = u_1 - u_j.
inline ConditionalAssociation gaussian_mean_conditional(const Vec& x, double sigma = 1.0) {
  const auto n = static_cast<std::size_t>(x.size());
  if (n < 2) throw DomainError("conditioning needs n >= 2");
  if (!(sigma > 0)) throw DomainError("gaussian-mean needs sigma > 0");
  ConditionalAssociation c;
  c.name = "gaussian-mean-conditional";
  c.n_data = n;
  c.q = 1;
  c.params = ParameterSpace({Interval{}}, {"mu"});
  c.statistic = [](const Vec& data) { return make_vec({data.mean()}); };
  c.reduced_forward = [](const Vec& v, const Vec& th) { return make_vec({th[0] + v[0]}); };
  c.reduced_inverse = [](const Vec& t, const Vec& th) { return make_vec({t[0] - th[0]}); };
  for (std::size_t j = 1; j < n; ++j) {
    c.conditioning_values.push_back((x[0] - x[static_cast<Eigen::Index>(j)]) / sigma);
  }
  c.conditional = normal_aux(1, sigma / std::sqrt(static_cast<double>(n)));
  return c;
}

/// X_i = mu + sigma U_i with theta = (mu, sigma), sigma > 0.
inline Association gaussian_location_scale_model(std::size_t n) {
  if (n < 3) throw DomainError("location-scale model needs n >= 3");
  Association a;
  a.name = "gaussian-location-scale";
  a.n_data = n;
  a.params = ParameterSpace({Interval{}, Interval{0.0, kInf}}, {"mu", "sigma"});
  a.aux = standard_normal_aux(n);
  a.forward_map = [](const Vec& u, const Vec& th) -> Vec { return (th[0] + th[1] * u.array()).matrix(); };
  a.inverse_map = [](const Vec& x, const Vec& th) -> Vec { return ((x.array() - th[0]) / th[1]).matrix(); };
  a.du_dtheta_map = [](const Vec& x, const Vec& th) -> Mat {
    Mat d(x.size(), 2);
    d.col(0).setConstant(-1.0 / th[1]);
    d.col(1) = -((x.array() - th[0]) / (th[1] * th[1])).matrix();
    return d;
  };
  return a;
}

/// Standardized residual configuration (z_i - zbar) / sqrt(sum (z - zbar)^2), i = 3..n.
/// Takes the same value on data and on auxiliaries, so it is fully observed.
inline std::vector<double> location_scale_configuration(const Vec& z) {
  const double m = z.mean();
  const double s = std::sqrt((z.array() - m).square().sum());
  std::vector<double> out;
  for (Eigen::Index i = 2; i < z.size(); ++i) out.push_back((z[i] - m) / s);
  return out;
}

/// Three-observation ratio (z_1 - z_2) / (z_1 - z_3), invariant under location-scale maps.
inline double location_scale_ratio(const Vec& z) { return (z[0] - z[1]) / (z[0] - z[2]); }

/// Reduced association (xbar, S) = (mu + sigma V_1, sigma^2 V_2), V_1 ~ N(0, 1/n),
/// V_2 ~ chi-square(n - 1), independent of each other and of the configuration.
inline ConditionalAssociation gaussian_location_scale_conditional(const Vec& x) {
  const auto n = static_cast<std::size_t>(x.size());
  if (n < 3) throw DomainError("location-scale model needs n >= 3");
  ConditionalAssociation c;
  c.name = "gaussian-location-scale-conditional";
  c.n_data = n;
  c.q = 2;
  c.params = ParameterSpace({Interval{}, Interval{0.0, kInf}}, {"mu", "sigma"});
  c.statistic = [](const Vec& data) {
    const double m = data.mean();
    return make_vec({m, (data.array() - m).square().sum()});
  };
  c.reduced_forward = [](const Vec& v, const Vec& th) { return make_vec({th[0] + th[1] * v[0], th[1] * th[1] * v[1]}); };
  c.reduced_inverse = [](const Vec& t, const Vec& th) {
    return make_vec({(t[0] - th[0]) / th[1], t[1] / (th[1] * th[1])});
  };
  c.conditioning_values = location_scale_configuration(x);
  const double sd1 = 1.0 / std::sqrt(static_cast<double>(n));
  const AuxiliaryDistribution v1 = normal_aux(1, sd1);
  const AuxiliaryDistribution v2 = chi_square_aux(1, static_cast<double>(n - 1));
  AuxiliaryDistribution d;
  d.name = "normal x chi-square";
  d.dim = 2;
  d.sample = [v1, v2](Engine& eng) {
    const Vec a = v1.sample(eng), b = v2.sample(eng);
    return make_vec({a[0], b[0]});
  };
  d.log_density = [v1, v2](const Vec& v) {
    return v1.log_density(make_vec({v[0]})) + v2.log_density(make_vec({v[1]}));
  };
  d.marginal_cdf = [v1, v2](std::size_t i, double t) { return i == 0 ? v1.marginal_cdf(0, t) : v2.marginal_cdf(0, t); };
  d.marginal_quantile = [v1, v2](std::size_t i, double p) {
    return i == 0 ? v1.marginal_quantile(0, p) : v2.marginal_quantile(0, p);
  };
  d.support = {Interval{}, Interval{0.0, kInf}};
  c.conditional = d;
  return c;
}

}  // namespace imkit::catalog
