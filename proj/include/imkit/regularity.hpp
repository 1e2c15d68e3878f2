#pragma once

#include "imkit/association.hpp"
#include "imkit/characteristics.hpp"
#include "imkit/numeric/gauss_legendre.hpp"
#include "imkit/parallel.hpp"

#include <boost/math/interpolators/pchip.hpp>
#include <boost/math/tools/roots.hpp>

#include <Eigen/SVD>

#include <algorithm>
#include <array>
#include <functional>
#include <cmath>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace imkit {

/// Grids and tolerances shared by the regularity tests. Empty ranges fall back to
/// default_grid_range of the auxiliary support / parameter bounds.
struct RegularityOptions {
  std::vector<Interval> u_ranges;
  std::vector<Interval> theta_ranges;
  std::size_t grid_points = 21;
  double tol = 1e-5;
  double rank_tol = 1e-8;
  /// Relative cancellation below which a cross-ratio determinant counts as zero.
  double exclusion_tol = 1e-8;
  std::optional<Vec> u_anchor;
  std::optional<Vec> theta_anchor;
  std::size_t table_points = 1025;
  std::size_t level_set_points = 50;
};

/// Closed evaluation range inside an open interval.
inline Interval default_grid_range(const Interval& b) {
  const bool lo = std::isfinite(b.lower), hi = std::isfinite(b.upper);
  if (lo && hi) {
    const double w = b.upper - b.lower;
    return {b.lower + 0.05 * w, b.upper - 0.05 * w};
  }
  if (lo) return {b.lower + 0.25, b.lower + 3.0};
  if (hi) return {b.upper - 3.0, b.upper - 0.25};
  return {-2.0, 2.0};
}

struct PairStatistic {
  std::size_t i = 0;
  std::size_t j = 0;
  double h_theta_dependence = 0;
  double mixed_log_partial = 0;
  bool passed = false;
};

struct SeparabilityReport {
  double h_theta_dependence = 0;
  double mixed_log_partial = 0;
  bool separable = false;
  bool regular = false;
  double tol = 0;
  std::size_t grid_points = 0;
  std::vector<Interval> u_ranges;
  std::vector<Interval> theta_ranges;
  std::size_t total_points = 0;
  std::size_t excluded_points = 0;
  std::optional<std::size_t> offending_index;
  std::vector<PairStatistic> pairs;
  std::vector<std::string> warnings;
};

/// Tabulated strictly monotone map with pchip interpolation and a bracketing inverse.
class MonotoneMap {
 public:
  MonotoneMap() = default;
  MonotoneMap(std::vector<double> grid, std::vector<double> values) : grid_(grid), values_(values) {
    if (grid_.size() < 4) throw DomainError("monotone map needs at least 4 nodes");
    for (std::size_t k = 1; k < values_.size(); ++k) {
      if ((values_[k] - values_[k - 1]) * (values_.back() - values_.front()) <= 0) {
        throw NumericalError("tabulated map is not strictly monotone near " + std::to_string(grid_[k]));
      }
    }
    interp_ = std::make_shared<Pchip>(std::move(grid), std::move(values));
  }

  double operator()(double u) const {
    if (u < grid_.front() || u > grid_.back()) throw DomainError("monotone map evaluated outside its table");
    return (*interp_)(u);
  }
  double lower() const { return grid_.front(); }
  double upper() const { return grid_.back(); }
  bool in_range(double v) const {
    return v >= std::min(values_.front(), values_.back()) && v <= std::max(values_.front(), values_.back());
  }
  const std::vector<double>& grid() const { return grid_; }
  const std::vector<double>& values() const { return values_; }

  double inverse(double v) const {
    if (!in_range(v)) throw DomainError("monotone map inverse outside its range");
    const bool up = values_.back() > values_.front();
    auto it = up ? std::lower_bound(values_.begin(), values_.end(), v)
                 : std::lower_bound(values_.begin(), values_.end(), v, std::greater<double>());
    const auto k = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(it - values_.begin(), 1,
                                                                       static_cast<std::ptrdiff_t>(grid_.size()) - 1));
    if (values_[k] == v) return grid_[k];
    if (values_[k - 1] == v) return grid_[k - 1];
    auto f = [&](double u) { return (*interp_)(u) - v; };
    std::uintmax_t iters = 100;
    auto r = boost::math::tools::toms748_solve(f, grid_[k - 1], grid_[k], values_[k - 1] - v, values_[k] - v,
                                               boost::math::tools::eps_tolerance<double>(52), iters);
    return 0.5 * (r.first + r.second);
  }

 private:
  using Pchip = boost::math::interpolators::pchip<std::vector<double>>;
  std::vector<double> grid_;
  std::vector<double> values_;
  std::shared_ptr<Pchip> interp_;
};

/// x_i = G_i(V_i(u_i) + delta(theta)), anchored at V_i(u0_i) = 0 and delta(theta0) = 0.
struct LocationScaleTransform {
  std::vector<MonotoneMap> v_maps;
  MonotoneMap delta_map;
  double residual = 0;
  Vec u_anchor;
  Vec theta_anchor;
  /// "location", "location after log transform" or "location after transform".
  std::string kind;
};

struct DegeneracyReport {
  Eigen::Index numerical_rank = 0;
  Vec singular_values;
  bool degenerate = false;
  /// p x rank orthonormal basis of the row space (theta directions).
  Mat row_space_basis;
  double rank_tol = 0;
  std::size_t theta_samples = 0;
  std::size_t u_points = 0;
  std::size_t excluded_points = 0;
};

namespace detail {

inline std::vector<Interval> resolve_ranges(const std::vector<Interval>& given, std::size_t dim,
                                            const std::function<Interval(std::size_t)>& bound, const char* what) {
  if (!given.empty()) {
    if (given.size() != dim) throw DomainError(std::string(what) + " ranges have the wrong dimension");
    for (std::size_t k = 0; k < dim; ++k) {
      const Interval& g = given[k];
      const Interval b = bound(k);
      if (!(g.lower < g.upper) || !b.contains(g.lower) || !b.contains(g.upper)) {
        throw DomainError(std::string(what) + " range " + std::to_string(k + 1) + " must be a nonempty interval inside the open domain");
      }
    }
    return given;
  }
  std::vector<Interval> out(dim);
  for (std::size_t k = 0; k < dim; ++k) out[k] = default_grid_range(bound(k));
  return out;
}

inline std::vector<Interval> u_ranges(const Association& assoc, const RegularityOptions& opts) {
  const auto& sup = assoc.aux.support;
  return resolve_ranges(opts.u_ranges, assoc.aux.dim, [&](std::size_t k) { return sup.empty() ? Interval{} : sup[k]; },
                        "auxiliary");
}

inline std::vector<Interval> theta_ranges(const Association& assoc, const RegularityOptions& opts) {
  return resolve_ranges(opts.theta_ranges, assoc.param_dim(), [&](std::size_t k) { return assoc.params.bound(k); },
                        "parameter");
}

inline std::vector<double> grid(const Interval& r, std::size_t count) {
  if (count < 2) throw DomainError("regularity grids need at least 2 points");
  std::vector<double> g(count);
  for (std::size_t k = 0; k < count; ++k) {
    g[k] = k + 1 == count ? r.upper : r.lower + (r.upper - r.lower) * static_cast<double>(k) / static_cast<double>(count - 1);
  }
  return g;
}

inline Vec midpoints(const std::vector<Interval>& ranges) {
  Vec m(static_cast<Eigen::Index>(ranges.size()));
  for (std::size_t k = 0; k < ranges.size(); ++k) m[static_cast<Eigen::Index>(k)] = 0.5 * (ranges[k].lower + ranges[k].upper);
  return m;
}

/// r_{ik} = (da_i/dtheta_k) / (da_i/du_i) = -du_i/dtheta_k at x = a(u, theta).
inline Mat sensitivity(const Association& assoc, const Vec& u, const Vec& theta) {
  return -du_dtheta(assoc, forward(assoc, u, theta), theta);
}

inline std::string point_text(const Vec& u, const Vec& theta) {
  std::ostringstream s;
  s.precision(6);
  s << "u = (";
  for (Eigen::Index i = 0; i < u.size(); ++i) s << (i ? ", " : "") << u[i];
  s << "), theta = (";
  for (Eigen::Index i = 0; i < theta.size(); ++i) s << (i ? ", " : "") << theta[i];
  s << ")";
  return s.str();
}

/// log|r_i / r_j| on the (theta, u_i, u_j) grid, other coordinates held at `base`.
inline PairStatistic pair_statistic(const Association& assoc, std::size_t i, std::size_t j, const Vec& base,
                                    const std::vector<double>& tg, const std::vector<double>& gi,
                                    const std::vector<double>& gj, double tol) {
  const std::size_t T = tg.size(), G = gi.size(), H = gj.size();
  std::vector<double> L(T * G * H);
  parallel_for(T, [&](std::size_t t) {
    Vec th(1);
    th[0] = tg[t];
    for (std::size_t a = 0; a < G; ++a) {
      for (std::size_t b = 0; b < H; ++b) {
        Vec u = base;
        u[static_cast<Eigen::Index>(i)] = gi[a];
        u[static_cast<Eigen::Index>(j)] = gj[b];
        const Mat r = sensitivity(assoc, u, th);
        const double ri = r(static_cast<Eigen::Index>(i), 0), rj = r(static_cast<Eigen::Index>(j), 0);
        if (!std::isfinite(ri) || !std::isfinite(rj) || ri == 0.0 || rj == 0.0) {
          throw SingularModelError("partial derivative ratio vanishes or is undefined at " + point_text(u, th));
        }
        L[(t * G + a) * H + b] = std::log(std::abs(ri / rj));
      }
    }
  });
  auto at = [&](std::size_t t, std::size_t a, std::size_t b) { return L[(t * G + a) * H + b]; };
  PairStatistic s{i, j, 0.0, 0.0, false};
  for (std::size_t t = 0; t + 1 < T; ++t) {
    const double dt = tg[t + 1] - tg[t];
    for (std::size_t a = 0; a < G; ++a) {
      for (std::size_t b = 0; b < H; ++b) {
        s.h_theta_dependence = std::max(s.h_theta_dependence, std::abs(at(t + 1, a, b) - at(t, a, b)) / dt);
      }
    }
  }
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t a = 0; a + 1 < G; ++a) {
      for (std::size_t b = 0; b + 1 < H; ++b) {
        const double d2 = at(t, a + 1, b + 1) - at(t, a + 1, b) - at(t, a, b + 1) + at(t, a, b);
        s.mixed_log_partial = std::max(s.mixed_log_partial, std::abs(d2) / ((gi[a + 1] - gi[a]) * (gj[b + 1] - gj[b])));
      }
    }
  }
  s.passed = s.h_theta_dependence <= tol && s.mixed_log_partial <= tol;
  return s;
}

inline void require_p(const Association& assoc, std::size_t p, const char* op) {
  if (assoc.param_dim() != p) {
    throw DomainError(std::string(op) + " needs a " + std::to_string(p) + "-parameter association, got " +
                      std::to_string(assoc.param_dim()));
  }
}

}  // namespace detail

/// Pairwise test for p = 1: h = r_i / r_j must be theta-free with separable log|h|.
/// Applied to every coordinate pair when n > 2.
inline SeparabilityReport n_sample_separability(const Association& assoc, const RegularityOptions& opts = {}) {
  detail::require_p(assoc, 1, "separability test");
  const std::size_t n = assoc.aux.dim;
  if (n < 2) throw DomainError("separability test needs n >= 2");
  SeparabilityReport rep;
  rep.tol = opts.tol;
  rep.grid_points = opts.grid_points;
  rep.u_ranges = detail::u_ranges(assoc, opts);
  rep.theta_ranges = detail::theta_ranges(assoc, opts);
  const Vec base = opts.u_anchor ? *opts.u_anchor : detail::midpoints(rep.u_ranges);
  if (static_cast<std::size_t>(base.size()) != n) throw DomainError("u anchor has the wrong dimension");
  const auto tg = detail::grid(rep.theta_ranges[0], opts.grid_points);
  std::vector<std::vector<double>> ug(n);
  for (std::size_t i = 0; i < n; ++i) ug[i] = detail::grid(rep.u_ranges[i], opts.grid_points);

  std::vector<std::size_t> failures(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      auto s = detail::pair_statistic(assoc, i, j, base, tg, ug[i], ug[j], opts.tol);
      rep.h_theta_dependence = std::max(rep.h_theta_dependence, s.h_theta_dependence);
      rep.mixed_log_partial = std::max(rep.mixed_log_partial, s.mixed_log_partial);
      rep.total_points += tg.size() * ug[i].size() * ug[j].size();
      if (!s.passed) {
        ++failures[i];
        ++failures[j];
      }
      rep.pairs.push_back(s);
    }
  }
  rep.separable = rep.h_theta_dependence <= opts.tol && rep.mixed_log_partial <= opts.tol;
  rep.regular = rep.separable;
  if (!rep.regular) {
    rep.offending_index = static_cast<std::size_t>(std::max_element(failures.begin(), failures.end()) - failures.begin());
  }
  return rep;
}

inline SeparabilityReport separability_test(const Association& assoc, const RegularityOptions& opts = {}) {
  if (assoc.aux.dim != 2) throw DomainError("separability_test needs n = 2; use n_sample_separability");
  return n_sample_separability(assoc, opts);
}

/// Recovers V_i and delta for a regular p = 1 association and checks the level sets of x.
inline LocationScaleTransform extract_location_transform(const Association& assoc, const SeparabilityReport& report,
                                                         const RegularityOptions& opts = {}) {
  if (!report.regular) throw PreconditionError("extract_location_transform needs a regular association");
  detail::require_p(assoc, 1, "extract_location_transform");
  const std::size_t n = assoc.aux.dim;
  const auto ur = report.u_ranges.empty() ? detail::u_ranges(assoc, opts) : report.u_ranges;
  const auto tr = report.theta_ranges.empty() ? detail::theta_ranges(assoc, opts) : report.theta_ranges;
  LocationScaleTransform out;
  out.u_anchor = opts.u_anchor ? *opts.u_anchor : detail::midpoints(ur);
  out.theta_anchor = opts.theta_anchor ? *opts.theta_anchor : detail::midpoints(tr);
  const Vec& u0 = out.u_anchor;
  const Vec& th0 = out.theta_anchor;
  const double c0 = detail::sensitivity(assoc, u0, th0)(0, 0);

  auto segment = [](const std::function<double(double)>& f, double a, double b) {
    const auto& rule = gl::rule();
    const double c = 0.5 * (b - a), m = 0.5 * (a + b);
    double s = 0;
    for (std::size_t q = 0; q < gl::kNodes; ++q) s += rule.w[q] * f(m + c * rule.x[q]);
    return c * s;
  };
  auto tabulate = [&](const Interval& r, double anchor, const std::function<double(double)>& deriv) {
    const auto g = detail::grid(r, opts.table_points);
    std::vector<double> v(g.size(), 0.0);
    for (std::size_t k = 1; k < g.size(); ++k) v[k] = v[k - 1] + segment(deriv, g[k - 1], g[k]);
    const auto k = static_cast<std::size_t>(std::upper_bound(g.begin(), g.end(), anchor) - g.begin());
    const std::size_t left = std::clamp<std::size_t>(k, 1, g.size() - 1) - 1;
    const double shift = v[left] + segment(deriv, g[left], anchor);
    for (auto& x : v) x -= shift;
    return MonotoneMap(g, v);
  };

  out.delta_map = tabulate(tr[0], th0[0], [&](double t) {
    Vec th(1);
    th[0] = t;
    return detail::sensitivity(assoc, u0, th)(0, 0);
  });
  for (std::size_t i = 0; i < n; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    out.v_maps.push_back(tabulate(ur[i], u0[ii], [&, ii](double s) {
      Vec u = u0;
      u[ii] = s;
      return c0 / detail::sensitivity(assoc, u, th0)(ii, 0);
    }));
  }

  // Level sets: move theta_a -> theta_b and u_i along V_i so V_i + delta is unchanged.
  const auto ul = opts.level_set_points;
  const auto tg = detail::grid(tr[0], ul);
  for (std::size_t i = 0; i < n; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    const auto ug = detail::grid(ur[i], ul);
    for (std::size_t a = 0; a < ul; ++a) {
      Vec tha(1), thb(1);
      tha[0] = tg[a];
      thb[0] = tg[ul - 1 - a];
      const double shift = out.delta_map(tha[0]) - out.delta_map(thb[0]);
      for (std::size_t b = 0; b < ul; ++b) {
        const double target = out.v_maps[i](ug[b]) + shift;
        if (!out.v_maps[i].in_range(target)) continue;
        Vec u = u0, u2 = u0;
        u[ii] = ug[b];
        u2[ii] = out.v_maps[i].inverse(target);
        const double x1 = forward(assoc, u, tha)[ii];
        const double x2 = forward(assoc, u2, thb)[ii];
        out.residual = std::max(out.residual, std::abs(x1 - x2) / std::max(1.0, std::abs(x1)));
      }
    }
  }

  auto rel_spread = [](const std::vector<double>& v) {
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    const double s = std::max(std::abs(*lo), std::abs(*hi));
    return s > 0 ? (*hi - *lo) / s : 0.0;
  };
  const auto tg_small = detail::grid(tr[0], opts.grid_points);
  std::vector<double> r_all, dlog, vlog;
  for (double t : tg_small) {
    Vec th(1);
    th[0] = t;
    const double d = detail::sensitivity(assoc, u0, th)(0, 0);
    dlog.push_back(t * d);
    for (std::size_t i = 0; i < n; ++i) {
      for (double s : detail::grid(ur[i], opts.grid_points)) {
        Vec u = u0;
        u[static_cast<Eigen::Index>(i)] = s;
        r_all.push_back(detail::sensitivity(assoc, u, th)(static_cast<Eigen::Index>(i), 0));
      }
    }
  }
  bool positive = tr[0].lower > 0;
  for (std::size_t i = 0; i < n; ++i) {
    positive = positive && ur[i].lower > 0;
    if (!positive) break;
    for (double s : detail::grid(ur[i], opts.grid_points)) {
      Vec u = u0;
      u[static_cast<Eigen::Index>(i)] = s;
      vlog.push_back(s * c0 / detail::sensitivity(assoc, u, th0)(static_cast<Eigen::Index>(i), 0));
    }
  }
  if (rel_spread(r_all) <= opts.tol) {
    out.kind = "location";
  } else if (positive && rel_spread(dlog) <= opts.tol && rel_spread(vlog) <= opts.tol) {
    out.kind = "location after log transform";
  } else {
    out.kind = "location after transform";
  }
  return out;
}

/// Cross-ratio test for a common-form association a(theta_1, theta_2, u), n >= 3.
inline SeparabilityReport two_parameter_test(const Association& assoc, const RegularityOptions& opts = {}) {
  detail::require_p(assoc, 2, "two_parameter_test");
  const std::size_t n = assoc.aux.dim;
  if (n < 3) throw DomainError("two_parameter_test needs n >= 3");
  SeparabilityReport rep;
  rep.tol = opts.tol;
  rep.grid_points = opts.grid_points;
  rep.u_ranges = detail::u_ranges(assoc, opts);
  rep.theta_ranges = detail::theta_ranges(assoc, opts);
  const auto ug = detail::grid(rep.u_ranges[0], opts.grid_points);
  const auto t1 = detail::grid(rep.theta_ranges[0], opts.grid_points);
  const auto t2 = detail::grid(rep.theta_ranges[1], opts.grid_points);
  const std::size_t G = ug.size(), T1 = t1.size(), T2 = t2.size();

  {
    const Vec probe = detail::midpoints(rep.theta_ranges);
    const Vec x = forward(assoc, Vec::Constant(static_cast<Eigen::Index>(n), ug[G / 2]), probe);
    if ((x.array() - x[0]).abs().maxCoeff() > 1e-12 * std::max(1.0, std::abs(x[0]))) {
      throw PreconditionError("two_parameter_test needs observations sharing a common form");
    }
  }

  // r[(t1, t2, u)] = (r_1, r_2) from the first coordinate.
  std::vector<std::array<double, 2>> r(T1 * T2 * G);
  parallel_for(T1 * T2, [&](std::size_t t) {
    const Vec th = make_vec({t1[t / T2], t2[t % T2]});
    for (std::size_t a = 0; a < G; ++a) {
      Mat s;
      try {
        s = detail::sensitivity(assoc, Vec::Constant(static_cast<Eigen::Index>(n), ug[a]), th);
      } catch (const DomainError&) {
        s = Mat::Constant(1, 2, std::numeric_limits<double>::quiet_NaN());
      }
      r[t * G + a] = {s(0, 0), s(0, 1)};
    }
  });

  const std::size_t n_triples = G * G * G;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> logR(T1 * T2 * n_triples, nan);
  std::size_t excluded = 0;
  for (std::size_t t = 0; t < T1 * T2; ++t) {
    for (std::size_t q = 0; q < n_triples; ++q) {
      const auto& A = r[t * G + q / (G * G)];
      const auto& B = r[t * G + (q / G) % G];
      const auto& C = r[t * G + q % G];
      const double n1 = C[0] * B[1], n2 = B[0] * C[1];
      const double d1 = A[0] * C[1], d2 = C[0] * A[1];
      const double num = n1 - n2, den = d1 - d2;
      const bool ok = std::isfinite(num) && std::isfinite(den) &&
                      std::abs(num) > opts.exclusion_tol * (std::abs(n1) + std::abs(n2)) &&
                      std::abs(den) > opts.exclusion_tol * (std::abs(d1) + std::abs(d2));
      if (ok) {
        logR[t * n_triples + q] = std::log(std::abs(num / den));
      } else {
        ++excluded;
      }
    }
  }
  rep.total_points = T1 * T2 * n_triples;
  rep.excluded_points = excluded;
  if (excluded > 0) {
    rep.warnings.push_back(std::to_string(excluded) + " of " + std::to_string(rep.total_points) +
                           " grid points excluded for vanishing cross-ratio determinants");
  }
  if (2 * excluded > rep.total_points) {
    throw InconclusiveError("cross-ratio test inconclusive: " + std::to_string(excluded) + " of " +
                            std::to_string(rep.total_points) + " grid points excluded");
  }
  auto idx = [&](std::size_t a, std::size_t b) { return (a * T2 + b) * n_triples; };
  for (std::size_t a = 0; a < T1; ++a) {
    for (std::size_t b = 0; b < T2; ++b) {
      for (std::size_t q = 0; q < n_triples; ++q) {
        const double here = logR[idx(a, b) + q];
        if (std::isnan(here)) continue;
        if (a + 1 < T1) {
          const double next = logR[idx(a + 1, b) + q];
          if (!std::isnan(next)) rep.h_theta_dependence = std::max(rep.h_theta_dependence, std::abs(next - here) / (t1[a + 1] - t1[a]));
        }
        if (b + 1 < T2) {
          const double next = logR[idx(a, b + 1) + q];
          if (!std::isnan(next)) rep.h_theta_dependence = std::max(rep.h_theta_dependence, std::abs(next - here) / (t2[b + 1] - t2[b]));
        }
      }
    }
  }
  rep.separable = rep.h_theta_dependence <= opts.tol;
  rep.regular = rep.separable;
  return rep;
}

/// Rank of the m x p matrix [r_k(theta, u_i)] for a common-form association, maximized
/// over a 3-point-per-axis theta sample.
inline DegeneracyReport degeneracy_rank_test(const Association& assoc, const RegularityOptions& opts = {}) {
  const std::size_t p = assoc.param_dim();
  if (p < 3) throw DomainError("degeneracy_rank_test needs p >= 3");
  const std::size_t n = assoc.aux.dim;
  const auto ur = detail::u_ranges(assoc, opts);
  const auto tr = detail::theta_ranges(assoc, opts);
  const auto ug = detail::grid(ur[0], std::max<std::size_t>(opts.grid_points, 4));

  std::vector<Vec> thetas;
  std::size_t count = 1;
  for (std::size_t k = 0; k < p; ++k) count *= 3;
  for (std::size_t c = 0; c < count; ++c) {
    Vec th(static_cast<Eigen::Index>(p));
    std::size_t rem = c;
    for (std::size_t k = 0; k < p; ++k) {
      const double w = 0.5 * static_cast<double>(rem % 3);
      th[static_cast<Eigen::Index>(k)] = tr[k].lower + w * (tr[k].upper - tr[k].lower);
      rem /= 3;
    }
    thetas.push_back(th);
  }

  DegeneracyReport rep;
  rep.rank_tol = opts.rank_tol;
  rep.theta_samples = thetas.size();
  rep.u_points = ug.size();
  rep.numerical_rank = -1;
  std::size_t usable = 0;
  for (const Vec& th : thetas) {
    std::vector<Eigen::RowVectorXd> rows;
    for (double u : ug) {
      Mat s;
      try {
        s = detail::sensitivity(assoc, Vec::Constant(static_cast<Eigen::Index>(n), u), th);
      } catch (const DomainError&) {
        ++rep.excluded_points;
        continue;
      }
      if (!s.row(0).allFinite()) {
        ++rep.excluded_points;
        continue;
      }
      rows.push_back(s.row(0));
    }
    if (rows.empty()) continue;
    ++usable;
    Mat A(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(p));
    for (std::size_t k = 0; k < rows.size(); ++k) A.row(static_cast<Eigen::Index>(k)) = rows[k];
    Vec sv;
    const Eigen::Index rank = numerical_rank(A, opts.rank_tol, &sv);
    if (rank > rep.numerical_rank) {
      rep.numerical_rank = rank;
      rep.singular_values = sv;
      Eigen::JacobiSVD<Mat> svd(A, Eigen::ComputeThinV);
      rep.row_space_basis = svd.matrixV().leftCols(rank);
    }
  }
  if (usable == 0) throw SingularModelError("degeneracy_rank_test: every test point was excluded (a_u = 0)");
  rep.degenerate = rep.numerical_rank < static_cast<Eigen::Index>(p);
  return rep;
}

struct Classification {
  std::string verdict;
  std::optional<SeparabilityReport> separability;
  std::optional<LocationScaleTransform> transform;
  std::optional<DegeneracyReport> degeneracy;
};

/// Dispatches on p: pairwise separability (p = 1), cross ratio (p = 2), rank (p >= 3).
inline Classification classify(const Association& assoc, const RegularityOptions& opts = {}) {
  Classification c;
  const std::size_t p = assoc.param_dim();
  if (p == 1) {
    c.separability = n_sample_separability(assoc, opts);
    if (c.separability->regular) {
      c.transform = extract_location_transform(assoc, *c.separability, opts);
      c.verdict = "regular: " + c.transform->kind;
    } else {
      c.verdict = "not regular";
    }
  } else if (p == 2) {
    c.separability = two_parameter_test(assoc, opts);
    c.verdict = c.separability->regular ? "regular: location-scale" : "not regular";
  } else {
    c.degeneracy = degeneracy_rank_test(assoc, opts);
    c.verdict = std::string(c.degeneracy->degenerate ? "degenerate" : "not degenerate") + ", rank " +
                std::to_string(c.degeneracy->numerical_rank);
  }
  return c;
}

}  // namespace imkit
