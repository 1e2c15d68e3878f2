#pragma once

#include "imkit/association.hpp"
#include "imkit/numeric/gauss_legendre.hpp"
#include "imkit/random.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace imkit {

/// Right-hand side g(tau, u) of du_i/dtau_k = g_{i,k}(tau, u): an n x p matrix.
struct CharacteristicField {
  std::string name;
  std::size_t n = 0;
  std::size_t p = 0;
  Vec anchor;
  std::function<Mat(const Vec& tau, const Vec& u)> eval;
};

/// Field with entries du_i(x, theta)/dtheta_k at theta = theta0 and x = a(u, theta0),
/// i.e. a function of u alone. `orientation` = -1 reverses the curve parameter.
inline CharacteristicField build_field(const Association& assoc, const Vec& theta0, double orientation = 1.0) {
  assoc.params.check(theta0);
  CharacteristicField f;
  f.name = assoc.name + "-field";
  f.n = assoc.aux.dim;
  f.p = assoc.param_dim();
  f.anchor = theta0;
  // Probe the partials once so undefined derivatives fail at construction.
  Vec probe(static_cast<Eigen::Index>(f.n));
  for (std::size_t i = 0; i < f.n; ++i) {
    const Interval s = i < assoc.aux.support.size() ? assoc.aux.support[i] : Interval{};
    probe[static_cast<Eigen::Index>(i)] = s.contains(0.5) ? 0.5 : (s.bounded() ? 0.5 * (s.lower + s.upper) : s.lower + 1.0);
  }
  const Mat d0 = du_dtheta(assoc, forward(assoc, probe, theta0), theta0);
  if (!d0.allFinite()) throw DomainError(assoc.name + ": parameter partials undefined at theta0");
  f.eval = [assoc, theta0, orientation](const Vec&, const Vec& u) -> Mat {
    return orientation * du_dtheta(assoc, assoc.forward_map(u, theta0), theta0);
  };
  return f;
}

struct PicardConfig {
  Vec half_width;  // a_k > 0 for every tau axis
  double radius = 1.0;  // b: iterates must stay in the ball |u - u0| <= b
  double tol = 1e-12;
  std::size_t max_iter = 200;
  /// Sweep order of the tau axes; empty means 0, 1, ..., p-1.
  std::vector<std::size_t> axis_order;
  /// Gauss-Legendre segments on each side of tau0, per axis.
  std::size_t segments = 1;
  std::size_t max_segments = 64;
};

namespace detail {

/// Tensor grid of composite 8-point Gauss-Legendre nodes on prod_k [tau0_k - a_k, tau0_k + a_k],
/// with tau0 a segment breakpoint on every axis.
struct PicardGrid {
  std::size_t p = 0, n = 0, S = 1, N = 0, total = 0;
  Vec tau0, a;
  std::vector<std::size_t> stride;

  PicardGrid(std::size_t p_, std::size_t n_, std::size_t segs, Vec t0, Vec half)
      : p(p_), n(n_), S(segs), tau0(std::move(t0)), a(std::move(half)) {
    N = 2 * S * gl::kNodes;
    stride.assign(p, 1);
    for (std::size_t k = p; k-- > 1;) stride[k - 1] = stride[k] * N;
    total = stride[0] * N;
  }

  double seg_len(std::size_t k) const { return a[static_cast<Eigen::Index>(k)] / static_cast<double>(S); }
  double lower(std::size_t k) const { return tau0[static_cast<Eigen::Index>(k)] - a[static_cast<Eigen::Index>(k)]; }

  double node(std::size_t k, std::size_t idx) const {
    const double h = seg_len(k);
    const std::size_t s = idx / gl::kNodes, j = idx % gl::kNodes;
    return lower(k) + h * (static_cast<double>(s) + 0.5 * (gl::rule().x[j] + 1.0));
  }

  /// Interpolation weights (node index, weight) of axis k at coordinate t.
  std::vector<std::pair<std::size_t, double>> weights(std::size_t k, double t) const {
    const double h = seg_len(k);
    double rel = (t - lower(k)) / h;
    auto s = static_cast<std::ptrdiff_t>(std::floor(rel));
    s = std::clamp<std::ptrdiff_t>(s, 0, static_cast<std::ptrdiff_t>(2 * S) - 1);
    const double xi = std::clamp(2.0 * (rel - static_cast<double>(s)) - 1.0, -1.0, 1.0);
    const auto b = gl::basis_at(xi);
    std::vector<std::pair<std::size_t, double>> w;
    for (std::size_t j = 0; j < gl::kNodes; ++j) {
      if (b[j] != 0.0) w.emplace_back(static_cast<std::size_t>(s) * gl::kNodes + j, b[j]);
    }
    return w;
  }

  /// Weights at tau0_k, taken from the first segment above tau0.
  std::vector<std::pair<std::size_t, double>> anchor_weights() const {
    const auto b = gl::basis_at(-1.0);
    std::vector<std::pair<std::size_t, double>> w;
    for (std::size_t j = 0; j < gl::kNodes; ++j) w.emplace_back(S * gl::kNodes + j, b[j]);
    return w;
  }

  /// Contracts U (n x total) against per-axis weight lists.
  Vec contract(const Mat& U, const std::vector<std::vector<std::pair<std::size_t, double>>>& w) const {
    Vec out = Vec::Zero(static_cast<Eigen::Index>(n));
    std::vector<std::size_t> pos(p, 0);
    for (;;) {
      double coef = 1.0;
      std::size_t flat = 0;
      for (std::size_t k = 0; k < p; ++k) {
        coef *= w[k][pos[k]].second;
        flat += w[k][pos[k]].first * stride[k];
      }
      out += coef * U.col(static_cast<Eigen::Index>(flat));
      std::size_t k = p;
      while (k-- > 0) {
        if (++pos[k] < w[k].size()) break;
        pos[k] = 0;
      }
      if (k == static_cast<std::size_t>(-1)) break;
    }
    return out;
  }

  /// Cumulative integral from tau0 to each node along an axis line of N values.
  void integrate_line(std::size_t k, const std::vector<Vec>& f, std::vector<Vec>& out) const {
    const auto& r = gl::rule();
    const double h = seg_len(k);
    const std::size_t segs = 2 * S;
    std::vector<Vec> full(segs, Vec::Zero(static_cast<Eigen::Index>(n)));
    for (std::size_t s = 0; s < segs; ++s) {
      for (std::size_t j = 0; j < gl::kNodes; ++j) full[s] += r.w[j] * f[s * gl::kNodes + j];
      full[s] *= 0.5 * h;
    }
    out.assign(N, Vec::Zero(static_cast<Eigen::Index>(n)));
    for (std::size_t s = 0; s < segs; ++s) {
      Vec before = Vec::Zero(static_cast<Eigen::Index>(n));
      if (s >= S) {
        for (std::size_t q = S; q < s; ++q) before += full[q];
      } else {
        for (std::size_t q = s; q < S; ++q) before -= full[q];
      }
      for (std::size_t i = 0; i < gl::kNodes; ++i) {
        Vec part = Vec::Zero(static_cast<Eigen::Index>(n));
        for (std::size_t j = 0; j < gl::kNodes; ++j) part += r.cumulative[i][j] * f[s * gl::kNodes + j];
        out[s * gl::kNodes + i] = before + 0.5 * h * part;
      }
    }
  }
};

}  // namespace detail

/// Piecewise-polynomial solution u(tau) of the characteristic system on its rectangle.
class Trajectory {
 public:
  Trajectory(detail::PicardGrid grid, Mat values, Vec u0)
      : grid_(std::move(grid)), values_(std::move(values)), u0_(std::move(u0)) {}

  std::size_t iterations_used = 0;
  double final_residual = 0;
  /// Largest change between the accepted resolution and the one before it.
  double quadrature_error = 0;

  const Vec& tau0() const { return grid_.tau0; }
  const Vec& half_width() const { return grid_.a; }
  const Vec& u0() const { return u0_; }
  std::size_t segments() const { return grid_.S; }

  bool in_rectangle(const Vec& tau) const {
    for (std::size_t k = 0; k < grid_.p; ++k) {
      const auto kk = static_cast<Eigen::Index>(k);
      if (std::abs(tau[kk] - grid_.tau0[kk]) > grid_.a[kk] * (1 + 1e-12)) return false;
    }
    return true;
  }

  Vec evaluate(const Vec& tau) const {
    if (static_cast<std::size_t>(tau.size()) != grid_.p) throw DomainError("tau has wrong dimension");
    if (!in_rectangle(tau)) throw DomainError("tau outside the trajectory rectangle");
    std::vector<std::vector<std::pair<std::size_t, double>>> w(grid_.p);
    for (std::size_t k = 0; k < grid_.p; ++k) w[k] = grid_.weights(k, tau[static_cast<Eigen::Index>(k)]);
    return grid_.contract(values_, w);
  }

  const detail::PicardGrid& grid() const { return grid_; }
  const Mat& node_values() const { return values_; }

 private:
  detail::PicardGrid grid_;
  Mat values_;
  Vec u0_;
};

namespace detail {

/// One application of the Picard operator: u0 + sum_m integral along axis order[m]
/// with the earlier axes held at tau0.
inline Mat picard_apply(const CharacteristicField& field, const PicardGrid& g, const Vec& u0, const Mat& U,
                        const std::vector<std::size_t>& order) {
  const std::size_t p = g.p;
  Mat out = u0.replicate(1, static_cast<Eigen::Index>(g.total));
  const auto anchor_w = g.anchor_weights();
  for (std::size_t m = 0; m < p; ++m) {
    const std::size_t k = order[m];
    std::vector<bool> collapsed(p, false);
    for (std::size_t q = 0; q < m; ++q) collapsed[order[q]] = true;
    std::vector<std::size_t> free_axes;
    for (std::size_t q = 0; q < p; ++q) {
      if (!collapsed[q]) free_axes.push_back(q);
    }
    const std::size_t nf = free_axes.size();
    std::vector<std::size_t> fstride(nf, 1);
    for (std::size_t q = nf; q-- > 1;) fstride[q - 1] = fstride[q] * g.N;
    const std::size_t fcount = fstride.empty() ? 1 : fstride[0] * g.N;
    std::size_t kpos = 0;
    while (free_axes[kpos] != k) ++kpos;

    // Integrand at every node of the free sub-grid.
    std::vector<Vec> G(fcount);
    std::vector<std::vector<std::pair<std::size_t, double>>> w(p);
    for (std::size_t q = 0; q < p; ++q) {
      if (collapsed[q]) w[q] = anchor_w;
    }
    Vec tau = g.tau0;
    for (std::size_t fi = 0; fi < fcount; ++fi) {
      std::size_t r = fi;
      for (std::size_t q = 0; q < nf; ++q) {
        const std::size_t idx = r / fstride[q];
        r %= fstride[q];
        w[free_axes[q]] = {{idx, 1.0}};
        tau[static_cast<Eigen::Index>(free_axes[q])] = g.node(free_axes[q], idx);
      }
      const Vec u = g.contract(U, w);
      G[fi] = field.eval(tau, u).col(static_cast<Eigen::Index>(k));
    }
    // Cumulative integrals along axis k for every line of the free sub-grid.
    std::vector<Vec> I(fcount);
    std::vector<Vec> line(g.N), cum;
    const std::size_t ks = fstride[kpos];
    for (std::size_t fi = 0; fi < fcount; ++fi) {
      if ((fi / ks) % g.N != 0) continue;
      for (std::size_t j = 0; j < g.N; ++j) line[j] = G[fi + j * ks];
      g.integrate_line(k, line, cum);
      for (std::size_t j = 0; j < g.N; ++j) I[fi + j * ks] = cum[j];
    }
    // Broadcast over the collapsed axes.
    for (std::size_t flat = 0; flat < g.total; ++flat) {
      std::size_t fi = 0;
      for (std::size_t q = 0; q < nf; ++q) fi += ((flat / g.stride[free_axes[q]]) % g.N) * fstride[q];
      out.col(static_cast<Eigen::Index>(flat)) += I[fi];
    }
  }
  return out;
}

struct PicardResult {
  Mat U;
  std::size_t iterations = 0;
  double residual = 0;
};

inline PicardResult picard_iterate(const CharacteristicField& field, const PicardGrid& g, const Vec& u0,
                                   const PicardConfig& cfg, const std::vector<std::size_t>& order) {
  Mat U = u0.replicate(1, static_cast<Eigen::Index>(g.total));
  double prev = kInf;
  int rising = 0;
  const double scale = std::max(1.0, u0.cwiseAbs().maxCoeff());
  const double floor = 64 * std::numeric_limits<double>::epsilon() * scale;
  for (std::size_t it = 1; it <= cfg.max_iter; ++it) {
    Mat next = picard_apply(field, g, u0, U, order);
    if (!next.allFinite()) throw DivergenceError("Picard iterate became non-finite at iteration " + std::to_string(it));
    const double exit = (next.colwise() - u0).colwise().norm().maxCoeff();
    if (exit > cfg.radius) {
      throw DomainExitError("Picard iterate left the ball of radius " + std::to_string(cfg.radius) +
                            " (distance " + std::to_string(exit) + ") at iteration " + std::to_string(it));
    }
    const double diff = (next - U).cwiseAbs().maxCoeff();
    U = std::move(next);
    if (diff <= cfg.tol * scale || diff <= floor) {
      PicardResult r;
      r.iterations = it - 1;
      r.residual = (picard_apply(field, g, u0, U, order) - U).cwiseAbs().maxCoeff();
      r.U = std::move(U);
      return r;
    }
    if (diff >= prev) {
      if (++rising >= 3) {
        throw DivergenceError("Picard iteration is not contracting: sup-norm change " + std::to_string(diff) +
                              " did not decrease for 3 iterations (iteration " + std::to_string(it) + ")");
      }
    } else {
      rising = 0;
    }
    prev = diff;
  }
  throw DivergenceError("Picard iteration did not reach tolerance in " + std::to_string(cfg.max_iter) + " iterations");
}

}  // namespace detail

/// Solves du/dtau_k = g_{.,k}(tau, u), u(tau0) = u0 on the rectangle by Picard
/// iteration, doubling the quadrature segments until the solution changes by
/// at most tol/10 between resolutions.
inline Trajectory picard_solve(const CharacteristicField& field, const Vec& u0, const Vec& tau0,
                               const PicardConfig& cfg) {
  const std::size_t p = field.p, n = field.n;
  if (static_cast<std::size_t>(u0.size()) != n || static_cast<std::size_t>(tau0.size()) != p) {
    throw DomainError("picard_solve: u0 or tau0 has wrong dimension");
  }
  if (static_cast<std::size_t>(cfg.half_width.size()) != p || !(cfg.half_width.array() > 0).all()) {
    throw DomainError("picard_solve: half widths must be positive, one per tau axis");
  }
  if (!(cfg.radius > 0) || !(cfg.tol > 0)) throw DomainError("picard_solve: radius and tol must be positive");
  std::vector<std::size_t> order = cfg.axis_order;
  if (order.empty()) {
    order.resize(p);
    std::iota(order.begin(), order.end(), std::size_t{0});
  }
  {
    auto sorted = order;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t k = 0; k < p; ++k) {
      if (sorted.size() != p || sorted[k] != k) throw DomainError("axis_order must be a permutation of the tau axes");
    }
  }
  const double scale = std::max(1.0, u0.cwiseAbs().maxCoeff());
  const double floor = 1e3 * std::numeric_limits<double>::epsilon() * scale;
  std::size_t S = std::max<std::size_t>(1, cfg.segments);
  detail::PicardGrid g(p, n, S, tau0, cfg.half_width);
  auto res = detail::picard_iterate(field, g, u0, cfg, order);
  Trajectory coarse(g, res.U, u0);
  coarse.iterations_used = res.iterations;
  coarse.final_residual = res.residual;
  coarse.quadrature_error = kInf;
  while (2 * S <= std::max(cfg.max_segments, S)) {
    S *= 2;
    detail::PicardGrid fine_g(p, n, S, tau0, cfg.half_width);
    auto fres = detail::picard_iterate(field, fine_g, u0, cfg, order);
    Trajectory fine(fine_g, fres.U, u0);
    fine.iterations_used = fres.iterations;
    fine.final_residual = fres.residual;
    // Compare resolutions on the coarse nodes.
    double change = 0;
    Vec tau(static_cast<Eigen::Index>(p));
    for (std::size_t flat = 0; flat < g.total; ++flat) {
      for (std::size_t k = 0; k < p; ++k) tau[static_cast<Eigen::Index>(k)] = g.node(k, (flat / g.stride[k]) % g.N);
      change = std::max(change, (fine.evaluate(tau) - coarse.node_values().col(static_cast<Eigen::Index>(flat)))
                                    .cwiseAbs()
                                    .maxCoeff());
    }
    fine.quadrature_error = change;
    coarse = std::move(fine);
    g = fine_g;
    if (change <= 0.1 * cfg.tol * scale || change <= floor) return coarse;
  }
  if (coarse.quadrature_error > cfg.tol * scale) {
    throw QuadratureError("Picard quadrature did not converge: change " + std::to_string(coarse.quadrature_error) +
                          " at " + std::to_string(S) + " segments per side");
  }
  return coarse;
}

struct RectangleCertificate {
  double M = 0;  // sup of the Frobenius norm of g over the sampled rectangle
  double L = 0;  // largest observed difference quotient max_ik |dg_ik| / |du|_inf
  double a = 0;  // 0.9 * min(b / (2pM), 1 / (pnL)), capped at a_max
  double b = 0;
};

/// Estimates M, L on D_{a,b} by sampling and shrinks a until the bound is
/// self-consistent. The result is advisory; picard_solve still detects divergence.
inline RectangleCertificate certify_rectangle(const CharacteristicField& field, const Vec& u0, const Vec& tau0,
                                              double b, double a_max = 10.0) {
  if (!(b > 0)) throw DomainError("certify_rectangle needs b > 0");
  const std::size_t p = field.p, n = field.n;
  const double pd = static_cast<double>(p), nd = static_cast<double>(n);
  Engine eng = make_engine(0xce27ULL);
  std::vector<Vec> us{u0};
  for (std::size_t i = 0; i < n; ++i) {
    for (double s : {-1.0, -0.5, 0.5, 1.0}) us.push_back(u0 + s * b * unit_vec(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(i)));
  }
  for (int r = 0; r < 16; ++r) {
    Vec d(static_cast<Eigen::Index>(n));
    for (auto& v : d) v = standard_normal(eng);
    d *= b * std::pow(uniform01(eng), 1.0 / nd) / d.norm();
    us.push_back(u0 + d);
  }
  RectangleCertificate c;
  c.b = b;
  double a = a_max;
  for (int round = 0; round < 60; ++round) {
    std::vector<Vec> taus;
    const std::size_t per_axis = p <= 3 ? 3 : 2;
    std::size_t count = 1;
    for (std::size_t k = 0; k < p; ++k) count *= per_axis;
    for (std::size_t flat = 0; flat < count; ++flat) {
      Vec t = tau0;
      std::size_t r = flat;
      for (std::size_t k = 0; k < p; ++k) {
        const double f = per_axis == 3 ? static_cast<double>(r % 3) - 1.0 : 2.0 * static_cast<double>(r % 2) - 1.0;
        t[static_cast<Eigen::Index>(k)] += f * a;
        r /= per_axis;
      }
      taus.push_back(t);
    }
    double M = 0, L = 0;
    for (const Vec& t : taus) {
      for (std::size_t s = 0; s < us.size(); ++s) {
        const Mat g0 = field.eval(t, us[s]);
        if (!g0.allFinite()) throw NumericalError("characteristic field is not finite on the certification grid");
        M = std::max(M, g0.norm());
        if (s > 2 * n + 1 && s % 4 != 0) continue;
        for (std::size_t i = 0; i < n; ++i) {
          const double h = 1e-3 * b;
          const Mat g1 = field.eval(t, us[s] + h * unit_vec(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(i)));
          if (!g1.allFinite()) throw NumericalError("characteristic field is not finite on the certification grid");
          L = std::max(L, (g1 - g0).cwiseAbs().maxCoeff() / h);
        }
      }
      for (std::size_t s = 1; s + 1 < us.size(); s += 3) {
        const Mat g0 = field.eval(t, us[s]), g1 = field.eval(t, us[s + 1]);
        const double du = (us[s + 1] - us[s]).cwiseAbs().maxCoeff();
        if (du > 0) L = std::max(L, (g1 - g0).cwiseAbs().maxCoeff() / du);
      }
    }
    const double aM = M > 0 ? b / (2 * pd * M) : kInf;
    const double aL = L > 1e-12 ? 1.0 / (pd * nd * L) : kInf;
    const double next = std::min(a_max, 0.9 * std::min(aM, aL));
    c.M = M;
    c.L = L;
    if (next >= a * (1 - 1e-9)) {
      c.a = a;
      if (round == 0) c.a = next;  // region at a_max already satisfies the bound
      return c;
    }
    a = next;
  }
  c.a = a;
  return c;
}

/// Reference slice {u : u_j = c_j for j in fixed}; default fixed = first p indices, c = 0.
struct TraceConfig {
  std::vector<std::size_t> fixed;
  std::vector<double> values;
  std::optional<double> radius;  // b for each chained rectangle; default 10 max(1, |u|_inf)
  double tol = 1e-12;
  std::size_t max_steps = 2000;
  bool check_rank = true;
  double rank_tol = 1e-8;
};

namespace detail {

inline Vec trace_to_slice(const CharacteristicField& field, const Vec& u, const TraceConfig& cfg,
                          const std::vector<std::size_t>& fixed, const std::vector<double>& c) {
  const std::size_t p = field.p, n = field.n;
  const double b = cfg.radius ? *cfg.radius : 10.0 * std::max(1.0, u.cwiseAbs().maxCoeff());
  const double scale = std::max(1.0, u.cwiseAbs().maxCoeff());
  Vec tau = Vec::Zero(static_cast<Eigen::Index>(p));
  auto start = [&](const Vec& tc, const Vec& uc) {
    const auto cert = certify_rectangle(field, uc, tc, b);
    PicardConfig pc;
    pc.half_width = Vec::Constant(static_cast<Eigen::Index>(p), cert.a);
    pc.radius = b;
    pc.tol = cfg.tol;
    return picard_solve(field, uc, tc, pc);
  };
  Trajectory traj = start(tau, u);
  std::vector<bool> is_fixed(n, false);
  for (auto j : fixed) is_fixed[j] = true;
  for (std::size_t step = 0; step < cfg.max_steps; ++step) {
    const Vec ut = traj.evaluate(tau);
    Vec r(static_cast<Eigen::Index>(p));
    for (std::size_t q = 0; q < p; ++q) r[static_cast<Eigen::Index>(q)] = ut[static_cast<Eigen::Index>(fixed[q])] - c[q];
    if (r.cwiseAbs().maxCoeff() <= 10 * cfg.tol * scale) {
      Vec out(static_cast<Eigen::Index>(n - p));
      Eigen::Index o = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (!is_fixed[i]) out[o++] = ut[static_cast<Eigen::Index>(i)];
      }
      return out;
    }
    const Mat g = field.eval(tau, ut);
    Mat J(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
    for (std::size_t q = 0; q < p; ++q) J.row(static_cast<Eigen::Index>(q)) = g.row(static_cast<Eigen::Index>(fixed[q]));
    Eigen::FullPivLU<Mat> lu(J);
    if (lu.rank() < static_cast<Eigen::Index>(p)) {
      throw ReachError("characteristic is tangent to the reference slice; slice not reachable");
    }
    const Vec delta = -lu.solve(r);
    const Vec target = tau + delta;
    if (traj.in_rectangle(target)) {
      tau = target;
      continue;
    }
    // Move to the rectangle boundary along the Newton direction and continue from there.
    double s = 1.0;
    for (std::size_t k = 0; k < p; ++k) {
      const auto kk = static_cast<Eigen::Index>(k);
      if (delta[kk] == 0) continue;
      const double offset = tau[kk] - traj.tau0()[kk];
      const double room = traj.half_width()[kk] + (delta[kk] > 0 ? -offset : offset);
      s = std::min(s, room / std::abs(delta[kk]));
    }
    s = std::max(0.0, s);
    const Vec edge = tau + s * delta;
    const Vec uedge = traj.evaluate(edge);
    traj = start(edge, uedge);
    tau = edge;
  }
  throw ReachError("reference slice not reached within " + std::to_string(cfg.max_steps) + " steps");
}

}  // namespace detail

/// eta(u) with its certified sup of |d eta / d theta_k| at the anchor.
struct ConditioningVariable {
  std::string name;
  std::function<double(const Vec&)> eta;
  Vec anchor;
  double max_theta_derivative = 0;
};

/// Numerical rank: singular values above rel_tol times the largest.
inline Eigen::Index numerical_rank(const Mat& A, double rel_tol, Vec* singular_values = nullptr) {
  Eigen::JacobiSVD<Mat> svd(A);
  const Vec s = svd.singularValues();
  if (singular_values) *singular_values = s;
  if (s.size() == 0 || s[0] == 0) return 0;
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) r += s[i] > rel_tol * s[0] ? 1 : 0;
  return r;
}

/// Follows the characteristic through u to the reference slice and returns the
/// remaining n - p coordinates there. These are constant along characteristics.
inline Vec trace_invariants(const CharacteristicField& field, const Vec& u, TraceConfig cfg = {}) {
  const std::size_t p = field.p, n = field.n;
  if (static_cast<std::size_t>(u.size()) != n) throw DomainError("trace_invariants: u has wrong dimension");
  if (p >= n) throw DomainError("trace_invariants needs p < n");
  std::vector<std::size_t> fixed = cfg.fixed;
  if (fixed.empty()) {
    fixed.resize(p);
    std::iota(fixed.begin(), fixed.end(), std::size_t{0});
  }
  if (fixed.size() != p) throw DomainError("reference slice must fix exactly p coordinates");
  std::vector<double> c = cfg.values;
  if (c.empty()) c.assign(p, 0.0);
  if (c.size() != p) throw DomainError("reference slice values must have length p");
  const Vec inv = detail::trace_to_slice(field, u, cfg, fixed, c);
  if (cfg.check_rank) {
    Mat J(static_cast<Eigen::Index>(n - p), static_cast<Eigen::Index>(n));
    for (std::size_t j = 0; j < n; ++j) {
      const double h = 1e-4 * std::max(1.0, std::abs(u[static_cast<Eigen::Index>(j)]));
      const Vec e = unit_vec(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(j));
      J.col(static_cast<Eigen::Index>(j)) =
          (detail::trace_to_slice(field, u + h * e, cfg, fixed, c) - detail::trace_to_slice(field, u - h * e, cfg, fixed, c)) /
          (2 * h);
    }
    const auto rank = numerical_rank(J, cfg.rank_tol);
    if (rank < static_cast<Eigen::Index>(n - p)) {
      throw DependenceError("traced invariants have Jacobian rank " + std::to_string(rank) + " < " +
                            std::to_string(n - p));
    }
  }
  return inv;
}

/// max over sampled u and k of |d eta(u(x, theta)) / d theta_k| at theta0 by central
/// differences through the inverse map, divided by max(1, RMS of eta over the sample).
inline double verify_local_conditioning(const std::function<double(const Vec&)>& eta, const Association& assoc,
                                        const Vec& theta0, std::size_t sample_size,
                                        std::optional<double> fd_step = std::nullopt, std::uint64_t seed = 1) {
  assoc.params.check(theta0);
  Engine eng = make_engine(seed);
  double worst = 0, ss = 0;
  for (std::size_t s = 0; s < sample_size; ++s) {
    const Vec u = assoc.aux.sample(eng);
    const Vec x = forward(assoc, u, theta0);
    const double e0 = eta(u);
    ss += e0 * e0;
    for (std::size_t k = 0; k < assoc.param_dim(); ++k) {
      const auto kk = static_cast<Eigen::Index>(k);
      const double h = fd_step ? *fd_step : default_fd_step(theta0[kk]);
      Vec tp = theta0, tm = theta0;
      tp[kk] += h;
      tm[kk] -= h;
      const double d = (eta(inverse(assoc, x, tp)) - eta(inverse(assoc, x, tm))) / (2 * h);
      worst = std::max(worst, std::abs(d));
    }
  }
  const double rms = sample_size ? std::sqrt(ss / static_cast<double>(sample_size)) : 0.0;
  return worst / std::max(1.0, rms);
}

/// Certifies eta as a local conditioning variable at theta0; throws
/// NumericalError when the normalized derivative exceeds `tol`.
inline ConditioningVariable make_conditioning_variable(std::string name, std::function<double(const Vec&)> eta,
                                                       const Association& assoc, const Vec& theta0,
                                                       double tol = 1e-6, std::size_t sample_size = 200) {
  ConditioningVariable cv;
  cv.name = std::move(name);
  cv.anchor = theta0;
  cv.max_theta_derivative = verify_local_conditioning(eta, assoc, theta0, sample_size);
  if (!(cv.max_theta_derivative <= tol)) {
    throw NumericalError(cv.name + " is not a local conditioning variable: normalized theta-derivative " +
                         std::to_string(cv.max_theta_derivative));
  }
  cv.eta = std::move(eta);
  return cv;
}

}  // namespace imkit
