#pragma once

#include "imkit/association.hpp"
#include "imkit/numeric/statistics.hpp"
#include "imkit/parallel.hpp"
#include "imkit/prs.hpp"

#include <boost/math/tools/minima.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace imkit {

/// A subset A of the parameter space.
class Assertion {
 public:
  enum class Kind { Everything, Nothing, Singleton, Box, Predicate };

  static Assertion everything() { return Assertion(Kind::Everything); }
  static Assertion nothing() { return Assertion(Kind::Nothing); }

  static Assertion singleton(Vec point) {
    Assertion a(Kind::Singleton);
    a.point_ = std::move(point);
    return a;
  }

  /// Closed box [lower, upper]; infinite ends allowed.
  static Assertion box(Vec lower, Vec upper) {
    if (lower.size() != upper.size()) throw DomainError("box bounds differ in dimension");
    for (Eigen::Index k = 0; k < lower.size(); ++k) {
      if (!(lower[k] <= upper[k])) throw DomainError("box assertion has lower > upper");
    }
    Assertion a(Kind::Box);
    a.lower_ = std::move(lower);
    a.upper_ = std::move(upper);
    return a;
  }

  static Assertion predicate(std::function<bool(const Vec&)> pred) {
    Assertion a(Kind::Predicate);
    a.pred_ = std::move(pred);
    return a;
  }

  Assertion complement() const {
    Assertion a = *this;
    a.complemented_ = !complemented_;
    return a;
  }

  Kind kind() const { return kind_; }
  bool complemented() const { return complemented_; }
  const Vec& point() const { return point_; }
  const Vec& lower() const { return lower_; }
  const Vec& upper() const { return upper_; }

  bool contains(const Vec& theta) const { return base_contains(theta) != complemented_; }

  /// True when the set is all of Theta or empty regardless of Theta.
  bool is_everything() const {
    return (kind_ == Kind::Everything && !complemented_) || (kind_ == Kind::Nothing && complemented_);
  }
  bool is_nothing() const {
    return (kind_ == Kind::Nothing && !complemented_) || (kind_ == Kind::Everything && complemented_);
  }

  /// Validates singleton and box coordinates against the parameter space.
  void check(const ParameterSpace& ps) const {
    if (kind_ == Kind::Singleton) ps.check(point_);
    if (kind_ == Kind::Box) {
      if (static_cast<std::size_t>(lower_.size()) != ps.dim()) throw DomainError("box has wrong dimension");
      for (std::size_t k = 0; k < ps.dim(); ++k) {
        const auto kk = static_cast<Eigen::Index>(k);
        const Interval& b = ps.bound(k);
        if (upper_[kk] <= b.lower || lower_[kk] >= b.upper) {
          throw DomainError("box assertion does not meet the parameter space along " + ps.name(k));
        }
      }
    }
  }

 private:
  explicit Assertion(Kind k) : kind_(k) {}

  bool base_contains(const Vec& theta) const {
    switch (kind_) {
      case Kind::Everything:
        return true;
      case Kind::Nothing:
        return false;
      case Kind::Singleton:
        return theta == point_;
      case Kind::Box:
        for (Eigen::Index k = 0; k < theta.size(); ++k) {
          if (theta[k] < lower_[k] || theta[k] > upper_[k]) return false;
        }
        return true;
      case Kind::Predicate:
        return pred_(theta);
    }
    return false;
  }

  Kind kind_;
  bool complemented_ = false;
  Vec point_, lower_, upper_;
  std::function<bool(const Vec&)> pred_;
};

struct BeliefPlausibility {
  double bel = 0;
  double pl = 0;
  double mc_se_bel = 0;
  double mc_se_pl = 0;
  std::size_t n_draws = 0;
};

/// Controls the deterministic theta point set on which Theta_x(S) is intersected
/// with assertions.
struct FocalConfig {
  std::size_t points_per_axis = 512;
  /// Cap on the total product-grid size; per-axis counts shrink to respect it.
  std::size_t max_points = std::size_t{1} << 20;
  /// Search window per axis. Empty: finite bounds, or an automatic window around
  /// the best-fitting theta where the PRS statistic saturates.
  std::vector<Interval> window;
  /// Starting point for the best-fit search; defaults to a point inside the bounds.
  std::optional<Vec> start;
};

inline bool focal_set_contains(const Association& assoc, const SetRealization& s, const Vec& x, const Vec& theta) {
  return s.contains(inverse(assoc, x, theta));
}

/// pl of {theta0}: gamma(u(x, theta0)), exact.
inline double plausibility_singleton(const Association& assoc, const PredictiveRandomSet& prs, const Vec& x,
                                     const Vec& theta0) {
  return containment_prob(prs, inverse(assoc, x, theta0));
}

namespace detail {

inline double interior_default(const Interval& b) {
  if (b.bounded()) return 0.5 * (b.lower + b.upper);
  if (b.contains(0.0)) return 0.0;
  if (std::isfinite(b.lower)) return b.lower + 1.0;
  return b.upper - 1.0;
}

/// Minimizes f over theta_k in the open interval b starting at x0 (bracket then Brent).
template <class F>
double minimize_axis(F&& f, double x0, const Interval& b) {
  auto inside = [&](double v) {
    if (b.contains(v)) return v;
    return v < x0 ? 0.5 * (x0 + (std::isfinite(b.lower) ? b.lower : v))
                  : 0.5 * (x0 + (std::isfinite(b.upper) ? b.upper : v));
  };
  double h = 0.05 * std::max(1.0, std::abs(x0));
  double f0 = f(x0);
  double fr = f(inside(x0 + h)), fl = f(inside(x0 - h));
  int dir = fr < f0 ? 1 : (fl < f0 ? -1 : 0);
  double lo = inside(x0 - h), hi = inside(x0 + h);
  if (dir != 0) {
    double prev = x0, cur = inside(x0 + dir * h), fc = dir > 0 ? fr : fl;
    for (int it = 0; it < 200; ++it) {
      h *= 2;
      const double nxt = inside(cur + dir * h);
      const double fn = f(nxt);
      if (fn >= fc || nxt == cur) {
        lo = std::min(prev, nxt);
        hi = std::max(prev, nxt);
        break;
      }
      prev = cur;
      cur = nxt;
      fc = fn;
      lo = std::min(prev, cur);
      hi = std::max(prev, cur);
    }
  }
  auto r = boost::math::tools::brent_find_minima(f, lo, hi, 52);
  return r.second <= f0 ? r.first : x0;
}

}  // namespace detail

/// Precomputed PRS statistic over a theta point set for one data vector. Answers
/// pl/bel queries for any number of assertions with common random numbers.
class FocalEvaluator {
 public:
  FocalEvaluator(const Association& assoc, const PredictiveRandomSet& prs, Vec x, FocalConfig cfg = {})
      : assoc_(&assoc), prs_(&prs), x_(std::move(x)), cfg_(std::move(cfg)) {
    const std::size_t p = assoc.param_dim();
    best_ = find_best_fit();
    best_stat_ = stat(best_);
    // The best fit is taken to lie in every realization when its statistic is at the floor.
    if (best_stat_ <= 1e-8) best_stat_ = 0.0;
    window_.resize(p);
    for (std::size_t k = 0; k < p; ++k) window_[k] = resolve_window(k);
    std::size_t per_axis = std::max<std::size_t>(2, cfg_.points_per_axis);
    while (p > 1 && std::pow(static_cast<double>(per_axis), static_cast<double>(p)) > cfg_.max_points) {
      per_axis /= 2;
    }
    axes_.resize(p);
    std::size_t total = 1;
    for (std::size_t k = 0; k < p; ++k) {
      axes_[k].resize(per_axis);
      const Interval& w = window_[k];
      for (std::size_t j = 0; j < per_axis; ++j) {
        axes_[k][j] = w.lower + (w.upper - w.lower) * static_cast<double>(j) / static_cast<double>(per_axis - 1);
      }
      total *= per_axis;
    }
    grid_.resize(total);
    grid_stat_.resize(total);
    parallel_for(block_count(total, 256), [&](std::size_t b) {
      const std::size_t end = std::min(total, (b + 1) * 256);
      for (std::size_t i = b * 256; i < end; ++i) {
        grid_[i] = grid_point(i);
        grid_stat_[i] = stat(grid_[i]);
      }
    });
  }

  const Vec& best_fit() const { return best_; }
  const std::vector<Interval>& window() const { return window_; }

  /// Smallest PRS statistic over theta in A (the threshold a realization must reach to hit A).
  double min_stat(const Assertion& a) const {
    if (a.is_nothing()) return kInf;
    if (a.is_everything()) return best_stat_;
    double m = kInf;
    if (a.contains(best_)) m = best_stat_;
    for (std::size_t i = 0; i < grid_.size(); ++i) {
      if (grid_stat_[i] < m && a.contains(grid_[i])) m = grid_stat_[i];
    }
    for (const Vec& t : extra_points(a)) {
      if (assoc_->params.contains(t) && a.contains(t)) m = std::min(m, stat(t));
    }
    return m;
  }

  /// bel/pl for each assertion from the same n_draws realizations.
  std::vector<BeliefPlausibility> evaluate(const std::vector<Assertion>& assertions, std::size_t n_draws,
                                           std::uint64_t seed) const {
    if (n_draws < 100) throw PreconditionError("belief/plausibility by Monte Carlo needs n_draws >= 100");
    const std::size_t na = assertions.size();
    std::vector<double> m_in(na), m_out(na);
    for (std::size_t j = 0; j < na; ++j) {
      assertions[j].check(assoc_->params);
      m_in[j] = min_stat(assertions[j]);
      m_out[j] = min_stat(assertions[j].complement());
    }
    const double floor = best_stat_;
    struct Counts {
      std::vector<std::size_t> pl, bel;
      bool empty = false;
    };
    auto blocks = map_blocks(n_draws, [&](std::size_t b, std::size_t begin, std::size_t end) {
      Counts c{std::vector<std::size_t>(na, 0), std::vector<std::size_t>(na, 0)};
      Engine eng = make_engine(seed, b);
      for (std::size_t i = begin; i < end; ++i) {
        const double t = prs_->draw_index(eng);
        if (t < floor) c.empty = true;
        for (std::size_t j = 0; j < na; ++j) {
          if (t >= m_in[j]) ++c.pl[j];
          if (t < m_out[j]) ++c.bel[j];
        }
      }
      return c;
    });
    std::vector<std::size_t> pl(na, 0), bel(na, 0);
    for (const auto& c : blocks) {
      if (c.empty) {
        throw EmptyFocalSetError(
            "a predictive random set realization produced an empty focal set; inference here assumes "
            "Theta_x(S) is nonempty");
      }
      for (std::size_t j = 0; j < na; ++j) {
        pl[j] += c.pl[j];
        bel[j] += c.bel[j];
      }
    }
    std::vector<BeliefPlausibility> out(na);
    const double n = static_cast<double>(n_draws);
    for (std::size_t j = 0; j < na; ++j) {
      auto& r = out[j];
      r.n_draws = n_draws;
      r.pl = static_cast<double>(pl[j]) / n;
      r.bel = std::min(static_cast<double>(bel[j]) / n, r.pl);
      r.mc_se_pl = binomial_se(r.pl, n_draws);
      r.mc_se_bel = binomial_se(r.bel, n_draws);
    }
    return out;
  }

 private:
  double stat(const Vec& theta) const { return (*prs_->statistic)(inverse(*assoc_, x_, theta)); }

  Vec start_point() const {
    if (cfg_.start) return *cfg_.start;
    const std::size_t p = assoc_->param_dim();
    Vec s(static_cast<Eigen::Index>(p));
    for (std::size_t k = 0; k < p; ++k) {
      const Interval w = k < cfg_.window.size() ? cfg_.window[k] : assoc_->params.bound(k);
      s[static_cast<Eigen::Index>(k)] = detail::interior_default(w);
    }
    return s;
  }

  Vec find_best_fit() const {
    Vec th = start_point();
    assoc_->params.check(th);
    double f = stat(th);
    for (int sweep = 0; sweep < 20; ++sweep) {
      const double before = f;
      for (Eigen::Index k = 0; k < th.size(); ++k) {
        auto fk = [&](double v) {
          Vec t = th;
          t[k] = v;
          try {
            return stat(t);
          } catch (const InversionError&) {
            return kInf;
          }
        };
        th[k] = detail::minimize_axis(fk, th[k], assoc_->params.bound(static_cast<std::size_t>(k)));
      }
      f = stat(th);
      if (f <= 1e-14 || before - f <= 1e-14) break;
    }
    return th;
  }

  Interval resolve_window(std::size_t k) const {
    if (k < cfg_.window.size()) return cfg_.window[k];
    const Interval& b = assoc_->params.bound(k);
    auto saturated = [&](double v) {
      Vec t = best_;
      t[static_cast<Eigen::Index>(k)] = v;
      try {
        return stat(t) >= 1.0 - 1e-12;
      } catch (const InversionError&) {
        return true;
      }
    };
    auto edge = [&](int dir) {
      const double c = best_[static_cast<Eigen::Index>(k)];
      const double lim = dir > 0 ? b.upper : b.lower;
      double h = 0.5 * std::max(1.0, std::abs(c));
      double v = c;
      for (int it = 0; it < 200; ++it) {
        double nxt = c + dir * h;
        if (!b.contains(nxt)) {
          // Approach the open boundary geometrically.
          nxt = v + 0.5 * (lim - v);
          if (std::abs(nxt - lim) <= 1e-9 * std::max(1.0, std::abs(lim))) return nxt;
        }
        v = nxt;
        if (saturated(v)) return v;
        h *= 2;
      }
      return v;
    };
    return Interval{edge(-1), edge(+1)};
  }

  Vec grid_point(std::size_t flat) const {
    const std::size_t p = axes_.size();
    Vec t(static_cast<Eigen::Index>(p));
    for (std::size_t k = p; k-- > 0;) {
      const std::size_t n = axes_[k].size();
      t[static_cast<Eigen::Index>(k)] = axes_[k][flat % n];
      flat /= n;
    }
    return t;
  }

  /// Points that a uniform grid can miss: singleton points, box faces on both
  /// sides, and the best fit clamped into the box.
  std::vector<Vec> extra_points(const Assertion& a) const {
    std::vector<Vec> pts;
    if (a.kind() == Assertion::Kind::Singleton) {
      pts.push_back(a.point());
      for (Eigen::Index k = 0; k < a.point().size(); ++k) {
        const double eps = 1e-9 * std::max(1.0, std::abs(a.point()[k]));
        Vec lo = a.point(), hi = a.point();
        lo[k] -= eps;
        hi[k] += eps;
        pts.push_back(lo);
        pts.push_back(hi);
      }
    } else if (a.kind() == Assertion::Kind::Box) {
      Vec clamped = best_;
      for (Eigen::Index k = 0; k < clamped.size(); ++k) clamped[k] = std::clamp(clamped[k], a.lower()[k], a.upper()[k]);
      pts.push_back(clamped);
      for (Eigen::Index k = 0; k < clamped.size(); ++k) {
        for (double face : {a.lower()[k], a.upper()[k]}) {
          if (!std::isfinite(face)) continue;
          const double eps = 1e-9 * std::max(1.0, std::abs(face));
          for (double d : {-eps, 0.0, eps}) {
            Vec t = best_;
            t[k] = face + d;
            pts.push_back(t);
            Vec c = clamped;
            c[k] = face + d;
            pts.push_back(c);
          }
        }
      }
    }
    return pts;
  }

  const Association* assoc_;
  const PredictiveRandomSet* prs_;
  Vec x_;
  FocalConfig cfg_;
  Vec best_;
  double best_stat_ = 0;
  std::vector<Interval> window_;
  std::vector<std::vector<double>> axes_;
  std::vector<Vec> grid_;
  std::vector<double> grid_stat_;
};

/// bel = frequency of Theta_x(S) inside A, pl = frequency of Theta_x(S) meeting A.
inline BeliefPlausibility belief_plausibility_mc(const Association& assoc, const PredictiveRandomSet& prs,
                                                 const Vec& x, const Assertion& assertion, std::size_t n_draws,
                                                 std::uint64_t seed, const FocalConfig& cfg = {}) {
  FocalEvaluator ev(assoc, prs, x, cfg);
  return ev.evaluate({assertion}, n_draws, seed).front();
}

struct PlausibilityCurve {
  std::vector<std::vector<double>> axes;
  /// Row-major product grid (last axis fastest).
  std::vector<Vec> points;
  std::vector<double> pl;
  std::string assoc_id;
  std::string prs_id;
};

namespace detail {

inline std::vector<Vec> product_grid(const std::vector<std::vector<double>>& axes) {
  std::size_t total = 1;
  for (const auto& a : axes) total *= a.size();
  std::vector<Vec> pts(total);
  for (std::size_t flat = 0; flat < total; ++flat) {
    Vec t(static_cast<Eigen::Index>(axes.size()));
    std::size_t r = flat;
    for (std::size_t k = axes.size(); k-- > 0;) {
      t[static_cast<Eigen::Index>(k)] = axes[k][r % axes[k].size()];
      r /= axes[k].size();
    }
    pts[flat] = t;
  }
  return pts;
}

inline void check_axes(const Association& assoc, const std::vector<std::vector<double>>& axes) {
  if (axes.size() != assoc.param_dim()) throw DomainError("one grid axis per parameter is required");
  for (std::size_t k = 0; k < axes.size(); ++k) {
    if (axes[k].empty()) throw DomainError("empty grid axis");
    for (std::size_t j = 0; j < axes[k].size(); ++j) {
      if (!assoc.params.bound(k).contains(axes[k][j])) {
        throw DomainError("grid value outside the parameter space along " + assoc.params.name(k));
      }
      if (j > 0 && !(axes[k][j] > axes[k][j - 1])) throw DomainError("grid axis must be strictly increasing");
    }
  }
}

}  // namespace detail

/// Evenly spaced grid of `count` points on [lo, hi].
inline std::vector<double> linspace(double lo, double hi, std::size_t count) {
  std::vector<double> g(count);
  if (count == 1) {
    g[0] = lo;
    return g;
  }
  for (std::size_t j = 0; j < count; ++j) {
    g[j] = lo + (hi - lo) * static_cast<double>(j) / static_cast<double>(count - 1);
  }
  g.back() = hi;
  return g;
}

/// Closed-form pointwise pl of singletons over a product grid.
inline PlausibilityCurve plausibility_curve(const Association& assoc, const PredictiveRandomSet& prs, const Vec& x,
                                           const std::vector<std::vector<double>>& axes) {
  detail::check_axes(assoc, axes);
  PlausibilityCurve c;
  c.axes = axes;
  c.points = detail::product_grid(axes);
  c.pl.resize(c.points.size());
  c.assoc_id = assoc.name;
  c.prs_id = prs.name;
  parallel_for(block_count(c.points.size(), 256), [&](std::size_t b) {
    const std::size_t end = std::min(c.points.size(), (b + 1) * 256);
    for (std::size_t i = b * 256; i < end; ++i) c.pl[i] = plausibility_singleton(assoc, prs, x, c.points[i]);
  });
  return c;
}

/// Monte Carlo version: every grid point is scored against the same n_draws realizations.
inline PlausibilityCurve plausibility_curve_mc(const Association& assoc, const PredictiveRandomSet& prs,
                                              const Vec& x, const std::vector<std::vector<double>>& axes,
                                              std::size_t n_draws, std::uint64_t seed) {
  if (n_draws < 100) throw PreconditionError("Monte Carlo plausibility needs n_draws >= 100");
  detail::check_axes(assoc, axes);
  auto blocks = map_blocks(n_draws, [&](std::size_t b, std::size_t begin, std::size_t end) {
    Engine eng = make_engine(seed, b);
    std::vector<double> t;
    t.reserve(end - begin);
    for (std::size_t i = begin; i < end; ++i) t.push_back(prs.draw_index(eng));
    return t;
  });
  std::vector<double> draws;
  draws.reserve(n_draws);
  for (auto& blk : blocks) draws.insert(draws.end(), blk.begin(), blk.end());
  std::sort(draws.begin(), draws.end());
  PlausibilityCurve c;
  c.axes = axes;
  c.points = detail::product_grid(axes);
  c.pl.resize(c.points.size());
  c.assoc_id = assoc.name;
  c.prs_id = prs.name + "/mc";
  for (std::size_t i = 0; i < c.points.size(); ++i) {
    const double s = (*prs.statistic)(inverse(assoc, x, c.points[i]));
    const auto it = std::lower_bound(draws.begin(), draws.end(), s);
    c.pl[i] = static_cast<double>(draws.end() - it) / static_cast<double>(n_draws);
  }
  return c;
}

struct PlausibilityRegion {
  std::vector<Interval> intervals;  // closed intervals, stored as (lower, upper)
  bool empty = true;
};

/// {theta : pl >= alpha} on a 1-D curve as maximal intervals, endpoints linearly
/// interpolated between grid neighbours.
inline PlausibilityRegion plausibility_region(const PlausibilityCurve& curve, double alpha) {
  if (!(alpha > 0 && alpha < 1)) throw DomainError("alpha must lie in (0, 1)");
  if (curve.axes.size() != 1) throw PreconditionError("plausibility regions are defined for 1-D curves");
  const auto& g = curve.axes[0];
  const auto& pl = curve.pl;
  auto cross = [&](std::size_t i, std::size_t j) {
    const double d = pl[j] - pl[i];
    if (d == 0) return g[j];
    return g[i] + (alpha - pl[i]) / d * (g[j] - g[i]);
  };
  PlausibilityRegion r;
  std::size_t i = 0;
  while (i < g.size()) {
    if (pl[i] < alpha) {
      ++i;
      continue;
    }
    const double lo = i == 0 ? g[0] : cross(i - 1, i);
    std::size_t j = i;
    while (j + 1 < g.size() && pl[j + 1] >= alpha) ++j;
    const double hi = j + 1 == g.size() ? g[j] : cross(j, j + 1);
    r.intervals.push_back({lo, hi});
    i = j + 1;
  }
  r.empty = r.intervals.empty();
  return r;
}

/// Simulates n_sim datasets at theta_true and checks pl(theta_true) against Uniform(0,1).
inline ValidityReport validity_diagnostic(const Association& assoc, const PredictiveRandomSet& prs,
                                          const Vec& theta_true, std::size_t n_sim, std::uint64_t seed) {
  assoc.params.check(theta_true);
  if (n_sim == 0) throw PreconditionError("validity diagnostic needs n_sim >= 1");
  auto blocks = map_blocks(n_sim, [&](std::size_t b, std::size_t begin, std::size_t end) {
    Engine eng = make_engine(seed, b);
    std::vector<double> v;
    v.reserve(end - begin);
    for (std::size_t i = begin; i < end; ++i) {
      const Vec x = forward(assoc, assoc.aux.sample(eng), theta_true);
      v.push_back(plausibility_singleton(assoc, prs, x, theta_true));
    }
    return v;
  });
  std::vector<double> all;
  all.reserve(n_sim);
  for (auto& blk : blocks) all.insert(all.end(), blk.begin(), blk.end());
  return make_validity_report(std::move(all));
}

/// Reduced association T(x) = b(V, theta) where V follows the conditional law of the
/// auxiliaries given observed conditioning values.
struct ConditionalAssociation {
  std::string name;
  std::size_t n_data = 0;
  std::size_t q = 0;
  ParameterSpace params;
  std::function<Vec(const Vec& x)> statistic;
  std::function<Vec(const Vec& v, const Vec& theta)> reduced_forward;
  std::function<Vec(const Vec& t, const Vec& theta)> reduced_inverse;
  /// Observed conditioning values c_j = H_j(x).
  std::vector<double> conditioning_values;
  /// Conditional law of V: sampler, optional marginal CDFs, independence flag.
  AuxiliaryDistribution conditional;
  /// Anchor theta0 for local conditioning; empty for globally valid decompositions.
  std::optional<Vec> anchor;
};

/// Symmetric PRS on V centred at the conditional marginal medians.
inline PredictiveRandomSet conditional_prs(const ConditionalAssociation& cond) {
  if (!cond.conditional.marginal_quantile) {
    throw PreconditionError("conditional law of " + cond.name + " has no marginal quantiles");
  }
  Vec center(static_cast<Eigen::Index>(cond.q));
  for (std::size_t i = 0; i < cond.q; ++i) center[static_cast<Eigen::Index>(i)] = cond.conditional.marginal_quantile(i, 0.5);
  return symmetric_prs(cond.conditional, center);
}

/// pl of {theta0} under the conditional IM. Uses gamma in closed form when the
/// conditional coordinates are independent with known marginal CDFs, otherwise
/// the Monte Carlo frequency of realizations containing v(theta0) over n_draws.
inline double conditional_plausibility(const ConditionalAssociation& cond, const PredictiveRandomSet& prs_on_v,
                                       const Vec& x, const Vec& theta0, std::size_t n_draws, std::uint64_t seed) {
  cond.params.check(theta0);
  const Vec v0 = cond.reduced_inverse(cond.statistic(x), theta0);
  if (!v0.allFinite()) throw InversionError(cond.name + ": reduced statistic outside the range of b");
  if (cond.conditional.independent && cond.conditional.has_marginal_cdf()) return containment_prob(prs_on_v, v0);
  if (n_draws == 0) throw PreconditionError("conditional plausibility by Monte Carlo needs n_draws >= 1");
  const double s = (*prs_on_v.statistic)(v0);
  auto blocks = map_blocks(n_draws, [&](std::size_t b, std::size_t begin, std::size_t end) {
    Engine eng = make_engine(seed, b);
    std::size_t hits = 0;
    for (std::size_t i = begin; i < end; ++i) hits += prs_on_v.draw_index(eng) >= s ? 1 : 0;
    return hits;
  });
  std::size_t hits = 0;
  for (auto h : blocks) hits += h;
  return static_cast<double>(hits) / static_cast<double>(n_draws);
}

}  // namespace imkit
