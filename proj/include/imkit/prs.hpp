#pragma once

#include "imkit/association.hpp"
#include "imkit/numeric/statistics.hpp"
#include "imkit/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace imkit {

using StatisticFn = std::function<double(const Vec&)>;

/// One realization S of a predictive random set: {u : statistic(u) <= radius_index}.
struct SetRealization {
  double radius_index = 0;
  std::shared_ptr<const StatisticFn> statistic;

  bool contains(const Vec& u) const { return (*statistic)(u) <= radius_index; }
};

/// A nested random set family indexed by a scalar driving value t = draw_index(U):
/// larger t, larger set. gamma(u) = P(draw_index >= statistic(u)).
struct PredictiveRandomSet {
  std::string name;
  std::size_t aux_dim = 0;
  Vec center;
  std::shared_ptr<const StatisticFn> statistic;
  std::function<double(Engine&)> draw_index;
  std::function<double(const Vec&)> gamma;

  SetRealization draw(Engine& eng) const { return {draw_index(eng), statistic}; }
};

inline double containment_prob(const PredictiveRandomSet& prs, const Vec& u) {
  return std::clamp(prs.gamma(u), 0.0, 1.0);
}

namespace detail {

/// Per-coordinate tail mass outside [c - r, c + r], r = |u - c| / scale.
inline double depth_tail(const AuxiliaryDistribution& aux, std::size_t i, double u, double c, double scale) {
  const double r = std::abs(u - c) / scale;
  const double lo = aux.marginal_cdf(i, c - r);
  const double hi = aux.marginal_cdf(i, c + r);
  return std::clamp(lo + (1.0 - hi), 0.0, 1.0);
}

inline double min_depth_tail(const AuxiliaryDistribution& aux, const Vec& center, const Vec& u, double scale) {
  double s = 1.0;
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    s = std::min(s, depth_tail(aux, static_cast<std::size_t>(i), u[i], center[i], scale));
  }
  return s;
}

}  // namespace detail

/// Symmetric PRS built from the marginals: S = {u : max_i d_i(u) <= max_i d_i(U)},
/// d_i(u) = P(|U_i - c_i| <= |u_i - c_i|). In one dimension this is
/// {u : |u - c| <= |U - c|}. `radius_scale` < 1 shrinks every realization
/// (radius_scale = 0.5 gives the half-radius set, which is not valid).
inline PredictiveRandomSet symmetric_prs(const AuxiliaryDistribution& aux, const Vec& center,
                                         double radius_scale = 1.0) {
  if (!aux.has_marginal_cdf()) {
    throw PreconditionError("symmetric PRS needs per-coordinate marginal CDFs for " + aux.name);
  }
  if (static_cast<std::size_t>(center.size()) != aux.dim) throw DomainError("PRS center has wrong dimension");
  if (!(radius_scale > 0)) throw DomainError("radius scale must be positive");

  PredictiveRandomSet prs;
  prs.name = radius_scale == 1.0 ? "symmetric" : "symmetric-scaled";
  prs.aux_dim = aux.dim;
  prs.center = center;
  prs.statistic = std::make_shared<const StatisticFn>(
      [aux, center, radius_scale](const Vec& u) { return 1.0 - detail::min_depth_tail(aux, center, u, radius_scale); });
  prs.draw_index = [aux, center](Engine& eng) {
    return 1.0 - detail::min_depth_tail(aux, center, aux.sample(eng), 1.0);
  };
  const double n = static_cast<double>(aux.dim);
  if (aux.independent) {
    // max_i d_i(U) has CDF t^n, so gamma = 1 - (1 - s)^n with s the smallest tail.
    prs.gamma = [aux, center, radius_scale, n](const Vec& u) {
      const double s = detail::min_depth_tail(aux, center, u, radius_scale);
      return n == 1.0 ? s : -std::expm1(n * std::log1p(-s));
    };
  } else {
    // Dependent coordinates: empirical law of the driving value from a fixed
    // reference sample, built on first use.
    struct Reference {
      std::once_flag once;
      std::vector<double> sorted;
    };
    auto ref = std::make_shared<Reference>();
    auto draw = prs.draw_index;
    auto stat = prs.statistic;
    prs.gamma = [ref, draw, stat](const Vec& u) {
      std::call_once(ref->once, [&] {
        constexpr std::size_t kRef = std::size_t{1} << 16;
        ref->sorted.resize(kRef);
        Engine eng = make_engine(0x5eedULL, 0);
        for (auto& t : ref->sorted) t = draw(eng);
        std::sort(ref->sorted.begin(), ref->sorted.end());
      });
      const auto it = std::lower_bound(ref->sorted.begin(), ref->sorted.end(), (*stat)(u));
      return static_cast<double>(ref->sorted.end() - it) / static_cast<double>(ref->sorted.size());
    };
  }
  return prs;
}

/// S = whole auxiliary space for every draw.
inline PredictiveRandomSet full_space_prs(std::size_t aux_dim) {
  PredictiveRandomSet prs;
  prs.name = "full-space";
  prs.aux_dim = aux_dim;
  prs.center = Vec::Zero(static_cast<Eigen::Index>(aux_dim));
  prs.statistic = std::make_shared<const StatisticFn>([](const Vec&) { return 0.0; });
  prs.draw_index = [](Engine&) { return 1.0; };
  prs.gamma = [](const Vec&) { return 1.0; };
  return prs;
}

struct ValidityReport {
  std::size_t n_sim = 0;
  double ks_one_sided = 0;
  double critical = 0;
  bool pass = false;
};

/// Evaluates a sample of containment or plausibility values against Uniform(0,1)
/// stochastic dominance at the 99% one-sided KS level.
inline ValidityReport make_validity_report(std::vector<double> values) {
  ValidityReport r;
  r.n_sim = values.size();
  r.ks_one_sided = ks_one_sided_below_uniform(values);
  r.critical = values.empty() ? 0.0 : ks_one_sided_critical(values.size(), 0.01);
  r.pass = !values.empty() && r.ks_one_sided <= r.critical;
  return r;
}

/// Empirical check of Prob(Prob(S not containing U) >= 1 - alpha) <= alpha over
/// n_sim draws of U. Equivalent to gamma(U) being stochastically no smaller than uniform.
inline ValidityReport check_validity(const PredictiveRandomSet& prs, const AuxiliaryDistribution& aux,
                                     std::size_t n_sim, std::uint64_t seed) {
  if (n_sim < 1000) throw PreconditionError("check_validity needs n_sim >= 1000");
  auto blocks = map_blocks(n_sim, [&](std::size_t b, std::size_t begin, std::size_t end) {
    Engine eng = make_engine(seed, b);
    std::vector<double> g;
    g.reserve(end - begin);
    for (std::size_t i = begin; i < end; ++i) g.push_back(containment_prob(prs, aux.sample(eng)));
    return g;
  });
  std::vector<double> all;
  all.reserve(n_sim);
  for (auto& blk : blocks) all.insert(all.end(), blk.begin(), blk.end());
  return make_validity_report(std::move(all));
}

}  // namespace imkit
