#pragma once

#include "imkit/association.hpp"
#include "imkit/characteristics.hpp"
#include "imkit/distributions.hpp"
#include "imkit/engine.hpp"
#include "imkit/numeric/gauss_legendre.hpp"
#include "imkit/prs.hpp"

#include <boost/math/distributions/beta.hpp>
#include <boost/math/quadrature/gauss.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

namespace imkit::catalog {

// Corrupted Brownian motion y_j = eta + W(t_j) + e_j, j = 0..n. Differencing gives
// Z = xi + noise with xi ~ N(0, sigma^2 phi I) and noise ~ N(0, sigma^2 Sigma_n),
// Sigma_n tridiagonal with 2 on the diagonal and -1 off it.

struct BrownianEigensystem {
  Vec lambdas;  // ascending
  Mat vectors;  // column i is v_i
};

inline BrownianEigensystem brownian_eigensystem(std::size_t n) {
  if (n < 1) throw DomainError("Brownian eigensystem needs n >= 1");
  const double m = static_cast<double>(n + 1);
  BrownianEigensystem es;
  es.lambdas.resize(static_cast<Eigen::Index>(n));
  es.vectors.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  const double scale = std::sqrt(2.0 / m);
  for (std::size_t i = 1; i <= n; ++i) {
    const double ang = static_cast<double>(i) * std::numbers::pi / m;
    es.lambdas[static_cast<Eigen::Index>(i - 1)] = 2.0 - 2.0 * std::cos(ang);
    for (std::size_t j = 1; j <= n; ++j) {
      es.vectors(static_cast<Eigen::Index>(j - 1), static_cast<Eigen::Index>(i - 1)) =
          scale * std::sin(static_cast<double>(i * j) * std::numbers::pi / m);
    }
  }
  return es;
}

inline Mat brownian_covariance(std::size_t n) {
  Mat s = Mat::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    s(i, i) = 2.0;
    if (i + 1 < s.rows()) s(i, i + 1) = s(i + 1, i) = -1.0;
  }
  return s;
}

/// Serial differences Z_j = y_j - y_{j-1}, j = 1..n.
inline Vec brownian_increments(const Vec& y) {
  if (y.size() < 2) throw DomainError("Brownian path needs at least two observations");
  return y.tail(y.size() - 1) - y.head(y.size() - 1);
}

/// Q_i = (v_i' Z)^2.
inline Vec brownian_statistics_from_increments(const Vec& z) {
  const auto es = brownian_eigensystem(static_cast<std::size_t>(z.size()));
  return (es.vectors.transpose() * z).array().square().matrix();
}

inline Vec brownian_statistics(const Vec& y) { return brownian_statistics_from_increments(brownian_increments(y)); }

struct BrownianModel {
  std::size_t n = 0;
  double sigma2 = 1.0;
  double phi = 1.0;
  Vec lambdas;
  Mat eigvecs;
};

inline BrownianModel brownian_model(std::size_t n, double sigma2, double phi) {
  if (n < 3) throw DomainError("Brownian model needs n >= 3");
  if (!(sigma2 > 0)) throw DomainError("Brownian model needs sigma2 > 0");
  if (!(phi > 0)) throw DomainError("Brownian model needs phi > 0");
  const auto es = brownian_eigensystem(n);
  return {n, sigma2, phi, es.lambdas, es.vectors};
}

/// phi ranges over (-lambda_1, inf), where every lambda_i + phi is positive.
inline Interval brownian_phi_bounds(std::size_t n) { return Interval{-brownian_eigensystem(n).lambdas[0], kInf}; }

/// theta = (ln sigma^2, phi).
inline ParameterSpace brownian_parameter_space(std::size_t n) {
  return ParameterSpace({Interval{}, brownian_phi_bounds(n)}, {"log_sigma2", "phi"});
}

/// Q_i = sigma^2 (lambda_i + phi) U_i, U_i iid chi-square(1), theta = (sigma^2, phi).
inline Association brownian_q_association(std::size_t n) {
  if (n < 3) throw DomainError("Brownian model needs n >= 3");
  const Vec lam = brownian_eigensystem(n).lambdas;
  Association a;
  a.name = "brownian-q";
  a.n_data = n;
  a.params = ParameterSpace({Interval{0.0, kInf}, brownian_phi_bounds(n)}, {"sigma2", "phi"});
  a.aux = chi_square_aux(n, 1.0);
  a.forward_map = [lam](const Vec& u, const Vec& th) {
    return (th[0] * (lam.array() + th[1]) * u.array()).matrix().eval();
  };
  a.inverse_map = [lam](const Vec& q, const Vec& th) {
    return (q.array() / (th[0] * (lam.array() + th[1]))).matrix().eval();
  };
  a.du_dtheta_map = [lam](const Vec& q, const Vec& th) {
    const Vec u = (q.array() / (th[0] * (lam.array() + th[1]))).matrix();
    Mat d(u.size(), 2);
    d.col(0) = -u / th[0];
    d.col(1) = (-u.array() / (lam.array() + th[1])).matrix();
    return d;
  };
  return a;
}

/// Log scale: ln Q_i = theta_1 + ln(lambda_i + phi) + V_i, V_i = ln U_i.
inline Association brownian_v_association(std::size_t n) {
  if (n < 3) throw DomainError("Brownian model needs n >= 3");
  const Vec lam = brownian_eigensystem(n).lambdas;
  Association a;
  a.name = "brownian-v";
  a.n_data = n;
  a.params = brownian_parameter_space(n);
  a.aux = log_chi_square1_aux(n);
  a.forward_map = [lam](const Vec& v, const Vec& th) {
    return (v.array() + th[0] + (lam.array() + th[1]).log()).matrix().eval();
  };
  a.inverse_map = [lam](const Vec& x, const Vec& th) {
    return (x.array() - th[0] - (lam.array() + th[1]).log()).matrix().eval();
  };
  a.du_dtheta_map = [lam](const Vec& x, const Vec& th) {
    Mat d(x.size(), 2);
    d.col(0).setConstant(-1.0);
    d.col(1) = (-1.0 / (lam.array() + th[1])).matrix();
    return d;
  };
  return a;
}

/// Characteristic field of the log-scale model with the sign convention
/// dV_i/dt_1 = 1, dV_i/dt_2 = 1 / (lambda_i + phi0).
inline CharacteristicField brownian_field(std::size_t n, double phi0) {
  const Vec th0 = make_vec({0.0, phi0});
  auto f = build_field(brownian_v_association(n), th0, -1.0);
  f.name = "brownian";
  return f;
}

inline void check_brownian_statistics(const Vec& q) {
  if (q.size() < 3) throw DomainError("Brownian statistics need n >= 3");
  for (Eigen::Index i = 0; i < q.size(); ++i) {
    if (!(q[i] > 0) || !std::isfinite(q[i])) {
      throw DomainError("log-domain error: Q_" + std::to_string(i + 1) + " must be positive and finite");
    }
  }
}

/// H_i = ln U_i + a_i ln U_{i1} + b_i ln U_{i2} for i outside {i1, i2}, with
/// 1 + a_i + b_i = 0 and 1/L_i + a_i/L_{i1} + b_i/L_{i2} = 0, L_k = lambda_k + phi0.
struct BrownianConditioning {
  std::size_t i1 = 0, i2 = 1;
  Vec lambdas;
  Vec theta0;
  std::vector<std::size_t> others;
  std::vector<double> a, b;
  std::vector<std::function<double(const Vec& u)>> H;
  std::vector<double> observed;

  /// H_i as a function of log-scale auxiliaries w = ln U.
  double h_log(std::size_t j, const Vec& w) const {
    return w[static_cast<Eigen::Index>(others[j])] + a[j] * w[static_cast<Eigen::Index>(i1)] +
           b[j] * w[static_cast<Eigen::Index>(i2)];
  }
};

inline BrownianConditioning brownian_conditioning(const Vec& q, const Vec& theta0, std::size_t i1 = 0,
                                                  std::size_t i2 = 1) {
  check_brownian_statistics(q);
  const auto n = static_cast<std::size_t>(q.size());
  brownian_parameter_space(n).check(theta0);
  if (!(theta0[1] > 0)) throw DomainError("conditioning anchor needs phi0 > 0");
  if (i1 >= n || i2 >= n || i1 == i2) throw DomainError("anchor indices must be two distinct coordinates");
  BrownianConditioning c;
  c.i1 = i1;
  c.i2 = i2;
  c.lambdas = brownian_eigensystem(n).lambdas;
  c.theta0 = theta0;
  const double phi0 = theta0[1];
  const double l1 = c.lambdas[static_cast<Eigen::Index>(i1)], l2 = c.lambdas[static_cast<Eigen::Index>(i2)];
  const double L1 = l1 + phi0, L2 = l2 + phi0;
  const Vec u = brownian_v_association(n).inverse_map(q.array().log().matrix(), theta0).array().exp().matrix();
  for (std::size_t i = 0; i < n; ++i) {
    if (i == i1 || i == i2) continue;
    const double Li = c.lambdas[static_cast<Eigen::Index>(i)] + phi0;
    const double ai = L1 * (L2 - Li) / ((l1 - l2) * Li);
    const double bi = L2 * (Li - L1) / ((l1 - l2) * Li);
    c.others.push_back(i);
    c.a.push_back(ai);
    c.b.push_back(bi);
    c.H.push_back([i, i1, i2, ai, bi](const Vec& uu) {
      return std::log(uu[static_cast<Eigen::Index>(i)]) + ai * std::log(uu[static_cast<Eigen::Index>(i1)]) +
             bi * std::log(uu[static_cast<Eigen::Index>(i2)]);
    });
    c.observed.push_back(c.H.back()(u));
  }
  return c;
}

/// Density proportional to exp(log_f) on a rectangle in R^2, normalized by
/// composite 4-point Gauss-Legendre quadrature and sampled by inverse CDF over
/// the cell masses (row, then column, uniform inside the cell).
class SliceDensity2D {
 public:
  using LogDensity = std::function<double(double, double)>;

  SliceDensity2D(LogDensity log_f, std::array<double, 4> box, double rel_tol = 1e-6, std::size_t max_cells = 512)
      : f_(std::move(log_f)) {
    refine_box(box);
    integrate(rel_tol, max_cells);
  }

  double log_normalizer() const { return log_z_; }
  double log_density(double y0, double y1) const { return f_(y0, y1) - log_z_; }
  std::size_t cells_per_axis() const { return m_; }
  std::array<double, 4> box() const { return {lo_[0], hi_[0], lo_[1], hi_[1]}; }

  double marginal_cdf(std::size_t axis, double y) const {
    const auto& cum = axis == 0 ? row_cum_ : col_cum_;
    if (y <= lo_[axis]) return 0.0;
    if (y >= hi_[axis]) return 1.0;
    const double h = (hi_[axis] - lo_[axis]) / static_cast<double>(m_);
    const double r = (y - lo_[axis]) / h;
    const auto k = std::min(static_cast<std::size_t>(r), m_ - 1);
    return cum[k] + (r - static_cast<double>(k)) * (cum[k + 1] - cum[k]);
  }

  double marginal_quantile(std::size_t axis, double p) const {
    const auto& cum = axis == 0 ? row_cum_ : col_cum_;
    return invert(cum, lo_[axis], hi_[axis], p);
  }

  /// Piecewise-constant marginal density.
  double marginal_density(std::size_t axis, double y) const {
    const auto& cum = axis == 0 ? row_cum_ : col_cum_;
    if (y < lo_[axis] || y > hi_[axis]) return 0.0;
    const double h = (hi_[axis] - lo_[axis]) / static_cast<double>(m_);
    const auto k = std::min(static_cast<std::size_t>((y - lo_[axis]) / h), m_ - 1);
    return (cum[k + 1] - cum[k]) / h;
  }

  Vec sample(Engine& eng) const {
    const double u0 = uniform01(eng), u1 = uniform01(eng), s0 = uniform01(eng), s1 = uniform01(eng);
    const auto row = locate(row_cum_, u0);
    const std::size_t base = row * (m_ + 1);
    const double target = cell_cum_[base] + u1 * (cell_cum_[base + m_] - cell_cum_[base]);
    std::size_t col = static_cast<std::size_t>(
        std::upper_bound(cell_cum_.begin() + static_cast<std::ptrdiff_t>(base),
                         cell_cum_.begin() + static_cast<std::ptrdiff_t>(base + m_ + 1), target) -
        (cell_cum_.begin() + static_cast<std::ptrdiff_t>(base)));
    col = std::clamp<std::size_t>(col, 1, m_) - 1;
    const double h0 = (hi_[0] - lo_[0]) / static_cast<double>(m_), h1 = (hi_[1] - lo_[1]) / static_cast<double>(m_);
    return make_vec({lo_[0] + (static_cast<double>(row) + s0) * h0, lo_[1] + (static_cast<double>(col) + s1) * h1});
  }

 private:
  static constexpr double kDrop = 36.0;  // cells further below the maximum in log density are discarded
  static constexpr std::size_t kScan = 64;

  LogDensity f_;
  std::array<double, 2> lo_{}, hi_{};
  std::size_t m_ = 0;
  double ref_ = 0, log_z_ = 0;
  std::vector<double> row_cum_, col_cum_, cell_cum_;

  std::string diagnostics() const {
    std::ostringstream os;
    os.precision(6);
    os << "box [" << lo_[0] << ", " << hi_[0] << "] x [" << lo_[1] << ", " << hi_[1] << "], " << m_
       << " cells per axis";
    return os.str();
  }

  void refine_box(std::array<double, 4> box) {
    lo_ = {box[0], box[2]};
    hi_ = {box[1], box[3]};
    for (int round = 0; round < 60; ++round) {
      const double h0 = (hi_[0] - lo_[0]) / kScan, h1 = (hi_[1] - lo_[1]) / kScan;
      std::vector<double> v(kScan * kScan);
      double mx = -kInf;
      for (std::size_t i = 0; i < kScan; ++i) {
        for (std::size_t j = 0; j < kScan; ++j) {
          const double val = f_(lo_[0] + (static_cast<double>(i) + 0.5) * h0, lo_[1] + (static_cast<double>(j) + 0.5) * h1);
          v[i * kScan + j] = val;
          if (val > mx) mx = val;
        }
      }
      if (!std::isfinite(mx)) throw QuadratureError("slice density has no finite values on " + diagnostics());
      std::size_t i0 = kScan, i1 = 0, j0 = kScan, j1 = 0;
      for (std::size_t i = 0; i < kScan; ++i) {
        for (std::size_t j = 0; j < kScan; ++j) {
          if (v[i * kScan + j] > mx - kDrop) {
            i0 = std::min(i0, i);
            i1 = std::max(i1, i);
            j0 = std::min(j0, j);
            j1 = std::max(j1, j);
          }
        }
      }
      std::array<double, 2> nlo, nhi;
      bool expanded = false;
      auto fit = [&](std::size_t ax, std::size_t a0, std::size_t a1, double h) {
        const double w = hi_[ax] - lo_[ax];
        if (a0 == 0) {
          nlo[ax] = lo_[ax] - 0.5 * w;
          expanded = true;
        } else {
          nlo[ax] = lo_[ax] + static_cast<double>(a0 - 1) * h;
        }
        if (a1 == kScan - 1) {
          nhi[ax] = hi_[ax] + 0.5 * w;
          expanded = true;
        } else {
          nhi[ax] = lo_[ax] + static_cast<double>(a1 + 2) * h;
        }
      };
      fit(0, i0, i1, h0);
      fit(1, j0, j1, h1);
      if (std::max(nhi[0] - nlo[0], nhi[1] - nlo[1]) > 1e4) {
        throw QuadratureError("slice density mass is not contained: " + diagnostics());
      }
      const bool shrinking = (nhi[0] - nlo[0]) < 0.9 * (hi_[0] - lo_[0]) || (nhi[1] - nlo[1]) < 0.9 * (hi_[1] - lo_[1]);
      lo_ = nlo;
      hi_ = nhi;
      ref_ = mx;
      if (!expanded && !shrinking) return;
    }
    throw QuadratureError("slice density box refinement did not settle: " + diagnostics());
  }

  std::vector<double> cell_masses(std::size_t m) const {
    using G = boost::math::quadrature::gauss<double, 4>;
    std::array<double, 4> x{}, w{};
    for (std::size_t k = 0; k < 2; ++k) {
      x[1 - k] = -G::abscissa()[k];
      x[2 + k] = G::abscissa()[k];
      w[1 - k] = w[2 + k] = G::weights()[k];
    }
    const double h0 = (hi_[0] - lo_[0]) / static_cast<double>(m), h1 = (hi_[1] - lo_[1]) / static_cast<double>(m);
    std::vector<double> out(m * m);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < m; ++j) {
        const double c0 = lo_[0] + (static_cast<double>(i) + 0.5) * h0, c1 = lo_[1] + (static_cast<double>(j) + 0.5) * h1;
        double s = 0;
        for (std::size_t a = 0; a < 4; ++a) {
          for (std::size_t b = 0; b < 4; ++b) {
            s += w[a] * w[b] * std::exp(f_(c0 + 0.5 * h0 * x[a], c1 + 0.5 * h1 * x[b]) - ref_);
          }
        }
        out[i * m + j] = 0.25 * h0 * h1 * s;
      }
    }
    return out;
  }

  void integrate(double rel_tol, std::size_t max_cells) {
    std::size_t m = 32;
    auto masses = cell_masses(m);
    double z = 0;
    for (double v : masses) z += v;
    for (;;) {
      if (2 * m > max_cells) {
        m_ = m;
        throw QuadratureError("slice density normalization did not converge to " + std::to_string(rel_tol) +
                              ": " + diagnostics());
      }
      auto finer = cell_masses(2 * m);
      double zf = 0;
      for (double v : finer) zf += v;
      if (!(zf > 0) || !std::isfinite(zf)) throw QuadratureError("slice density normalization failed: " + diagnostics());
      const double change = std::abs(zf - z) / zf;
      m *= 2;
      masses = std::move(finer);
      z = zf;
      if (change <= rel_tol) break;
    }
    m_ = m;
    log_z_ = ref_ + std::log(z);
    row_cum_.assign(m + 1, 0.0);
    col_cum_.assign(m + 1, 0.0);
    cell_cum_.assign(m * (m + 1), 0.0);
    std::vector<double> col(m, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      double r = 0;
      for (std::size_t j = 0; j < m; ++j) {
        const double v = masses[i * m + j] / z;
        r += v;
        col[j] += v;
        cell_cum_[i * (m + 1) + j + 1] = cell_cum_[i * (m + 1) + j] + v;
      }
      row_cum_[i + 1] = row_cum_[i] + r;
    }
    for (std::size_t j = 0; j < m; ++j) col_cum_[j + 1] = col_cum_[j] + col[j];
    row_cum_[m] = col_cum_[m] = 1.0;
  }

  std::size_t locate(const std::vector<double>& cum, double p) const {
    const auto it = std::upper_bound(cum.begin(), cum.end(), p);
    const auto k = static_cast<std::size_t>(it - cum.begin());
    return std::clamp<std::size_t>(k, 1, m_) - 1;
  }

  double invert(const std::vector<double>& cum, double lo, double hi, double p) const {
    if (p <= 0) return lo;
    if (p >= 1) return hi;
    const auto k = locate(cum, p);
    const double h = (hi - lo) / static_cast<double>(m_);
    const double mass = cum[k + 1] - cum[k];
    const double frac = mass > 0 ? (p - cum[k]) / mass : 0.5;
    return lo + (static_cast<double>(k) + std::clamp(frac, 0.0, 1.0)) * h;
  }
};

namespace detail {

/// Log density of (w_{i1}, w_{i2}) on the slice {H = observed}, up to a constant.
inline double brownian_slice_log_density(const BrownianConditioning& c, double w1, double w2) {
  double s = log_chi_square1_log_density(w1) + log_chi_square1_log_density(w2);
  for (std::size_t j = 0; j < c.others.size(); ++j) {
    s += log_chi_square1_log_density(c.observed[j] - c.a[j] * w1 - c.b[j] * w2);
  }
  return s;
}

inline std::array<double, 2> log_chi_square1_clip() {
  return {log_chi_square1_quantile(1e-10), log_chi_square1_quantile(1 - 1e-10)};
}

}  // namespace detail

/// Local conditional IM for (ln sigma^2, phi) anchored at theta0.
struct BrownianConditionalIM {
  ConditionalAssociation cond;
  PredictiveRandomSet prs;
  BrownianConditioning conditioning;
  std::shared_ptr<const SliceDensity2D> density;

  /// pl of {theta} from the containment probability of v(theta).
  double plausibility(const Vec& q, const Vec& theta) const {
    cond.params.check(theta);
    return containment_prob(prs, cond.reduced_inverse(cond.statistic(q), theta));
  }
};

namespace detail {

inline std::shared_ptr<const SliceDensity2D> brownian_ratio_density(const BrownianConditioning& c) {
  const auto clip = log_chi_square1_clip();
  // (d, s) = (w1 - w2, w2); unit Jacobian.
  return std::make_shared<const SliceDensity2D>(
      [c](double d, double s) { return brownian_slice_log_density(c, d + s, s); },
      std::array<double, 4>{clip[0] - clip[1], clip[1] - clip[0], clip[0], clip[1]});
}

}  // namespace detail

/// Marginal association for phi alone: ln(Q_{i1}/Q_{i2}) = ln(L_{i1}/L_{i2}) + D with
/// D = ln U_{i1} - ln U_{i2} drawn from its conditional law given the H values.
inline BrownianConditionalIM brownian_ratio_im(const Vec& q, const Vec& theta0, std::size_t i1 = 0,
                                               std::size_t i2 = 1) {
  BrownianConditionalIM im;
  im.conditioning = brownian_conditioning(q, theta0, i1, i2);
  const auto& c = im.conditioning;
  im.density = detail::brownian_ratio_density(c);
  const auto dens = im.density;
  const double l1 = c.lambdas[static_cast<Eigen::Index>(i1)], l2 = c.lambdas[static_cast<Eigen::Index>(i2)];
  auto& cond = im.cond;
  cond.name = "brownian-ratio";
  cond.n_data = static_cast<std::size_t>(q.size());
  cond.q = 1;
  cond.params = ParameterSpace({brownian_phi_bounds(static_cast<std::size_t>(q.size()))}, {"phi"});
  cond.statistic = [i1, i2](const Vec& x) {
    return make_vec({std::log(x[static_cast<Eigen::Index>(i1)]) - std::log(x[static_cast<Eigen::Index>(i2)])});
  };
  cond.reduced_forward = [l1, l2](const Vec& v, const Vec& th) {
    return make_vec({v[0] + std::log((l1 + th[0]) / (l2 + th[0]))});
  };
  cond.reduced_inverse = [l1, l2](const Vec& t, const Vec& th) {
    return make_vec({t[0] - std::log((l1 + th[0]) / (l2 + th[0]))});
  };
  cond.conditioning_values = c.observed;
  cond.anchor = theta0;
  AuxiliaryDistribution d;
  d.name = "brownian-ratio-conditional";
  d.dim = 1;
  d.sample = [dens](Engine& eng) { return make_vec({dens->sample(eng)[0]}); };
  d.log_density = [dens](const Vec& v) { return std::log(dens->marginal_density(0, v[0])); };
  d.marginal_cdf = [dens](std::size_t, double v) { return dens->marginal_cdf(0, v); };
  d.marginal_quantile = [dens](std::size_t, double p) { return dens->marginal_quantile(0, p); };
  d.support.assign(1, Interval{});
  d.independent = true;
  cond.conditional = d;
  im.prs = conditional_prs(cond);
  return im;
}

/// Local conditional IM for theta = (ln sigma^2, phi) on the pair
/// (ln Q_{i1}, ln Q_{i2}) = theta_1 + ln L_k(phi) + W_k, (W_{i1}, W_{i2}) from
/// the slice density given the observed H values.
/// The PRS is centred at (med(D) + med(W_{i2}), med(W_{i2})), so its argmax in
/// phi coincides with that of the ratio IM.
inline BrownianConditionalIM brownian_conditional_im(const Vec& q, const Vec& theta0, std::size_t i1 = 0,
                                                     std::size_t i2 = 1) {
  BrownianConditionalIM im;
  im.conditioning = brownian_conditioning(q, theta0, i1, i2);
  const auto& c = im.conditioning;
  const auto clip = detail::log_chi_square1_clip();
  im.density = std::make_shared<const SliceDensity2D>(
      [c](double w1, double w2) { return detail::brownian_slice_log_density(c, w1, w2); },
      std::array<double, 4>{clip[0], clip[1], clip[0], clip[1]});
  const auto dens = im.density;
  const auto ratio = detail::brownian_ratio_density(c);
  const double l1 = c.lambdas[static_cast<Eigen::Index>(i1)], l2 = c.lambdas[static_cast<Eigen::Index>(i2)];
  auto& cond = im.cond;
  cond.name = "brownian-pair";
  cond.n_data = static_cast<std::size_t>(q.size());
  cond.q = 2;
  cond.params = brownian_parameter_space(static_cast<std::size_t>(q.size()));
  cond.statistic = [i1, i2](const Vec& x) {
    return make_vec({std::log(x[static_cast<Eigen::Index>(i1)]), std::log(x[static_cast<Eigen::Index>(i2)])});
  };
  cond.reduced_forward = [l1, l2](const Vec& v, const Vec& th) {
    return make_vec({th[0] + std::log(l1 + th[1]) + v[0], th[0] + std::log(l2 + th[1]) + v[1]});
  };
  cond.reduced_inverse = [l1, l2](const Vec& t, const Vec& th) {
    return make_vec({t[0] - th[0] - std::log(l1 + th[1]), t[1] - th[0] - std::log(l2 + th[1])});
  };
  cond.conditioning_values = c.observed;
  cond.anchor = theta0;
  AuxiliaryDistribution d;
  d.name = "brownian-pair-conditional";
  d.dim = 2;
  d.sample = [dens](Engine& eng) { return dens->sample(eng); };
  d.log_density = [dens](const Vec& v) { return dens->log_density(v[0], v[1]); };
  d.marginal_cdf = [dens](std::size_t i, double v) { return dens->marginal_cdf(i, v); };
  d.marginal_quantile = [dens](std::size_t i, double p) { return dens->marginal_quantile(i, p); };
  d.support.assign(2, Interval{});
  d.independent = false;
  cond.conditional = d;
  const double med2 = dens->marginal_quantile(1, 0.5);
  im.prs = symmetric_prs(cond.conditional, make_vec({ratio->marginal_quantile(0, 0.5) + med2, med2}));
  return im;
}

struct XiPosterior {
  Vec mean;
  Mat cov;
};

/// Conditional law of the Brownian increments xi given Z, psi = n phi.
inline XiPosterior brownian_xi_posterior(const Vec& z, double sigma2, double psi) {
  if (!(sigma2 > 0) || !(psi > 0)) throw DomainError("xi posterior needs sigma2 > 0 and psi > 0");
  const auto n = static_cast<std::size_t>(z.size());
  const auto es = brownian_eigensystem(n);
  const double phi = psi / static_cast<double>(n);
  const Vec shrink = (1.0 / (1.0 + es.lambdas.array() / phi)).matrix();
  XiPosterior post;
  post.mean = es.vectors * shrink.asDiagonal() * (es.vectors.transpose() * z);
  post.cov = sigma2 * es.vectors * (es.lambdas.array() * shrink.array()).matrix().asDiagonal() * es.vectors.transpose();
  post.cov = 0.5 * (post.cov + post.cov.transpose()).eval();
  return post;
}

/// B_i = (q_i / L_i) / sum_j (q_j / L_j), L_i = lambda_i + phi.
inline Vec brownian_multibeta(const Vec& q, double phi) {
  check_brownian_statistics(q);
  if (!(phi > 0)) throw DomainError("phi must be positive");
  const Vec lam = brownian_eigensystem(static_cast<std::size_t>(q.size())).lambdas;
  const Vec r = (q.array() / (lam.array() + phi)).matrix();
  return r / r.sum();
}

/// dB_i/dphi for i = 1..n-1 written in terms of B:
/// (B_i / L_n) [sum_{j<n} ((lambda_n - lambda_j) / L_j) B_j + (lambda_i - lambda_n) / L_i].
inline Vec brownian_marginal_field(const Vec& q, double phi) {
  const Vec B = brownian_multibeta(q, phi);
  const auto n = B.size();
  const Vec lam = brownian_eigensystem(static_cast<std::size_t>(n)).lambdas;
  const double ln = lam[n - 1], Ln = ln + phi;
  double s = 0;
  for (Eigen::Index j = 0; j + 1 < n; ++j) s += (ln - lam[j]) / (lam[j] + phi) * B[j];
  Vec out(n - 1);
  for (Eigen::Index i = 0; i + 1 < n; ++i) out[i] = B[i] / Ln * (s + (lam[i] - ln) / (lam[i] + phi));
  return out;
}

/// Association for phi alone on the normalized statistics R_i = Q_i / sum_j Q_j,
/// i = 1..n-1: R_i = L_i W_i / sum_j L_j W_j with W ~ Dirichlet(1/2, ..., 1/2).
/// The inverse is W = B(R, phi).
inline Association brownian_multibeta_association(std::size_t n) {
  if (n < 3) throw DomainError("Brownian model needs n >= 3");
  const Vec lam = brownian_eigensystem(n).lambdas;
  const auto m = static_cast<Eigen::Index>(n);
  auto full = [m](const Vec& head) {
    Vec v(m);
    v.head(m - 1) = head;
    v[m - 1] = 1.0 - head.sum();
    return v;
  };
  Association a;
  a.name = "brownian-multibeta";
  a.n_data = n - 1;
  a.params = ParameterSpace({brownian_phi_bounds(n)}, {"phi"});
  AuxiliaryDistribution d;
  d.name = "dirichlet-half";
  d.dim = n - 1;
  d.sample = [m](Engine& eng) {
    std::gamma_distribution<double> g(0.5, 1.0);
    Vec x(m);
    for (auto& v : x) v = g(eng);
    x /= x.sum();
    return Vec(x.head(m - 1));
  };
  d.log_density = [full, m](const Vec& w) {
    const Vec v = full(w);
    if ((v.array() <= 0).any()) return -kInf;
    const double k = static_cast<double>(m);
    return std::lgamma(0.5 * k) - k * std::lgamma(0.5) - 0.5 * v.array().log().sum();
  };
  d.marginal_cdf = [m](std::size_t, double v) {
    if (v <= 0) return 0.0;
    if (v >= 1) return 1.0;
    return boost::math::cdf(boost::math::beta_distribution<double>(0.5, 0.5 * static_cast<double>(m - 1)), v);
  };
  d.marginal_quantile = [m](std::size_t, double p) {
    return boost::math::quantile(boost::math::beta_distribution<double>(0.5, 0.5 * static_cast<double>(m - 1)), p);
  };
  d.support.assign(n - 1, Interval{0.0, 1.0});
  d.independent = false;
  a.aux = d;
  a.forward_map = [lam, full, m](const Vec& w, const Vec& th) {
    const Vec r = (lam.array() + th[0]) * full(w).array();
    return Vec((r / r.sum()).head(m - 1));
  };
  a.inverse_map = [lam, full, m](const Vec& x, const Vec& th) {
    const Vec r = full(x).array() / (lam.array() + th[0]);
    return Vec((r / r.sum()).head(m - 1));
  };
  a.du_dtheta_map = [lam, full, m](const Vec& x, const Vec& th) {
    const double phi = th[0];
    const Vec r = full(x).array() / (lam.array() + phi);
    const Vec B = r / r.sum();
    const double ln = lam[m - 1], Ln = ln + phi;
    double s = 0;
    for (Eigen::Index j = 0; j + 1 < m; ++j) s += (ln - lam[j]) / (lam[j] + phi) * B[j];
    Mat out(m - 1, 1);
    for (Eigen::Index i = 0; i + 1 < m; ++i) out(i, 0) = B[i] / Ln * (s + (lam[i] - ln) / (lam[i] + phi));
    return out;
  };
  return a;
}

struct BrownianPath {
  Vec y;   // y_0..y_n
  Vec xi;  // increments of the latent Brownian path
};

/// Draws y_j = intercept + W(t_j) + e_j with xi ~ N(0, sigma^2 phi I), e ~ N(0, sigma^2 I), phi = psi / n.
inline BrownianPath brownian_simulate(std::size_t n, double sigma2, double psi, std::uint64_t seed,
                                      std::uint64_t stream = 0, double intercept = 0.0) {
  if (n < 1) throw DomainError("Brownian simulation needs n >= 1");
  if (!(sigma2 > 0) || !(psi > 0)) throw DomainError("Brownian simulation needs sigma2 > 0 and psi > 0");
  Engine eng = make_engine(seed, stream);
  const double phi = psi / static_cast<double>(n);
  const double sd = std::sqrt(sigma2);
  BrownianPath p;
  p.y.resize(static_cast<Eigen::Index>(n + 1));
  p.xi.resize(static_cast<Eigen::Index>(n));
  double w = 0;
  p.y[0] = intercept + sd * standard_normal(eng);
  for (std::size_t j = 1; j <= n; ++j) {
    const double xi = sd * std::sqrt(phi) * standard_normal(eng);
    const double e = sd * standard_normal(eng);
    w += xi;
    p.xi[static_cast<Eigen::Index>(j - 1)] = xi;
    p.y[static_cast<Eigen::Index>(j)] = intercept + w + e;
  }
  return p;
}

}  // namespace imkit::catalog
