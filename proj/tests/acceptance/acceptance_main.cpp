// Acceptance suite: one line per criterion, exit status 1 if any fails.

#include "imkit/catalog/brownian.hpp"
#include "imkit/catalog/gaussian.hpp"
#include "imkit/characteristics.hpp"
#include "imkit/engine.hpp"
#include "imkit/expression.hpp"
#include "imkit/regularity.hpp"
#include "unit/oracles.hpp"

#include <Eigen/Eigenvalues>

#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

using namespace imkit;
using namespace imkit::catalog;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string num(double v) {
  std::ostringstream s;
  s.precision(3);
  s << v;
  return s.str();
}

Outcome closed_form_plausibility() {
  const auto assoc = gaussian_mean_model(1);
  const auto prs = symmetric_prs(assoc.aux, make_vec({0.0}));
  const double x = 0.37;
  const auto grid = linspace(-3, 3, 601);
  const auto exact = plausibility_curve(assoc, prs, make_vec({x}), {grid});
  const auto t0 = std::chrono::steady_clock::now();
  const auto mc = plausibility_curve_mc(assoc, prs, make_vec({x}), {grid}, 100000, 2024);
  const double secs = seconds_since(t0);
  double e_cf = 0, e_mc = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double ref = 2 * oracle::phi_cdf(-std::abs(x - grid[i]));
    e_cf = std::max(e_cf, std::abs(exact.pl[i] - ref));
    e_mc = std::max(e_mc, std::abs(mc.pl[i] - ref));
  }
  return {e_cf <= 1e-12 && e_mc <= 0.01 && secs < 5,
          "closed-form sup err " + num(e_cf) + " (<= 1e-12), MC sup err " + num(e_mc) + " (<= 0.01) in " + num(secs) +
              " s (< 5)"};
}

Outcome interval_equivalence() {
  const auto assoc = gaussian_mean_model(1);
  const auto prs = symmetric_prs(assoc.aux, make_vec({0.0}));
  double worst = 0;
  bool single = true;
  for (double x : {-1.3, 0.0, 0.37, 2.2}) {
    const auto c = plausibility_curve(assoc, prs, make_vec({x}), {linspace(x - 4, x + 4, 801)});
    const auto r = plausibility_region(c, 0.05);
    single = single && r.intervals.size() == 1;
    if (r.intervals.empty()) return {false, "empty region"};
    worst = std::max({worst, std::abs(r.intervals[0].lower - (x + oracle::phi_quantile(0.025))),
                      std::abs(r.intervals[0].upper - (x + oracle::phi_quantile(0.975)))});
  }
  return {single && worst <= 0.01, "max endpoint error " + num(worst) + " (<= one 0.01 cell), alpha = 0.05"};
}

Outcome validity_calibration() {
  const auto assoc = gaussian_mean_model(1);
  const auto t0 = std::chrono::steady_clock::now();
  const auto good = validity_diagnostic(assoc, symmetric_prs(assoc.aux, make_vec({0.0})), make_vec({0.4}), 10000, 77);
  const auto bad =
      validity_diagnostic(assoc, symmetric_prs(assoc.aux, make_vec({0.0}), 0.5), make_vec({0.4}), 10000, 77);
  const double secs = seconds_since(t0);
  return {good.ks_one_sided <= 0.02 && bad.ks_one_sided > 0.1 && secs < 30,
          "symmetric KS " + num(good.ks_one_sided) + " (<= 0.02), half-radius KS " + num(bad.ks_one_sided) +
              " (> 0.1) in " + num(secs) + " s (< 30)"};
}

Outcome picard_exactness() {
  double worst_v = 0;
  std::size_t iters = 0;
  for (std::size_t n : {5u, 12u}) {
    const double phi0 = 0.8;
    const auto f = brownian_field(n, phi0);
    PicardConfig cfg;
    cfg.half_width = make_vec({0.7, 0.7});
    cfg.radius = 10;
    const auto traj = picard_solve(f, Vec::Zero(static_cast<Eigen::Index>(n)), Vec::Zero(2), cfg);
    iters = std::max(iters, traj.iterations_used);
    // Eigenvalues from the dense solver, independent of the closed form.
    Mat s = Mat::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < s.rows(); ++i) {
      s(i, i) = 2;
      if (i > 0) s(i, i - 1) = s(i - 1, i) = -1;
    }
    const Vec lam = Eigen::SelfAdjointEigenSolver<Mat>(s).eigenvalues();
    for (int a = 0; a <= 14; ++a) {
      for (int b = 0; b <= 14; ++b) {
        const double t1 = -0.7 + 0.1 * a, t2 = -0.7 + 0.1 * b;
        const Vec v = traj.evaluate(make_vec({t1, t2}));
        for (Eigen::Index i = 0; i < v.size(); ++i) worst_v = std::max(worst_v, std::abs(v[i] - (t1 + t2 / (lam[i] + phi0))));
      }
    }
  }
  CharacteristicField e;
  e.n = 1;
  e.p = 1;
  e.anchor = Vec::Zero(1);
  e.eval = [](const Vec&, const Vec& u) { return Mat::Constant(1, 1, u[0]); };
  PicardConfig cfg;
  cfg.half_width = make_vec({0.5});
  cfg.radius = 1;
  const auto traj = picard_solve(e, make_vec({1.0}), Vec::Zero(1), cfg);
  double worst_e = 0;
  for (int i = 0; i <= 1000; ++i) {
    const double t = -0.5 + 0.001 * i;
    worst_e = std::max(worst_e, std::abs(traj.evaluate(make_vec({t}))[0] - std::exp(t)));
  }
  return {worst_v <= 1e-12 && iters == 1 && worst_e <= 1e-8,
          "V_i error " + num(worst_v) + " (<= 1e-12) after " + std::to_string(iters) + " iteration(s); e^tau error " +
              num(worst_e) + " (<= 1e-8)"};
}

Outcome conditioning_certificate() {
  Engine eng = make_engine(505);
  double worst_h = 0;
  for (std::size_t n : {5u, 10u, 20u}) {
    const auto qa = brownian_q_association(n);
    for (int r = 0; r < 20; ++r) {
      const Vec th0 = make_vec({2.0 * uniform01(eng) - 1.0, 0.05 + 3.0 * uniform01(eng)});
      const auto path = brownian_simulate(n, std::exp(th0[0]), th0[1] * static_cast<double>(n), 1000 + static_cast<std::uint64_t>(r));
      const auto c = brownian_conditioning(brownian_statistics(path.y), th0);
      for (const auto& h : c.H) {
        worst_h = std::max(worst_h, verify_local_conditioning(h, qa, make_vec({std::exp(th0[0]), th0[1]}), 20));
      }
    }
  }
  double worst_fit = 0;
  for (std::size_t n : {5u, 10u, 20u}) {
    const double phi0 = 0.9;
    const auto f = brownian_field(n, phi0);
    const auto path = brownian_simulate(n, 1.0, phi0 * static_cast<double>(n), 17);
    const auto c = brownian_conditioning(brownian_statistics(path.y), make_vec({0.0, phi0}));
    TraceConfig cfg;
    cfg.check_rank = false;
    const int pts = 60;
    const auto m = static_cast<Eigen::Index>(n - 2);
    Mat traced(pts, m), closed(pts, m);
    for (int r = 0; r < pts; ++r) {
      Vec w(static_cast<Eigen::Index>(n));
      for (auto& v : w) v = 1.5 * standard_normal(eng);
      traced.row(r) = trace_invariants(f, w, cfg).transpose();
      for (Eigen::Index j = 0; j < m; ++j) closed(r, j) = c.h_log(static_cast<std::size_t>(j), w);
    }
    // Affine reparameterization: traced = A + closed * B over all invariants jointly.
    Mat X(pts, m + 1);
    X.col(0).setOnes();
    X.rightCols(m) = closed;
    const Mat coef = X.colPivHouseholderQr().solve(traced);
    worst_fit = std::max(worst_fit, (X * coef - traced).cwiseAbs().maxCoeff());
  }
  return {worst_h <= 1e-6 && worst_fit <= 1e-6,
          "max normalized dH/dtheta " + num(worst_h) + " (<= 1e-6, n = 5/10/20 x 20 anchors); affine fit residual " +
              num(worst_fit) + " (<= 1e-6)"};
}

Outcome eigensystem() {
  double worst_val = 0, worst_angle = 0;
  for (std::size_t n : {3u, 8u, 32u}) {
    Mat s = Mat::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < s.rows(); ++i) {
      s(i, i) = 2;
      if (i > 0) s(i, i - 1) = s(i - 1, i) = -1;
    }
    Eigen::SelfAdjointEigenSolver<Mat> solver(s);
    const auto es = brownian_eigensystem(n);
    worst_val = std::max(worst_val, (es.lambdas - solver.eigenvalues()).cwiseAbs().maxCoeff());
    for (Eigen::Index i = 0; i < s.rows(); ++i) {
      const Vec v = es.vectors.col(i), w = solver.eigenvectors().col(i);
      worst_angle = std::max(worst_angle, std::asin(std::min(1.0, (v - v.dot(w) * w).norm())));
    }
  }
  return {worst_val <= 1e-10 && worst_angle <= 1e-8,
          "eigenvalue error " + num(worst_val) + " (<= 1e-10), subspace angle " + num(worst_angle) + " (<= 1e-8)"};
}

Outcome regularity_corpus() {
  auto real = [](const std::string& name) { return ParameterSpace({Interval{}}, {name}); };
  auto three = ParameterSpace({Interval{}, Interval{0.0, kInf}, Interval{0.0, kInf}}, {"a", "b", "c"});
  struct Case {
    Association assoc;
    RegularityOptions opts;
    std::string expect;
  };
  RegularityOptions box;
  box.u_ranges.assign(2, Interval{0.1, 1.0});
  box.theta_ranges = {Interval{0.1, 1.0}};
  std::vector<Case> corpus = {
      {make_expression_association("location", 2, real("mu"), standard_normal_aux(2), {"mu + u"}), {}, "regular: location"},
      {make_expression_association("scale", 2, ParameterSpace({Interval{0.0, kInf}}, {"s"}), chi_square_aux(2), {"s * u"}),
       {},
       "regular: location after log transform"},
      {make_expression_association("nonseparable", 2, real("t"), standard_normal_aux(2), {"t + u1", "u2 * (1 + t^2) + t"}),
       box,
       "not regular"},
      {make_expression_association("affine", 3, ParameterSpace({Interval{}, Interval{0.0, kInf}}, {"a", "b"}),
                                   standard_normal_aux(3), {"a + b * u"}),
       {},
       "regular: location-scale"},
      {make_expression_association("duplicated", 4, three, chi_square_aux(4), {"a + b * u + c * u"}), {}, "degenerate, rank 2"},
      {make_expression_association("vandermonde", 4, three, chi_square_aux(4), {"a + b * u + c * u^2"}),
       {},
       "not degenerate, rank 3"}};
  const auto t0 = std::chrono::steady_clock::now();
  int right = 0;
  std::string wrong;
  for (const auto& c : corpus) {
    const auto v = classify(c.assoc, c.opts).verdict;
    if (v == c.expect) {
      ++right;
    } else {
      wrong += " " + c.assoc.name + "->'" + v + "'";
    }
  }
  const double secs = seconds_since(t0);
  return {right == 6 && secs < 10, std::to_string(right) + "/6 verdicts correct in " + num(secs) + " s (< 10)" + wrong};
}

Outcome engine_properties() {
  const auto assoc = gaussian_mean_model(1);
  const auto prs = symmetric_prs(assoc.aux, make_vec({0.0}));
  const Vec x = make_vec({0.25});
  FocalConfig cfg;
  cfg.window = {Interval{-8, 8}};
  FocalEvaluator ev(assoc, prs, x, cfg);
  std::vector<Assertion> base;
  for (double lo = -3; lo <= 2; lo += 0.5) {
    for (double w : {0.3, 1.0, 2.5}) base.push_back(Assertion::box(make_vec({lo}), make_vec({lo + w})));
  }
  base.push_back(Assertion::predicate([](const Vec& t) { return std::cos(2 * t[0]) > 0.2; }));
  std::vector<Assertion> all = base;
  for (const auto& a : base) all.push_back(a.complement());
  const auto r = ev.evaluate(all, 40000, 3);
  const std::size_t m = base.size();
  bool ok_order = true, ok_sum = true;
  for (std::size_t i = 0; i < all.size(); ++i) ok_order = ok_order && r[i].bel <= r[i].pl;
  for (std::size_t i = 0; i < m; ++i) {
    ok_sum = ok_sum && r[i].bel + r[i + m].bel <= 1 + 3 * (r[i].mc_se_bel + r[i + m].mc_se_bel);
    ok_sum = ok_sum && r[i].pl + r[i + m].pl >= 1 - 3 * (r[i].mc_se_pl + r[i + m].mc_se_pl);
  }
  std::vector<Assertion> nested;
  for (double w = 0.05; w < 6; w *= 1.4) nested.push_back(Assertion::box(make_vec({0.6}), make_vec({0.6 + w})));
  const auto rn = ev.evaluate(nested, 40000, 4);
  bool ok_mono = true;
  for (std::size_t i = 1; i < rn.size(); ++i) ok_mono = ok_mono && rn[i - 1].pl <= rn[i].pl && rn[i - 1].bel <= rn[i].bel;
  bool ok_threads = true;
  std::vector<BeliefPlausibility> first;
  std::vector<double> curve1, val1;
  for (std::size_t threads : {1u, 2u, 5u}) {
    set_thread_count(threads);
    const auto rr = ev.evaluate(base, 30000, 9);
    const auto c = plausibility_curve_mc(assoc, prs, x, {linspace(-2, 2, 41)}, 10000, 9);
    const auto v = validity_diagnostic(assoc, prs, make_vec({0.0}), 5000, 9);
    if (first.empty()) {
      first = rr;
      curve1 = c.pl;
      val1 = {v.ks_one_sided};
    } else {
      for (std::size_t i = 0; i < rr.size(); ++i) ok_threads = ok_threads && rr[i].bel == first[i].bel && rr[i].pl == first[i].pl;
      ok_threads = ok_threads && c.pl == curve1 && v.ks_one_sided == val1[0];
    }
  }
  set_thread_count(0);
  return {ok_order && ok_sum && ok_mono && ok_threads,
          std::string("bel<=pl ") + (ok_order ? "ok" : "FAIL") + ", complement sums " + (ok_sum ? "ok" : "FAIL") +
              ", monotone under inclusion " + (ok_mono ? "ok" : "FAIL") + ", thread-count bit-identity (1/2/5) " +
              (ok_threads ? "ok" : "FAIL")};
}

Outcome marginal_field() {
  Engine eng = make_engine(99);
  double worst_rel = 0, worst_sum = 0;
  for (int r = 0; r < 100; ++r) {
    const std::size_t n = 3 + static_cast<std::size_t>(uniform01(eng) * 10);
    Vec q(static_cast<Eigen::Index>(n));
    for (auto& v : q) v = 0.05 + 3 * uniform01(eng);
    const double phi = 0.05 + 4 * uniform01(eng);
    const Vec field = brownian_marginal_field(q, phi);
    // Fourth-order central difference of B(q, phi).
    const double h = 1e-3 * std::max(1.0, phi);
    auto B = [&](double p) { return brownian_multibeta(q, p); };
    const Vec fd = (8 * (B(phi + h) - B(phi - h)) - (B(phi + 2 * h) - B(phi - 2 * h))) / (12 * h);
    for (Eigen::Index i = 0; i + 1 < static_cast<Eigen::Index>(n); ++i) {
      worst_rel = std::max(worst_rel, std::abs(field[i] - fd[i]) / std::abs(fd[i]));
    }
    worst_sum = std::max(worst_sum, std::abs(B(phi).sum() - 1.0));
  }
  return {worst_rel <= 1e-5 && worst_sum <= 1e-12,
          "max relative dB/dphi error " + num(worst_rel) + " (<= 1e-5), max |sum B - 1| " + num(worst_sum) + " (<= 1e-12)"};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"closed-form plausibility", closed_form_plausibility},
      {"interval equivalence", interval_equivalence},
      {"validity calibration", validity_calibration},
      {"Picard exactness", picard_exactness},
      {"conditioning-variable certificate", conditioning_certificate},
      {"eigensystem", eigensystem},
      {"regularity classification corpus", regularity_corpus},
      {"engine properties", engine_properties},
      {"Brownian marginal field", marginal_field}};
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failed += o.pass ? 0 : 1;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << i + 1 << ". " << criteria[i].first << ": " << o.detail << std::endl;
  }
  std::cout << criteria.size() - static_cast<std::size_t>(failed) << "/" << criteria.size() << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
