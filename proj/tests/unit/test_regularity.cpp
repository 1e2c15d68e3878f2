#include "imkit/regularity.hpp"

#include "imkit/catalog/gaussian.hpp"
#include "imkit/distributions.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace imkit;

namespace {

using Scalar3 = std::function<double(double, const Vec&)>;
using Grad = std::function<Vec(double, const Vec&)>;

/// x_i = a(u_i, theta) for every i, with analytic -du/dtheta = a_theta / a_u when given.
Association common_form(std::size_t n, ParameterSpace params, AuxiliaryDistribution aux, Scalar3 a, Scalar3 a_u = {},
                        Grad a_theta = {}) {
  auto assoc = make_coordinatewise_association("common", std::move(params), std::move(aux),
                                               [a](std::size_t, double u, const Vec& th) { return a(u, th); });
  if (a_u && a_theta) {
    auto inv = assoc.inverse_map;
    assoc.du_dtheta_map = [inv, a_u, a_theta, n](const Vec& x, const Vec& th) {
      const Vec u = inv(x, th);
      Mat d(static_cast<Eigen::Index>(n), th.size());
      for (Eigen::Index i = 0; i < u.size(); ++i) d.row(i) = -a_theta(u[i], th).transpose() / a_u(u[i], th);
      return d;
    };
  }
  return assoc;
}

Association location_model(std::size_t n) { return catalog::gaussian_mean_model(n); }

Association scale_model(std::size_t n, bool analytic = true) {
  return common_form(
      n, ParameterSpace({Interval{0.0, kInf}}, {"theta"}), chi_square_aux(n, 1.0),
      [](double u, const Vec& th) { return th[0] * u; }, analytic ? Scalar3([](double, const Vec& th) { return th[0]; }) : Scalar3{},
      analytic ? Grad([](double u, const Vec&) { return make_vec({u}); }) : Grad{});
}

/// x_1 = theta + u_1 and every later coordinate u + theta^2 u + theta (or only the last when `only_last`).
Association nonseparable_model(std::size_t n, bool only_last) {
  Association a;
  a.name = "nonseparable";
  a.n_data = n;
  a.params = ParameterSpace({Interval{}}, {"theta"});
  a.aux = standard_normal_aux(n);
  auto bent = [n, only_last](Eigen::Index i) { return i > 0 && (!only_last || i + 1 == static_cast<Eigen::Index>(n)); };
  a.forward_map = [bent](const Vec& u, const Vec& th) {
    Vec x(u.size());
    for (Eigen::Index i = 0; i < u.size(); ++i) x[i] = bent(i) ? u[i] * (1 + th[0] * th[0]) + th[0] : th[0] + u[i];
    return x;
  };
  a.inverse_map = [bent](const Vec& x, const Vec& th) {
    Vec u(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) u[i] = bent(i) ? (x[i] - th[0]) / (1 + th[0] * th[0]) : x[i] - th[0];
    return u;
  };
  a.du_dtheta_map = [bent](const Vec& x, const Vec& th) {
    Mat d(x.size(), 1);
    const double t = th[0], s = 1 + t * t;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const double u = (x[i] - t) / s;
      d(i, 0) = bent(i) ? -(2 * t * u + 1) / s : -1.0;
    }
    return d;
  };
  return a;
}

RegularityOptions unit_box(std::size_t n) {
  RegularityOptions o;
  o.u_ranges.assign(n, Interval{0.1, 1.0});
  o.theta_ranges = {Interval{0.1, 1.0}};
  return o;
}

Association affine_two_parameter(std::size_t n) {
  return common_form(
      n, ParameterSpace({Interval{}, Interval{0.0, kInf}}, {"theta1", "theta2"}), standard_normal_aux(n),
      [](double u, const Vec& th) { return th[1] * u + th[0]; }, [](double, const Vec& th) { return th[1]; },
      [](double u, const Vec&) { return make_vec({1.0, u}); });
}

Association cubic_two_parameter(std::size_t n) {
  return common_form(
      n, ParameterSpace({Interval{}, Interval{0.0, kInf}}, {"theta1", "theta2"}), standard_normal_aux(n),
      [](double u, const Vec& th) { return th[0] + th[1] * u + th[1] * th[1] * u * u * u; },
      [](double u, const Vec& th) { return th[1] + 3 * th[1] * th[1] * u * u; },
      [](double u, const Vec& th) { return make_vec({1.0, u + 2 * th[1] * u * u * u}); });
}

ParameterSpace three_params() {
  return ParameterSpace({Interval{}, Interval{0.0, kInf}, Interval{0.0, kInf}}, {"theta1", "theta2", "theta3"});
}

Association duplicated_three(std::size_t n, bool analytic = true) {
  return common_form(
      n, three_params(), chi_square_aux(n, 1.0), [](double u, const Vec& th) { return th[0] + th[1] * u + th[2] * u; },
      analytic ? Scalar3([](double, const Vec& th) { return th[1] + th[2]; }) : Scalar3{},
      analytic ? Grad([](double u, const Vec&) { return make_vec({1.0, u, u}); }) : Grad{});
}

Association vandermonde_three(std::size_t n, bool analytic = true) {
  return common_form(
      n, three_params(), chi_square_aux(n, 1.0), [](double u, const Vec& th) { return th[0] + th[1] * u + th[2] * u * u; },
      analytic ? Scalar3([](double u, const Vec& th) { return th[1] + 2 * th[2] * u; }) : Scalar3{},
      analytic ? Grad([](double u, const Vec&) { return make_vec({1.0, u, u * u}); }) : Grad{});
}

/// theta' = (theta1, theta2, theta3 + theta1) composed with `base`, partials by finite differences.
Association recomposed(const Association& base) {
  Association a = base;
  a.params = ParameterSpace({Interval{}, Interval{0.0, kInf}, Interval{}}, {"t1", "t2", "t3"});
  auto back = [](const Vec& t) { return make_vec({t[0], t[1], t[2] - t[0]}); };
  a.forward_map = [f = base.forward_map, back](const Vec& u, const Vec& t) { return f(u, back(t)); };
  a.inverse_map = [g = base.inverse_map, back](const Vec& x, const Vec& t) { return g(x, back(t)); };
  a.du_dtheta_map = nullptr;
  return a;
}

RegularityOptions recomposed_box() {
  RegularityOptions o;
  o.theta_ranges = {Interval{0.0, 1.0}, Interval{0.5, 2.0}, Interval{1.5, 3.0}};
  return o;
}

}  // namespace

TEST(Separability, LocationModelHasUnitRatio) {
  const auto rep = separability_test(location_model(2));
  EXPECT_EQ(rep.h_theta_dependence, 0.0);
  EXPECT_EQ(rep.mixed_log_partial, 0.0);
  EXPECT_TRUE(rep.separable);
  EXPECT_TRUE(rep.regular);
  EXPECT_FALSE(rep.offending_index.has_value());
  EXPECT_EQ(rep.total_points, 21u * 21u * 21u);
}

TEST(Separability, ScaleModelRegularWithAnalyticAndNumericPartials) {
  for (bool analytic : {true, false}) {
    const auto rep = separability_test(scale_model(2, analytic));
    EXPECT_TRUE(rep.regular) << analytic;
    EXPECT_LE(rep.h_theta_dependence, 1e-7);
    EXPECT_LE(rep.mixed_log_partial, 1e-7);
    EXPECT_EQ(rep.u_ranges[0].lower, 0.25);
    EXPECT_EQ(rep.theta_ranges[0].upper, 3.0);
  }
}

TEST(Separability, NonseparableStatisticMatchesClosedFormRatio) {
  const auto opts = unit_box(2);
  const auto rep = separability_test(nonseparable_model(2, false), opts);
  EXPECT_FALSE(rep.regular);
  EXPECT_FALSE(rep.separable);
  // h = (1 + t^2) / (1 + 2 t u2): grid difference quotients of log h along t.
  double expect = 0;
  for (int a = 0; a < 20; ++a) {
    const double t0 = 0.1 + 0.9 * a / 20.0, t1 = 0.1 + 0.9 * (a + 1) / 20.0;
    for (int b = 0; b <= 20; ++b) {
      const double u = 0.1 + 0.9 * b / 20.0;
      auto lh = [u](double t) { return std::log((1 + t * t) / (1 + 2 * t * u)); };
      expect = std::max(expect, std::abs(lh(t1) - lh(t0)) / (t1 - t0));
    }
  }
  EXPECT_NEAR(rep.h_theta_dependence, expect, 1e-9 * expect);
  EXPECT_LE(rep.mixed_log_partial, 1e-9);
  ASSERT_TRUE(rep.offending_index.has_value());
}

TEST(Separability, RejectsWrongShapes) {
  EXPECT_THROW(separability_test(location_model(3)), DomainError);
  EXPECT_THROW(separability_test(affine_two_parameter(2)), DomainError);
  auto o = unit_box(2);
  o.u_ranges[0] = Interval{1.0, 0.5};
  EXPECT_THROW(separability_test(location_model(2), o), DomainError);
  o = unit_box(2);
  o.theta_ranges = {Interval{-1.0, 1.0}};
  EXPECT_THROW(separability_test(scale_model(2), o), DomainError);
}

TEST(Separability, VanishingPartialIsSingular) {
  // a = theta * u over a u-range through 0: a_theta / a_u = u / theta vanishes at u = 0.
  auto a = common_form(
      2, ParameterSpace({Interval{0.0, kInf}}), standard_normal_aux(2), [](double u, const Vec& th) { return th[0] * u; },
      [](double, const Vec& th) { return th[0]; }, [](double u, const Vec&) { return make_vec({u}); });
  EXPECT_THROW(separability_test(a), SingularModelError);
}

TEST(SeparabilityN, FiveSampleLocationAndScale) {
  const auto loc = n_sample_separability(location_model(5));
  EXPECT_TRUE(loc.regular);
  EXPECT_EQ(loc.pairs.size(), 10u);
  const auto sc = n_sample_separability(scale_model(5));
  EXPECT_TRUE(sc.regular);
  for (const auto& p : sc.pairs) EXPECT_TRUE(p.passed);
}

TEST(SeparabilityN, ReportsOffendingCoordinate) {
  const auto rep = n_sample_separability(nonseparable_model(5, true), unit_box(5));
  EXPECT_FALSE(rep.regular);
  ASSERT_TRUE(rep.offending_index.has_value());
  EXPECT_EQ(*rep.offending_index, 4u);
  for (const auto& p : rep.pairs) EXPECT_EQ(p.passed, p.j != 4) << p.i << "," << p.j;
}

TEST(LocationTransform, LocationModelIdentityMaps) {
  const auto a = location_model(2);
  const auto rep = separability_test(a);
  const auto tf = extract_location_transform(a, rep);
  EXPECT_EQ(tf.kind, "location");
  EXPECT_LE(tf.residual, 1e-6);
  for (double u : {-1.7, -0.3, 0.0, 1.2, 2.0}) {
    for (std::size_t i = 0; i < 2; ++i) EXPECT_NEAR(tf.v_maps[i](u), u - tf.u_anchor[static_cast<Eigen::Index>(i)], 1e-10);
    EXPECT_NEAR(tf.delta_map(u), u - tf.theta_anchor[0], 1e-10);
  }
}

TEST(LocationTransform, ScaleModelLogarithms) {
  const auto a = scale_model(2);
  const auto rep = separability_test(a);
  const auto tf = extract_location_transform(a, rep);
  EXPECT_EQ(tf.kind, "location after log transform");
  EXPECT_LE(tf.residual, 1e-5);
  // V_i = c ln(u / u0_i), delta = c ln(theta / theta0) with c = u0_1.
  const double c = tf.u_anchor[0];
  for (double u : {0.25, 0.4, 1.0, 1.63, 2.9, 3.0}) {
    for (std::size_t i = 0; i < 2; ++i) {
      EXPECT_NEAR(tf.v_maps[i](u), c * std::log(u / tf.u_anchor[static_cast<Eigen::Index>(i)]), 1e-6);
    }
    EXPECT_NEAR(tf.delta_map(u), c * std::log(u / tf.theta_anchor[0]), 1e-6);
  }
}

TEST(LocationTransform, LevelSetThroughTabulatedMaps) {
  const auto a = scale_model(2);
  const auto tf = extract_location_transform(a, separability_test(a));
  const Vec u = make_vec({0.7, 1.9});
  const Vec th1 = make_vec({0.8}), th2 = make_vec({2.2});
  Vec u2(2);
  for (Eigen::Index i = 0; i < 2; ++i) {
    const auto k = static_cast<std::size_t>(i);
    u2[i] = tf.v_maps[k].inverse(tf.v_maps[k](u[i]) + tf.delta_map(th1[0]) - tf.delta_map(th2[0]));
  }
  const Vec x1 = forward(a, u, th1), x2 = forward(a, u2, th2);
  EXPECT_LE((x1 - x2).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(LocationTransform, GeneralMonotoneTransform) {
  // x_i = exp(theta + u_i^3 + u_i): theta is a location after a non-log transform of u.
  auto a = common_form(
      2, ParameterSpace({Interval{}}), standard_normal_aux(2),
      [](double u, const Vec& th) { return std::exp(th[0] + u * u * u + u); },
      [](double u, const Vec& th) { return (3 * u * u + 1) * std::exp(th[0] + u * u * u + u); },
      [](double u, const Vec& th) { return make_vec({std::exp(th[0] + u * u * u + u)}); });
  RegularityOptions o;
  o.u_ranges.assign(2, Interval{-1.0, 1.0});
  o.theta_ranges = {Interval{-1.0, 1.0}};
  const auto rep = separability_test(a, o);
  ASSERT_TRUE(rep.regular);
  const auto tf = extract_location_transform(a, rep, o);
  EXPECT_EQ(tf.kind, "location after transform");
  EXPECT_LE(tf.residual, 1e-5);
  for (double u : {-0.9, 0.2, 0.8}) EXPECT_NEAR(tf.v_maps[1](u), u * u * u + u, 1e-7);
}

TEST(LocationTransform, RequiresRegularReport) {
  const auto a = nonseparable_model(2, false);
  const auto rep = separability_test(a, unit_box(2));
  EXPECT_THROW(extract_location_transform(a, rep, unit_box(2)), PreconditionError);
}

TEST(TwoParameter, AffineModelRegular) {
  const auto rep = two_parameter_test(affine_two_parameter(3));
  EXPECT_TRUE(rep.regular);
  EXPECT_LE(rep.h_theta_dependence, 1e-9);
  EXPECT_GT(rep.excluded_points, 0u);
  EXPECT_FALSE(rep.warnings.empty());
  EXPECT_LT(2 * rep.excluded_points, rep.total_points);
}

TEST(TwoParameter, CubicModelNotRegular) {
  const auto rep = two_parameter_test(cubic_two_parameter(3));
  EXPECT_FALSE(rep.regular);
  EXPECT_GT(rep.h_theta_dependence, 1e-2);
}

TEST(TwoParameter, CrossRatioOracle) {
  // For a = theta1 + theta2 u + theta2^2 u^3 the ratio is [f(u2) - f(u3)] / [f(u3) - f(u1)] * a_u(u1) / a_u(u2),
  // f = u + 2 theta2 u^3; its log spread along theta2 bounds the reported statistic from below.
  const double u1 = -1.0, u2 = 0.6, u3 = 1.8;
  auto logR = [&](double t) {
    auto f = [t](double u) { return u + 2 * t * u * u * u; };
    auto au = [t](double u) { return t + 3 * t * t * u * u; };
    return std::log(std::abs((f(u2) - f(u3)) / (f(u3) - f(u1)) * au(u1) / au(u2)));
  };
  RegularityOptions o;
  o.u_ranges = {Interval{-1.0, 1.8}, Interval{-1.0, 1.8}, Interval{-1.0, 1.8}};
  o.theta_ranges = {Interval{-1.0, 1.0}, Interval{0.5, 1.5}};
  o.grid_points = 8;
  const auto rep = two_parameter_test(cubic_two_parameter(3), o);
  const double dq = std::abs(logR(0.5 + 1.0 / 7.0) - logR(0.5)) / (1.0 / 7.0);
  EXPECT_GE(rep.h_theta_dependence, dq * (1 - 1e-9));
  EXPECT_FALSE(rep.regular);
}

TEST(TwoParameter, AllDeterminantsVanishIsInconclusive) {
  auto a = common_form(
      3, ParameterSpace({Interval{}, Interval{}}), standard_normal_aux(3),
      [](double u, const Vec& th) { return th[0] + u; }, [](double, const Vec&) { return 1.0; },
      [](double, const Vec&) { return make_vec({1.0, 0.0}); });
  EXPECT_THROW(two_parameter_test(a), InconclusiveError);
}

TEST(TwoParameter, RequiresCommonForm) {
  EXPECT_THROW(two_parameter_test(nonseparable_model(3, true)), DomainError);
  Association mixed = affine_two_parameter(3);
  auto f = mixed.forward_map;
  mixed.forward_map = [f](const Vec& u, const Vec& th) {
    Vec x = f(u, th);
    x[2] += 1.0;
    return x;
  };
  EXPECT_THROW(two_parameter_test(mixed), PreconditionError);
}

TEST(Degeneracy, DuplicatedDirectionRankTwo) {
  const auto rep = degeneracy_rank_test(duplicated_three(4));
  EXPECT_EQ(rep.numerical_rank, 2);
  EXPECT_TRUE(rep.degenerate);
  ASSERT_EQ(rep.row_space_basis.cols(), 2);
  // Row space spanned by e1 and (e2 + e3) / sqrt(2).
  Mat expect(3, 2);
  expect << 1, 0, 0, std::sqrt(0.5), 0, std::sqrt(0.5);
  const Mat proj = rep.row_space_basis * rep.row_space_basis.transpose();
  EXPECT_LE((proj - expect * expect.transpose()).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Degeneracy, VandermondeRankThree) {
  const auto rep = degeneracy_rank_test(vandermonde_three(4));
  EXPECT_EQ(rep.numerical_rank, 3);
  EXPECT_FALSE(rep.degenerate);
  EXPECT_EQ(rep.row_space_basis.cols(), 3);
  EXPECT_EQ(rep.theta_samples, 27u);
}

TEST(Degeneracy, VandermondeSingularValuesMatchOracle) {
  // At every theta the matrix is diag(1 / a_u(u_i)) [1, u_i, u_i^2].
  RegularityOptions o;
  o.u_ranges.assign(4, Interval{0.5, 2.0});
  o.theta_ranges = {Interval{0.0, 0.0 + 1e-9}, Interval{1.0, 1.0 + 1e-9}, Interval{1.0, 1.0 + 1e-9}};
  o.grid_points = 5;
  const auto rep = degeneracy_rank_test(vandermonde_three(4), o);
  Mat A(5, 3);
  for (int i = 0; i < 5; ++i) {
    const double u = 0.5 + 1.5 * i / 4.0;
    A.row(i) << 1, u, u * u;
    A.row(i) /= 1 + 2 * u;
  }
  Eigen::JacobiSVD<Mat> svd(A);
  EXPECT_LE((rep.singular_values - svd.singularValues()).cwiseAbs().maxCoeff(), 1e-6 * svd.singularValues()[0]);
}

TEST(Degeneracy, InvariantUnderRecomposition) {
  for (bool dup : {true, false}) {
    const Association base = dup ? duplicated_three(4, false) : vandermonde_three(4, false);
    const auto r1 = degeneracy_rank_test(base);
    const auto r2 = degeneracy_rank_test(recomposed(base), recomposed_box());
    EXPECT_EQ(r1.numerical_rank, r2.numerical_rank);
    EXPECT_EQ(r1.degenerate, r2.degenerate);
    EXPECT_EQ(r1.numerical_rank, dup ? 2 : 3);
  }
}

TEST(Degeneracy, RejectsLowDimension) {
  EXPECT_THROW(degeneracy_rank_test(affine_two_parameter(3)), DomainError);
}

TEST(RegularityClassify, CorpusVerdicts) {
  EXPECT_EQ(classify(location_model(2)).verdict, "regular: location");
  EXPECT_EQ(classify(scale_model(2)).verdict, "regular: location after log transform");
  EXPECT_EQ(classify(nonseparable_model(2, false), unit_box(2)).verdict, "not regular");
  EXPECT_EQ(classify(affine_two_parameter(3)).verdict, "regular: location-scale");
  EXPECT_EQ(classify(cubic_two_parameter(3)).verdict, "not regular");
  EXPECT_EQ(classify(duplicated_three(4)).verdict, "degenerate, rank 2");
  EXPECT_EQ(classify(vandermonde_three(4)).verdict, "not degenerate, rank 3");
}

TEST(RegularityClassify, LooseningToleranceNeverLosesRegularity) {
  std::vector<std::pair<Association, RegularityOptions>> corpus = {
      {location_model(2), {}},          {scale_model(2), {}},
      {nonseparable_model(2, false), unit_box(2)}, {affine_two_parameter(3), {}},
      {cubic_two_parameter(3), {}},     {location_model(5), {}},
      {nonseparable_model(5, true), unit_box(5)}};
  for (auto& [a, base] : corpus) {
    bool was_regular = false;
    for (double tol : {1e-8, 1e-5, 1e-3, 1e-1, 10.0}) {
      auto o = base;
      o.tol = tol;
      const bool reg = a.param_dim() == 1 ? n_sample_separability(a, o).regular : two_parameter_test(a, o).regular;
      EXPECT_TRUE(reg || !was_regular) << a.name << " tol " << tol;
      was_regular = reg;
    }
  }
}

TEST(RegularityClassify, RegularCatalogModelsHaveGlobalConditioning) {
  Engine eng = make_engine(7);
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> ud(0.3, 3.0);
  const auto mean = catalog::gaussian_mean_model(4);
  ASSERT_EQ(classify(mean).verdict, "regular: location");
  const auto ls = catalog::gaussian_location_scale_model(4);
  ASSERT_EQ(classify(ls).verdict, "regular: location-scale");
  for (int rep = 0; rep < 10; ++rep) {
    const Vec th1 = make_vec({3 * nd(eng)});
    for (int j = 1; j < 4; ++j) {
      EXPECT_LE(verify_local_conditioning([j](const Vec& u) { return u[0] - u[j]; }, mean, th1, 50), 1e-8);
    }
    const Vec th2 = make_vec({3 * nd(eng), ud(eng)});
    for (std::size_t k = 0; k < 2; ++k) {
      auto eta = [k](const Vec& u) { return catalog::location_scale_configuration(u)[k]; };
      EXPECT_LE(verify_local_conditioning(eta, ls, th2, 50), 1e-6);
    }
  }
}
