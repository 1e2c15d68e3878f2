#include "imkit/expression.hpp"

#include "imkit/distributions.hpp"
#include "imkit/regularity.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace imkit;

namespace {

const std::map<std::string, std::size_t> kXY = {{"x", 0}, {"y", 1}};

double eval(const std::string& text, double x, double y) { return Expression::parse(text, kXY)(make_vec({x, y})); }

}  // namespace

TEST(Expression, PrecedenceAndAssociativity) {
  EXPECT_DOUBLE_EQ(eval("1 + 2 * 3", 0, 0), 7.0);
  EXPECT_DOUBLE_EQ(eval("(1 + 2) * 3", 0, 0), 9.0);
  EXPECT_DOUBLE_EQ(eval("8 / 4 / 2", 0, 0), 1.0);
  EXPECT_DOUBLE_EQ(eval("10 - 4 - 3", 0, 0), 3.0);
  EXPECT_DOUBLE_EQ(eval("-2 ^ 2", 0, 0), -4.0);
  EXPECT_DOUBLE_EQ(eval("2 ^ 3 ^ 2", 0, 0), 512.0);
  EXPECT_DOUBLE_EQ(eval("2 * -x", 1.5, 0), -3.0);
  EXPECT_DOUBLE_EQ(eval("1.5e2 + .5", 0, 0), 150.5);
}

TEST(Expression, FunctionsAndVariables) {
  EXPECT_DOUBLE_EQ(eval("exp(x) * log(y)", 0.3, 2.0), std::exp(0.3) * std::log(2.0));
  EXPECT_DOUBLE_EQ(eval("pow(x, y)", 1.7, 2.5), std::pow(1.7, 2.5));
  EXPECT_DOUBLE_EQ(eval("x^y", 1.7, 2.5), std::pow(1.7, 2.5));
}

TEST(Expression, ParseErrors) {
  for (const char* bad : {"", "1 +", "(x", "x)", "z", "sin(x)", "pow(x)", "exp(x, y)", "2 $ 3", "x y"}) {
    EXPECT_THROW(Expression::parse(bad, kXY), ParseError) << bad;
  }
}

TEST(Expression, ConstantFolding) {
  const auto e = Expression::parse("2 * 3 + exp(0)", kXY);
  ASSERT_TRUE(e.is_constant());
  EXPECT_EQ(e.constant_value(), 7.0);
  EXPECT_TRUE(Expression::parse("x * 0 + 1", kXY).is_constant());
}

TEST(Expression, SymbolicPartialsKnownForms) {
  // d/dx [x^2 y + exp(x y) - log(x) / y] = 2 x y + y exp(x y) - 1 / (x y)
  const auto e = Expression::parse("x^2 * y + exp(x * y) - log(x) / y", kXY);
  const auto dx = e.derivative(0), dy = e.derivative(1);
  const double x = 0.7, y = 1.3;
  const Vec v = make_vec({x, y});
  EXPECT_NEAR(dx(v), 2 * x * y + y * std::exp(x * y) - 1 / (x * y), 1e-13);
  EXPECT_NEAR(dy(v), x * x + x * std::exp(x * y) + std::log(x) / (y * y), 1e-13);
  const auto p = Expression::parse("pow(x, y)", kXY);
  EXPECT_NEAR(p.derivative(0)(v), y * std::pow(x, y - 1), 1e-13);
  EXPECT_NEAR(p.derivative(1)(v), std::pow(x, y) * std::log(x), 1e-13);
}

TEST(Expression, PartialsMatchFiniteDifferencesOnRandomTrees) {
  std::mt19937_64 eng(11);
  std::uniform_int_distribution<int> pick(0, 8);
  std::uniform_real_distribution<double> pt(0.5, 1.5);
  std::function<std::string(int)> gen;
  // a / (10 + a^2) lies in [-0.16, 0.16], keeping exponents tame.
  auto bounded = [&](int depth) {
    const auto a = gen(depth);
    return "(" + a + " / (10 + " + a + "^2))";
  };
  gen = [&](int depth) -> std::string {
    if (depth == 0) {
      const int k = pick(eng) % 3;
      return k == 0 ? "x" : k == 1 ? "y" : std::to_string(1 + pick(eng));
    }
    switch (pick(eng)) {
      case 0: return "(" + gen(depth - 1) + " + " + gen(depth - 1) + ")";
      case 1: return "(" + gen(depth - 1) + " - " + gen(depth - 1) + ")";
      case 2: return "(" + gen(depth - 1) + " * " + gen(depth - 1) + ")";
      case 3: return "(" + gen(depth - 1) + " / (2 + " + gen(depth - 1) + "^2))";
      case 4: return "exp(" + bounded(depth - 1) + ")";
      case 5: return "log(2 + " + gen(depth - 1) + "^2)";
      case 6: return "pow(2 + " + gen(depth - 1) + "^2, " + bounded(depth - 1) + ")";
      case 7: return "-" + gen(depth - 1);
      default: return gen(depth - 1) + "^2";
    }
  };
  int checked = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const auto text = gen(3);
    const auto e = Expression::parse(text, kXY);
    const double x = pt(eng), y = pt(eng);
    if (!(std::abs(e(make_vec({x, y}))) < 1e6)) continue;
    ++checked;
    for (std::size_t s = 0; s < 2; ++s) {
      auto f = [&](double h) {
        Vec v = make_vec({x, y});
        v[static_cast<Eigen::Index>(s)] += h;
        return e(v);
      };
      const double h = 1e-4;
      const double fd = (-f(2 * h) + 8 * f(h) - 8 * f(-h) + f(-2 * h)) / (12 * h);
      const double sym = e.derivative(s)(make_vec({x, y}));
      EXPECT_NEAR(sym, fd, 1e-6 * std::max(1.0, std::abs(fd))) << text;
    }
  }
  EXPECT_GE(checked, 200);
}

TEST(ExpressionAssociation, SharedFormMatchesHandCoded) {
  const auto a = make_expression_association("scale", 3, ParameterSpace({Interval{0.0, kInf}}, {"theta"}),
                                             chi_square_aux(3, 1.0), {"theta * u"});
  const Vec u = make_vec({0.4, 1.1, 2.3}), th = make_vec({1.7});
  const Vec x = forward(a, u, th);
  EXPECT_LE((x - 1.7 * u).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LE((inverse(a, x, th) - u).cwiseAbs().maxCoeff(), 1e-13);
  const Mat d = du_dtheta(a, x, th);
  for (Eigen::Index i = 0; i < 3; ++i) EXPECT_NEAR(d(i, 0), -u[i] / 1.7, 1e-13);
}

TEST(ExpressionAssociation, PerCoordinateComponents) {
  const auto a = make_expression_association("bent", 2, ParameterSpace({Interval{}}), standard_normal_aux(2),
                                             {"theta_1 + u_1", "u2 + theta1^2 * u2 + theta1"});
  const Vec u = make_vec({0.3, -0.8}), th = make_vec({0.6});
  const Vec x = forward(a, u, th);
  EXPECT_NEAR(x[1], -0.8 * 1.36 + 0.6, 1e-15);
  EXPECT_LE((inverse(a, x, th) - u).cwiseAbs().maxCoeff(), 1e-12);
  const Mat d = du_dtheta(a, x, th), fd = du_dtheta_fd(a, x, th);
  EXPECT_LE((d - fd).cwiseAbs().maxCoeff(), 1e-7);
  EXPECT_NEAR(d(1, 0), -(1 + 2 * 0.6 * -0.8) / 1.36, 1e-12);
}

TEST(ExpressionAssociation, RejectsCrossCoordinateReferences) {
  EXPECT_THROW(make_expression_association("x", 2, ParameterSpace({Interval{}}), standard_normal_aux(2),
                                           {"theta1 + u2", "theta1 + u2"}),
               ParseError);
  EXPECT_THROW(make_expression_association("x", 3, ParameterSpace({Interval{}}), standard_normal_aux(3), {"u", "u"}),
               DomainError);
  EXPECT_THROW(make_expression_association("x", 2, ParameterSpace({Interval{}}), standard_normal_aux(2), {"theta2 + u"}),
               ParseError);
}

TEST(ExpressionAssociation, ClassifiesLikeHandCodedModels) {
  const ParameterSpace real({Interval{}}, {"theta"}), positive({Interval{0.0, kInf}}, {"theta"});
  EXPECT_EQ(classify(make_expression_association("loc", 2, real, standard_normal_aux(2), {"theta + u"})).verdict,
            "regular: location");
  EXPECT_EQ(classify(make_expression_association("scale", 2, positive, chi_square_aux(2, 1.0), {"theta * u"})).verdict,
            "regular: location after log transform");
  RegularityOptions box;
  box.u_ranges.assign(2, Interval{0.1, 1.0});
  box.theta_ranges = {Interval{0.1, 1.0}};
  EXPECT_EQ(classify(make_expression_association("bent", 2, real, standard_normal_aux(2),
                                                 {"theta + u1", "u2 + theta^2 * u2 + theta"}),
                     box)
                .verdict,
            "not regular");
}

TEST(ExpressionField, EvaluatesTable) {
  const auto f = make_expression_field("lin", 2, 1, {{"u2"}, {"-u1 + tau"}}, Vec::Zero(2));
  const Mat g = f.eval(make_vec({0.5}), make_vec({1.0, 2.0}));
  EXPECT_EQ(g(0, 0), 2.0);
  EXPECT_EQ(g(1, 0), -0.5);
  EXPECT_THROW(make_expression_field("bad", 2, 1, {{"u3"}, {"u1"}}, Vec::Zero(2)), ParseError);
  EXPECT_THROW(make_expression_field("bad", 2, 2, {{"u1"}, {"u1", "u2"}}, Vec::Zero(2)), DomainError);
}
