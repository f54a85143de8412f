#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "dcapep/analysis.hpp"
#include "dcapep/dca.hpp"
#include "dcapep/instances.hpp"

using namespace dcapep;

namespace {
Vector v1(double a) { return Vector::Constant(1, a); }
Matrix m1(double a) { return Matrix::Constant(1, 1, a); }

std::vector<SamplePoint> sample(const DCInstance& inst, bool first, const std::vector<double>& xs) {
  std::vector<SamplePoint> s;
  for (double x : xs) {
    const auto r = first ? inst.f1(v1(x)) : inst.f2(v1(x));
    if (!r.in_domain()) continue;
    s.push_back(SamplePoint{v1(x), *r.subgradient, r.value});
  }
  return s;
}

std::vector<double> grid(double lo, double hi, int n) {
  std::vector<double> v;
  for (int i = 0; i <= n; ++i) v.push_back(lo + (hi - lo) * i / n);
  return v;
}
}  // namespace

TEST(QuadraticInstance, OneStepExample) {
  const auto inst = make_quadratic_instance(m1(2), v1(0), m1(0), v1(1));
  EXPECT_DOUBLE_EQ(inst.f_star(), -0.25);
  EXPECT_TRUE(inst.params2().L.is_infinite());
  EXPECT_DOUBLE_EQ(inst.argmin(v1(0), v1(1))(0), 0.5);
}

TEST(QuadraticInstance, RejectsDegenerateAndBadInput) {
  const Matrix I = Matrix::Identity(2, 2);
  EXPECT_THROW(make_quadratic_instance(I, Vector::Zero(2), I, Vector::Zero(2)), std::invalid_argument);
  Matrix A(2, 2);
  A << 1, 1, 0, 1;
  EXPECT_THROW(make_quadratic_instance(A, Vector::Zero(2), Matrix::Zero(2, 2), Vector::Zero(2)),
               std::invalid_argument);
  // with an external f_star the spectral rule is not applied
  EXPECT_NO_THROW(make_quadratic_instance(2 * I, Vector::Zero(2), I, Vector::Zero(2), 0.0));
  EXPECT_THROW(make_quadratic_instance(-I, Vector::Zero(2), Matrix::Zero(2, 2), Vector::Zero(2), 0.0),
               std::invalid_argument);
}

TEST(QuadraticInstance, IdentityCase) {
  const Matrix I = Matrix::Identity(3, 3);
  const auto inst = make_quadratic_instance(I, Vector::Zero(3), Matrix::Zero(3, 3), Vector::Zero(3));
  EXPECT_DOUBLE_EQ(inst.f_star(), 0.0);
  StopRule rule;
  rule.epsilon = 1e-12;
  const Trace tr = run(inst, Vector::Zero(3), rule);
  EXPECT_EQ(tr.N_performed, 0);
  EXPECT_EQ(tr.stop_reason, StopReason::gap_tol);
}

TEST(QuadraticInstance, SamplesAreInterpolable) {
  Matrix Q1(2, 2), Q2(2, 2);
  Q1 << 3, 1, 1, 2;
  Q2 << 0.5, 0.2, 0.2, 0.3;
  Vector b1(2), b2(2);
  b1 << 1, -1;
  b2 << 0.3, 0.7;
  const auto inst = make_quadratic_instance(Q1, b1, Q2, b2);
  std::vector<SamplePoint> s1, s2;
  for (double a : {-2.0, -0.5, 0.0, 1.0, 3.0}) {
    for (double b : {-1.0, 0.5, 2.0}) {
      Vector x(2);
      x << a, b;
      const auto r1 = inst.f1(x), r2 = inst.f2(x);
      s1.push_back({x, *r1.subgradient, r1.value});
      s2.push_back({x, *r2.subgradient, r2.value});
      EXPECT_GE(inst.objective(x), inst.f_star() - 1e-12);
    }
  }
  EXPECT_TRUE(check_interpolable(s1, inst.params1()).ok);
  EXPECT_TRUE(check_interpolable(s2, inst.params2()).ok);
}

TEST(TightnessInstance, ParamsAndRejection) {
  const TightnessExampleParams p(8.0, 3);
  EXPECT_DOUBLE_EQ(p.U, 0.25);
  EXPECT_DOUBLE_EQ(p.predicted_gap(), 2.0);
  for (int i = 1; i <= p.N + 1; ++i) {
    EXPECT_LT(p.beta(i), p.alpha(i));
    EXPECT_LT(p.alpha(i), p.beta(i + 1));
  }
  EXPECT_THROW(make_tightness_instance(1.0, 0), std::invalid_argument);
  try {
    make_tightness_instance(1.0, 0);
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("U"), std::string::npos);
  }
  const auto inst = make_tightness_instance(8.0, 3);
  EXPECT_DOUBLE_EQ((*inst.default_start())(0), 4.0);
  EXPECT_NEAR(inst.objective(v1(4.0)), 1.0, 1e-12);
  EXPECT_DOUBLE_EQ(inst.f_star(), 0.0);
}

class TightnessShape : public ::testing::TestWithParam<std::pair<double, int>> {};

TEST_P(TightnessShape, ContinuousAndConvexAtBreakpoints) {
  const auto [L1, N] = GetParam();
  const TightnessExampleParams p(L1, N);
  const auto inst = make_tightness_instance(L1, N);
  const double h = 1e-9;
  std::vector<double> bps{0.0};
  for (int i = 1; i <= N + 1; ++i) {
    bps.push_back(p.alpha(i));
    if (i >= 2) bps.push_back(p.beta(i));
  }
  const double slope_max = L1 * (N + 2);
  for (double b : bps) {
    const auto lo = inst.f1(v1(b - h)), hi = inst.f1(v1(b + h)), at = inst.f1(v1(b));
    EXPECT_NEAR(lo.value, at.value, slope_max * h + 1e-12) << b;
    EXPECT_NEAR(hi.value, at.value, slope_max * h + 1e-12) << b;
    EXPECT_LE((*lo.subgradient)(0), (*hi.subgradient)(0) + 1e-9) << b;
  }
  // global monotonicity of the selected derivative
  double prev = -std::numeric_limits<double>::infinity();
  for (double x : grid(-1.0, N + 2.0, 6000)) {
    const double g = (*inst.f1(v1(x)).subgradient)(0);
    EXPECT_GE(g, prev - 1e-12) << x;
    prev = g;
  }
}

TEST_P(TightnessShape, MinimumIsZeroOnFirstStretch) {
  const auto [L1, N] = GetParam();
  const TightnessExampleParams p(L1, N);
  const auto inst = make_tightness_instance(L1, N);
  double best = std::numeric_limits<double>::infinity(), where = -1;
  const int steps = static_cast<int>(std::lround((N + 1) / 1e-4));
  for (int i = 0; i <= steps; ++i) {
    const double x = i * 1e-4;
    const double f = inst.objective(v1(x));
    if (f < best) {
      best = f;
      where = x;
    }
  }
  EXPECT_NEAR(best, 0.0, 1e-8);
  EXPECT_LE(where, 1.0 - p.U + 1e-4);
  for (double x : grid(0.0, 1.0 - p.U, 50)) EXPECT_NEAR(inst.objective(v1(x)), 0.0, 1e-8);
}

TEST_P(TightnessShape, SamplesAreInterpolable) {
  const auto [L1, N] = GetParam();
  const auto inst = make_tightness_instance(L1, N);
  const auto xs = grid(-1.0, N + 2.0, 300);
  EXPECT_TRUE(check_interpolable(sample(inst, true, xs), inst.params1()).ok);
  EXPECT_TRUE(check_interpolable(sample(inst, false, xs), inst.params2()).ok);
}

INSTANTIATE_TEST_SUITE_P(Grid, TightnessShape,
                         ::testing::Values(std::make_pair(8.0, 3), std::make_pair(2.0, 1),
                                           std::make_pair(0.5, 4), std::make_pair(8.0, 10)));

TEST(Counterexample, DomainAndShape) {
  const auto inst = make_nonsmooth_counterexample(40);
  EXPECT_TRUE(std::isinf(inst.objective(v1(-1.0))));
  EXPECT_FALSE(inst.f1(v1(-1.0)).in_domain());
  EXPECT_THROW(make_nonsmooth_counterexample(1), std::invalid_argument);
  std::vector<double> xs;
  for (int n = 0; n <= 30; ++n) {
    xs.push_back(std::ldexp(1.0, -n));
    xs.push_back(1.5 * std::ldexp(1.0, -n));
  }
  EXPECT_TRUE(check_interpolable(sample(inst, true, xs), inst.params1()).ok);
  EXPECT_TRUE(check_interpolable(sample(inst, false, xs), inst.params2()).ok);
}

TEST(Counterexample, ObjectiveDecreasesAlongRun) {
  const auto inst = make_nonsmooth_counterexample(60);
  StopRule rule;
  rule.epsilon = 0.5;
  rule.max_iter = 30;
  const Trace tr = run(inst, v1(1.0), rule);
  ASSERT_EQ(tr.N_performed, 30);
  for (int k = 1; k <= tr.N_performed; ++k) EXPECT_LE(tr.at(k + 1).f(), tr.at(k).f());
}

TEST(PlQuadratic, Construction) {
  const auto inst = make_pl_quadratic(2.0, 0.5, 3);
  EXPECT_EQ(inst.dimension(), 3);
  EXPECT_DOUBLE_EQ(pl_quadratic_eta(2.0, 0.5), 1.5);
  EXPECT_TRUE(make_pl_quadratic(2.0, 0.0).params2().L.is_infinite());
  EXPECT_THROW(make_pl_quadratic(1.0, 1.0), std::invalid_argument);
}
