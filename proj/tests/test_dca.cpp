#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "dcapep/dca.hpp"
#include "dcapep/instances.hpp"

using namespace dcapep;

namespace {
Vector v1(double a) { return Vector::Constant(1, a); }
Matrix m1(double a) { return Matrix::Constant(1, 1, a); }

DCInstance random_quadratic(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const Matrix A = Matrix::NullaryExpr(n, n, [&](Eigen::Index, Eigen::Index) { return nd(rng); });
  const Matrix Q = Eigen::HouseholderQR<Matrix>(A).householderQ();
  Vector e1(n), e2(n);
  for (int i = 0; i < n; ++i) {
    e2(i) = 3.0 * u(rng);
    e1(i) = 3.0 + 0.2 + 3.0 * u(rng);
  }
  Matrix Q1 = Q * e1.asDiagonal() * Q.transpose(), Q2 = Q * e2.asDiagonal() * Q.transpose();
  Q1 = 0.5 * (Q1 + Q1.transpose()).eval();
  Q2 = 0.5 * (Q2 + Q2.transpose()).eval();
  return make_quadratic_instance(Q1, Vector::NullaryExpr(n, [&](Eigen::Index) { return nd(rng); }), Q2,
                                 Vector::NullaryExpr(n, [&](Eigen::Index) { return nd(rng); }));
}
}  // namespace

TEST(Run, HandSolvedQuadratic) {
  const auto inst = make_quadratic_instance(m1(2), v1(0), m1(0), v1(1));
  StopRule rule;
  rule.epsilon = 1e-12;
  const Trace tr = run(inst, v1(0), rule);
  EXPECT_EQ(tr.stop_reason, StopReason::gap_tol);
  EXPECT_EQ(tr.N_performed, 1);
  EXPECT_DOUBLE_EQ(tr.at(2).x(0), 0.5);
  EXPECT_DOUBLE_EQ(tr.at(2).g1(0), 1.0);
  EXPECT_DOUBLE_EQ(tr.at(2).g2(0), 1.0);
  EXPECT_DOUBLE_EQ(tr.at(2).gap, 0.0);
  EXPECT_DOUBLE_EQ(termination_measure(tr, 1), 0.25);
  EXPECT_DOUBLE_EQ(tr.at(2).T, 0.25);
  EXPECT_THROW(termination_measure(tr, 2), std::out_of_range);
  EXPECT_THROW(termination_measure(tr, 0), std::out_of_range);
}

TEST(Run, FixedPointHasZeroT) {
  const auto inst = make_quadratic_instance(m1(1), v1(0), m1(0), v1(0));
  StopRule rule;
  rule.kind = StopKind::model_decrease;
  rule.epsilon = 1e-3;
  const Trace tr = run(inst, v1(0), rule);
  EXPECT_EQ(tr.stop_reason, StopReason::T_tol);
  EXPECT_EQ(tr.N_performed, 1);
  EXPECT_EQ(termination_measure(tr, 1), 0.0);
}

TEST(Run, TightnessNeverTriggers) {
  const auto inst = make_tightness_instance(8.0, 3);
  StopRule rule;
  rule.epsilon = 1.9;
  rule.max_iter = 3;
  const Trace tr = run(inst, v1(4.0), rule);
  EXPECT_EQ(tr.stop_reason, StopReason::max_iter);
  ASSERT_EQ(tr.records.size(), 4u);
  for (int k = 1; k <= 4; ++k) {
    EXPECT_NEAR(tr.at(k).x(0), 5.0 - k, 1e-12);
    EXPECT_NEAR(tr.at(k).gap, 2.0, 1e-12);
    EXPECT_NEAR(tr.at(k).g2(0), 8.0 * 0.25 * (4 - k), 1e-12);
  }
  EXPECT_NEAR(tr.min_gap(3), 2.0, 1e-12);
}

TEST(Run, TightnessTMatchesIndependentEvaluation) {
  const auto inst = make_tightness_instance(8.0, 3);
  StopRule rule;
  rule.epsilon = 1e-300;
  rule.max_iter = 3;
  const Trace tr = run(inst, v1(4.0), rule);
  for (int k = 1; k <= 3; ++k) {
    const double xk = tr.at(k).x(0), xn = tr.at(k + 1).x(0);
    const double g2 = (*inst.f2(v1(xk)).subgradient)(0);
    const double T = inst.f1(v1(xk)).value - inst.f1(v1(xn)).value - g2 * (xk - xn);
    EXPECT_DOUBLE_EQ(termination_measure(tr, k), T);
    EXPECT_GE(T, 0.0);
  }
}

TEST(Run, CounterexampleBothRules) {
  const auto inst = make_nonsmooth_counterexample(60);
  StopRule gap;
  gap.epsilon = 0.5;
  gap.max_iter = 30;
  const Trace a = run(inst, v1(1.0), gap);
  EXPECT_EQ(a.stop_reason, StopReason::max_iter);
  EXPECT_EQ(a.N_performed, 30);
  for (const auto& r : a.records) EXPECT_NEAR(r.gap, 1.0, 1e-12);
  for (int k = 2; k <= a.N_performed; ++k) EXPECT_LE(termination_measure(a, k), termination_measure(a, k - 1));

  StopRule dec;
  dec.kind = StopKind::model_decrease;
  dec.epsilon = 1e-3;
  dec.max_iter = 1000;
  const Trace b = run(inst, v1(1.0), dec);
  EXPECT_EQ(b.stop_reason, StopReason::T_tol);
  EXPECT_LT(b.N_performed, 60);
}

TEST(Run, OracleFailureRecordsPoint) {
  const auto inst = make_nonsmooth_counterexample(10);
  StopRule rule;
  const Trace tr = run(inst, v1(-1.0), rule);
  EXPECT_EQ(tr.stop_reason, StopReason::oracle_failure);
  ASSERT_TRUE(tr.failure_point.has_value());
  EXPECT_DOUBLE_EQ((*tr.failure_point)(0), -1.0);
}

TEST(Run, RejectsBadRule) {
  const auto inst = make_pl_quadratic(1.0, 0.0);
  StopRule rule;
  rule.epsilon = 0.0;
  EXPECT_THROW(run(inst, v1(1.0), rule), std::invalid_argument);
  rule.epsilon = 1e-3;
  rule.max_iter = 0;
  EXPECT_THROW(run(inst, v1(1.0), rule), std::invalid_argument);
}

TEST(TraceInvariants, RandomQuadratics) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 1 + trial % 5;
    const auto inst = random_quadratic(rng, n);
    StopRule rule;
    rule.epsilon = 1e-14;
    rule.max_iter = 20;
    const Trace tr = run(inst, Vector::Constant(n, 5.0), rule);
    for (int k = 1; k <= tr.N_performed; ++k) {
      const auto& a = tr.at(k);
      const auto& b = tr.at(k + 1);
      EXPECT_TRUE((b.g1.array() == a.g2.array()).all());  // bit-exact
      EXPECT_LE(b.f(), a.f() + 1e-12 * (1 + std::abs(a.f())));
      EXPECT_GE(b.T, -1e-12 * (1 + std::abs(a.f1)));
      EXPECT_GE(b.f(), inst.f_star() - 1e-9);
    }
  }
}

TEST(TraceInvariants, Deterministic) {
  std::mt19937_64 r1(9), r2(9);
  const auto a = random_quadratic(r1, 4), b = random_quadratic(r2, 4);
  StopRule rule;
  rule.max_iter = 15;
  rule.epsilon = 1e-14;
  std::ostringstream sa, sb;
  write_trace_csv(sa, run(a, Vector::Ones(4), rule));
  write_trace_csv(sb, run(b, Vector::Ones(4), rule));
  EXPECT_EQ(sa.str(), sb.str());
}

TEST(TraceCsv, Format) {
  const auto inst = make_quadratic_instance(m1(2), v1(0), m1(0), v1(1));
  StopRule rule;
  rule.epsilon = 1e-12;
  std::ostringstream os;
  write_trace_csv(os, run(inst, v1(0), rule));
  EXPECT_EQ(os.str(), "k,x1,gap,T,f1,f2,f\n1,0,1,,0,0,0\n2,0.5,0,0.25,0.25,0.5,-0.25\n");
}
