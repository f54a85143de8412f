#include <gtest/gtest.h>

#include "dcapep/sdp.hpp"
#include "dcapep/sdpa.hpp"

using namespace dcapep;
using sdp::Matrix;
using sdp::Vector;

namespace {

sdp::StandardForm trace_problem(double rhs) {
  sdp::StandardForm f;
  f.n = 2;
  f.nfree = 0;
  f.C = Matrix::Identity(2, 2);
  f.c = Vector::Zero(0);
  sdp::Row r;
  r.A = Matrix::Identity(2, 2);
  r.a = Vector::Zero(0);
  r.sense = sdp::Sense::le;
  r.b = rhs;
  r.name = "trace";
  f.rows.push_back(r);
  return f;
}

sdp::StandardForm lambda_max(const Matrix& M) {
  sdp::StandardForm f;
  f.n = static_cast<int>(M.rows());
  f.nfree = 0;
  f.C = M;
  f.c = Vector::Zero(0);
  sdp::Row r;
  r.A = Matrix::Identity(f.n, f.n);
  r.a = Vector::Zero(0);
  r.sense = sdp::Sense::eq;
  r.b = 1.0;
  r.name = "unit_trace";
  f.rows.push_back(r);
  return f;
}

}  // namespace

TEST(SdpSolve, TraceBoundedByOne) {
  const auto r = sdp::solve(trace_problem(1.0));
  ASSERT_EQ(r.status, sdp::Status::optimal);
  EXPECT_NEAR(r.primal_value, 1.0, 1e-7);
  EXPECT_NEAR(r.dual_value, 1.0, 1e-7);
  ASSERT_EQ(r.lambda.size(), 1);
  EXPECT_NEAR(r.lambda(0), 1.0, 1e-6);
}

TEST(SdpSolve, LargestEigenvalue) {
  Matrix M = Matrix::Zero(2, 2);
  M(0, 0) = 1;
  M(1, 1) = 3;
  const auto r = sdp::solve(lambda_max(M));
  ASSERT_EQ(r.status, sdp::Status::optimal);
  EXPECT_NEAR(r.primal_value, 3.0, 1e-7);
  EXPECT_GE(r.X.selfadjointView<Eigen::Lower>().eigenvalues().minCoeff(), -1e-9);
}

TEST(SdpSolve, LargestEigenvalueWithFreeVariables) {
  // max <M, X> + z1 - z2 s.t. tr X = 1, z1 - z2 <= 0.5, z1 + z2 = 0
  Matrix M(3, 3);
  M << 2, 1, 0, 1, 2, 0, 0, 0, -1;
  auto f = lambda_max(M);
  f.nfree = 2;
  f.c = Vector(2);
  f.c << 1, -1;
  f.rows[0].a = Vector::Zero(2);
  sdp::Row r1{Matrix::Zero(3, 3), Vector(2), sdp::Sense::le, 0.5, "z"};
  r1.a << 1, -1;
  sdp::Row r2{Matrix::Zero(3, 3), Vector(2), sdp::Sense::eq, 0.0, "sum"};
  r2.a << 1, 1;
  f.rows.push_back(r1);
  f.rows.push_back(r2);
  const auto r = sdp::solve(f);
  ASSERT_TRUE(r.status == sdp::Status::optimal || r.status == sdp::Status::near_optimal);
  EXPECT_NEAR(r.primal_value, 3.5, 1e-6);
  EXPECT_NEAR(r.z(0), 0.25, 1e-6);
}

TEST(SdpSolve, Infeasible) {
  const auto r = sdp::solve(trace_problem(-1.0));
  EXPECT_EQ(r.status, sdp::Status::infeasible);
}

TEST(SdpSolve, Unbounded) {
  // max X11 subject to X22 <= 1 only
  auto f = trace_problem(1.0);
  f.C = Matrix::Zero(2, 2);
  f.C(0, 0) = 1.0;
  f.rows[0].A = Matrix::Zero(2, 2);
  f.rows[0].A(1, 1) = 1.0;
  const auto r = sdp::solve(f);
  EXPECT_EQ(r.status, sdp::Status::unbounded);
}

TEST(SdpSolve, WeakDualityAndDualReproducesObjective) {
  Matrix M(3, 3);
  M << 1, 2, 0, 2, -1, 1, 0, 1, 0.5;
  auto f = lambda_max(M);
  // extra inequality rows
  sdp::Row r;
  r.A = Matrix::Zero(3, 3);
  r.A(0, 0) = 1;
  r.a = Vector::Zero(0);
  r.b = 0.3;
  r.name = "cap";
  f.rows.push_back(r);
  const auto res = sdp::solve(f);
  ASSERT_TRUE(res.status == sdp::Status::optimal);
  EXPECT_GE(res.dual_value, res.primal_value - 1e-7);
  double by = 0.0;
  for (std::size_t i = 0; i < f.rows.size(); ++i) by += f.rows[i].b * res.lambda(static_cast<Eigen::Index>(i));
  EXPECT_LT(std::abs(by - res.primal_value), 1e-7 * (1 + std::abs(res.primal_value)));
  EXPECT_GE(res.lambda(1), -1e-12);
}

TEST(SdpSolve, Deterministic) {
  Matrix M(3, 3);
  M << 1, 2, 0, 2, -1, 1, 0, 1, 0.5;
  const auto a = sdp::solve(lambda_max(M));
  const auto b = sdp::solve(lambda_max(M));
  EXPECT_EQ(a.iterations, b.iterations);
  EXPECT_EQ(a.primal_value, b.primal_value);
  EXPECT_TRUE((a.X.array() == b.X.array()).all());
  EXPECT_EQ(a.log, b.log);
}

TEST(SdpSolve, RejectsMalformedInput) {
  auto f = trace_problem(1.0);
  f.rows[0].A(0, 1) = 1.0;  // asymmetric
  EXPECT_THROW(sdp::solve(f), std::invalid_argument);
}

TEST(Sdpa, ParseSolveAndRoundTrip) {
  // min x s.t. x I - diag(1, 3) PSD  ->  x = 3
  const std::string text =
      "* lambda max\n"
      "1 =mdim\n"
      "1 =nblocks\n"
      "{2}\n"
      "{1.0}\n"
      "0 1 1 1 1.0\n"
      "0 1 2 2 3.0\n"
      "1 1 1 1 1.0\n"
      "1 1 2 2 1.0\n";
  const auto p = sdpa::parse(text);
  EXPECT_EQ(p.m, 1);
  ASSERT_EQ(p.block_struct.size(), 1u);
  EXPECT_EQ(p.block_struct[0], 2);
  EXPECT_EQ(p.entries.size(), 4u);
  ASSERT_EQ(p.comments.size(), 1u);
  const auto r = sdp::solve(sdpa::to_standard_form(p));
  ASSERT_EQ(r.status, sdp::Status::optimal);
  EXPECT_NEAR(-r.primal_value, 3.0, 1e-7);
  const std::string w = sdpa::write(p);
  EXPECT_EQ(sdpa::write(sdpa::parse(w)), w);
}

TEST(Sdpa, DiagonalBlockRows) {
  // min x1 + x2 s.t. x1 >= 1, x2 >= 2 (diagonal block)
  const std::string text = "2\n1\n-2\n1 1\n0 1 1 1 1\n0 1 2 2 2\n1 1 1 1 1\n2 1 2 2 1\n";
  const auto r = sdp::solve(sdpa::to_standard_form(sdpa::parse(text)));
  ASSERT_TRUE(r.status == sdp::Status::optimal || r.status == sdp::Status::near_optimal);
  EXPECT_NEAR(-r.primal_value, 3.0, 1e-6);
}

TEST(Sdpa, RejectsMalformed) {
  EXPECT_THROW(sdpa::parse("1\n1\n2\n"), std::runtime_error);
  EXPECT_THROW(sdpa::parse("1\n1\n2\n1\n1 2 1 1 1\n"), std::runtime_error);
  EXPECT_THROW(sdpa::parse("1\n1\n-2\n1\n1 1 1 2 1\n"), std::runtime_error);
  EXPECT_THROW(sdpa::parse("1\n1\n2\n1\n1 1 3 1 1\n"), std::runtime_error);
}

TEST(Sdpa, FormatDoubleRoundTrips) {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 123456789.123456789, 1e300}) {
    EXPECT_EQ(std::strtod(sdpa::format_double(v).c_str(), nullptr), v);
  }
}
