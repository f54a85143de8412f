#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dcapep/ext_value.hpp"

namespace dcapep {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Value and one selected subgradient of a convex function at a point.
/// Outside the domain the value is +inf and no subgradient is returned.
struct OracleResult {
  double value = 0.0;
  std::optional<Vector> subgradient;

  bool in_domain() const noexcept { return subgradient.has_value(); }

  static OracleResult outside_domain() {
    return {std::numeric_limits<double>::infinity(), std::nullopt};
  }
};

using Oracle = std::function<OracleResult(const Vector&)>;

/// Solves x^{k+1} in argmin f1(x) - <g2, x> for the linearization point x^k
/// and the chosen g2 in df2(x^k). By optimality g2 is a subgradient of f1
/// at the returned point.
using ArgminOracle = std::function<Vector(const Vector& xk, const Vector& g2)>;

/// A DC decomposition f = f1 - f2 with subgradient oracles, declared
/// function classes and a known lower bound f_star.
class DCInstance {
 public:
  DCInstance(std::string name, int dimension, Oracle f1, Oracle f2, ArgminOracle argmin,
             ClassParams params1, ClassParams params2, double f_star,
             std::optional<Vector> default_start = std::nullopt)
      : name_(std::move(name)),
        dimension_(dimension),
        f1_(std::move(f1)),
        f2_(std::move(f2)),
        argmin_(std::move(argmin)),
        params1_(params1),
        params2_(params2),
        f_star_(f_star),
        default_start_(std::move(default_start)) {
    if (dimension_ <= 0) throw std::invalid_argument("instance dimension must be positive");
    if (!f1_ || !f2_ || !argmin_) throw std::invalid_argument("instance oracles must be set");
    params1_.validate();
    params2_.validate();
    // L1 > mu2 and L2 > mu1; otherwise f is concave (unbounded) or convex.
    if (params1_.L.is_finite() && !(params1_.L.value() > params2_.mu)) {
      throw std::invalid_argument("instance rejected: need L1 > mu2");
    }
    if (params2_.L.is_finite() && !(params2_.L.value() > params1_.mu)) {
      throw std::invalid_argument("instance rejected: need L2 > mu1");
    }
    if (!std::isfinite(f_star_)) throw std::invalid_argument("f_star must be finite");
    if (default_start_ && default_start_->size() != dimension_) {
      throw std::invalid_argument("default start has wrong dimension");
    }
  }

  const std::string& name() const noexcept { return name_; }
  int dimension() const noexcept { return dimension_; }
  const ClassParams& params1() const noexcept { return params1_; }
  const ClassParams& params2() const noexcept { return params2_; }
  double f_star() const noexcept { return f_star_; }
  const std::optional<Vector>& default_start() const noexcept { return default_start_; }

  OracleResult f1(const Vector& x) const { return f1_(check_dim(x)); }
  OracleResult f2(const Vector& x) const { return f2_(check_dim(x)); }
  Vector argmin(const Vector& xk, const Vector& g2) const {
    return argmin_(check_dim(xk), check_dim(g2));
  }

  /// f1(x) - f2(x); +inf outside dom f1.
  double objective(const Vector& x) const {
    const auto a = f1(x);
    if (!a.in_domain()) return std::numeric_limits<double>::infinity();
    return a.value - f2(x).value;
  }

 private:
  const Vector& check_dim(const Vector& x) const {
    if (x.size() != dimension_) {
      throw std::invalid_argument("point dimension " + std::to_string(x.size()) +
                                  " does not match instance dimension " +
                                  std::to_string(dimension_));
    }
    return x;
  }

  std::string name_;
  int dimension_;
  Oracle f1_;
  Oracle f2_;
  ArgminOracle argmin_;
  ClassParams params1_;
  ClassParams params2_;
  double f_star_;
  std::optional<Vector> default_start_;
};

// ---------------------------------------------------------------------------
// Quadratic family: f_i(x) = 1/2 x'Q_i x + b_i'x.

namespace detail {

inline void require_symmetric(const Matrix& Q, const char* what) {
  if (Q.rows() != Q.cols()) throw std::invalid_argument(std::string(what) + " is not square");
  const double scale = 1.0 + Q.cwiseAbs().maxCoeff();
  if ((Q - Q.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw std::invalid_argument(std::string(what) + " is not symmetric");
  }
}

inline std::pair<double, double> eig_range(const Matrix& Q) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(Q, Eigen::EigenvaluesOnly);
  return {es.eigenvalues().minCoeff(), es.eigenvalues().maxCoeff()};
}

inline ClassParams quadratic_class(double lo, double hi) {
  const double tol = 1e-12 * (1.0 + std::abs(hi));
  if (hi <= tol) return ClassParams(0.0, Smoothness::infinite());  // affine
  const double mu = std::max(lo, 0.0);
  if (hi - mu <= tol) return ClassParams(0.0, Smoothness(hi));  // isotropic
  return ClassParams(mu, Smoothness(hi));
}

}  // namespace detail

/// Class parameters the quadratic family declares for (Q1, Q2): spectral
/// extremes, with mu1 relaxed to 0 when needed so that L2 > mu1.
inline std::pair<ClassParams, ClassParams> quadratic_class_params(const Matrix& Q1,
                                                                  const Matrix& Q2) {
  auto [lo1, hi1] = detail::eig_range(Q1);
  auto [lo2, hi2] = detail::eig_range(Q2);
  ClassParams p1 = detail::quadratic_class(lo1, hi1);
  ClassParams p2 = detail::quadratic_class(lo2, hi2);
  if (p2.L.is_finite() && !(p2.L.value() > p1.mu)) p1 = ClassParams(0.0, p1.L);
  return {p1, p2};
}

/// Quadratic DC instance with explicitly declared classes. The declaration
/// is checked against the spectra (mu_i <= lambda_min(Q_i), L_i >= lambda_max(Q_i)).
inline DCInstance make_quadratic_instance(const Matrix& Q1, const Vector& b1, const Matrix& Q2,
                                          const Vector& b2, ClassParams params1,
                                          ClassParams params2,
                                          std::optional<double> f_star = std::nullopt) {
  detail::require_symmetric(Q1, "Q1");
  detail::require_symmetric(Q2, "Q2");
  const auto n = Q1.rows();
  if (Q2.rows() != n || b1.size() != n || b2.size() != n) {
    throw std::invalid_argument("quadratic instance: inconsistent dimensions");
  }
  auto [lo1, hi1] = detail::eig_range(Q1);
  auto [lo2, hi2] = detail::eig_range(Q2);
  if (lo2 < -1e-12 * (1.0 + std::abs(hi2)) || lo1 < -1e-12 * (1.0 + std::abs(hi1))) {
    throw std::invalid_argument("quadratic instance: Q1 and Q2 must be PSD");
  }
  auto declared_ok = [](const ClassParams& p, double lo, double hi) {
    const double tol = 1e-10 * (1.0 + std::abs(hi));
    if (p.mu > lo + tol) return false;
    if (p.L.is_finite() && p.L.value() < hi - tol) return false;
    return true;
  };
  if (!declared_ok(params1, lo1, hi1) || !declared_ok(params2, lo2, hi2)) {
    throw std::invalid_argument("quadratic instance: declared classes do not contain f1, f2");
  }

  double fstar = 0.0;
  if (f_star) {
    fstar = *f_star;
  } else {
    if (!(lo1 > hi2)) {
      throw std::invalid_argument(
          "quadratic instance rejected: lambda_max(Q2) >= lambda_min(Q1), f may be unbounded "
          "below; supply f_star");
    }
    const Matrix H = Q1 - Q2;
    const Vector d = b1 - b2;
    fstar = -0.5 * d.dot(H.ldlt().solve(d));
  }

  Oracle f1 = [Q1, b1](const Vector& x) {
    return OracleResult{0.5 * x.dot(Q1 * x) + b1.dot(x), Vector(Q1 * x + b1)};
  };
  Oracle f2 = [Q2, b2](const Vector& x) {
    return OracleResult{0.5 * x.dot(Q2 * x) + b2.dot(x), Vector(Q2 * x + b2)};
  };
  // Q1 x + b1 = g2
  auto qr = std::make_shared<Eigen::CompleteOrthogonalDecomposition<Matrix>>(Q1);
  ArgminOracle argmin = [Q1, b1, qr](const Vector&, const Vector& g2) {
    Vector rhs = g2 - b1;
    Vector x = qr->solve(rhs);
    if ((Q1 * x - rhs).norm() > 1e-9 * (1.0 + rhs.norm())) {
      throw std::runtime_error("quadratic subproblem has no minimizer (g2 - b1 not in range(Q1))");
    }
    return x;
  };
  return DCInstance("quadratic", static_cast<int>(n), std::move(f1), std::move(f2),
                    std::move(argmin), params1, params2, fstar);
}

/// Quadratic DC instance with classes derived by quadratic_class_params.
inline DCInstance make_quadratic_instance(const Matrix& Q1, const Vector& b1, const Matrix& Q2,
                                          const Vector& b2,
                                          std::optional<double> f_star = std::nullopt) {
  detail::require_symmetric(Q1, "Q1");
  detail::require_symmetric(Q2, "Q2");
  if (Q1.rows() != Q2.rows()) throw std::invalid_argument("quadratic instance: Q1, Q2 sizes differ");
  auto [p1, p2] = quadratic_class_params(Q1, Q2);
  return make_quadratic_instance(Q1, b1, Q2, b2, p1, p2, f_star);
}

// ---------------------------------------------------------------------------
// Worst-case (tightness) instance on the real line.

/// Breakpoints of the piecewise tightness function: beta_i = i-1,
/// alpha_i = i-U for i = 1..N+1, beta_{N+2} = +inf.
struct TightnessExampleParams {
  double L1 = 0.0;
  int N = 0;
  double U = 0.0;

  TightnessExampleParams(double L1_, int N_) : L1(L1_), N(N_) {
    if (!(L1 > 0.0) || !std::isfinite(L1)) throw std::invalid_argument("tightness: L1 must be > 0");
    if (N < 0) throw std::invalid_argument("tightness: N must be >= 0");
    U = std::sqrt(2.0 / (L1 * (N + 1)));
    if (!(U < 1.0)) {
      throw std::invalid_argument("tightness instance needs U = sqrt(2/(L1(N+1))) < 1, got U = " +
                                  std::to_string(U));
    }
  }

  double alpha(int i) const { return i - U; }
  double beta(int i) const {
    return i == N + 2 ? std::numeric_limits<double>::infinity() : static_cast<double>(i - 1);
  }
  /// Value the example predicts for min_k |g1^k - g2^k|.
  double predicted_gap() const { return std::sqrt(2.0 * L1 / (N + 1)); }
};

namespace detail {

struct TightnessF1 {
  TightnessExampleParams p;

  // value and derivative (f1 is C^1)
  std::pair<double, double> eval(double x) const {
    const double L = p.L1, U = p.U;
    if (x < 0.0) return {0.5 * L * x * x, L * x};
    int i = static_cast<int>(std::floor(x)) + 1;  // beta_i <= x < beta_{i+1}
    if (i > p.N + 1) i = p.N + 1;
    const double bi = p.beta(i);
    if (x < p.alpha(i) && i <= p.N + 1 && x >= bi) {
      const double v = L * U * bi * (x - bi) + bi * L * U * U / 2.0 + bi * (bi - 1.0) * L * U / 2.0;
      return {v, L * U * bi};
    }
    const double c = i * (1.0 - U);
    const double v = 0.5 * L * (x - c) * (x - c) + L * U * i * (i - 1) * (1.0 - U) / 2.0;
    return {v, L * (x - c)};
  }

  // Smallest minimizer of f1(x) - g x, i.e. left end of {x : f1'(x) = g}.
  double argmin(double g) const {
    const double L = p.L1, U = p.U;
    if (g < 0.0) return g / L;
    const double t = g / (L * U);
    const double r = std::round(t);
    if (std::abs(t - r) <= 1e-12 * std::max(1.0, t) && r <= p.N) {
      return r;  // flat stretch [beta_{r+1}, alpha_{r+1}] with slope L U r
    }
    int i = static_cast<int>(std::floor(t)) + 1;  // L U (i-1) < g < L U i
    if (i > p.N + 1) i = p.N + 1;
    return g / L + i * (1.0 - U);
  }
};

struct TightnessF2 {
  TightnessExampleParams p;

  // value and left end of the subdifferential
  std::pair<double, double> eval(double x) const {
    const double L = p.L1, U = p.U;
    double best = -std::numeric_limits<double>::infinity();
    for (int i = 1; i <= p.N + 1; ++i) {
      best = std::max(best, L * U * (i - 1) * (x - i) + i * (i - 1) * L * U / 2.0);
    }
    const double tol = 1e-12 * (1.0 + std::abs(best));
    double slope = std::numeric_limits<double>::infinity();
    for (int i = 1; i <= p.N + 1; ++i) {
      const double v = L * U * (i - 1) * (x - i) + i * (i - 1) * L * U / 2.0;
      if (v >= best - tol) slope = std::min(slope, L * U * (i - 1));
    }
    return {best, slope};
  }
};

}  // namespace detail

/// The piecewise instance for which the gradient-gap bound with L2 = inf is
/// attained. f1 in F_{0,L1}, f2 in F_{0,inf}, f_star = 0, start x^1 = N+1.
/// f2 selects the left end of its subdifferential; the subproblem oracle
/// returns the left end of the minimizer set.
inline DCInstance make_tightness_instance(double L1, int N) {
  const TightnessExampleParams tp(L1, N);
  const detail::TightnessF1 f1{tp};
  const detail::TightnessF2 f2{tp};
  Oracle o1 = [f1](const Vector& x) {
    auto [v, d] = f1.eval(x(0));
    return OracleResult{v, Vector::Constant(1, d)};
  };
  Oracle o2 = [f2](const Vector& x) {
    auto [v, d] = f2.eval(x(0));
    return OracleResult{v, Vector::Constant(1, d)};
  };
  ArgminOracle am = [f1](const Vector&, const Vector& g2) {
    return Vector::Constant(1, f1.argmin(g2(0)));
  };
  return DCInstance("tightness", 1, std::move(o1), std::move(o2), std::move(am),
                    ClassParams(0.0, Smoothness(L1)), ClassParams(0.0, Smoothness::infinite()), 0.0,
                    Vector::Constant(1, N + 1.0));
}

// ---------------------------------------------------------------------------
// Nonsmooth counterexample on x >= 0.

namespace detail {

struct CounterexamplePieces {
  int max_terms;

  static double p2n(int n) { return std::ldexp(1.0, -n); }

  // Piece n of f1: -n(x - 2^{-n}) + 2 - 2^{1-n} - n 2^{-n}
  static double piece1(int n, double x) {
    return -n * (x - p2n(n)) + 2.0 - 2.0 * p2n(n) - n * p2n(n);
  }
  // Piece n of f2: -(n+1)(x - 2^{-n}) + 2 - 3(2^{-n}) - n 2^{-n}
  static double piece2(int n, double x) {
    return -(n + 1) * (x - p2n(n)) + 2.0 - 3.0 * p2n(n) - n * p2n(n);
  }

  // value and right end of the subdifferential (largest active slope)
  template <class Piece>
  std::pair<double, double> eval(double x, Piece piece, int slope_offset) const {
    double best = -std::numeric_limits<double>::infinity();
    for (int n = 0; n <= max_terms; ++n) best = std::max(best, piece(n, x));
    const double tol = 1e-14 * (1.0 + std::abs(best));
    int nmin = max_terms;
    for (int n = 0; n <= max_terms; ++n) {
      if (piece(n, x) >= best - tol) {
        nmin = n;
        break;
      }
    }
    return {best, -static_cast<double>(nmin + slope_offset)};
  }

  // Smallest minimizer over x >= 0 of f1(x) - g x.
  double argmin(double g) const {
    if (g > 0.0) throw std::runtime_error("counterexample subproblem unbounded for g2 > 0");
    const double t = -g;
    const double r = std::round(t);
    if (std::abs(t - r) <= 1e-12 * std::max(1.0, t)) {
      const int m = static_cast<int>(r);
      if (m >= max_terms) return 0.0;
      return p2n(m);  // slope -m on [2^{-m}, 2^{1-m}]
    }
    const int m = static_cast<int>(std::floor(t));  // -(m+1) < g < -m
    if (m >= max_terms) return 0.0;
    return p2n(m);
  }
};

}  // namespace detail

/// The DC function of the second termination criterion: f = f1 - f2 on
/// x >= 0 (+inf elsewhere) with the infinite maxima truncated at n <= max_terms.
/// For iterates above 2^{-max_terms} the truncation is exact. Both oracles
/// select the right end of the subdifferential.
inline DCInstance make_nonsmooth_counterexample(int max_terms) {
  if (max_terms < 2) throw std::invalid_argument("counterexample: max_terms must be >= 2");
  const detail::CounterexamplePieces pieces{max_terms};
  Oracle o1 = [pieces](const Vector& x) {
    if (x(0) < 0.0) return OracleResult::outside_domain();
    auto [v, d] = pieces.eval(x(0), &detail::CounterexamplePieces::piece1, 0);
    return OracleResult{v, Vector::Constant(1, d)};
  };
  Oracle o2 = [pieces](const Vector& x) {
    auto [v, d] = pieces.eval(x(0), &detail::CounterexamplePieces::piece2, 1);
    return OracleResult{v, Vector::Constant(1, d)};
  };
  ArgminOracle am = [pieces](const Vector&, const Vector& g2) {
    return Vector::Constant(1, pieces.argmin(g2(0)));
  };
  return DCInstance("nonsmooth-counterexample", 1, std::move(o1), std::move(o2), std::move(am),
                    ClassParams(0.0, Smoothness::infinite()),
                    ClassParams(0.0, Smoothness::infinite()), 0.0, Vector::Constant(1, 1.0));
}

// ---------------------------------------------------------------------------
// PL quadratic family: f1 = L1/2 |x|^2, f2 = a/2 |x|^2 with 0 <= a < L1.

/// f = (L1-a)/2 |x|^2 satisfies the PL inequality with eta = L1 - a, f_star = 0.
inline DCInstance make_pl_quadratic(double L1, double a, int dimension = 1) {
  if (!(L1 > 0.0) || !std::isfinite(L1)) throw std::invalid_argument("pl-quadratic: L1 must be > 0");
  if (!(a >= 0.0 && a < L1)) throw std::invalid_argument("pl-quadratic: need 0 <= a < L1");
  Oracle o1 = [L1](const Vector& x) { return OracleResult{0.5 * L1 * x.squaredNorm(), Vector(L1 * x)}; };
  Oracle o2 = [a](const Vector& x) { return OracleResult{0.5 * a * x.squaredNorm(), Vector(a * x)}; };
  ArgminOracle am = [L1](const Vector&, const Vector& g2) { return Vector(g2 / L1); };
  const ClassParams p2 = a > 0.0 ? ClassParams(0.0, Smoothness(a))
                                 : ClassParams(0.0, Smoothness::infinite());
  return DCInstance("pl-quadratic", dimension, std::move(o1), std::move(o2), std::move(am),
                    ClassParams(0.0, Smoothness(L1)), p2, 0.0, Vector::Ones(dimension));
}

/// PL modulus of the pl-quadratic family.
inline double pl_quadratic_eta(double L1, double a) { return L1 - a; }

}  // namespace dcapep
