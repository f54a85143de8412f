#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>

#include "dcapep/dca.hpp"
#include "dcapep/ext_value.hpp"

namespace dcapep {

enum class Theorem {
  thm31_i,
  thm31_ii,
  cor31_i,
  cor31_ii,
  cor31_iii,
  prop31_i,
  prop31_ii,
  thm41,
  cor41,
  thm51
};

inline const char* to_string(Theorem t) {
  switch (t) {
    case Theorem::thm31_i: return "thm31_i";
    case Theorem::thm31_ii: return "thm31_ii";
    case Theorem::cor31_i: return "cor31_i";
    case Theorem::cor31_ii: return "cor31_ii";
    case Theorem::cor31_iii: return "cor31_iii";
    case Theorem::prop31_i: return "prop31_i";
    case Theorem::prop31_ii: return "prop31_ii";
    case Theorem::thm41: return "thm41";
    case Theorem::cor41: return "cor41";
    case Theorem::thm51: return "thm51";
  }
  return "?";
}

inline Theorem theorem_from_string(const std::string& s) {
  for (Theorem t : {Theorem::thm31_i, Theorem::thm31_ii, Theorem::cor31_i, Theorem::cor31_ii,
                    Theorem::cor31_iii, Theorem::prop31_i, Theorem::prop31_ii, Theorem::thm41,
                    Theorem::cor41, Theorem::thm51}) {
    if (s == to_string(t)) return t;
  }
  throw std::invalid_argument("unknown theorem tag '" + s + "'");
}

struct BoundRequest {
  Theorem theorem = Theorem::thm31_i;
  ClassParams params1;
  ClassParams params2;
  int N = 1;
  double Delta = 1.0;
  double eta = 0.0;
};

struct BoundResult {
  double value = 0.0;
  std::map<std::string, double> constants;
  std::string case_taken;
};

/// Raised when the requested theorem's hypothesis or case condition fails.
class BoundInapplicable : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

namespace detail {

inline double ext_display(const ExtValue& v) {
  if (v.is_finite()) return v.fin();
  return v.inf_coef() > 0 ? std::numeric_limits<double>::infinity()
                          : -std::numeric_limits<double>::infinity();
}

inline void check_common(const BoundRequest& r, bool standing = true) {
  r.params1.validate();
  r.params2.validate();
  if (standing && r.params1.L.is_finite() && !(r.params1.L.value() > r.params2.mu)) {
    throw std::invalid_argument("parameters violate L1 > mu2");
  }
  if (standing && r.params2.L.is_finite() && !(r.params2.L.value() > r.params1.mu)) {
    throw std::invalid_argument("parameters violate L2 > mu1");
  }
  if (r.N < 1) throw std::invalid_argument("N must be >= 1");
  if (!(r.Delta >= 0.0) || !std::isfinite(r.Delta)) {
    throw std::invalid_argument("Delta must be finite and >= 0");
  }
}

inline double sqrt_ratio(const ExtValue& num, const ExtValue& den, double Delta) {
  const ExtValue q = num / den;
  if (!q.is_finite()) throw std::domain_error("bound evaluates to infinity");
  const double v = q.value() * Delta;
  if (!(v >= 0.0)) throw std::domain_error("bound radicand is negative");
  return std::sqrt(v);
}

/// Gradient-gap constants of the first case in extended arithmetic. The
/// moduli may be infinite; products of two infinities do not occur when at
/// least one L is finite.
struct GapConstants {
  ExtValue A, B, C;
};

inline GapConstants gap_constants_i(double mu1, ExtValue L1, double mu2, ExtValue L2) {
  const int I12 = indicator_nonneg(L1 - L2);
  // At L1 = L2 both indicators are 1; dropping the second gives the same
  // value wherever that is defined and removes the 0/0 at mu1 + mu2 = L.
  const int I21 = I12 ? 0 : indicator_nonneg(L2 - L1);
  const ExtValue core = L1 * L2 - ExtValue(mu1) * L2 * ExtValue(I12) - ExtValue(mu2) * L1 * ExtValue(I21);
  GapConstants k;
  k.A = ExtValue(2.0) * core;
  k.B = L1 + L2 + ExtValue(mu1) * (L1 / L2 - ExtValue(3.0)) * ExtValue(I12) +
        ExtValue(mu2) * (L2 / L1 - ExtValue(3.0)) * ExtValue(I21);
  k.C = core / (L1 - ExtValue(mu2));
  return k;
}

// Second case: numerator and denominator of the radicand (per unit Delta).
inline std::pair<ExtValue, ExtValue> gap_ratio_ii(double mu1, ExtValue L1, ExtValue L2, int N) {
  const ExtValue num = ExtValue(2.0) * (L1 * L2 - ExtValue(mu1) * L2);
  const ExtValue den = (L1 + L2 + ExtValue(mu1) * (L1 / L2 - ExtValue(3.0))) * ExtValue(N) + L1 -
                       ExtValue(mu1);
  return {num, den};
}

// true when L1 - mu2 <= L2
inline bool gap_case_i(double mu2, ExtValue L1, ExtValue L2) {
  return indicator_nonneg(L2 - (L1 - ExtValue(mu2))) == 1;
}

inline BoundResult gap_bound_general(double mu1, ExtValue L1, double mu2, ExtValue L2, int N,
                                     double Delta, bool want_case_i) {
  if (!L1.is_finite() && !L2.is_finite()) {
    throw BoundInapplicable("theorem inapplicable: L1 and L2 are both infinite");
  }
  const bool case_i = gap_case_i(mu2, L1, L2);
  if (want_case_i && !case_i) {
    throw BoundInapplicable("case (i) requires L1 - mu2 <= L2");
  }
  if (!want_case_i && case_i) {
    throw BoundInapplicable("case (ii) requires L1 - mu2 > L2");
  }
  BoundResult res;
  if (case_i) {
    const GapConstants k = gap_constants_i(mu1, L1, mu2, L2);
    res.value = sqrt_ratio(k.A, k.B * ExtValue(N) + k.C, Delta);
    res.constants["A"] = ext_display(k.A);
    res.constants["B"] = ext_display(k.B);
    res.constants["C"] = ext_display(k.C);
    res.case_taken = "L1-mu2<=L2";
  } else {
    auto [num, den] = gap_ratio_ii(mu1, L1, L2, N);
    res.value = sqrt_ratio(num, den, Delta);
    res.case_taken = "L1-mu2>L2";
  }
  return res;
}

}  // namespace detail

/// Which branch of the gradient-gap theorem applies to (params1, params2).
inline Theorem gradient_gap_case(const ClassParams& p1, const ClassParams& p2) {
  return detail::gap_case_i(p2.mu, ExtValue::of(p1.L), ExtValue::of(p2.L)) ? Theorem::thm31_i
                                                                             : Theorem::thm31_ii;
}

/// Bound on min_{1<=k<=N+1} |g1^k - g2^k|.
inline BoundResult gradient_gap_bound(const BoundRequest& req) {
  detail::check_common(req);
  const auto& p1 = req.params1;
  const auto& p2 = req.params2;
  const ExtValue L1 = ExtValue::of(p1.L), L2 = ExtValue::of(p2.L);
  const double D = req.Delta;
  const double N = req.N;
  BoundResult res;
  switch (req.theorem) {
    case Theorem::thm31_i:
    case Theorem::thm31_ii:
      return detail::gap_bound_general(p1.mu, L1, p2.mu, L2, req.N, D,
                                       req.theorem == Theorem::thm31_i);
    case Theorem::cor31_i: {
      if (!p1.L.is_infinite() || !p2.L.is_finite()) {
        throw BoundInapplicable("cor31_i requires L1 = inf and L2 < inf");
      }
      const double l2 = p2.L.value();
      res.value = std::sqrt(2.0 * l2 * l2 * D / (N * (l2 + p1.mu) + l2));
      res.case_taken = "L1=inf";
      return res;
    }
    case Theorem::cor31_ii: {
      if (!p2.L.is_infinite() || !p1.L.is_finite()) {
        throw BoundInapplicable("cor31_ii requires L2 = inf and L1 < inf");
      }
      const double l1 = p1.L.value(), m2 = p2.mu;
      res.value = std::sqrt(2.0 * l1 * l1 * (l1 - m2) * D / ((l1 * l1 - m2 * m2) * N + l1 * l1));
      res.case_taken = "L2=inf";
      return res;
    }
    case Theorem::cor31_iii: {
      if (!p1.L.is_finite() || !p2.L.is_finite() || p1.mu != 0.0 || p2.mu != 0.0) {
        throw BoundInapplicable("cor31_iii requires finite L1, L2 and mu1 = mu2 = 0");
      }
      const double l1 = p1.L.value(), l2 = p2.L.value();
      res.value = std::sqrt(2.0 * l1 * l2 * D / ((l1 + l2) * N + std::max(l1, l2)));
      res.case_taken = "mu1=mu2=0";
      return res;
    }
    default:
      throw std::invalid_argument(std::string("gradient_gap_bound does not evaluate ") +
                                  to_string(req.theorem));
  }
}

namespace detail {

// The iterate-gap formulas written out in inverse moduli.
inline BoundResult iterate_gap_direct(const ClassParams& p1, const ClassParams& p2, int N,
                                      double Delta, bool want_case_i) {
  const ExtValue im1 = ExtValue::reciprocal_of(p1.mu), im2 = ExtValue::reciprocal_of(p2.mu);
  const ExtValue iL1 = ExtValue::reciprocal_of(p1.L), iL2 = ExtValue::reciprocal_of(p2.L);
  const ExtValue mu1(p1.mu), mu2(p2.mu);
  const bool case_i = indicator_nonneg(im1 - (im2 - iL1)) == 1;
  if (want_case_i != case_i) {
    throw BoundInapplicable(want_case_i ? "case (i) requires 1/mu2 - 1/L1 <= 1/mu1"
                                        : "case (ii) requires 1/mu2 - 1/L1 > 1/mu1");
  }
  // ties resolved as in gap_constants_i on the dual pair
  const int i21 = indicator_nonneg(im2 - im1);
  const ExtValue I21(i21);
  const ExtValue I12(i21 ? 0 : indicator_nonneg(im1 - im2));
  const ExtValue three(3.0);
  BoundResult res;
  if (case_i) {
    const ExtValue core = im2 * im1 - iL2 * im1 * I21 - iL1 * im2 * I12;
    const ExtValue A = ExtValue(2.0) * core;
    const ExtValue B = im2 + im1 + iL2 * (mu1 * im2 - three) * I21 + iL1 * (mu2 * im1 - three) * I12;
    const ExtValue C = core / (im2 - iL1);
    res.value = sqrt_ratio(A, B * ExtValue(N) + C, Delta);
    res.constants["A"] = ext_display(A);
    res.constants["B"] = ext_display(B);
    res.constants["C"] = ext_display(C);
    res.case_taken = "1/mu2-1/L1<=1/mu1";
  } else {
    const ExtValue num = ExtValue(2.0) * (im2 * im1 - iL2 * im1 * I21);
    const ExtValue den = (im2 + im1 + iL2 * (mu1 * im2 - three) * I21) * ExtValue(N) + im2 - iL2;
    res.value = sqrt_ratio(num, den, Delta);
    res.case_taken = "1/mu2-1/L1>1/mu1";
  }
  return res;
}

}  // namespace detail

inline Theorem iterate_gap_case(const ClassParams& p1, const ClassParams& p2) {
  const ExtValue im1 = ExtValue::reciprocal_of(p1.mu), im2 = ExtValue::reciprocal_of(p2.mu);
  const ExtValue iL1 = ExtValue::reciprocal_of(p1.L);
  return indicator_nonneg(im1 - (im2 - iL1)) == 1 ? Theorem::prop31_i : Theorem::prop31_ii;
}

/// Bound on min_{1<=k<=N} |x^{k+1} - x^k|. Evaluated twice: through the
/// gradient-gap theorem applied to the dual pair (f2*, f1*), whose classes
/// have moduli (1/L2, 1/mu2) and (1/L1, 1/mu1), and directly from the
/// inverse-moduli formulas. The two must agree to 1e-12 (relative).
inline BoundResult iterate_gap_bound(const BoundRequest& req) {
  detail::check_common(req);
  if (req.theorem != Theorem::prop31_i && req.theorem != Theorem::prop31_ii) {
    throw std::invalid_argument(std::string("iterate_gap_bound does not evaluate ") +
                                to_string(req.theorem));
  }
  const auto& p1 = req.params1;
  const auto& p2 = req.params2;
  if (!(p1.mu > 0.0) && !(p2.mu > 0.0)) {
    throw BoundInapplicable("iterate bound inapplicable: mu1 = mu2 = 0");
  }
  const bool want_i = req.theorem == Theorem::prop31_i;
  BoundResult direct = detail::iterate_gap_direct(p1, p2, req.N, req.Delta, want_i);

  const double dual_mu1 = p2.L.reciprocal();
  const ExtValue dual_L1 = ExtValue::reciprocal_of(p2.mu);
  const double dual_mu2 = p1.L.reciprocal();
  const ExtValue dual_L2 = ExtValue::reciprocal_of(p1.mu);
  const BoundResult dual =
      detail::gap_bound_general(dual_mu1, dual_L1, dual_mu2, dual_L2, req.N, req.Delta, want_i);

  const double diff = std::abs(dual.value - direct.value);
  if (diff > 1e-12 * std::max(1.0, std::abs(direct.value))) {
    throw std::logic_error("iterate bound: dual route " + std::to_string(dual.value) +
                           " and direct formula " + std::to_string(direct.value) + " disagree");
  }
  direct.constants["dual_route"] = dual.value;
  direct.constants["direct"] = direct.value;
  return direct;
}

/// Bound on min_{1<=k<=N} T(x^{k+1}).
inline double model_decrease_bound(const ClassParams& p1, const ClassParams& p2, int N,
                                   double Delta) {
  p1.validate();
  p2.validate();
  if (N < 1) throw std::invalid_argument("N must be >= 1");
  if (!(Delta >= 0.0)) throw std::invalid_argument("Delta must be >= 0");
  if (p2.L.is_finite() && !(p2.L.value() > p1.mu)) {
    throw BoundInapplicable("model decrease bound requires L2 > mu1");
  }
  const ExtValue L1 = ExtValue::of(p1.L), L2 = ExtValue::of(p2.L);
  const ExtValue n(static_cast<double>(N));
  const ExtValue b1 = L1 / (n * (L1 + ExtValue(p2.mu)));
  const ExtValue b2 = L2 / (n * (L2 + ExtValue(p1.mu)) - ExtValue(p1.mu));
  return std::min(b1.value(), b2.value()) * Delta;
}

/// One-step contraction factor of f - f_star under the PL inequality with modulus eta.
inline double pl_contraction_factor(const ClassParams& p1, const ClassParams& p2, double eta) {
  p1.validate();
  p2.validate();
  if (p1.L.is_infinite() && p2.L.is_infinite()) {
    throw BoundInapplicable("PL factor inapplicable: L1 and L2 are both infinite");
  }
  if (!(eta > 0.0) || !std::isfinite(eta)) throw std::invalid_argument("eta must be finite and > 0");
  if (p1.L.is_finite() && eta > p1.L.value()) {
    throw BoundInapplicable("eta > L1 makes the contraction factor negative");
  }
  return (1.0 - eta * p1.L.reciprocal()) / (1.0 + eta * p2.L.reciprocal());
}

/// Dispatches any request. thm41/cor41/thm51 report their value in the
/// `value` field; cor41 additionally requires both moduli infinite.
inline BoundResult evaluate_bound(const BoundRequest& req) {
  switch (req.theorem) {
    case Theorem::prop31_i:
    case Theorem::prop31_ii:
      return iterate_gap_bound(req);
    case Theorem::thm41: {
      detail::check_common(req, false);
      BoundResult r;
      r.value = model_decrease_bound(req.params1, req.params2, req.N, req.Delta);
      r.case_taken = "min(B1,B2)";
      return r;
    }
    case Theorem::cor41: {
      detail::check_common(req, false);
      if (!req.params1.L.is_infinite() || !req.params2.L.is_infinite()) {
        throw BoundInapplicable("cor41 requires L1 = L2 = inf");
      }
      BoundResult r;
      r.value = req.Delta / req.N;
      r.case_taken = "L1=L2=inf";
      return r;
    }
    case Theorem::thm51: {
      BoundResult r;
      r.value = pl_contraction_factor(req.params1, req.params2, req.eta);
      r.case_taken = "one-step";
      return r;
    }
    default:
      return gradient_gap_bound(req);
  }
}

/// Delta = f(x^1) - f_star from a trace.
inline double delta_from_trace(const Trace& trace, double f_star) {
  if (trace.records.empty()) throw std::invalid_argument("empty trace");
  return trace.records.front().f() - f_star;
}

}  // namespace dcapep
