#pragma once

// Dual certificates for the PEP bounds: weighted constraint aggregations that
// equal minus a sum of squares identically in all lifted variables.
//
// Every certificate lives in the PEP variable space with Delta kept as an
// extra scalar, and states
//
//   objective - bound + sum_t w_t * slack_t + sum_q c_q * |v_q|^2  ==  0,
//
// where each slack_t >= 0 on feasible points and every weight is >= 0.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dcapep/bounds.hpp"
#include "dcapep/ext_value.hpp"
#include "dcapep/pep.hpp"

namespace dcapep::certify {

using pep::Builder;
using pep::Layout;
using pep::PepKind;
using pep::QExpr;
using pep::VExpr;

enum class CertCase {
  thm31_case_L1geL2,
  thm31_case_L1ltL2,
  thm31_case_ii,
  thm41_bound_B1,
  thm41_bound_B2,
  thm51
};

inline const std::vector<CertCase>& all_cases() {
  static const std::vector<CertCase> v{CertCase::thm31_case_L1geL2, CertCase::thm31_case_L1ltL2,
                                       CertCase::thm31_case_ii,     CertCase::thm41_bound_B1,
                                       CertCase::thm41_bound_B2,    CertCase::thm51};
  return v;
}

inline const char* to_string(CertCase c) {
  switch (c) {
    case CertCase::thm31_case_L1geL2: return "thm31_case_L1geL2";
    case CertCase::thm31_case_L1ltL2: return "thm31_case_L1ltL2";
    case CertCase::thm31_case_ii: return "thm31_case_ii";
    case CertCase::thm41_bound_B1: return "thm41_bound_B1";
    case CertCase::thm41_bound_B2: return "thm41_bound_B2";
    case CertCase::thm51: return "thm51";
  }
  return "?";
}

inline CertCase case_from_string(const std::string& s) {
  for (CertCase c : all_cases()) {
    if (s == to_string(c)) return c;
  }
  throw std::invalid_argument("unknown certificate case '" + s + "'");
}

/// printed: multipliers exactly as stated. repaired: minimal edit that makes
/// the identity hold (differs from printed only where printed fails).
enum class Variant { printed, repaired };

inline const char* to_string(Variant v) { return v == Variant::printed ? "printed" : "repaired"; }

/// Whether the printed multipliers of a case need a repair.
inline bool has_repair(CertCase c) { return c == CertCase::thm31_case_ii || c == CertCase::thm41_bound_B2; }

struct CertParams {
  ClassParams p1;
  ClassParams p2;
  int N = 1;
  double Delta = 1.0;
  double eta = 1.0;
};

inline std::string describe(const CertParams& p) {
  std::ostringstream os;
  os << "mu1=" << p.p1.mu << " L1=" << p.p1.L << " mu2=" << p.p2.mu << " L2=" << p.p2.L << " N=" << p.N
     << " eta=" << p.eta;
  return os.str();
}

class CaseMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Term {
  std::string name;   // PEP row name when the slack is a row of the PEP
  double weight = 0;  // >= 0
  QExpr slack;        // >= 0 on feasible points
  bool pep_row = true;
};

struct SosTerm {
  std::string name;
  double coef = 0;  // >= 0
  VExpr v;
};

struct Certificate {
  CertCase theorem_case = CertCase::thm31_case_L1geL2;
  Variant variant = Variant::printed;
  CertParams params;
  ClassParams eff1, eff2;  // classes whose interpolation rows are used
  PepKind pep_kind = PepKind::gradient_gap;
  Layout layout;
  std::map<std::string, double> multipliers;
  std::vector<std::string> sign_required;  // multipliers that must be >= 0
  double bound_factor = 0;                 // bound = factor * Delta (thm51: factor)
  QExpr objective;
  QExpr bound;
  std::vector<Term> terms;
  std::vector<SosTerm> sos;
  std::vector<std::string> notes;

  double bound_value() const {
    return theorem_case == CertCase::thm51 ? bound_factor : bound_factor * params.Delta;
  }
};

namespace detail {

using E = ExtValue;

inline double val(const E& e, const char* what) {
  if (!e.is_finite()) throw std::domain_error(std::string("certificate quantity is infinite: ") + what);
  return e.value();
}

// beta^{-1} |beta a - alpha b|^2 as a SOS term; zero when alpha = beta = 0.
inline void push_sq(std::vector<SosTerm>& out, const std::string& name, double beta, double alpha,
                    const VExpr& a, const VExpr& b) {
  if (beta == 0.0 && alpha == 0.0) return;
  if (!(beta > 0.0)) throw std::domain_error("sum-of-squares term " + name + " has a nonpositive divisor");
  out.push_back(SosTerm{name, 1.0 / beta, beta * a - alpha * b});
}

inline void check_standing(const CertParams& p) {
  p.p1.validate();
  p.p2.validate();
  if (p.N < 1) throw std::invalid_argument("certificate: N must be >= 1");
  if (!(p.Delta >= 0.0) || !std::isfinite(p.Delta)) throw std::invalid_argument("certificate: bad Delta");
}

struct Ctx {
  Certificate c;
  Builder b;
  Ctx(CertCase cc, Variant v, const CertParams& p, PepKind kind, ClassParams e1, ClassParams e2)
      : b(Layout{kind, p.N, true}) {
    c.theorem_case = cc;
    c.variant = v;
    c.params = p;
    c.eff1 = e1;
    c.eff2 = e2;
    c.pep_kind = kind;
    c.layout = Layout{kind, p.N, true};
  }
  void term(const std::string& name, double w, const QExpr& s, bool pep_row = true) {
    if (w == 0.0) return;
    c.terms.push_back(Term{name, w, s, pep_row});
  }
  void mult(const std::string& name, double v, bool sign = true) {
    c.multipliers[name] = v;
    if (sign) c.sign_required.push_back(name);
  }
  QExpr delta_var() const { return b.scalar(b.layout().delta()); }
  // g1^{k} with g1^{N+2} = g2^{N+1}
  VExpr g(int k) const { return b.g1(k); }
};

using pep::idx_name;
using pep::pair_name;

// Objective rows of the gradient-gap PEP: slack |g1^k - g2^k|^2 - ell.
inline QExpr gap_obj(const Builder& b, int k) { return b.sq(b.g1(k) - b.g2(k)) - b.ell(); }

inline Certificate thm31_i_ge(const CertParams& p, Variant v) {
  const double m1 = p.p1.mu, m2 = p.p2.mu;
  if (p.p1.L.is_infinite() || p.p2.L.is_infinite()) throw CaseMismatch("L1 >= L2 case needs finite L1, L2");
  const double L1 = p.p1.L.value(), L2 = p.p2.L.value();
  if (!(L1 >= L2)) throw CaseMismatch("L1 >= L2 case fed L1 < L2");
  if (!(L1 - m2 <= L2)) throw CaseMismatch("case (i) needs L1 - mu2 <= L2");
  if (!(L1 > m2 && L2 > m1)) throw CaseMismatch("standing assumptions L1 > mu2, L2 > mu1 violated");
  const int N = p.N;
  Ctx x(CertCase::thm31_case_L1geL2, v, p, PepKind::gradient_gap, p.p1, p.p2);
  const Builder& b = x.b;

  const auto k3 = dcapep::detail::gap_constants_i(m1, E(L1), m2, E(L2));
  const double B = val(k3.A / (k3.B * E(N) + k3.C), "B");
  const double D = (L1 + L2 + m1 * (L1 / L2 - 3)) * N + L2 * (L1 - m1) / (L1 - m2);
  const double lam = 2 * (L1 * L2 - m1 * (2 * L2 - L1)) / D;
  std::vector<double> eta(static_cast<std::size_t>(N + 2), 0.0);
  eta[1] = (L2 - m1) / D;
  for (int k = 2; k <= N; ++k) eta[static_cast<std::size_t>(k)] = (L1 * m1 / L2 + L1 + L2 - 3 * m1) / D;
  double rest = 1.0 - eta[1];
  for (int k = 2; k <= N; ++k) rest -= eta[static_cast<std::size_t>(k)];
  eta[static_cast<std::size_t>(N + 1)] = rest;
  const double etaN1_closed = (L1 * m1 / L2 + L1 - 2 * m1 + L2 * (L1 - m1) / (L1 - m2)) / D;

  const double a1 = m1 * B / (2 * (L1 - m1));
  const double b1 = m1 * B / (2 * L2 * (L1 - m1));
  const double a2 = (-m1 * L2 * L2 - 2 * m1 * m2 * L2 + m1 * L1 * L2 + m1 * m2 * L1 + m2 * L1 * L2) * B /
                    (2 * (L1 - m1) * (L2 - m2));
  const double b2 = (L1 * L2 * m2 - 2 * m1 * m2 * L2 + m1 * m2 * L1 - m1 * L2 * L2 + m1 * L1 * L2) * B /
                    (2 * L2 * (L1 - m1) * (L2 - m2));

  x.mult("B", B);
  x.mult("lambda_bar", lam);
  x.mult("lambda_bar-B", lam - B);
  for (int k = 1; k <= N + 1; ++k) x.mult("eta_bar_" + std::to_string(k), eta[static_cast<std::size_t>(k)]);
  x.mult("eta_bar_N+1_closed_form", etaN1_closed, false);
  x.mult("alpha_bar_1", a1, false);
  x.mult("alpha_bar_2", a2);
  x.mult("beta_bar_1", b1);
  x.mult("beta_bar_2", b2, false);

  for (int k = 1; k <= N + 1; ++k) x.term(idx_name("obj", k), eta[static_cast<std::size_t>(k)], gap_obj(b, k));
  x.term("delta", B, b.delta_slack(0.0));
  x.term(idx_name("lower", N + 1),
         B, b.f1(N + 1) - b.f2(N + 1) - (1.0 / (2.0 * (L1 - m2))) * b.sq(b.g1(N + 1) - b.g2(N + 1)));
  for (int k = 1; k <= N; ++k) x.term(pair_name("f1", k, k + 1), B, b.f1_interp(p.p1, k, k + 1));
  for (int k = 1; k <= N; ++k) {
    x.term(pair_name("f2", k + 1, k), lam, b.f2_interp(p.p2, k + 1, k));
    x.term(pair_name("f2", k, k + 1), lam - B, b.f2_interp(p.p2, k, k + 1));
  }
  for (int k = 1; k <= N; ++k) {
    push_sq(x.c.sos, "sq1(" + std::to_string(k) + ")", b1, a1, x.g(k) - x.g(k + 1), b.x(k) - b.x(k + 1));
    push_sq(x.c.sos, "sq2(" + std::to_string(k) + ")", a2, b2, b.x(k) - b.x(k + 1), x.g(k + 1) - x.g(k + 2));
  }
  x.c.bound_factor = B;
  x.c.objective = b.ell();
  x.c.bound = B * x.delta_var();
  x.c.notes.push_back("eta_bar_{N+1} taken as 1 - eta_bar_1 - sum_{k=2..N} eta_bar_k");
  return x.c;
}

inline Certificate thm31_i_lt(const CertParams& p, Variant v) {
  const double m2 = p.p2.mu;
  if (p.p1.L.is_infinite()) throw CaseMismatch("L1 < L2 case needs finite L1");
  const double L1v = p.p1.L.value();
  const E L1(L1v), L2 = E::of(p.p2.L);
  if (p.p2.L.is_finite() && !(p.p2.L.value() > L1v)) {
    throw CaseMismatch("L1 < L2 case fed L1 >= L2");
  }
  if (!(L1v > m2)) throw CaseMismatch("standing assumption L1 > mu2 violated");
  const int N = p.N;
  const ClassParams e1(0.0, p.p1.L);
  Ctx x(CertCase::thm31_case_L1ltL2, v, p, PepKind::gradient_gap, e1, p.p2);
  const Builder& b = x.b;
  const E mu2(m2), n(N);

  const auto k3 = dcapep::detail::gap_constants_i(0.0, L1, m2, L2);
  const double B = val(k3.A / (k3.B * n + k3.C), "B");
  const E D = (L1 + L2 + mu2 * (L2 / L1 - E(3))) * n + L1 * (L2 - mu2) / (L1 - mu2);
  const double lam = val(E(2) * (L1 * L2 - mu2 * (E(2) * L1 - L2)) / D, "lambda_hat");
  std::vector<double> eta(static_cast<std::size_t>(N + 2), 0.0);
  eta[1] = val((L2 * (L1 + mu2) / L1 - E(2) * mu2) / D, "eta_hat_1");
  for (int k = 2; k <= N; ++k) {
    eta[static_cast<std::size_t>(k)] = val((L2 * (L1 + mu2) / L1 + L1 - E(3) * mu2) / D, "eta_hat_k");
  }
  eta[static_cast<std::size_t>(N + 1)] = val((L1 * (L2 - mu2) / (L1 - mu2) + L1 - mu2) / D, "eta_hat_N+1");

  const double a1 = val(mu2 * E(B) * (E(1) - L1 / L2) / (E(2) * L1 * (E(1) - mu2 / L2)), "alpha_hat_1");
  const double a2 = val(mu2 * L1 * E(B) / (E(2) * (L2 - mu2)), "alpha_hat_2");
  const double b1 = val(mu2 * E(B) * (E(1) - L1 / L2) / (E(2) * L1 * L1 * (E(1) - mu2 / L2)), "beta_hat_1");
  const double b2 = val(mu2 * E(B) / (E(2) * (L2 - mu2)), "beta_hat_2");

  x.mult("B", B);
  x.mult("lambda_hat", lam);
  x.mult("lambda_hat-B", lam - B);
  for (int k = 1; k <= N + 1; ++k) x.mult("eta_hat_" + std::to_string(k), eta[static_cast<std::size_t>(k)]);
  x.mult("alpha_hat_1", a1, false);
  x.mult("alpha_hat_2", a2);
  x.mult("beta_hat_1", b1);
  x.mult("beta_hat_2", b2, false);

  for (int k = 1; k <= N + 1; ++k) x.term(idx_name("obj", k), eta[static_cast<std::size_t>(k)], gap_obj(b, k));
  x.term("delta", B, b.delta_slack(0.0));
  x.term(idx_name("lower", N + 1),
         B, b.f1(N + 1) - b.f2(N + 1) - (1.0 / (2.0 * (L1v - m2))) * b.sq(b.g1(N + 1) - b.g2(N + 1)));
  for (int k = 1; k <= N; ++k) {
    x.term(pair_name("f1", k + 1, k), lam - B, b.f1_interp(e1, k + 1, k));
    x.term(pair_name("f1", k, k + 1), lam, b.f1_interp(e1, k, k + 1));
    x.term(pair_name("f2", k + 1, k), B, b.f2_interp(p.p2, k + 1, k));
  }
  for (int k = 1; k <= N; ++k) {
    push_sq(x.c.sos, "sq1(" + std::to_string(k) + ")", b1, a1, x.g(k) - x.g(k + 1), b.x(k) - b.x(k + 1));
    push_sq(x.c.sos, "sq2(" + std::to_string(k) + ")", a2, b2, b.x(k) - b.x(k + 1), x.g(k + 1) - x.g(k + 2));
  }
  x.c.bound_factor = B;
  x.c.objective = b.ell();
  x.c.bound = B * x.delta_var();
  x.c.notes.push_back("f1 rows use mu1 = 0 (a member of F_{mu1,L1} is in F_{0,L1})");
  return x.c;
}

inline Certificate thm31_ii(const CertParams& p, Variant v) {
  const double m1 = p.p1.mu;
  if (p.p2.L.is_infinite()) throw CaseMismatch("case (ii) needs finite L2");
  const double L2v = p.p2.L.value();
  const E L1 = E::of(p.p1.L), L2(L2v), mu1(m1), n(p.N);
  if (indicator_nonneg(E(L2v) - (L1 - E(p.p2.mu))) == 1) throw CaseMismatch("case (ii) needs L1 - mu2 > L2");
  if (!(L2v > m1)) throw CaseMismatch("standing assumption L2 > mu1 violated");
  const int N = p.N;
  const ClassParams e2(0.0, p.p2.L);
  Ctx x(CertCase::thm31_case_ii, v, p, PepKind::gradient_gap, p.p1, e2);
  const Builder& b = x.b;

  const double Bt = val(E(2) * (L1 * L2 - mu1 * L2) / ((L1 + L2 + mu1 * (L1 / L2 - E(3))) * n + L1 - mu1), "B_tilde");
  const E EB(Bt);
  const double lam = val((L1 * L2 + mu1 * L1 - E(2) * mu1 * L2) * EB / (L2 * (L1 - mu1)), "lambda_tilde");
  const double e1 = val((L2 - mu1) * EB / (E(2) * L2 * (L1 - mu1)), "eta_tilde_1");
  const double eN1 = val((E(2) * L1 * L2 + mu1 * L1 - E(3) * mu1 * L2) * EB / (E(2) * L2 * L2 * (L1 - mu1)),
                         "eta_tilde_N+1");
  const double emid = N > 1 ? (1.0 - e1 - eN1) / (N - 1) : 0.0;
  const double a1 = val(mu1 * EB / (E(2) * (L1 - mu1)), "alpha_tilde_1");
  const double a2 = val(mu1 * EB * (E(1) - L2 / L1) / (E(2) * (E(1) - mu1 / L1)), "alpha_tilde_2");
  const double b1 = val(mu1 * EB / (E(2) * L2 * (L1 - mu1)), "beta_tilde_1");
  const double b2 = val(mu1 * EB * (E(1) - L2 / L1) / (E(2) * L2 * (E(1) - mu1 / L1)), "beta_tilde_2");

  x.mult("B_tilde", Bt);
  x.mult("lambda_tilde", lam);
  x.mult("lambda_tilde-B_tilde", lam - Bt);
  x.mult("eta_tilde_1", e1);
  if (N > 1) x.mult("eta_tilde_mid", emid);
  x.mult("eta_tilde_N+1", eN1);
  x.mult("alpha_tilde_1", a1, false);
  x.mult("alpha_tilde_2", a2);
  x.mult("beta_tilde_1", b1);
  x.mult("beta_tilde_2", b2, false);

  x.term(idx_name("obj", 1), e1, gap_obj(b, 1));
  for (int k = 2; k <= N; ++k) x.term(idx_name("obj", k), emid, gap_obj(b, k));
  x.term(idx_name("obj", N + 1), eN1, gap_obj(b, N + 1));
  x.term("delta", Bt, b.delta_slack(0.0));
  if (v == Variant::printed) {
    x.term("lower_plain(" + std::to_string(N + 1) + ")", Bt, b.f1(N + 1) - b.f2(N + 1), false);
  } else {
    x.term(idx_name("lower", N + 1), Bt,
           b.f1(N + 1) - b.f2(N + 1) - (1.0 / (2.0 * L2v)) * b.sq(b.g1(N + 1) - b.g2(N + 1)));
  }
  for (int k = 1; k <= N; ++k) x.term(pair_name("f1", k, k + 1), Bt, b.f1_interp(p.p1, k, k + 1));
  for (int k = 1; k <= N; ++k) {
    x.term(pair_name("f2", k + 1, k), lam, b.f2_interp(e2, k + 1, k));
    x.term(pair_name("f2", k, k + 1), lam - Bt, b.f2_interp(e2, k, k + 1));
  }
  for (int k = 1; k <= N; ++k) {
    push_sq(x.c.sos, "sq1(" + std::to_string(k) + ")", b1, a1, x.g(k) - x.g(k + 1), b.x(k) - b.x(k + 1));
    push_sq(x.c.sos, "sq2(" + std::to_string(k) + ")", a2, b2, b.x(k) - b.x(k + 1), x.g(k + 1) - x.g(k + 2));
  }
  x.c.bound_factor = Bt;
  x.c.objective = b.ell();
  x.c.bound = Bt * x.delta_var();
  x.c.notes.push_back("f2 rows use mu2 = 0; sum-of-squares terms use the tilde alpha/beta");
  x.c.notes.push_back(v == Variant::printed
                          ? "printed: lower-bound row at N+1 without the gradient term"
                          : "repaired: lower-bound row at N+1 with 1/(2 L2) |g1^{N+1} - g2^{N+1}|^2");
  return x.c;
}

inline Certificate thm41_B1(const CertParams& p, Variant v) {
  if (p.p1.L.is_infinite()) throw CaseMismatch("bound B1 needs finite L1");
  const double L1 = p.p1.L.value(), m2 = p.p2.mu;
  const int N = p.N;
  const ClassParams e1(0.0, p.p1.L);
  const ClassParams e2(m2, Smoothness::infinite());
  Ctx x(CertCase::thm41_bound_B1, v, p, PepKind::model_decrease, e1, e2);
  const Builder& b = x.b;
  const double B1 = L1 / (N * (L1 + m2));
  x.mult("B1", B1);
  x.mult("1/N-B1", 1.0 / N - B1);
  x.mult("B1*mu2/2", B1 * m2 / 2);

  for (int k = 1; k <= N; ++k) x.term(idx_name("obj", k), 1.0 / N, b.model_decrease(k) - b.ell());
  x.term(idx_name("lower", N + 1), B1, b.f1(N + 1) - b.f2(N + 1));
  x.term("delta", B1, b.delta_slack(0.0));
  for (int k = 1; k <= N; ++k) {
    x.term(pair_name("f1", k + 1, k), 1.0 / N - B1, b.f1_interp(e1, k + 1, k));
    x.term(pair_name("f2", k + 1, k), B1, b.f2_interp(e2, k + 1, k));
  }
  for (int k = 1; k <= N; ++k) {
    if (m2 > 0.0) {
      x.c.sos.push_back(SosTerm{"sq(" + std::to_string(k) + ")", B1 * m2 / 2,
                                b.x(k) - b.x(k + 1) - (1.0 / L1) * (b.g1(k) - b.g1(k + 1))});
    }
  }
  x.c.bound_factor = B1;
  x.c.objective = b.ell();
  x.c.bound = B1 * x.delta_var();
  x.c.notes.push_back("f1 rows use mu1 = 0 and f2 rows use L2 = inf");
  return x.c;
}

inline Certificate thm41_B2(const CertParams& p, Variant v) {
  if (p.p2.L.is_infinite()) throw CaseMismatch("bound B2 needs finite L2");
  const double L2 = p.p2.L.value(), m1 = p.p1.mu;
  if (!(L2 > m1)) throw CaseMismatch("bound B2 needs L2 > mu1");
  const int N = p.N;
  const ClassParams e1(m1, Smoothness::infinite());
  const ClassParams e2(0.0, p.p2.L);
  Ctx x(CertCase::thm41_bound_B2, v, p, PepKind::model_decrease, e1, e2);
  const Builder& b = x.b;
  const double B2 = L2 / (N * (L2 + m1) - m1);
  const double mid = N > 1 ? (1.0 - B2) / (N - 1) : 0.0;
  const double al = N > 1 ? mid - B2 : 0.0;
  x.mult("B2", B2);
  if (N > 1) {
    x.mult("alpha", al);
    x.mult("(1-B2)/(N-1)", mid);
  }

  x.term(idx_name("obj", 1), B2, b.model_decrease(1) - b.ell());
  for (int k = 2; k <= N; ++k) x.term(idx_name("obj", k), mid, b.model_decrease(k) - b.ell());
  x.term(idx_name("lower", N + 1), B2, b.f1(N + 1) - b.f2(N + 1));
  x.term("delta", B2, b.delta_slack(0.0));
  for (int k = 2; k <= N; ++k) x.term(pair_name("f1", k + 1, k), al, b.f1_interp(e1, k + 1, k));
  const int top = v == Variant::printed ? N : N - 1;
  for (int k = 1; k <= top; ++k) x.term(pair_name("f2", k + 1, k), B2, b.f2_interp(e2, k + 1, k));
  // the (N+1, N) row is listed once more after the sum
  x.term(pair_name("f2", N + 1, N) + (v == Variant::printed ? "#2" : ""), B2, b.f2_interp(e2, N + 1, N),
         v != Variant::printed);
  x.c.sos.push_back(SosTerm{"sq(N+1)", B2 / (2 * L2), b.g2(N + 1) - b.g1(N + 1)});
  for (int k = 2; k <= N; ++k) {
    x.c.sos.push_back(SosTerm{"sq(" + std::to_string(k) + ")", B2 / (2 * L2),
                              b.g1(k) - b.g1(k + 1) - (al * L2 / B2) * (b.x(k) - b.x(k + 1))});
  }
  x.c.bound_factor = B2;
  x.c.objective = b.ell();
  x.c.bound = B2 * x.delta_var();
  x.c.notes.push_back("f1 rows use L1 = inf and f2 rows use mu2 = 0");
  x.c.notes.push_back(v == Variant::printed
                          ? "printed: f2 rows (k+1,k) summed over k = 1..N plus (N+1,N) again"
                          : "repaired: f2 rows (k+1,k) summed over k = 1..N-1 plus (N+1,N)");
  return x.c;
}

inline Certificate thm51_cert(const CertParams& p, Variant v) {
  if (p.p1.L.is_infinite() && p.p2.L.is_infinite()) throw CaseMismatch("PL factor needs a finite L");
  if (!(p.eta > 0.0) || !std::isfinite(p.eta)) throw CaseMismatch("PL certificate needs finite eta > 0");
  if (p.p1.L.is_finite() && p.eta > p.p1.L.value()) throw CaseMismatch("PL certificate needs eta <= L1");
  if (p.N != 1) throw CaseMismatch("PL certificate is one-step (N = 1)");
  const ClassParams e1(0.0, p.p1.L), e2(0.0, p.p2.L);
  Ctx x(CertCase::thm51, v, p, PepKind::pl_onestep, e1, e2);
  const Builder& b = x.b;
  const double d = 1.0 + p.eta * p.p2.L.reciprocal();
  const double w = 1.0 / d;
  const double wp1 = p.eta * p.p1.L.reciprocal() / d;
  const double wp2 = p.eta * p.p2.L.reciprocal() / d;
  const double factor = (1.0 - p.eta * p.p1.L.reciprocal()) / d;
  x.mult("interpolation", w);
  x.mult("pl_1", wp1);
  x.mult("pl_2", wp2);
  x.mult("factor", factor);
  x.term(pair_name("f1", 1, 2), w, b.f1_interp(e1, 1, 2));
  x.term(pair_name("f2", 2, 1), w, b.f2_interp(e2, 2, 1));
  auto pl = [&](int k) {
    return (1.0 / (2.0 * p.eta)) * b.sq(b.g1(k) - b.g2(k)) - b.f1(k) + b.f2(k);
  };
  x.term(idx_name("pl", 1), wp1, pl(1));
  x.term(idx_name("pl", 2), wp2, pl(2));
  x.c.bound_factor = factor;
  x.c.objective = b.f1(2) - b.f2(2);
  x.c.bound = factor * (b.f1(1) - b.f2(1));
  x.c.notes.push_back("interpolation rows use mu1 = mu2 = 0");
  return x.c;
}

}  // namespace detail

/// Evaluates the multipliers of a case. Throws CaseMismatch when the
/// parameters are outside the case.
inline Certificate multipliers_for(CertCase c, const CertParams& p, Variant v = Variant::printed) {
  detail::check_standing(p);
  switch (c) {
    case CertCase::thm31_case_L1geL2: return detail::thm31_i_ge(p, v);
    case CertCase::thm31_case_L1ltL2: return detail::thm31_i_lt(p, v);
    case CertCase::thm31_case_ii: return detail::thm31_ii(p, v);
    case CertCase::thm41_bound_B1: return detail::thm41_B1(p, v);
    case CertCase::thm41_bound_B2: return detail::thm41_B2(p, v);
    case CertCase::thm51: return detail::thm51_cert(p, v);
  }
  throw std::logic_error("unreachable");
}

/// The gradient-gap case that applies to (p1, p2).
inline CertCase thm31_case_for(const ClassParams& p1, const ClassParams& p2) {
  if (gradient_gap_case(p1, p2) == Theorem::thm31_ii) return CertCase::thm31_case_ii;
  const bool ge = p2.L.is_finite() && (p1.L.is_infinite() || p1.L.value() >= p2.L.value());
  return ge ? CertCase::thm31_case_L1geL2 : CertCase::thm31_case_L1ltL2;
}

// ------------------------------------------------------------ identity

/// The aggregated quadratic form; identically zero for a valid certificate.
inline QExpr residual_form(const Certificate& c) {
  QExpr r = c.objective - c.bound;
  for (const auto& t : c.terms) r += t.weight * t.slack;
  const int n = c.layout.gram_dim();
  for (const auto& s : c.sos) {
    QExpr q(n, c.layout.nscalars());
    q.G = s.coef * s.v * s.v.transpose();
    r += q;
  }
  return r;
}

struct IdentityReport {
  double max_residual = 0.0;         // max |LHS - RHS|
  double max_scaled_residual = 0.0;  // max |LHS - RHS| / (1 + |LHS|)
  int samples = 0;
  bool ok = true;
  int worst_sample = -1;
  std::vector<std::string> sign_grid_violations;
};

inline constexpr double kIdentityTol = 1e-9;

inline unsigned default_seed() {
  if (const char* s = std::getenv("DCAPEP_SEED")) {
    char* end = nullptr;
    const unsigned long v = std::strtoul(s, &end, 10);
    if (end != s && *end == '\0') return static_cast<unsigned>(v);
  }
  return 42u;
}

/// Randomized identity test in dimension 3: LHS = objective - bound +
/// sum w * slack, RHS = -sum c |v|^2.
inline IdentityReport verify_identity(const Certificate& c, int samples = 200, unsigned seed = default_seed()) {
  if (samples < 1) throw std::invalid_argument("verify_identity: samples must be >= 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  const int n = c.layout.gram_dim(), m = c.layout.nscalars();
  IdentityReport rep;
  rep.samples = samples;
  for (int t = 0; t < samples; ++t) {
    Eigen::MatrixXd V(3, n);
    for (int i = 0; i < V.size(); ++i) V.data()[i] = nd(rng);
    Vector sc(m);
    for (int i = 0; i < m; ++i) sc(i) = nd(rng);
    sc(c.layout.delta()) = std::abs(sc(c.layout.delta()));
    const Eigen::MatrixXd G = V.transpose() * V;
    double lhs = c.objective.eval(G, sc) - c.bound.eval(G, sc);
    for (const auto& term : c.terms) lhs += term.weight * term.slack.eval(G, sc);
    double rhs = 0.0;
    for (const auto& s : c.sos) rhs -= s.coef * (V * s.v).squaredNorm();
    const double r = std::abs(lhs - rhs);
    const double scaled = r / (1.0 + std::abs(lhs));
    if (r > rep.max_residual) rep.max_residual = r;
    if (scaled > rep.max_scaled_residual) {
      rep.max_scaled_residual = scaled;
      rep.worst_sample = t;
    }
    if (r > kIdentityTol * (1.0 + std::abs(lhs))) rep.ok = false;
  }
  return rep;
}

// ------------------------------------------------------------ signs

struct SignViolation {
  CertParams params;
  std::string name;
  double value = 0.0;
};

inline std::vector<SignViolation> sign_violations(const Certificate& c, double tol = 1e-12) {
  std::vector<SignViolation> v;
  for (const auto& name : c.sign_required) {
    const double val = c.multipliers.at(name);
    if (!(val >= -tol)) v.push_back(SignViolation{c.params, name, val});
  }
  for (const auto& s : c.sos) {
    if (!(s.coef >= 0.0)) v.push_back(SignViolation{c.params, "sos:" + s.name, s.coef});
  }
  return v;
}

/// Every grid point must satisfy the case condition (CaseMismatch otherwise).
inline std::vector<SignViolation> verify_signs(CertCase cc, const std::vector<CertParams>& grid,
                                               Variant v = Variant::printed) {
  std::vector<SignViolation> out;
  for (const auto& p : grid) {
    const Certificate c = multipliers_for(cc, p, v);
    auto vs = sign_violations(c);
    out.insert(out.end(), vs.begin(), vs.end());
  }
  return out;
}

/// Parameter region on which each case is checked (all points satisfy the
/// case condition).
inline std::vector<CertParams> documented_grid(CertCase cc) {
  std::vector<CertParams> g;
  const double inf = std::numeric_limits<double>::infinity();
  auto add = [&](double mu1, double L1, double mu2, double L2, int N, double eta = 1.0) {
    CertParams p;
    p.p1 = ClassParams(mu1, L1);
    p.p2 = ClassParams(mu2, L2);
    p.N = N;
    p.eta = eta;
    g.push_back(p);
  };
  switch (cc) {
    case CertCase::thm31_case_L1geL2:
      for (double L2 : {0.5, 1.0, 2.0, 4.0})
        for (double r : {1.0, 1.25, 1.5, 1.9})
          for (double f : {0.0, 0.5, 0.9})
            for (double gm : {0.0, 0.5, 0.9})
              for (int N : {1, 3}) {
                const double L1 = r * L2;
                add(gm * L2, L1, (L1 - L2) + f * (2 * L2 - L1), L2, N);
              }
      break;
    case CertCase::thm31_case_L1ltL2:
      for (double L1 : {0.5, 1.0, 2.0, 4.0})
        for (double r : {1.5, 3.0, inf})
          for (double f : {0.0, 0.5, 0.9})
            for (int N : {1, 2, 5}) add(0.0, L1, f * L1, r * L1, N);
      break;
    case CertCase::thm31_case_ii:
      for (double L2 : {0.5, 1.0, 2.0})
        for (double gm : {0.0, 0.5, 0.9})
          for (double r : {1.5, 3.0, inf})
            for (int N : {1, 2, 5}) add(gm * L2, r * L2, 0.0, L2, N);
      break;
    case CertCase::thm41_bound_B1:
      for (double L1 : {0.5, 1.0, 2.0, 8.0})
        for (double f : {0.0, 0.5, 1.0, 2.0})
          for (int N = 1; N <= 5; ++N) add(0.0, L1, f * L1, inf, N);
      break;
    case CertCase::thm41_bound_B2:
      for (double L2 : {0.5, 1.0, 2.0, 8.0})
        for (double f : {0.0, 0.1, 0.9})
          for (int N = 2; N <= 10; ++N) add(f * L2, inf, 0.0, L2, N);
      break;
    case CertCase::thm51:
      for (double L1 : {1.0, 2.0, 4.0, inf})
        for (double L2 : {1.0, 3.0, inf})
          for (double f : {0.1, 0.25, 0.5, 0.75, 1.0}) {
            if (std::isinf(L1) && std::isinf(L2)) continue;
            add(0.0, L1, 0.0, L2, 1, f * (std::isinf(L1) ? 2.0 : L1));
          }
      break;
  }
  return g;
}

// ------------------------------------------------------------ PEP checks

/// Spec of the PEP a certificate bounds.
inline pep::PepSpec pep_spec_for(const Certificate& c) {
  pep::PepSpec s;
  s.kind = c.pep_kind;
  s.params1 = c.params.p1;
  s.params2 = c.params.p2;
  s.N = c.params.N;
  s.Delta = c.params.Delta;
  s.eta = c.params.eta;
  return s;
}

/// Closed-form value from module bounds for the same parameters (squared
/// for the gradient-gap bound, per unit Delta for thm41 branches).
inline double closed_form_value(const Certificate& c) {
  const auto& p = c.params;
  switch (c.theorem_case) {
    case CertCase::thm31_case_L1geL2:
    case CertCase::thm31_case_L1ltL2:
    case CertCase::thm31_case_ii: {
      BoundRequest r;
      r.theorem = c.theorem_case == CertCase::thm31_case_ii ? Theorem::thm31_ii : Theorem::thm31_i;
      r.params1 = p.p1;
      r.params2 = p.p2;
      r.N = p.N;
      r.Delta = p.Delta;
      const double v = gradient_gap_bound(r).value;
      return v * v;
    }
    case CertCase::thm41_bound_B1: {
      using E = ExtValue;
      const E L1 = E::of(p.p1.L);
      return (L1 / (E(p.N) * (L1 + E(p.p2.mu)))).value() * p.Delta;
    }
    case CertCase::thm41_bound_B2: {
      using E = ExtValue;
      const E L2 = E::of(p.p2.L), mu1(p.p1.mu);
      return (L2 / (E(p.N) * (L2 + mu1) - mu1)).value() * p.Delta;
    }
    case CertCase::thm51: return pl_contraction_factor(p.p1, p.p2, p.eta);
  }
  return std::numeric_limits<double>::quiet_NaN();
}

struct BoundCheck {
  bool ok = false;
  double pep_value = 0.0;
  double bound = 0.0;
  IdentityReport identity;
  std::vector<SignViolation> signs;
  // solver dual / certificate weight per PEP row with a positive weight
  std::map<std::string, double> dual_ratio;
  double dual_discrepancy = 0.0;  // max relative spread of the ratios
  std::string message;
};

class SpecMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// PEP optimum <= certified bound (within 1e-6), identity valid and signs
/// nonnegative. Solver duals are compared with the certificate weights up
/// to a common scale; this is reported, not asserted.
inline BoundCheck certified_bound_check(const Certificate& c, const pep::PepProblem& problem,
                                        const pep::PepSolution& sol, unsigned seed = default_seed()) {
  const pep::PepSpec s = pep_spec_for(c);
  if (problem.spec.kind != s.kind || problem.spec.N != s.N || problem.spec.Delta != s.Delta ||
      (s.kind == PepKind::pl_onestep && problem.spec.eta != s.eta)) {
    throw SpecMismatch("certificate and PEP specs differ");
  }
  BoundCheck r;
  r.identity = verify_identity(c, 200, seed);
  r.signs = sign_violations(c);
  r.pep_value = sol.objective_value;
  r.bound = c.bound_value();
  const bool solved = sol.ok();
  const bool below = solved && r.pep_value <= r.bound + 1e-6 * std::max(1.0, std::abs(r.bound));
  r.ok = r.identity.ok && r.signs.empty() && below;
  if (!r.identity.ok) r.message = "identity fails";
  else if (!r.signs.empty()) r.message = "sign violation";
  else if (!solved) r.message = "PEP not solved";
  else if (!below) r.message = "PEP value exceeds bound";

  if (solved && sol.duals.size() == problem.constraints.size()) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& t : c.terms) {
      if (!t.pep_row || t.weight <= 1e-12) continue;
      const int i = problem.find(t.name);
      if (i < 0) continue;
      const double q = sol.duals[static_cast<std::size_t>(i)] / t.weight;
      r.dual_ratio[t.name] = q;
      lo = std::min(lo, q);
      hi = std::max(hi, q);
    }
    if (!r.dual_ratio.empty()) r.dual_discrepancy = (hi - lo) / std::max(1e-300, std::abs(hi));
  }
  return r;
}

inline bool certified_bound_ok(const Certificate& c, const pep::PepProblem& problem, const pep::PepSolution& sol) {
  return certified_bound_check(c, problem, sol).ok;
}

}  // namespace dcapep::certify
