#pragma once

// Composite experiments used by the CLI: tightness reproduction, the
// counterexample run and bound-vs-PEP-vs-empirical sweeps.

#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "dcapep/bounds.hpp"
#include "dcapep/certify.hpp"
#include "dcapep/dca.hpp"
#include "dcapep/instances.hpp"
#include "dcapep/pep.hpp"

namespace dcapep::experiments {

inline std::string num(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// ------------------------------------------------------------ tightness

struct TightnessReport {
  double L1 = 0.0;
  int N = 0;
  double observed = 0.0;  // min_{k <= N+1} |g1^k - g2^k|
  double bound = 0.0;     // corollary bound with mu2 = 0, L2 = inf, Delta = 1
  double diff = 0.0;
  Trace trace;
};

inline TightnessReport tightness(double L1, int N) {
  const DCInstance inst = make_tightness_instance(L1, N);
  StopRule rule;
  rule.kind = StopKind::gradient_gap;
  rule.epsilon = 1e-300;
  rule.max_iter = N;
  TightnessReport r;
  r.L1 = L1;
  r.N = N;
  r.trace = run(inst, *inst.default_start(), rule);
  r.observed = r.trace.min_gap(N);
  BoundRequest req;
  req.theorem = Theorem::cor31_ii;
  req.params1 = ClassParams(0.0, Smoothness(L1));
  req.params2 = ClassParams(0.0, Smoothness::infinite());
  req.N = N;
  req.Delta = delta_from_trace(r.trace, inst.f_star());
  r.bound = gradient_gap_bound(req).value;
  r.diff = r.observed - r.bound;
  return r;
}

// ------------------------------------------------------------ counterexample

struct CounterexampleRow {
  int N = 0;
  double min_gap = 0.0;  // over k <= N+1
  double min_T = 0.0;    // over k <= N
  double bound = 0.0;    // (1/N)(f(x^1) - f_star)
};

inline std::vector<CounterexampleRow> counterexample(int iterations, Trace* trace_out = nullptr) {
  const DCInstance inst = make_nonsmooth_counterexample(iterations + 30);
  StopRule rule;
  rule.kind = StopKind::gradient_gap;
  rule.epsilon = 0.5;
  rule.max_iter = iterations;
  const Trace tr = run(inst, *inst.default_start(), rule);
  const double Delta = delta_from_trace(tr, inst.f_star());
  std::vector<CounterexampleRow> rows;
  for (int N = 1; N <= tr.N_performed; ++N) {
    rows.push_back(CounterexampleRow{N, tr.min_gap(N), tr.min_T(N), Delta / N});
  }
  if (trace_out) *trace_out = tr;
  return rows;
}

// ------------------------------------------------------------ sweep

/// Closed-form bound in PEP units: squared gradient-gap bound, model
/// decrease bound, or PL factor (per unit Delta for pl_onestep).
inline double closed_form_for(const pep::PepSpec& s) {
  switch (s.kind) {
    case pep::PepKind::gradient_gap: {
      BoundRequest r;
      r.theorem = gradient_gap_case(s.params1, s.params2);
      r.params1 = s.params1;
      r.params2 = s.params2;
      r.N = s.N;
      r.Delta = s.Delta;
      const double v = gradient_gap_bound(r).value;
      return v * v;
    }
    case pep::PepKind::model_decrease: return model_decrease_bound(s.params1, s.params2, s.N, s.Delta);
    case pep::PepKind::pl_onestep: return pl_contraction_factor(s.params1, s.params2, s.eta);
  }
  return std::numeric_limits<double>::quiet_NaN();
}

/// Certificate case for a spec, if one is implemented.
inline std::optional<certify::CertCase> certificate_case_for(const pep::PepSpec& s) {
  using certify::CertCase;
  switch (s.kind) {
    case pep::PepKind::gradient_gap:
      if (s.params1.L.is_infinite() && s.params2.L.is_infinite()) return std::nullopt;
      return certify::thm31_case_for(s.params1, s.params2);
    case pep::PepKind::model_decrease: {
      const ExtValue L1 = ExtValue::of(s.params1.L), L2 = ExtValue::of(s.params2.L);
      const ExtValue n(static_cast<double>(s.N));
      const bool b1_ok = s.params1.L.is_finite();
      const bool b2_ok = s.params2.L.is_finite() && s.N >= 1;
      if (b1_ok && b2_ok) {
        const double b1 = (L1 / (n * (L1 + ExtValue(s.params2.mu)))).value();
        const double b2 = (L2 / (n * (L2 + ExtValue(s.params1.mu)) - ExtValue(s.params1.mu))).value();
        return b1 <= b2 ? CertCase::thm41_bound_B1 : CertCase::thm41_bound_B2;
      }
      if (b1_ok) return CertCase::thm41_bound_B1;
      if (b2_ok) return CertCase::thm41_bound_B2;
      return std::nullopt;
    }
    case pep::PepKind::pl_onestep: return CertCase::thm51;
  }
  return std::nullopt;
}

inline certify::CertParams cert_params_for(const pep::PepSpec& s) {
  certify::CertParams p;
  p.p1 = s.params1;
  p.p2 = s.params2;
  p.N = s.N;
  p.Delta = s.Delta;
  p.eta = s.eta;
  return p;
}

/// Largest normalized worst-case measure seen on 1-D quadratic runs
/// f1 = a/2 x^2, f2 = b/2 x^2 with a, b inside the declared classes. This is
/// a lower estimate of the PEP value; NaN when no admissible pair exists.
inline double best_empirical(const pep::PepSpec& s) {
  auto pts = [](double mu, const Smoothness& L) {
    std::vector<double> v;
    const double hi = L.is_finite() ? L.value() : std::max(4.0 * (mu + 1.0), 16.0);
    for (int i = 0; i <= 8; ++i) v.push_back(mu + (hi - mu) * i / 8.0);
    return v;
  };
  double best = std::numeric_limits<double>::quiet_NaN();
  for (double a : pts(s.params1.mu, s.params1.L)) {
    for (double b : pts(s.params2.mu, s.params2.L)) {
      if (!(a > b) || a <= 0.0) continue;
      double value = 0.0;
      const double r = b / a;  // x^{k+1} = r x^k from x^1 = 1
      const double f1 = 0.5 * (a - b);
      if (s.kind == pep::PepKind::pl_onestep) {
        if (a - b < s.eta) continue;  // PL modulus of f is a - b
        value = r * r;
      } else {
        double m = std::numeric_limits<double>::infinity();
        double x = 1.0;
        if (s.kind == pep::PepKind::gradient_gap) {
          for (int k = 1; k <= s.N + 1; ++k, x *= r) m = std::min(m, (a - b) * (a - b) * x * x);
        } else {
          for (int k = 1; k <= s.N; ++k, x *= r) {
            const double xn = r * x;
            m = std::min(m, 0.5 * a * x * x - 0.5 * a * xn * xn - b * x * (x - xn));
          }
        }
        value = m / f1 * s.Delta;
      }
      if (std::isnan(best) || value > best) best = value;
    }
  }
  return best;
}

struct SweepRow {
  pep::PepSpec spec;
  std::string status;  // ok, inapplicable, solver:<status>, error
  double closed_form = std::numeric_limits<double>::quiet_NaN();
  double pep_value = std::numeric_limits<double>::quiet_NaN();
  double best_emp = std::numeric_limits<double>::quiet_NaN();
  std::string certificate_ok = "n/a";  // true, false, n/a
  std::string note;
};

inline SweepRow sweep_row(const pep::PepSpec& spec, double tol = 1e-8, unsigned seed = 42) {
  SweepRow row;
  row.spec = spec;
  try {
    spec.validate();
    row.closed_form = closed_form_for(spec);
  } catch (const BoundInapplicable& e) {
    row.status = "inapplicable";
    row.note = e.what();
    return row;
  } catch (const std::exception& e) {
    row.status = "error";
    row.note = e.what();
    return row;
  }
  try {
    const pep::PepProblem P = pep::build(spec);
    const pep::PepSolution sol = pep::solve(P, tol);
    row.pep_value = sol.objective_value;
    row.status = sol.ok() ? "ok" : std::string("solver:") + sdp::to_string(sol.status);
    row.best_emp = best_empirical(spec);
    if (auto cc = certificate_case_for(spec)) {
      const auto variant = certify::has_repair(*cc) ? certify::Variant::repaired : certify::Variant::printed;
      try {
        const auto cert = certify::multipliers_for(*cc, cert_params_for(spec), variant);
        const auto chk = certify::certified_bound_check(cert, P, sol, seed);
        row.certificate_ok = chk.ok ? "true" : "false";
        row.note = std::string(certify::to_string(*cc)) + "/" + certify::to_string(variant);
        if (!chk.ok) row.note += ": " + chk.message;
      } catch (const std::exception& e) {
        row.certificate_ok = "false";
        row.note = e.what();
      }
    }
  } catch (const std::exception& e) {
    row.status = "error";
    row.note = e.what();
  }
  return row;
}

inline const char* sweep_header() {
  return "kind,mu1,L1,mu2,L2,N,Delta,eta,closed_form_bound,pep_value,best_empirical,certificate_ok,status,note";
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + "\"";
}

inline void write_sweep_row(std::ostream& os, const SweepRow& r) {
  const auto& s = r.spec;
  os << pep::to_string(s.kind) << ',' << num(s.params1.mu) << ',' << num(s.params1.L.as_double()) << ','
     << num(s.params2.mu) << ',' << num(s.params2.L.as_double()) << ',' << s.N << ',' << num(s.Delta) << ','
     << num(s.eta) << ',' << num(r.closed_form) << ',' << num(r.pep_value) << ',' << num(r.best_emp) << ','
     << r.certificate_ok << ',' << r.status << ',' << csv_field(r.note) << '\n';
}

}  // namespace dcapep::experiments
