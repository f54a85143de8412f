// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit on any failure.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "dcapep/analysis.hpp"
#include "dcapep/bounds.hpp"
#include "dcapep/certify.hpp"
#include "dcapep/dca.hpp"
#include "dcapep/experiments.hpp"
#include "dcapep/instances.hpp"
#include "dcapep/pep.hpp"

using namespace dcapep;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Outcome {
  bool ok = true;
  std::string detail;
};

void fail(Outcome& o, const std::string& msg) {
  if (o.ok) o.detail = msg;
  o.ok = false;
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

// ------------------------------------------------------------------ 1

Outcome tightness() {
  Outcome o;
  int cases = 0;
  double worst = 0.0;
  for (double L1 : {0.5, 2.0, 8.0}) {
    for (int N = 1; N <= 10; ++N) {
      if (!(std::sqrt(2.0 / (L1 * (N + 1))) < 1.0)) continue;  // U < 1
      const auto r = experiments::tightness(L1, N);
      const double exact = std::sqrt(2.0 * L1 / (N + 1));
      const double d = std::max(std::abs(r.diff), std::abs(r.observed - exact));
      worst = std::max(worst, d);
      ++cases;
      if (!(d <= 1e-9)) fail(o, fmt("L1=%g N=%g diff=%.3g", L1, N, d));
    }
  }
  if (cases == 0) fail(o, "no admissible (L1, N)");
  if (o.ok) o.detail = "cases=" + std::to_string(cases) + fmt(" max|diff|=%.3g", worst);
  return o;
}

// ------------------------------------------------------------------ 2

Matrix random_psd(std::mt19937_64& rng, int n, double lo, double hi) {
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix A(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) A(i, j) = g(rng);
  Eigen::HouseholderQR<Matrix> qr(A);
  const Matrix Q = qr.householderQ();
  Vector d(n);
  for (int i = 0; i < n; ++i) d(i) = u(rng);
  Matrix S = Q * d.asDiagonal() * Q.transpose();
  return 0.5 * (S + S.transpose());
}

Outcome random_quadratics() {
  Outcome o;
  std::mt19937_64 rng(20240601);
  std::uniform_int_distribution<int> dim(1, 5), iters(1, 20);
  std::normal_distribution<double> g;
  std::bernoulli_distribution singular(0.3);
  int instances = 0, step_checks = 0, case_ii = 0;
  double worst_gap = -kInf, worst_step = -kInf;
  while (instances < 150) {
    const int n = dim(rng);
    const int N = iters(rng);
    const Matrix Q2 = random_psd(rng, n, singular(rng) ? 0.0 : 0.2, 3.0);
    const Matrix Q1 = Q2 + random_psd(rng, n, 0.1, 4.0);
    Vector b1(n), b2(n), x1(n);
    for (int i = 0; i < n; ++i) {
      b1(i) = g(rng);
      b2(i) = g(rng);
      x1(i) = 3.0 * g(rng);
    }
    const Matrix H = Q1 - Q2;
    const Vector d = b1 - b2;
    const double fstar = -0.5 * d.dot(H.ldlt().solve(d));
    const DCInstance inst = make_quadratic_instance(Q1, b1, Q2, b2, fstar);
    const auto& p1 = inst.params1();
    const auto& p2 = inst.params2();
    if (!(p1.L.value() > p2.mu) || (p2.L.is_finite() && !(p2.L.value() > p1.mu))) continue;
    ++instances;

    StopRule rule;
    rule.kind = StopKind::gradient_gap;
    rule.epsilon = 1e-300;
    rule.max_iter = N;
    const Trace tr = run(inst, x1, rule);
    const int n_done = tr.N_performed;
    if (n_done < 1) continue;
    BoundRequest req;
    req.params1 = p1;
    req.params2 = p2;
    req.N = n_done;
    req.Delta = delta_from_trace(tr, fstar);
    req.theorem = gradient_gap_case(p1, p2);
    case_ii += req.theorem == Theorem::thm31_ii;
    const double gb = gradient_gap_bound(req).value;
    const double obs = tr.min_gap(n_done);
    worst_gap = std::max(worst_gap, obs - gb);
    if (!(obs <= gb + 1e-9)) fail(o, fmt("gap %.17g > bound %.17g (N=%g)", obs, gb, n_done));

    if (p1.mu + p2.mu > 0.0) {
      req.theorem = iterate_gap_case(p1, p2);
      const double sb = iterate_gap_bound(req).value;
      const double st = tr.min_step(n_done);
      ++step_checks;
      worst_step = std::max(worst_step, st - sb);
      if (!(st <= sb + 1e-9)) fail(o, fmt("step %.17g > bound %.17g (N=%g)", st, sb, n_done));
    }
  }
  if (step_checks == 0) fail(o, "no instance with mu1 + mu2 > 0");
  if (o.ok) {
    o.detail = "instances=" + std::to_string(instances) + " case_ii=" + std::to_string(case_ii) + " step_checks=" + std::to_string(step_checks) +
               fmt(" max(gap-bound)=%.3g max(step-bound)=%.3g", worst_gap, worst_step);
  }
  return o;
}

// ------------------------------------------------------------------ 3

pep::PepSpec make_spec(pep::PepKind k, double mu1, double L1, double mu2, double L2, int N, double eta = 1.0) {
  pep::PepSpec s;
  s.kind = k;
  s.params1 = ClassParams(mu1, L1);
  s.params2 = ClassParams(mu2, L2);
  s.N = N;
  s.Delta = 1.0;
  s.eta = eta;
  return s;
}

Outcome sandwich() {
  Outcome o;
  std::vector<pep::PepSpec> specs;
  for (auto kind : {pep::PepKind::gradient_gap, pep::PepKind::model_decrease})
    for (double mu1 : {0.0, 0.5})
      for (double L1 : {2.0, 4.0})
        for (double mu2 : {0.0, 0.3})
          for (double L2 : {1.0, kInf})
            for (int N : {1, 3}) specs.push_back(make_spec(kind, mu1, L1, mu2, L2, N));
  for (double L1 : {1.0, 2.0, 4.0})
    for (double L2 : {1.0, 3.0, kInf})
      for (double f : {0.25, 0.5, 1.0}) specs.push_back(make_spec(pep::PepKind::pl_onestep, 0.0, L1, 0.0, L2, 1, f * L1));

  int counts[3] = {0, 0, 0};
  double worst_rel = -kInf;
  for (const auto& s : specs) {
    const double cf = experiments::closed_form_for(s);
    const auto sol = pep::solve(pep::build(s), 1e-9);
    if (!sol.ok()) {
      fail(o, std::string("solver status ") + sdp::to_string(sol.status) + " at " + certify::describe(experiments::cert_params_for(s)));
      continue;
    }
    ++counts[static_cast<int>(s.kind)];
    // bound 0 occurs at eta = L1; there the floor is the solver tolerance 1e-9 (Delta = 1)
    const double scale = std::max(std::abs(cf), 1e-4);
    const double rel = (sol.objective_value - cf) / scale;
    worst_rel = std::max(worst_rel, rel);
    if (!(sol.objective_value <= cf + 1e-5 * scale)) {
      fail(o, std::string(pep::to_string(s.kind)) + fmt(" pep=%.10g bound=%.10g", sol.objective_value, cf));
    }
  }
  for (int c : counts)
    if (c < 20) fail(o, "fewer than 20 solved points for a kind");

  // Tight family: mu1 = mu2 = 0, L2 = inf.
  int tight = 0;
  double worst_tight = 0.0;
  for (double L1 : {0.5, 2.0, 8.0}) {
    for (int N = 1; N <= 5; ++N) {
      const auto s = make_spec(pep::PepKind::gradient_gap, 0.0, L1, 0.0, kInf, N);
      const double b2 = experiments::closed_form_for(s);
      const auto sol = pep::solve(pep::build(s), 1e-9);
      const double rel = std::abs(sol.objective_value - b2) / b2;
      worst_tight = std::max(worst_tight, rel);
      ++tight;
      if (!sol.ok() || !(rel <= 1e-4)) fail(o, fmt("tight family L1=%g N=%g rel=%.3g", L1, N, rel));
    }
  }
  if (o.ok) {
    o.detail = fmt("points P3=%g A2=%g P33=%g", counts[0], counts[1], counts[2]) +
               fmt(" max rel excess=%.3g tight_points=%g max tight rel=%.3g", worst_rel, tight, worst_tight);
  }
  return o;
}

// ------------------------------------------------------------------ 4

Outcome certificates() {
  using namespace certify;
  Outcome o;
  std::ostringstream notes;
  for (CertCase cc : all_cases()) {
    const auto grid = documented_grid(cc);
    if (grid.size() < 50) fail(o, std::string(to_string(cc)) + ": grid smaller than 50");
    int printed_fail = 0, final_fail = 0, sign_fail = 0;
    for (const auto& p : grid) {
      const auto printed = multipliers_for(cc, p, Variant::printed);
      bool good = verify_identity(printed, 200).ok && sign_violations(printed).empty();
      if (!good) {
        ++printed_fail;
        if (has_repair(cc)) {
          const auto repaired = multipliers_for(cc, p, Variant::repaired);
          const auto id = verify_identity(repaired, 200);
          if (!sign_violations(repaired).empty()) ++sign_fail;
          good = id.ok && id.max_residual < 1e-9 && sign_violations(repaired).empty();
        }
      } else if (!(verify_identity(printed, 200).max_residual < 1e-9)) {
        good = false;
      }
      if (!good) ++final_fail;
    }
    notes << ' ' << to_string(cc) << ":grid=" << grid.size();
    if (printed_fail) notes << ",printed_fail=" << printed_fail << "(repaired)";
    if (final_fail || sign_fail) {
      fail(o, std::string(to_string(cc)) + ": " + std::to_string(final_fail) + " points fail after repair");
    }
  }
  if (o.ok) o.detail = notes.str().substr(1);
  return o;
}

// ------------------------------------------------------------------ 5

Outcome counterexample() {
  Outcome o;
  const auto rows = experiments::counterexample(30);
  if (rows.size() != 30) fail(o, "run did not perform 30 iterations");
  double worst_gap = 0.0, worst_margin = -kInf;
  for (const auto& r : rows) {
    worst_gap = std::max(worst_gap, std::abs(r.min_gap - 1.0));
    worst_margin = std::max(worst_margin, r.min_T - r.bound);
    if (!(r.min_T <= r.bound)) fail(o, fmt("N=%g min_T=%.17g > %.17g", r.N, r.min_T, r.bound));
    if (!(std::abs(r.min_gap - 1.0) <= 1e-12)) fail(o, fmt("N=%g min_gap=%.17g", r.N, r.min_gap));
  }
  if (o.ok) o.detail = fmt("iterations=%g max|gap-1|=%.3g max(min_T-bound)=%.3g", rows.size(), worst_gap, worst_margin);
  return o;
}

// ------------------------------------------------------------------ 6

Outcome pl_contraction() {
  Outcome o;
  int steps = 0;
  double worst = -kInf;
  for (double L1 : {0.5, 1.0, 3.0}) {
    for (double frac : {0.0, 0.1, 0.5, 0.9}) {
      for (int dim : {1, 3}) {
        const double a = frac * L1;
        const DCInstance inst = make_pl_quadratic(L1, a, dim);
        const double eta = pl_quadratic_eta(L1, a);
        const ClassParams p2 = a > 0.0 ? ClassParams(0.0, a) : ClassParams(0.0, Smoothness::infinite());
        const double q = pl_contraction_factor(ClassParams(0.0, L1), p2, eta);
        StopRule rule;
        rule.kind = StopKind::gradient_gap;
        rule.epsilon = 1e-300;
        rule.max_iter = 15;
        Vector x1 = Vector::LinSpaced(dim, 1.0, 2.0);
        const Trace tr = run(inst, x1, rule);
        for (int k = 1; k <= tr.N_performed; ++k) {
          const double lhs = tr.at(k + 1).f() - inst.f_star();
          const double rhs = q * (tr.at(k).f() - inst.f_star());
          worst = std::max(worst, lhs - rhs);
          ++steps;
          if (!(lhs <= rhs + 1e-12)) fail(o, fmt("L1=%g a=%g excess=%.3g", L1, a, lhs - rhs));
        }
      }
    }
  }
  if (o.ok) o.detail = "steps=" + std::to_string(steps) + fmt(" max excess=%.3g", worst);
  return o;
}

// ------------------------------------------------------------------ 7

// Independent form of the F_{mu,L} pair inequality: true when (i, j) is violated.
bool pair_violated(const SamplePoint& si, const SamplePoint& sj, double mu, double L, double tol) {
  const Vector dx = si.x - sj.x;
  const Vector dg = si.g - sj.g;
  double extra;
  if (std::isinf(L)) {
    extra = 0.5 * mu * dx.squaredNorm();
  } else {
    extra = (dg.squaredNorm() / L + mu * dx.squaredNorm() - 2.0 * mu / L * dg.dot(dx)) / (2.0 * (1.0 - mu / L));
  }
  return si.f < sj.f + sj.g.dot(dx) + extra - tol;
}

Outcome interpolation() {
  Outcome o;
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto rvec = [&](int n) {
    Vector v(n);
    for (int i = 0; i < n; ++i) v(i) = g(rng);
    return v;
  };

  int members = 0;
  for (int m = 0; m < 50; ++m) {
    const int n = 1 + m % 4;
    const double mu = (m % 3 == 0) ? 0.0 : u(rng);
    std::vector<SamplePoint> pts;
    ClassParams cls;
    if (m % 2 == 0) {
      const double L = mu + 0.5 + 3.0 * u(rng);
      const Matrix Q = random_psd(rng, n, mu, L);
      const Vector b = rvec(n);
      cls = ClassParams(mu, L);
      for (int s = 0; s < 8; ++s) {
        const Vector x = 2.0 * rvec(n);
        pts.push_back({x, Q * x + b, 0.5 * x.dot(Q * x) + b.dot(x)});
      }
    } else {
      // max of affine pieces plus mu/2 |x|^2, nonsmooth
      std::vector<Vector> A;
      std::vector<double> c;
      for (int p = 0; p < 5; ++p) {
        A.push_back(rvec(n));
        c.push_back(g(rng));
      }
      cls = ClassParams(mu, Smoothness::infinite());
      for (int s = 0; s < 8; ++s) {
        const Vector x = 2.0 * rvec(n);
        int best = 0;
        for (int p = 1; p < 5; ++p)
          if (A[p].dot(x) + c[p] > A[best].dot(x) + c[best]) best = p;
        pts.push_back({x, A[best] + mu * x, A[best].dot(x) + c[best] + 0.5 * mu * x.squaredNorm()});
      }
    }
    const auto rep = check_interpolable(pts, cls);
    if (rep.ok) {
      ++members;
    } else {
      fail(o, fmt("member %g rejected, violation %.3g", m, rep.worst_violation));
    }
  }

  int caught = 0;
  while (caught < 50 && o.ok) {
    const int n = 1 + caught % 3;
    const double mu = (caught % 2) ? 0.0 : u(rng);
    const double L = (caught % 5 == 0) ? kInf : mu + 0.5 + 2.0 * u(rng);
    const ClassParams cls(mu, L);
    SamplePoint a{rvec(n), rvec(n), g(rng)};
    SamplePoint b{rvec(n), rvec(n), g(rng)};
    std::vector<SamplePoint> pts{a, b};
    const bool v01 = pair_violated(a, b, mu, L, 1e-6), v10 = pair_violated(b, a, mu, L, 1e-6);
    if (!v01 && !v10) continue;  // not a violating pair
    const auto rep = check_interpolable(pts, cls);
    const auto [i, j] = rep.witness;
    const bool witness_ok = (i == 0 && j == 1 && v01) || (i == 1 && j == 0 && v10);
    if (rep.ok || !witness_ok) {
      fail(o, fmt("violating pair %g not reported (witness %g,%g)", caught, i, j));
    }
    ++caught;
  }
  if (o.ok) o.detail = "members=" + std::to_string(members) + " violating_pairs=" + std::to_string(caught);
  return o;
}

// ------------------------------------------------------------------ 8

Outcome properties() {
  Outcome o;
  // scale invariance in Delta
  for (auto kind : {pep::PepKind::gradient_gap, pep::PepKind::model_decrease}) {
    auto s = make_spec(kind, 0.1, 2.0, 0.2, 3.0, 2);
    const double base = pep::solve(pep::build(s), 1e-10).objective_value;
    for (double c : {0.5, 2.0}) {
      s.Delta = c;
      const double v = pep::solve(pep::build(s), 1e-10).objective_value;
      const double ratio = v / (c * base);
      if (!(std::abs(ratio - 1.0) <= 1e-6)) fail(o, fmt("scale ratio %.10g at c=%g", ratio, c));
    }
  }
  // monotone in N
  for (double L1 : {1.0, 3.0})
    for (double L2 : {1.0, 2.0, kInf})
      for (double mu1 : {0.0, 0.5}) {
        BoundRequest r;
        r.params1 = ClassParams(mu1, L1);
        r.params2 = ClassParams(0.0, L2);
        r.theorem = gradient_gap_case(r.params1, r.params2);
        double prev = kInf, prev_md = kInf;
        for (int N = 1; N <= 30; ++N) {
          r.N = N;
          const double v = gradient_gap_bound(r).value;
          const double md = model_decrease_bound(r.params1, r.params2, N, 1.0);
          if (!(v <= prev) || !(md <= prev_md)) fail(o, fmt("bound increases at N=%g", N));
          prev = v;
          prev_md = md;
        }
      }
  // SDPA export round trip
  for (auto kind : {pep::PepKind::gradient_gap, pep::PepKind::model_decrease, pep::PepKind::pl_onestep}) {
    const auto s = make_spec(kind, 0.0, 2.0, 0.5, kind == pep::PepKind::pl_onestep ? 3.0 : kInf,
                             kind == pep::PepKind::pl_onestep ? 1 : 3, 1.0);
    const std::string a = pep::export_sdpa(pep::build(s));
    const std::string b = pep::export_sdpa(pep::import_sdpa(a));
    if (a != b) fail(o, std::string("SDPA round trip differs for ") + pep::to_string(kind));
  }
  // determinism
  {
    const auto inst = make_tightness_instance(2.0, 5);
    StopRule rule;
    rule.max_iter = 5;
    rule.epsilon = 1e-300;
    std::ostringstream t1, t2;
    write_trace_csv(t1, run(inst, *inst.default_start(), rule));
    write_trace_csv(t2, run(inst, *inst.default_start(), rule));
    if (t1.str() != t2.str()) fail(o, "trace differs between runs");
    const auto s = make_spec(pep::PepKind::gradient_gap, 0.0, 2.0, 0.0, 1.0, 2);
    const auto x = pep::solve(pep::build(s)), y = pep::solve(pep::build(s));
    if (x.objective_value != y.objective_value) fail(o, "PEP solve differs between runs");
  }
  if (o.ok) o.detail = "scale, monotonicity, round trip, determinism";
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    double budget_s;
    std::function<Outcome()> fn;
  };
  const std::vector<Criterion> all = {
      {"C1 tightness", 1.0, tightness},          {"C2 bound validity", 5.0, random_quadratics},
      {"C3 PEP sandwich", 30.0, sandwich},        {"C4 certificates", 5.0, certificates},
      {"C5 counterexample", 1.0, counterexample}, {"C6 PL contraction", 1.0, pl_contraction},
      {"C7 interpolation", 1.0, interpolation},   {"C8 properties", 5.0, properties},
  };
  int failures = 0;
  for (const auto& c : all) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.fn();
    } catch (const std::exception& e) {
      o.ok = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (o.ok && secs > c.budget_s) {
      o.ok = false;
      o.detail += fmt(" (over runtime budget %gs)", c.budget_s);
    }
    std::printf("%s %s [%.3fs] %s\n", o.ok ? "PASS" : "FAIL", c.name, secs, o.detail.c_str());
    failures += !o.ok;
  }
  return failures == 0 ? 0 : 1;
}
