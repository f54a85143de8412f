#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dcapep/analysis.hpp"
#include "dcapep/dca.hpp"
#include "dcapep/ext_value.hpp"
#include "dcapep/sdp.hpp"
#include "dcapep/sdpa.hpp"

namespace dcapep::pep {

using Matrix = Eigen::MatrixXd;

enum class PepKind { gradient_gap, model_decrease, pl_onestep };

inline const char* to_string(PepKind k) {
  switch (k) {
    case PepKind::gradient_gap: return "gradient_gap";
    case PepKind::model_decrease: return "model_decrease";
    case PepKind::pl_onestep: return "pl_onestep";
  }
  return "?";
}

inline PepKind kind_from_string(const std::string& s) {
  if (s == "gradient_gap" || s == "P3") return PepKind::gradient_gap;
  if (s == "model_decrease" || s == "P3.A2" || s == "A2") return PepKind::model_decrease;
  if (s == "pl_onestep" || s == "P33") return PepKind::pl_onestep;
  throw std::invalid_argument("unknown PEP kind '" + s + "'");
}

struct PepSpec {
  PepKind kind = PepKind::gradient_gap;
  ClassParams params1;
  ClassParams params2;
  int N = 1;
  double Delta = 1.0;
  double eta = 1.0;  // pl_onestep only

  void validate() const {
    params1.validate();
    params2.validate();
    if (N < 1) throw std::invalid_argument("PEP: N must be >= 1");
    if (kind == PepKind::pl_onestep && N != 1) throw std::invalid_argument("PEP: pl_onestep needs N = 1");
    if (!std::isfinite(Delta)) throw std::invalid_argument("PEP: Delta must be finite");
    if (kind == PepKind::pl_onestep && !(eta > 0.0 && std::isfinite(eta))) {
      throw std::invalid_argument("PEP: eta must be finite and > 0");
    }
    // The model-decrease PEP is also posed for L1 = mu2 (bound B1 with L2 = inf).
    if (kind != PepKind::model_decrease) {
      if (params1.L.is_finite() && !(params1.L.value() > params2.mu)) {
        throw std::invalid_argument("PEP: parameters violate L1 > mu2");
      }
      if (params2.L.is_finite() && !(params2.L.value() > params1.mu)) {
        throw std::invalid_argument("PEP: parameters violate L2 > mu1");
      }
    }
  }
};

/// Index map of the lifted vectors and scalars. Vectors: x^1..x^{N+1},
/// g1^1..g1^{N+1}, g2^{N+1}. Scalars: f1^1..f1^{N+1}, f2^1..f2^{N+1}, then
/// ell (absent for pl_onestep), then Delta when it is kept symbolic.
struct Layout {
  PepKind kind = PepKind::gradient_gap;
  int N = 1;
  bool symbolic_delta = false;

  int gram_dim() const { return 2 * N + 3; }
  int x(int k) const { return k - 1; }
  /// g1^k for k = 1..N+1; k = N+2 stands for g2^{N+1}.
  int g1(int k) const { return N + k; }
  int g2_last() const { return 2 * N + 2; }
  /// Gradient of f2 at point i (g2^i = g1^{i+1} for i <= N).
  int g2(int i) const { return i <= N ? g1(i + 1) : g2_last(); }

  int f1(int k) const { return k - 1; }
  int f2(int k) const { return N + k; }
  bool has_ell() const { return kind != PepKind::pl_onestep; }
  int ell() const { return has_ell() ? 2 * N + 2 : -1; }
  int delta() const { return symbolic_delta ? 2 * N + 2 + (has_ell() ? 1 : 0) : -1; }
  int nscalars() const { return 2 * N + 2 + (has_ell() ? 1 : 0) + (symbolic_delta ? 1 : 0); }

  std::vector<std::string> gram_names() const {
    std::vector<std::string> v;
    for (int k = 1; k <= N + 1; ++k) v.push_back("x" + std::to_string(k));
    for (int k = 1; k <= N + 1; ++k) v.push_back("g1_" + std::to_string(k));
    v.push_back("g2_" + std::to_string(N + 1));
    return v;
  }
  std::vector<std::string> scalar_names() const {
    std::vector<std::string> v;
    for (int k = 1; k <= N + 1; ++k) v.push_back("f1_" + std::to_string(k));
    for (int k = 1; k <= N + 1; ++k) v.push_back("f2_" + std::to_string(k));
    if (has_ell()) v.push_back("ell");
    if (symbolic_delta) v.push_back("Delta");
    return v;
  }
};

/// Quadratic form <G, Gram> + s'scalars + k.
struct QExpr {
  Matrix G;
  Vector s;
  double k = 0.0;

  QExpr() = default;
  QExpr(int n, int m) : G(Matrix::Zero(n, n)), s(Vector::Zero(m)) {}

  QExpr& operator+=(const QExpr& o) {
    G += o.G;
    s += o.s;
    k += o.k;
    return *this;
  }
  QExpr& operator-=(const QExpr& o) {
    G -= o.G;
    s -= o.s;
    k -= o.k;
    return *this;
  }
  friend QExpr operator+(QExpr a, const QExpr& b) { return a += b; }
  friend QExpr operator-(QExpr a, const QExpr& b) { return a -= b; }
  friend QExpr operator*(double c, QExpr a) {
    a.G *= c;
    a.s *= c;
    a.k *= c;
    return a;
  }

  double eval(const Matrix& gram, const Vector& scal) const {
    return (G.array() * gram.array()).sum() + s.dot(scal) + k;
  }
};

/// Vector expression: coefficients over the lifted vectors.
using VExpr = Vector;

class Builder {
 public:
  explicit Builder(Layout lay) : lay_(lay) {}

  const Layout& layout() const { return lay_; }
  QExpr zero() const { return QExpr(lay_.gram_dim(), lay_.nscalars()); }

  VExpr vec(int idx) const {
    VExpr v = VExpr::Zero(lay_.gram_dim());
    v(idx) = 1.0;
    return v;
  }
  VExpr x(int k) const { return vec(lay_.x(k)); }
  VExpr g1(int k) const { return vec(lay_.g1(k)); }
  VExpr g2(int i) const { return vec(lay_.g2(i)); }

  QExpr scalar(int idx) const {
    QExpr e = zero();
    e.s(idx) = 1.0;
    return e;
  }
  QExpr constant(double c) const {
    QExpr e = zero();
    e.k = c;
    return e;
  }
  QExpr f1(int k) const { return scalar(lay_.f1(k)); }
  QExpr f2(int k) const { return scalar(lay_.f2(k)); }
  QExpr ell() const { return scalar(lay_.ell()); }

  /// <u, v> lifted to the Gram matrix (symmetrized).
  QExpr inner(const VExpr& u, const VExpr& v) const {
    QExpr e = zero();
    e.G = 0.5 * (u * v.transpose() + v * u.transpose());
    return e;
  }
  QExpr sq(const VExpr& u) const { return inner(u, u); }

  /// Slack of the F_{mu,L} interpolation inequality for the ordered pair
  /// (i, j); nonnegative on feasible points.
  QExpr interp(const ClassParams& p, const QExpr& fi, const QExpr& fj, const VExpr& xi,
               const VExpr& xj, const VExpr& gi, const VExpr& gj) const {
    const double invL = p.L.reciprocal();
    const double muL = p.mu_over_L();
    const double c = 1.0 / (2.0 * (1.0 - muL));
    const VExpr dg = gi - gj;
    const VExpr dx = xi - xj;
    QExpr q = c * (invL * sq(dg) + p.mu * sq(dx) - (2.0 * muL) * inner(dg, dx));
    return fi - fj - inner(gj, dx) - q;
  }

  QExpr f1_interp(const ClassParams& p, int i, int j) const {
    return interp(p, f1(i), f1(j), x(i), x(j), g1(i), g1(j));
  }
  QExpr f2_interp(const ClassParams& p, int i, int j) const {
    return interp(p, f2(i), f2(j), x(i), x(j), g2(i), g2(j));
  }

  /// T_k = f1^k - f1^{k+1} - <g1^{k+1}, x^k - x^{k+1}>.
  QExpr model_decrease(int k) const { return f1(k) - f1(k + 1) - inner(g1(k + 1), x(k) - x(k + 1)); }

  /// Delta - (f1^1 - f2^1), with Delta symbolic or fixed.
  QExpr delta_slack(double Delta) const {
    QExpr d = lay_.symbolic_delta ? scalar(lay_.delta()) : constant(Delta);
    return d - f1(1) + f2(1);
  }

 private:
  Layout lay_;
};

enum class Sense { le, eq };

/// form(G, s) <= rhs, or = rhs.
struct PepConstraint {
  std::string name;
  Matrix G;
  Vector s;
  Sense sense = Sense::le;
  double rhs = 0.0;

  friend bool operator==(const PepConstraint& a, const PepConstraint& b) {
    return a.name == b.name && a.sense == b.sense && a.rhs == b.rhs && a.G.rows() == b.G.rows() &&
           a.s.size() == b.s.size() && (a.G.array() == b.G.array()).all() && (a.s.array() == b.s.array()).all();
  }
};

/// Constraint "slack >= 0" as "-slack(G,s) <= slack.k".
inline PepConstraint from_slack(std::string name, const QExpr& slack) {
  return PepConstraint{std::move(name), -slack.G, -slack.s, Sense::le, slack.k};
}

struct PepProblem {
  PepSpec spec;
  int gram_dim = 0;
  std::vector<std::string> gram_names;
  std::vector<std::string> scalar_names;
  std::vector<PepConstraint> constraints;
  Matrix obj_G;  // maximize <obj_G, Gram> + obj_s'scalars
  Vector obj_s;
  std::vector<std::string> notes;

  int find(const std::string& name) const {
    for (std::size_t i = 0; i < constraints.size(); ++i) {
      if (constraints[i].name == name) return static_cast<int>(i);
    }
    return -1;
  }

  friend bool operator==(const PepProblem& a, const PepProblem& b) {
    auto same_params = [](const ClassParams& p, const ClassParams& q) { return p == q; };
    return a.spec.kind == b.spec.kind && same_params(a.spec.params1, b.spec.params1) &&
           same_params(a.spec.params2, b.spec.params2) && a.spec.N == b.spec.N &&
           a.spec.Delta == b.spec.Delta && a.spec.eta == b.spec.eta && a.gram_dim == b.gram_dim &&
           a.gram_names == b.gram_names && a.scalar_names == b.scalar_names &&
           a.constraints == b.constraints && a.obj_G.rows() == b.obj_G.rows() &&
           (a.obj_G.array() == b.obj_G.array()).all() && a.obj_s.size() == b.obj_s.size() &&
           (a.obj_s.array() == b.obj_s.array()).all() && a.notes == b.notes;
  }
};

inline std::string pair_name(const char* fam, int i, int j) {
  return std::string(fam) + "(" + std::to_string(i) + "," + std::to_string(j) + ")";
}
inline std::string idx_name(const char* fam, int k) { return std::string(fam) + "(" + std::to_string(k) + ")"; }

/// 1/(2 min(L1 - mu2, L2)), zero when both are infinite.
inline double lower_row_coef(const ClassParams& p1, const ClassParams& p2) {
  const ExtValue S = descent_modulus(p1, p2);
  return S.is_finite() ? 1.0 / (2.0 * S.value()) : 0.0;
}

inline PepProblem build(const PepSpec& spec) {
  spec.validate();
  const int N = spec.N;
  const Layout lay{spec.kind, N, false};
  const Builder b(lay);
  PepProblem P;
  P.spec = spec;
  P.gram_dim = lay.gram_dim();
  P.gram_names = lay.gram_names();
  P.scalar_names = lay.scalar_names();
  const auto& p1 = spec.params1;
  const auto& p2 = spec.params2;
  auto add = [&](std::string name, const QExpr& slack) { P.constraints.push_back(from_slack(std::move(name), slack)); };

  for (int i = 1; i <= N + 1; ++i)
    for (int j = 1; j <= N + 1; ++j)
      if (i != j) add(pair_name("f1", i, j), b.f1_interp(p1, i, j));
  for (int i = 1; i <= N + 1; ++i)
    for (int j = 1; j <= N + 1; ++j)
      if (i != j) add(pair_name("f2", i, j), b.f2_interp(p2, i, j));

  QExpr obj = b.zero();
  switch (spec.kind) {
    case PepKind::gradient_gap: {
      for (int k = 1; k <= N + 1; ++k) add(idx_name("obj", k), b.sq(b.g1(k) - b.g2(k)) - b.ell());
      const double c = lower_row_coef(p1, p2);
      for (int k = 1; k <= N + 1; ++k) {
        add(idx_name("lower", k), b.f1(k) - b.f2(k) - c * b.sq(b.g1(k) - b.g2(k)));
      }
      add("delta", b.delta_slack(spec.Delta));
      obj = b.ell();
      P.notes.push_back("f_star eliminated (set to 0)");
      break;
    }
    case PepKind::model_decrease: {
      for (int k = 1; k <= N; ++k) add(idx_name("obj", k), b.model_decrease(k) - b.ell());
      for (int k = 1; k <= N + 1; ++k) add(idx_name("lower", k), b.f1(k) - b.f2(k));
      add("delta", b.delta_slack(spec.Delta));
      obj = b.ell();
      P.notes.push_back("f_star eliminated (set to 0)");
      P.notes.push_back("f2 rows (i,N+1) use <g2^{N+1}, x^i - x^{N+1}>; the printed row reads x^i - x^j");
      break;
    }
    case PepKind::pl_onestep: {
      for (int k = 1; k <= 2; ++k) add(idx_name("lower", k), b.f1(k) - b.f2(k));
      for (int k = 1; k <= 2; ++k) {
        add(idx_name("pl", k), (1.0 / (2.0 * spec.eta)) * b.sq(b.g1(k) - b.g2(k)) - b.f1(k) + b.f2(k));
      }
      PepConstraint nrm = from_slack("normalize", b.f1(1) - b.f2(1) - b.constant(1.0));
      nrm.sense = Sense::eq;
      P.constraints.push_back(nrm);
      obj = b.f1(2) - b.f2(2);
      P.notes.push_back("f_star eliminated (set to 0); ratio objective normalized by f1^1 - f2^1 = 1");
      break;
    }
  }
  P.obj_G = obj.G;
  P.obj_s = obj.s;
  return P;
}

/// Row counts per family implied by the index ranges.
inline std::map<std::string, int> expected_counts(const PepSpec& s) {
  const int N = s.N;
  std::map<std::string, int> m;
  m["f1"] = N * (N + 1);
  m["f2"] = N * (N + 1);
  if (s.kind == PepKind::gradient_gap) {
    m["obj"] = N + 1;
    m["lower"] = N + 1;
    m["delta"] = 1;
  } else if (s.kind == PepKind::model_decrease) {
    m["obj"] = N;
    m["lower"] = N + 1;
    m["delta"] = 1;
  } else {
    m["lower"] = 2;
    m["pl"] = 2;
    m["normalize"] = 1;
  }
  return m;
}

inline std::map<std::string, int> family_counts(const PepProblem& P) {
  std::map<std::string, int> m;
  for (const auto& c : P.constraints) ++m[c.name.substr(0, c.name.find('('))];
  return m;
}

struct PepSolution {
  sdp::Status status = sdp::Status::numerical_failure;
  double objective_value = std::numeric_limits<double>::quiet_NaN();
  double dual_value = std::numeric_limits<double>::quiet_NaN();
  Matrix gram;
  Vector scalars;
  std::vector<double> duals;  // aligned with constraints; >= 0 on "<=" rows
  int iterations = 0;
  double pinf = 0.0, dinf = 0.0, relgap = 0.0;
  std::vector<std::string> log;

  bool ok() const { return status == sdp::Status::optimal || status == sdp::Status::near_optimal; }
};

inline sdp::StandardForm to_standard_form(const PepProblem& P) {
  sdp::StandardForm f;
  f.n = P.gram_dim;
  f.nfree = static_cast<int>(P.scalar_names.size());
  f.C = P.obj_G;
  f.c = P.obj_s;
  for (const auto& c : P.constraints) {
    sdp::Row r;
    r.A = c.G;
    r.a = c.s;
    r.sense = c.sense == Sense::eq ? sdp::Sense::eq : sdp::Sense::le;
    r.b = c.rhs;
    r.name = c.name;
    f.rows.push_back(std::move(r));
  }
  return f;
}

inline sdp::Options default_options(double tol = 1e-8) {
  sdp::Options o;
  o.feas_tol = tol;
  o.gap_tol = 1e-7;
  return o;
}

inline PepSolution solve(const PepProblem& P, const sdp::Options& opt = default_options()) {
  const sdp::Result r = sdp::solve(to_standard_form(P), opt);
  PepSolution s;
  s.status = r.status;
  s.objective_value = r.primal_value;
  s.dual_value = r.dual_value;
  s.gram = r.X;
  s.scalars = r.z;
  s.duals.assign(r.lambda.data(), r.lambda.data() + r.lambda.size());
  s.iterations = r.iterations;
  s.pinf = r.pinf;
  s.dinf = r.dinf;
  s.relgap = r.relgap;
  s.log = r.log;
  return s;
}

inline PepSolution solve(const PepProblem& P, double tol) { return solve(P, default_options(tol)); }

// ---------------------------------------------------------------- SDPA

namespace detail {

inline std::string num(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return sdpa::format_double(v);
}
inline double parse_num(const std::string& t) {
  if (t == "inf") return std::numeric_limits<double>::infinity();
  if (t == "-inf") return -std::numeric_limits<double>::infinity();
  return sdpa::detail::to_double(t);
}

inline std::vector<std::string> words(const std::string& s) {
  std::istringstream is(s);
  std::vector<std::string> w;
  std::string t;
  while (is >> t) w.push_back(t);
  return w;
}

}  // namespace detail

/// Variables: Gram upper-triangle entries (row-major, a <= b), then the
/// scalars. Block 1 is the Gram matrix; block 2 is diagonal and holds
/// rhs - form >= 0 per "<=" row (two entries per equality row).
inline std::string export_sdpa(const PepProblem& P) {
  const int n = P.gram_dim;
  const int ns = static_cast<int>(P.scalar_names.size());
  const int ng = n * (n + 1) / 2;
  std::vector<std::pair<int, int>> gvar;
  for (int a = 0; a < n; ++a)
    for (int bb = a; bb < n; ++bb) gvar.emplace_back(a, bb);

  sdpa::Problem S;
  const auto& sp = P.spec;
  S.comments.push_back(" dcapep-pep kind=" + std::string(to_string(sp.kind)) + " N=" + std::to_string(sp.N) +
                       " mu1=" + detail::num(sp.params1.mu) + " L1=" + detail::num(sp.params1.L.as_double()) +
                       " mu2=" + detail::num(sp.params2.mu) + " L2=" + detail::num(sp.params2.L.as_double()) +
                       " Delta=" + detail::num(sp.Delta) + " eta=" + detail::num(sp.eta));
  {
    std::string g = " gram";
    for (const auto& s : P.gram_names) g += " " + s;
    S.comments.push_back(g);
    std::string sc = " scalars";
    for (const auto& s : P.scalar_names) sc += " " + s;
    S.comments.push_back(sc);
  }
  for (const auto& c : P.constraints) S.comments.push_back(" row " + c.name + (c.sense == Sense::eq ? " eq" : " le"));
  for (const auto& nt : P.notes) S.comments.push_back(" note " + nt);

  S.m = ng + ns;
  int lp = 0;
  for (const auto& c : P.constraints) lp += c.sense == Sense::eq ? 2 : 1;
  S.block_struct = {n, -lp};
  S.c.resize(static_cast<std::size_t>(S.m));
  for (int v = 0; v < ng; ++v) {
    const auto [a, bb] = gvar[static_cast<std::size_t>(v)];
    S.c[static_cast<std::size_t>(v)] = -(a == bb ? P.obj_G(a, a) : 2.0 * P.obj_G(a, bb));
  }
  for (int v = 0; v < ns; ++v) S.c[static_cast<std::size_t>(ng + v)] = -P.obj_s(v);

  // entries sorted by (mat, blk, i, j)
  std::vector<sdpa::Entry> F0;
  std::vector<std::vector<sdpa::Entry>> Fi(static_cast<std::size_t>(S.m));
  for (int v = 0; v < ng; ++v) {
    const auto [a, bb] = gvar[static_cast<std::size_t>(v)];
    Fi[static_cast<std::size_t>(v)].push_back({v + 1, 1, a + 1, bb + 1, 1.0});
  }
  int d = 0;
  for (const auto& c : P.constraints) {
    const int reps = c.sense == Sense::eq ? 2 : 1;
    for (int rep = 0; rep < reps; ++rep) {
      ++d;
      const double sg = rep == 0 ? 1.0 : -1.0;  // rhs - form, then form - rhs
      for (int v = 0; v < ng; ++v) {
        const auto [a, bb] = gvar[static_cast<std::size_t>(v)];
        const double coef = a == bb ? c.G(a, a) : 2.0 * c.G(a, bb);
        if (coef != 0.0) Fi[static_cast<std::size_t>(v)].push_back({v + 1, 2, d, d, -sg * coef});
      }
      for (int v = 0; v < ns; ++v) {
        if (c.s(v) != 0.0) Fi[static_cast<std::size_t>(ng + v)].push_back({ng + v + 1, 2, d, d, -sg * c.s(v)});
      }
      if (c.rhs != 0.0) F0.push_back({0, 2, d, d, -sg * c.rhs});
    }
  }
  S.entries = F0;
  for (auto& e : Fi) S.entries.insert(S.entries.end(), e.begin(), e.end());
  return sdpa::write(S);
}

/// Inverse of export_sdpa; needs the metadata comments it writes.
inline PepProblem import_sdpa(const std::string& text) {
  const sdpa::Problem S = sdpa::parse(text);
  PepProblem P;
  std::vector<std::pair<std::string, Sense>> rows;
  bool have_spec = false;
  for (const auto& c : S.comments) {
    const auto w = detail::words(c);
    if (w.empty()) continue;
    if (w[0] == "dcapep-pep") {
      std::map<std::string, std::string> kv;
      for (std::size_t i = 1; i < w.size(); ++i) {
        const auto eq = w[i].find('=');
        if (eq != std::string::npos) kv[w[i].substr(0, eq)] = w[i].substr(eq + 1);
      }
      auto get = [&](const char* k) {
        auto it = kv.find(k);
        if (it == kv.end()) throw std::runtime_error(std::string("sdpa import: missing ") + k);
        return it->second;
      };
      P.spec.kind = kind_from_string(get("kind"));
      P.spec.N = sdpa::detail::to_int(get("N"));
      P.spec.params1 = ClassParams(detail::parse_num(get("mu1")), detail::parse_num(get("L1")));
      P.spec.params2 = ClassParams(detail::parse_num(get("mu2")), detail::parse_num(get("L2")));
      P.spec.Delta = detail::parse_num(get("Delta"));
      P.spec.eta = detail::parse_num(get("eta"));
      have_spec = true;
    } else if (w[0] == "gram") {
      P.gram_names.assign(w.begin() + 1, w.end());
    } else if (w[0] == "scalars") {
      P.scalar_names.assign(w.begin() + 1, w.end());
    } else if (w[0] == "row" && w.size() == 3) {
      rows.emplace_back(w[1], w[2] == "eq" ? Sense::eq : Sense::le);
    } else if (w[0] == "note") {
      P.notes.push_back(c.substr(c.find("note") + 5));
    }
  }
  if (!have_spec) throw std::runtime_error("sdpa import: not a dcapep PEP file");
  const int n = static_cast<int>(P.gram_names.size());
  const int ns = static_cast<int>(P.scalar_names.size());
  const int ng = n * (n + 1) / 2;
  if (S.block_struct.size() != 2 || S.block_struct[0] != n || S.m != ng + ns) {
    throw std::runtime_error("sdpa import: block structure does not match metadata");
  }
  P.gram_dim = n;
  std::vector<std::pair<int, int>> gvar;
  for (int a = 0; a < n; ++a)
    for (int bb = a; bb < n; ++bb) gvar.emplace_back(a, bb);

  P.obj_G = Matrix::Zero(n, n);
  P.obj_s = Vector::Zero(ns);
  for (int v = 0; v < ng; ++v) {
    const auto [a, bb] = gvar[static_cast<std::size_t>(v)];
    const double c = -S.c[static_cast<std::size_t>(v)];
    if (a == bb) {
      P.obj_G(a, a) = c;
    } else {
      P.obj_G(a, bb) = P.obj_G(bb, a) = 0.5 * c;
    }
  }
  for (int v = 0; v < ns; ++v) P.obj_s(v) = -S.c[static_cast<std::size_t>(ng + v)];

  // diagonal index -> (row, first copy?)
  std::vector<int> row_of;
  std::vector<bool> primary;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    row_of.push_back(static_cast<int>(r));
    primary.push_back(true);
    if (rows[r].second == Sense::eq) {
      row_of.push_back(static_cast<int>(r));
      primary.push_back(false);
    }
  }
  if (static_cast<int>(row_of.size()) != -S.block_struct[1]) {
    throw std::runtime_error("sdpa import: row metadata does not match the LP block");
  }
  for (const auto& [name, sense] : rows) {
    P.constraints.push_back(PepConstraint{name, Matrix::Zero(n, n), Vector::Zero(ns), sense, 0.0});
  }
  for (const auto& e : S.entries) {
    if (e.blk != 2) continue;
    const std::size_t d = static_cast<std::size_t>(e.i - 1);
    if (!primary[d]) continue;
    auto& c = P.constraints[static_cast<std::size_t>(row_of[d])];
    if (e.mat == 0) {
      c.rhs = -e.v;
    } else if (e.mat <= ng) {
      const auto [a, bb] = gvar[static_cast<std::size_t>(e.mat - 1)];
      if (a == bb) {
        c.G(a, a) = -e.v;
      } else {
        c.G(a, bb) = c.G(bb, a) = -0.5 * e.v;
      }
    } else {
      c.s(e.mat - ng - 1) = -e.v;
    }
  }
  return P;
}

// ---------------------------------------------------------------- traces

struct FeasiblePoint {
  Matrix gram;
  Vector scalars;
  double objective_value = 0.0;
  std::vector<std::pair<std::string, double>> violated;  // (row, form - rhs)
  double max_violation = 0.0;
  bool ok() const { return violated.empty(); }
};

/// Row residual form - rhs at a point, and the magnitude used to scale the
/// tolerance.
inline std::pair<double, double> row_residual(const PepConstraint& c, const Matrix& gram, const Vector& scal) {
  const double form = (c.G.array() * gram.array()).sum() + c.s.dot(scal);
  const double mag = (c.G.array().abs() * gram.array().abs()).sum() + c.s.cwiseAbs().dot(scal.cwiseAbs()) +
                     std::abs(c.rhs);
  return {form - c.rhs, mag};
}

/// Maps iterates 1..N+1 of a DCA run to a PEP assignment (f_star shifted to
/// 0). For pl_onestep the point is rescaled so that f(x^1) - f_star = 1.
inline FeasiblePoint feasible_point_from_trace(const Trace& trace, const PepSpec& spec, double f_star,
                                               double tol = 1e-8) {
  spec.validate();
  const int N = spec.N;
  if (static_cast<int>(trace.records.size()) < N + 1) {
    throw std::invalid_argument("trace has fewer than N+1 iterates");
  }
  const Layout lay{spec.kind, N, false};
  const int dim = static_cast<int>(trace.at(1).x.size());
  Matrix V(dim, lay.gram_dim());
  for (int k = 1; k <= N + 1; ++k) {
    V.col(lay.x(k)) = trace.at(k).x;
    V.col(lay.g1(k)) = trace.at(k).g1;
  }
  V.col(lay.g2_last()) = trace.at(N + 1).g2;
  Vector sc = Vector::Zero(lay.nscalars());
  for (int k = 1; k <= N + 1; ++k) {
    sc(lay.f1(k)) = trace.at(k).f1 - f_star;
    sc(lay.f2(k)) = trace.at(k).f2;
  }
  Matrix G = V.transpose() * V;
  FeasiblePoint fp;
  if (spec.kind == PepKind::pl_onestep) {
    const double s = sc(lay.f1(1)) - sc(lay.f2(1));
    if (!(s > 0.0)) throw std::invalid_argument("pl_onestep trace needs f(x^1) > f_star");
    G /= s;
    sc /= s;
  } else {
    double ell = std::numeric_limits<double>::infinity();
    for (int k = 1; k <= N + 1; ++k) {
      if (spec.kind == PepKind::gradient_gap) {
        ell = std::min(ell, (trace.at(k).g1 - trace.at(k).g2).squaredNorm());
      } else if (k <= N) {
        ell = std::min(ell, termination_measure(trace, k));
      }
    }
    sc(lay.ell()) = ell;
  }
  const PepProblem P = build(spec);
  for (const auto& c : P.constraints) {
    const auto [res, mag] = row_residual(c, G, sc);
    const double viol = c.sense == Sense::eq ? std::abs(res) : res;
    fp.max_violation = std::max(fp.max_violation, viol);
    if (viol > tol * std::max(1.0, mag)) fp.violated.emplace_back(c.name, res);
  }
  fp.gram = G;
  fp.scalars = sc;
  fp.objective_value = (P.obj_G.array() * G.array()).sum() + P.obj_s.dot(sc);
  return fp;
}

}  // namespace dcapep::pep
