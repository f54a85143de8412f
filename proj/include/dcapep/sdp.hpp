#pragma once

// Dense primal-dual interior-point solver for
//
//   maximize   <C, X> + c'z
//   subject to <A_i, X> + a_i'z  (= or <=)  b_i,   X PSD,  z free.
//
// HKM search direction with Mehrotra predictor-corrector. Inequality rows get
// a nonnegative slack. Before iterating, the problem is reduced:
//   1. The common null space of all data matrices is projected out.
//   2. Free-variable directions invisible to every row and the objective
//      are removed (SVD of the stacked free-variable data).
//   3. Linearly dependent equality rows are dropped (or reported
//      inconsistent).
// A trace bound tr X <= R keeps the iterates bounded; R is enlarged when it
// turns out active. Splitting off unused PSD coordinates is available
// (split_unused) but off by default: it drops the range condition that ties
// cross entries to the diagonal and can overstate the supremum.
// Duals are reported per original row as lambda >= 0 for "<=" rows, with
// <C, X> + c'z <= b'lambda for any feasible primal point.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace dcapep::sdp {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

enum class Sense { eq, le };

struct Row {
  Matrix A;  // symmetric, n x n
  Vector a;  // length nfree
  Sense sense = Sense::le;
  double b = 0.0;
  std::string name;
};

struct StandardForm {
  int n = 0;
  int nfree = 0;
  std::vector<Row> rows;
  Matrix C;  // objective, maximized
  Vector c;
};

struct Options {
  int max_iter = 100;
  double feas_tol = 1e-8;
  double gap_tol = 1e-7;
  bool reduce = true;
  // Face split of unused PSD coordinates. Drops the range condition on the
  // cross block, so it can relax the problem; off unless asked for.
  bool split_unused = false;
  // Bound on tr X used internally: 0 = automatic, negative = none.
  double trace_bound = 0.0;
  bool verbose = false;  // per-iteration lines in the log
};

enum class Status { optimal, near_optimal, infeasible, unbounded, numerical_failure };

inline const char* to_string(Status s) {
  switch (s) {
    case Status::optimal: return "optimal";
    case Status::near_optimal: return "near_optimal";
    case Status::infeasible: return "infeasible";
    case Status::unbounded: return "unbounded";
    case Status::numerical_failure: return "numerical_failure";
  }
  return "?";
}

struct Result {
  Status status = Status::numerical_failure;
  double primal_value = std::numeric_limits<double>::quiet_NaN();
  double dual_value = std::numeric_limits<double>::quiet_NaN();
  Matrix X;
  Vector z;
  Vector lambda;
  int iterations = 0;
  double pinf = std::numeric_limits<double>::infinity();
  double dinf = std::numeric_limits<double>::infinity();
  double relgap = std::numeric_limits<double>::infinity();
  std::vector<std::string> log;
};

/// Throws std::invalid_argument on malformed input.
inline void validate(const StandardForm& f) {
  if (f.n < 1) throw std::invalid_argument("sdp: PSD block size must be >= 1");
  if (f.nfree < 0) throw std::invalid_argument("sdp: negative number of free variables");
  auto check_mat = [&](const Matrix& M, const std::string& what) {
    if (M.rows() != f.n || M.cols() != f.n) throw std::invalid_argument("sdp: " + what + " has wrong size");
    if (!M.allFinite()) throw std::invalid_argument("sdp: " + what + " has non-finite entries");
    if ((M - M.transpose()).cwiseAbs().maxCoeff() > 0.0) {
      throw std::invalid_argument("sdp: " + what + " is not symmetric");
    }
  };
  check_mat(f.C, "objective matrix");
  if (f.c.size() != f.nfree) throw std::invalid_argument("sdp: objective vector has wrong size");
  for (std::size_t i = 0; i < f.rows.size(); ++i) {
    const auto& r = f.rows[i];
    check_mat(r.A, "row " + std::to_string(i));
    if (r.a.size() != f.nfree) throw std::invalid_argument("sdp: row free part has wrong size");
    if (!std::isfinite(r.b)) throw std::invalid_argument("sdp: non-finite right-hand side");
  }
}

namespace detail {

inline std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

inline Matrix sym(const Matrix& M) { return 0.5 * (M + M.transpose()); }

// Largest step t in (0, inf] with V + t dV PSD, given the Cholesky factor of V.
inline double max_step_psd(const Eigen::LLT<Matrix>& llt, const Matrix& dV) {
  const Matrix& L = llt.matrixL();
  Matrix T = L.triangularView<Eigen::Lower>().solve(dV);
  T = L.triangularView<Eigen::Lower>().solve(T.transpose()).transpose();
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym(T), Eigen::EigenvaluesOnly);
  const double lmin = es.eigenvalues().minCoeff();
  return lmin < 0.0 ? -1.0 / lmin : std::numeric_limits<double>::infinity();
}

inline double max_step_vec(const Vector& v, const Vector& dv) {
  double t = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (dv(i) < 0.0) t = std::min(t, -v(i) / dv(i));
  }
  return t;
}

// Internal minimization problem after reductions:
//   min <Ch, X> + ch'z  s.t.  Aflat vec(X) + B z + E s = b,  X PSD, s >= 0.
struct Core {
  int n = 0, m = 0, nf = 0;
  Matrix Aflat;  // m x n^2
  Matrix B;      // m x nf
  Vector b;
  Matrix Ch;
  Vector ch;
  std::vector<int> slack_row;  // row index of each slack
};

struct CoreResult {
  Status status = Status::numerical_failure;
  Matrix X;
  Vector z, y;
  int iterations = 0;
  double pinf = 0, dinf = 0, relgap = 0, pobj = 0, dobj = 0;
};

inline Matrix unvec(const Vector& v, int n) { return Eigen::Map<const Matrix>(v.data(), n, n); }
inline Vector vec(const Matrix& M) { return Eigen::Map<const Vector>(M.data(), M.size()); }

inline CoreResult ipm(const Core& P, const Options& opt, std::vector<std::string>& log) {
  const int n = P.n, m = P.m, nf = P.nf;
  const int ns = static_cast<int>(P.slack_row.size());
  const double nu = n + ns;

  // SDPT3-style starting point.
  double normAmax = 0.0, ratio = 0.0;
  for (int i = 0; i < m; ++i) {
    const double na = std::sqrt(P.Aflat.row(i).squaredNorm() + P.B.row(i).squaredNorm());
    normAmax = std::max(normAmax, na);
    ratio = std::max(ratio, (1.0 + std::abs(P.b(i))) / (1.0 + na));
  }
  const double normC = std::sqrt(P.Ch.squaredNorm() + P.ch.squaredNorm());
  const double xi = std::max({10.0, std::sqrt(static_cast<double>(n)), n * ratio});
  const double zeta = std::max({10.0, std::sqrt(static_cast<double>(n)), normAmax, normC});

  Matrix X = xi * Matrix::Identity(n, n);
  Matrix S = zeta * Matrix::Identity(n, n);
  Vector s = Vector::Constant(ns, xi), w = Vector::Constant(ns, zeta);
  Vector y = Vector::Zero(m), z = Vector::Zero(nf);

  const double nb = 1.0 + P.b.norm();
  const double nc = 1.0 + normC;
  auto Aop = [&](const Matrix& V) -> Vector { return P.Aflat * vec(V); };
  auto Aadj = [&](const Vector& v) -> Matrix { return unvec(P.Aflat.transpose() * v, n); };
  auto Eop = [&](const Vector& v) {
    Vector r = Vector::Zero(m);
    for (int l = 0; l < ns; ++l) r(P.slack_row[l]) += v(l);
    return r;
  };
  auto Et = [&](const Vector& v) {
    Vector r(ns);
    for (int l = 0; l < ns; ++l) r(l) = v(P.slack_row[l]);
    return r;
  };

  CoreResult out;
  double gamma = 0.9;
  double best_pinf = std::numeric_limits<double>::infinity();
  int stall = 0;
  int tiny_steps = 0;
  CoreResult best;
  double best_merit = std::numeric_limits<double>::infinity();
  auto merit = [&](const CoreResult& r) {
    return std::max({r.pinf / opt.feas_tol, r.dinf / opt.feas_tol, r.relgap / opt.gap_tol});
  };
  // Ends the run on the best iterate seen; near_optimal within 1e3 of the
  // tolerances.
  auto finish = [&](const std::string& why) {
    log.push_back(why);
    CoreResult r = best_merit <= merit(out) ? best : out;
    r.status = merit(r) <= 1e3 ? Status::near_optimal : Status::numerical_failure;
    if (r.iterations != out.iterations) log.push_back(fmt("returning iterate %.0f", r.iterations));
    r.iterations = out.iterations;
    return r;
  };

  for (int it = 0;; ++it) {
    const Vector rp = P.b - Aop(X) - P.B * z - Eop(s);
    const Matrix Rd = P.Ch - Aadj(y) - S;
    const Vector rw = -Et(y) - w;
    const Vector rz = P.ch - P.B.transpose() * y;
    const double mu = ((X.array() * S.array()).sum() + s.dot(w)) / nu;
    const double pobj = (P.Ch.array() * X.array()).sum() + P.ch.dot(z);
    const double dobj = P.b.dot(y);
    out.pinf = rp.norm() / nb;
    out.dinf = std::sqrt(Rd.squaredNorm() + rw.squaredNorm() + rz.squaredNorm()) / nc;
    out.relgap = std::abs(pobj - dobj) / (1.0 + std::abs(pobj) + std::abs(dobj));
    out.pobj = pobj;
    out.dobj = dobj;
    out.iterations = it;
    out.X = X;
    out.z = z;
    out.y = y;

    if (opt.verbose) {
      log.push_back(fmt("it %3.0f pobj %+.6e dobj %+.6e trX %.2e", it, pobj, dobj, X.trace()) +
                    fmt(" pinf %.2e dinf %.2e gap %.2e mu %.2e", out.pinf, out.dinf, out.relgap, mu));
    }
    if (merit(out) < best_merit) {
      best_merit = merit(out);
      best = out;
    }
    if (out.pinf < opt.feas_tol && out.dinf < opt.feas_tol && out.relgap < opt.gap_tol) {
      out.status = Status::optimal;
      return out;
    }

    // Farkas ray for the primal: b'y > 0 with -A*(y) PSD, -E'y >= 0, B'y = 0.
    if (dobj > 0.0) {
      Eigen::SelfAdjointEigenSolver<Matrix> es(sym(-Aadj(y)), Eigen::EigenvaluesOnly);
      double viol = std::max(0.0, -es.eigenvalues().minCoeff());
      const Vector ety = -Et(y);
      if (ns > 0) viol += std::max(0.0, -ety.minCoeff());
      viol += (P.B.transpose() * y).norm();
      if (viol < 1e-8 * dobj && dobj > 1e-6) {
        log.push_back(fmt("primal infeasibility certificate: b'y = %.3e, violation %.3e", dobj, viol));
        out.status = Status::infeasible;
        return out;
      }
    }
    // Ray for the dual: <Ch,X> + ch'z < 0 with A(X) + Bz + Es = 0.
    if (pobj < 0.0) {
      const double viol = (P.b - rp).norm();
      if (viol < 1e-8 * (-pobj) && -pobj > 1e-6 * nc * xi) {
        log.push_back(fmt("dual infeasibility certificate: objective %.3e, violation %.3e", pobj, viol));
        out.status = Status::unbounded;
        return out;
      }
    }

    if (out.pinf < 0.99 * best_pinf) {
      best_pinf = out.pinf;
      stall = 0;
    } else if (out.pinf > opt.feas_tol) {
      ++stall;
    }
    if (stall >= 10 && out.pinf > std::sqrt(opt.feas_tol) && out.relgap > 1e-3) {
      log.push_back(fmt("primal residual stalled at %.3e for 10 iterations", out.pinf));
      out.status = Status::infeasible;
      return out;
    }

    if (it >= opt.max_iter) {
      return finish("iteration limit reached");
    }

    Eigen::LLT<Matrix> lx(X), ls(S);
    if (lx.info() != Eigen::Success || ls.info() != Eigen::Success) {
      return finish("lost positive definiteness of an iterate");
    }
    const Matrix Sinv = ls.solve(Matrix::Identity(n, n));

    // Schur complement M_ij = tr(A_i X A_j S^-1), plus slack block.
    Matrix G(n * n, m);
    for (int j = 0; j < m; ++j) {
      const Matrix Aj = unvec(P.Aflat.row(j).transpose(), n);
      const Matrix Gj = X * Aj * Sinv;
      G.col(j) = vec(Gj.transpose());
    }
    Matrix M = P.Aflat * G;
    M = sym(M);
    Vector dsw(ns);
    for (int l = 0; l < ns; ++l) {
      dsw(l) = s(l) / w(l);
      M(P.slack_row[l], P.slack_row[l]) += dsw(l);
    }
    // KKT system [M B; B' 0] [dy; dz] = [h; rz], factored once per iteration.
    Matrix KKT = Matrix::Zero(m + nf, m + nf);
    KKT.topLeftCorner(m, m) = M;
    if (nf > 0) {
      KKT.topRightCorner(m, nf) = P.B;
      KKT.bottomLeftCorner(nf, m) = P.B.transpose();
    }
    Eigen::PartialPivLU<Matrix> lu(KKT);

    const Matrix XRdSi = sym(X * Rd * Sinv);

    struct Dir {
      Matrix dX, dS;
      Vector ds, dw, dy, dz;
    };
    bool bad = false;
    auto direction = [&](const Matrix& Rc, const Vector& rc) {
      Dir d;
      const Vector h = rp - Aop(Rc - XRdSi) - Eop(rc - dsw.cwiseProduct(rw));
      Vector rhs(m + nf);
      rhs << h, rz;
      Vector sol = lu.solve(rhs);
      auto expand = [&](const Vector& v) {
        d.dy = v.head(m);
        d.dz = v.tail(nf);
        d.dS = sym(Rd - Aadj(d.dy));
        d.dw = rw - Et(d.dy);
        d.dX = sym(Rc - X * d.dS * Sinv);
        d.ds = rc - dsw.cwiseProduct(d.dw);
      };
      expand(sol);
      // refine against the exact linearized residual
      for (int pass = 0; pass < 2 && sol.allFinite(); ++pass) {
        Vector e(m + nf);
        e << rp - Aop(d.dX) - P.B * d.dz - Eop(d.ds), rz - P.B.transpose() * d.dy;
        if (e.norm() <= 1e-15 * (1.0 + rhs.norm())) break;
        sol += lu.solve(e);
        expand(sol);
      }
      if (!sol.allFinite()) bad = true;
      return d;
    };
    auto steps = [&](const Dir& d) {
      double ap = std::min(max_step_psd(lx, d.dX), max_step_vec(s, d.ds));
      double ad = std::min(max_step_psd(ls, d.dS), max_step_vec(w, d.dw));
      return std::pair<double, double>{ap, ad};
    };

    // predictor
    const Dir da = direction(-X, -s);
    if (bad) return finish("KKT solve produced non-finite values");
    auto [apa, ada] = steps(da);
    apa = std::min(1.0, apa);
    ada = std::min(1.0, ada);
    const double mu_aff = (((X + apa * da.dX).array() * (S + ada * da.dS).array()).sum() +
                           (s + apa * da.ds).dot(w + ada * da.dw)) /
                          nu;
    const double sigma = std::clamp(std::pow(mu_aff / mu, 3.0), 0.0, 1.0);

    // corrector
    const Matrix Rc = sigma * mu * Sinv - X - sym(da.dX * da.dS * Sinv);
    Vector rc(ns);
    for (int l = 0; l < ns; ++l) rc(l) = (sigma * mu - s(l) * w(l) - da.ds(l) * da.dw(l)) / w(l);
    const Dir d = direction(Rc, rc);
    if (bad) return finish("KKT solve produced non-finite values");
    auto [ap, ad] = steps(d);
    ap = std::min(1.0, gamma * ap);
    ad = std::min(1.0, gamma * ad);

    X = sym(X + ap * d.dX);
    s += ap * d.ds;
    z += ap * d.dz;
    y += ad * d.dy;
    S = sym(S + ad * d.dS);
    w += ad * d.dw;
    gamma = 0.9 + 0.09 * std::min(ap, ad);

    if (std::min(ap, ad) < 1e-10) {
      if (++tiny_steps >= 5) {
        return finish("step length collapsed");
      }
    } else {
      tiny_steps = 0;
    }
  }
}

// Orthonormal basis (columns) of the range of a symmetric PSD matrix.
inline Matrix range_basis(const Matrix& H, double rel) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(H);
  const double top = std::max(es.eigenvalues().cwiseAbs().maxCoeff(), 0.0);
  std::vector<int> keep;
  for (Eigen::Index i = 0; i < H.rows(); ++i) {
    if (es.eigenvalues()(i) > rel * top) keep.push_back(static_cast<int>(i));
  }
  Matrix P(H.rows(), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k) P.col(static_cast<Eigen::Index>(k)) = es.eigenvectors().col(keep[k]);
  return P;
}

}  // namespace detail

/// Solves the problem. See the file comment for conventions.
inline Result solve(const StandardForm& form, const Options& opt = {}) {
  validate(form);
  Result res;
  const int n0 = form.n;
  const int m0 = static_cast<int>(form.rows.size());

  // 1. split off PSD coordinates whose principal block is never referenced
  std::vector<int> J, K;
  {
    auto used = [&](int a, int b) {
      if (form.C(a, b) != 0.0) return true;
      for (const auto& r : form.rows) {
        if (r.A(a, b) != 0.0) return true;
      }
      return false;
    };
    for (int j = 0; j < n0; ++j) {
      bool ok = opt.split_unused && opt.reduce && !used(j, j);
      for (int q : J) {
        if (!ok) break;
        if (used(j, q)) ok = false;
      }
      if (ok) J.push_back(j); else K.push_back(j);
    }
    if (K.empty()) {  // keep at least one PSD coordinate
      K.push_back(J.back());
      J.pop_back();
    }
    if (!J.empty()) {
      res.log.push_back("split off " + std::to_string(J.size()) +
                        " PSD coordinates absent from all rows; their cross entries are free");
    }
  }
  const int nk = static_cast<int>(K.size());
  const int nj = static_cast<int>(J.size());
  const int ncross = nj * nk;
  const int nf1 = form.nfree + ncross;

  auto restrictK = [&](const Matrix& A) {
    Matrix R(nk, nk);
    for (int p = 0; p < nk; ++p)
      for (int q = 0; q < nk; ++q) R(p, q) = A(K[p], K[q]);
    return R;
  };
  auto crossPart = [&](const Matrix& A, const Vector& a) {
    Vector v(nf1);
    v.head(form.nfree) = a;
    for (int p = 0; p < nj; ++p)
      for (int q = 0; q < nk; ++q) v(form.nfree + p * nk + q) = 2.0 * A(J[p], K[q]);
    return v;
  };

  std::vector<Matrix> A1(m0);
  Matrix B1(m0, nf1);
  for (int i = 0; i < m0; ++i) {
    A1[i] = restrictK(form.rows[i].A);
    B1.row(i) = crossPart(form.rows[i].A, form.rows[i].a).transpose();
  }
  Matrix C1 = restrictK(form.C);
  Vector c1 = crossPart(form.C, form.c);

  // 2. project out the common null space of the PSD data
  Matrix P = Matrix::Identity(nk, nk);
  if (opt.reduce) {
    Matrix H = C1 * C1;
    for (const auto& A : A1) H += A * A;
    Matrix Pr = detail::range_basis(detail::sym(H), 1e-12);
    if (Pr.cols() < nk && Pr.cols() > 0) {
      res.log.push_back("projected out a " + std::to_string(nk - Pr.cols()) +
                        "-dimensional common null space of the PSD data");
      P = Pr;
    }
  }
  const int n = static_cast<int>(P.cols());
  for (auto& A : A1) A = detail::sym(P.transpose() * A * P);
  C1 = detail::sym(P.transpose() * C1 * P);

  // 3. drop invisible free directions
  Matrix V = Matrix::Identity(nf1, nf1);
  if (opt.reduce && nf1 > 0) {
    Matrix F(m0 + 1, nf1);
    F.topRows(m0) = B1;
    F.row(m0) = c1.transpose();
    Eigen::JacobiSVD<Matrix> svd(F, Eigen::ComputeFullV);
    const Vector sv = svd.singularValues();
    int r = 0;
    while (r < sv.size() && sv(r) > 1e-10 * sv(0)) ++r;
    Matrix Vr = svd.matrixV().leftCols(r);
    if (Vr.cols() < nf1) {
      res.log.push_back("removed " + std::to_string(nf1 - Vr.cols()) +
                        " free-variable directions absent from all rows");
      V = Vr;
    }
  }
  const int nf = static_cast<int>(V.cols());
  const Matrix B2 = B1 * V;
  const Vector c2 = V.transpose() * c1;

  // 4. dependent equality rows
  std::vector<int> kept;
  {
    std::vector<int> eqs;
    for (int i = 0; i < m0; ++i) {
      if (form.rows[i].sense == Sense::eq) eqs.push_back(i);
    }
    std::vector<char> drop(m0, 0);
    if (!eqs.empty()) {
      Matrix R(n * n + nf, static_cast<Eigen::Index>(eqs.size()));
      for (std::size_t k = 0; k < eqs.size(); ++k) {
        R.col(static_cast<Eigen::Index>(k)) << detail::vec(A1[eqs[k]]), B2.row(eqs[k]).transpose();
      }
      Eigen::ColPivHouseholderQR<Matrix> qr(R);
      qr.setThreshold(1e-11);
      const auto rank = qr.rank();
      if (rank < static_cast<Eigen::Index>(eqs.size())) {
        std::vector<int> indep, dep;
        for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(eqs.size()); ++k) {
          const int idx = eqs[static_cast<std::size_t>(qr.colsPermutation().indices()(k))];
          (k < rank ? indep : dep).push_back(idx);
        }
        std::sort(indep.begin(), indep.end());
        Matrix Ri(R.rows(), static_cast<Eigen::Index>(indep.size()));
        Vector bi(static_cast<Eigen::Index>(indep.size()));
        for (std::size_t k = 0; k < indep.size(); ++k) {
          const int i = indep[k];
          Ri.col(static_cast<Eigen::Index>(k)) << detail::vec(A1[i]), B2.row(i).transpose();
          bi(static_cast<Eigen::Index>(k)) = form.rows[i].b;
        }
        Eigen::CompleteOrthogonalDecomposition<Matrix> cod(Ri);
        for (int i : dep) {
          Vector ri(R.rows());
          ri << detail::vec(A1[i]), B2.row(i).transpose();
          const Vector coef = cod.solve(ri);
          const double implied = coef.dot(bi);
          const std::string nm = form.rows[i].name.empty() ? std::to_string(i) : form.rows[i].name;
          if (std::abs(implied - form.rows[i].b) > 1e-9 * (1.0 + std::abs(form.rows[i].b))) {
            res.log.push_back("equality row " + nm + " contradicts the others");
            res.status = Status::infeasible;
            res.lambda = Vector::Zero(m0);
            return res;
          }
          res.log.push_back("dropped dependent equality row " + nm);
          drop[i] = 1;
        }
      }
    }
    for (int i = 0; i < m0; ++i) {
      if (!drop[i]) kept.push_back(i);
    }
  }

  detail::Core core;
  core.n = n;
  core.m = static_cast<int>(kept.size());
  core.nf = nf;
  core.Aflat.resize(core.m, n * n);
  core.B.resize(core.m, nf);
  core.b.resize(core.m);
  for (int k = 0; k < core.m; ++k) {
    const int i = kept[k];
    core.Aflat.row(k) = detail::vec(A1[i]).transpose();
    core.B.row(k) = B2.row(i);
    core.b(k) = form.rows[i].b;
    if (form.rows[i].sense == Sense::le) core.slack_row.push_back(k);
  }
  core.Ch = -C1;
  core.ch = -c2;

  // Big-M bound tr X <= R keeps the reduced dual strictly feasible when the
  // primal optimal face is unbounded. R grows while its multiplier matters.
  detail::CoreResult cr;
  double R = opt.trace_bound;
  if (R == 0.0) R = 1e3 * n * (1.0 + (core.m > 0 ? core.b.cwiseAbs().maxCoeff() : 0.0));
  std::optional<detail::CoreResult> fallback;
  for (int attempt = 0;; ++attempt) {
    if (R < 0.0) {
      cr = detail::ipm(core, opt, res.log);
      break;
    }
    if (opt.verbose) res.log.push_back(detail::fmt("trace bound R = %.3e", R));
    detail::Core cb = core;
    cb.m = core.m + 1;
    cb.Aflat.conservativeResize(cb.m, Eigen::NoChange);
    cb.Aflat.row(core.m) = detail::vec(Matrix::Identity(n, n)).transpose();
    cb.B.conservativeResize(cb.m, Eigen::NoChange);
    cb.B.row(core.m).setZero();
    cb.b.conservativeResize(cb.m);
    cb.b(core.m) = R;
    cb.slack_row.push_back(core.m);
    cr = detail::ipm(cb, opt, res.log);
    const double lamR = cr.y.size() == cb.m ? -cr.y(core.m) : 0.0;
    cr.y.conservativeResize(core.m);
    const bool solved = cr.status == Status::optimal || cr.status == Status::near_optimal;
    if (!solved) {
      if (fallback) {
        res.log.push_back(detail::fmt("solve with trace bound %.3e failed; keeping the bound %.3e result", R,
                                      R / 100.0));
        cr = *fallback;
        cr.status = Status::near_optimal;
      }
      break;
    }
    if (opt.verbose) res.log.push_back(detail::fmt("trace bound multiplier %.3e", lamR));
    if (lamR * R <= 1e-6 * (1.0 + std::abs(cr.pobj))) break;
    if (attempt >= 2) {
      res.log.push_back(detail::fmt("trace bound %.3e still active (multiplier %.3e)", R, lamR));
      // objective keeps growing with R: no finite supremum
      const double prev = std::abs(fallback->pobj);
      cr.status = std::abs(cr.pobj) > 10.0 * (1.0 + prev) ? Status::unbounded : Status::near_optimal;
      break;
    }
    res.log.push_back(detail::fmt("trace bound %.3e active (multiplier %.3e); enlarging", R, lamR));
    fallback = cr;
    R *= 100.0;
  }
  res.status = cr.status;
  res.iterations = cr.iterations;
  res.pinf = cr.pinf;
  res.dinf = cr.dinf;
  res.relgap = cr.relgap;
  res.primal_value = -cr.pobj;
  res.dual_value = -cr.dobj;

  // map back
  res.lambda = Vector::Zero(m0);
  for (int k = 0; k < core.m; ++k) res.lambda(kept[k]) = -cr.y(k);
  const Vector zf = V * cr.z;
  res.z = zf.head(form.nfree);
  const Matrix XK = P * cr.X * P.transpose();
  res.X = Matrix::Zero(n0, n0);
  for (int p = 0; p < nk; ++p)
    for (int q = 0; q < nk; ++q) res.X(K[p], K[q]) = XK(p, q);
  if (nj > 0) {
    Matrix XJK(nj, nk);
    for (int p = 0; p < nj; ++p)
      for (int q = 0; q < nk; ++q) XJK(p, q) = zf(form.nfree + p * nk + q);
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(XK);
    const Matrix XJJ = XJK * cod.solve(XJK.transpose());
    for (int p = 0; p < nj; ++p) {
      for (int q = 0; q < nk; ++q) {
        res.X(J[p], K[q]) = XJK(p, q);
        res.X(K[q], J[p]) = XJK(p, q);
      }
      for (int q = 0; q < nj; ++q) res.X(J[p], J[q]) = 0.5 * (XJJ(p, q) + XJJ(q, p));
    }
  }
  return res;
}

}  // namespace dcapep::sdp
