#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include "dcapep/instances.hpp"

namespace dcapep {

struct SamplePoint {
  Vector x;
  Vector g;
  double f = 0.0;
};

struct InterpolationReport {
  bool ok = true;
  double worst_violation = -std::numeric_limits<double>::infinity();
  std::pair<int, int> witness{-1, -1};  // 0-based (i, j)
};

inline constexpr double kInterpTol = 1e-9;

/// LHS - RHS of the F_{mu,L} interpolation inequality for the ordered pair
/// (i, j). Nonpositive means the pair is fine.
inline double interpolation_violation(const SamplePoint& si, const SamplePoint& sj,
                                      const ClassParams& p) {
  const double invL = p.L.reciprocal();
  const double muL = p.mu_over_L();
  const Vector dg = si.g - sj.g;
  const Vector dx = si.x - sj.x;
  // <g^j - g^i, x^j - x^i> = <dg, dx>
  const double lhs = (invL * dg.squaredNorm() + p.mu * dx.squaredNorm() - 2.0 * muL * dg.dot(dx)) /
                     (2.0 * (1.0 - muL));
  const double rhs = si.f - sj.f - sj.g.dot(dx);
  return lhs - rhs;
}

/// Checks every ordered pair. The witness is the first maximal pair in
/// lexicographic (i, j) order; with fewer than two samples there is none.
inline InterpolationReport check_interpolable(const std::vector<SamplePoint>& samples,
                                              const ClassParams& params,
                                              double tol = kInterpTol) {
  params.validate();
  InterpolationReport rep;
  const int n = static_cast<int>(samples.size());
  for (const auto& s : samples) {
    if (!s.x.allFinite() || !s.g.allFinite() || !std::isfinite(s.f)) {
      throw std::invalid_argument("sample entries must be finite");
    }
  }
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      const double v = interpolation_violation(samples[i], samples[j], params);
      if (v > rep.worst_violation) {
        rep.worst_violation = v;
        rep.witness = {i, j};
      }
    }
  }
  if (n < 2) rep.worst_violation = 0.0;
  rep.ok = rep.worst_violation <= tol;
  return rep;
}

/// S = min(L1 - mu2, L2) as an extended value.
inline ExtValue descent_modulus(const ClassParams& p1, const ClassParams& p2) {
  const ExtValue a = ExtValue::of(p1.L) - ExtValue(p2.mu);
  const ExtValue b = ExtValue::of(p2.L);
  if (a.is_finite() && b.is_finite()) return std::min(a.value(), b.value());
  if (a.is_finite()) return a;
  return b;
}

/// f - |g1 - g2|^2 / (2S), a lower bound on f_star.
inline double descent_gap(double f_value, const Vector& g1, const Vector& g2,
                          const ClassParams& p1, const ClassParams& p2) {
  const ExtValue S = descent_modulus(p1, p2);
  if (!S.is_finite()) {
    throw std::domain_error("descent lemma inapplicable: L1 - mu2 and L2 are both infinite");
  }
  if (!(S.value() > 0.0)) throw std::domain_error("descent lemma needs min(L1 - mu2, L2) > 0");
  return f_value - (g1 - g2).squaredNorm() / (2.0 * S.value());
}

}  // namespace dcapep
