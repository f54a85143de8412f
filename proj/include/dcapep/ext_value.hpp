#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>

namespace dcapep {

/// Smoothness modulus L in (0, +inf]. The infinite case is an explicit
/// state, never an IEEE infinity flowing through arithmetic.
class Smoothness {
 public:
  /// Default-constructed modulus is infinite (every convex function is
  /// inf-smooth).
  constexpr Smoothness() = default;

  explicit Smoothness(double L) : value_(L) {
    if (!(L > 0.0) || !std::isfinite(L)) {
      throw std::invalid_argument("smoothness modulus must be finite and > 0, got " +
                                  std::to_string(L));
    }
  }

  static constexpr Smoothness infinite() noexcept { return Smoothness(); }

  /// Parses a double where +inf means the infinite variant.
  static Smoothness from_double(double L) {
    if (std::isinf(L) && L > 0) return infinite();
    return Smoothness(L);
  }

  constexpr bool is_finite() const noexcept { return value_.has_value(); }
  constexpr bool is_infinite() const noexcept { return !value_.has_value(); }

  double value() const {
    if (!value_) throw std::domain_error("smoothness modulus is infinite");
    return *value_;
  }

  /// 1/L with the convention 1/inf = 0.
  double reciprocal() const noexcept { return value_ ? 1.0 / *value_ : 0.0; }

  /// IEEE view, for printing and for callers that only compare.
  double as_double() const noexcept {
    return value_ ? *value_ : std::numeric_limits<double>::infinity();
  }

  friend bool operator==(const Smoothness& a, const Smoothness& b) {
    return a.value_ == b.value_;
  }

 private:
  std::optional<double> value_;
};

inline std::ostream& operator<<(std::ostream& os, const Smoothness& L) {
  if (L.is_infinite()) return os << "inf";
  return os << L.value();
}

/// Parameters (mu, L) of the class F_{mu,L} of closed proper convex
/// functions that are L-smooth and mu-strongly convex.
struct ClassParams {
  double mu = 0.0;
  Smoothness L;

  ClassParams() = default;
  ClassParams(double mu_, Smoothness L_) : mu(mu_), L(L_) { validate(); }
  ClassParams(double mu_, double L_) : mu(mu_), L(Smoothness::from_double(L_)) { validate(); }

  void validate() const {
    if (!(mu >= 0.0) || !std::isfinite(mu)) {
      throw std::invalid_argument("strong convexity modulus must be finite and >= 0");
    }
    if (L.is_finite() && !(mu < L.value())) {
      throw std::invalid_argument("class parameters need mu < L when L is finite (mu=" +
                                  std::to_string(mu) + ", L=" + std::to_string(L.value()) +
                                  ")");
    }
  }

  /// mu/L with mu/inf = 0.
  double mu_over_L() const noexcept { return mu * L.reciprocal(); }

  friend bool operator==(const ClassParams& a, const ClassParams& b) {
    return a.mu == b.mu && a.L == b.L;
  }
};

inline std::ostream& operator<<(std::ostream& os, const ClassParams& p) {
  return os << "(mu=" << p.mu << ", L=" << p.L << ")";
}

/// A value of the form a*inf + b, with a, b finite. Arithmetic follows the
/// conventions b/inf = 0, 0*inf = 0 and (a inf + b)/(c inf + d) = a/c for
/// c != 0. Only first order in the infinite symbol is representable; a
/// product of two genuinely infinite values throws.
class ExtValue {
 public:
  constexpr ExtValue() = default;
  constexpr ExtValue(double finite) : inf_(0.0), fin_(finite) {}  // NOLINT: implicit on purpose
  constexpr ExtValue(double inf_coef, double finite) : inf_(inf_coef), fin_(finite) {}

  static ExtValue of(const Smoothness& L) {
    return L.is_infinite() ? ExtValue(1.0, 0.0) : ExtValue(L.value());
  }
  static constexpr ExtValue infinity() { return ExtValue(1.0, 0.0); }

  /// 1/x for a nonnegative modulus x, with 1/0 = inf and 1/inf = 0.
  static ExtValue reciprocal_of(double x) {
    if (x < 0.0) throw std::domain_error("reciprocal of a negative modulus");
    return x == 0.0 ? infinity() : ExtValue(1.0 / x);
  }
  static ExtValue reciprocal_of(const Smoothness& L) { return ExtValue(L.reciprocal()); }

  constexpr double inf_coef() const noexcept { return inf_; }
  constexpr double fin() const noexcept { return fin_; }
  constexpr bool is_finite() const noexcept { return inf_ == 0.0; }

  double value() const {
    if (inf_ != 0.0) throw std::domain_error("value is infinite");
    return fin_;
  }

  /// Sign on the extended line; +1 for +inf.
  int sign() const noexcept {
    if (inf_ > 0) return 1;
    if (inf_ < 0) return -1;
    return fin_ > 0 ? 1 : (fin_ < 0 ? -1 : 0);
  }

  friend ExtValue operator+(ExtValue a, ExtValue b) { return {a.inf_ + b.inf_, a.fin_ + b.fin_}; }
  friend ExtValue operator-(ExtValue a, ExtValue b) { return {a.inf_ - b.inf_, a.fin_ - b.fin_}; }
  friend ExtValue operator-(ExtValue a) { return {-a.inf_, -a.fin_}; }

  friend ExtValue operator*(ExtValue a, ExtValue b) {
    if (a.inf_ != 0.0 && b.inf_ != 0.0) {
      throw std::domain_error("product of two infinite quantities");
    }
    return {a.inf_ * b.fin_ + a.fin_ * b.inf_, a.fin_ * b.fin_};
  }

  friend ExtValue operator/(ExtValue a, ExtValue b) {
    if (b.inf_ != 0.0) {
      // (a inf + b)/(c inf + d) = a/c ; finite/inf = 0
      return ExtValue(a.inf_ / b.inf_);
    }
    if (b.fin_ == 0.0) throw std::domain_error("division by zero");
    return {a.inf_ / b.fin_, a.fin_ / b.fin_};
  }

 private:
  double inf_ = 0.0;
  double fin_ = 0.0;
};

/// Indicator of R_+ united with {+inf}: 1 for t >= 0 or t = +inf, 0 otherwise.
inline int indicator_nonneg(double t) noexcept {
  if (std::isnan(t)) return 0;
  return t >= 0.0 ? 1 : 0;
}

inline int indicator_nonneg(const ExtValue& t) noexcept { return t.sign() >= 0 ? 1 : 0; }

}  // namespace dcapep
