#pragma once

#include <cstdio>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dcapep/instances.hpp"

namespace dcapep {

enum class StopKind { gradient_gap, model_decrease };

struct StopRule {
  StopKind kind = StopKind::gradient_gap;
  double epsilon = 1e-8;
  int max_iter = 1000;

  void validate() const {
    if (!(epsilon > 0.0)) throw std::invalid_argument("stop rule: epsilon must be > 0");
    if (max_iter < 1) throw std::invalid_argument("stop rule: max_iter must be >= 1");
  }
};

enum class StopReason { gap_tol, T_tol, max_iter, oracle_failure };

inline const char* to_string(StopReason r) {
  switch (r) {
    case StopReason::gap_tol: return "gap_tol";
    case StopReason::T_tol: return "T_tol";
    case StopReason::max_iter: return "max_iter";
    case StopReason::oracle_failure: return "oracle_failure";
  }
  return "?";
}

/// One iterate of Algorithm 1. T is the termination measure T(x^k), i.e.
/// the model decrease of the step that produced x^k; NaN for k = 1.
struct IterateRecord {
  Vector x;
  Vector g1;
  Vector g2;
  double f1 = 0.0;
  double f2 = 0.0;
  double gap = 0.0;
  double T = std::numeric_limits<double>::quiet_NaN();

  double f() const { return f1 - f2; }
};

/// Iterate history, 0-based storage: records[k-1] holds iterate k.
struct Trace {
  std::vector<IterateRecord> records;
  int N_performed = 0;  // number of completed subproblem solves
  StopReason stop_reason = StopReason::max_iter;
  std::optional<Vector> failure_point;

  const IterateRecord& at(int k) const {
    if (k < 1 || k > static_cast<int>(records.size())) {
      throw std::out_of_range("trace index " + std::to_string(k) + " out of range");
    }
    return records[static_cast<std::size_t>(k - 1)];
  }

  /// min over k in {1..n+1} of gap^k.
  double min_gap(int n) const {
    if (n < 0 || n + 1 > static_cast<int>(records.size())) throw std::out_of_range("min_gap range");
    double m = std::numeric_limits<double>::infinity();
    for (int k = 1; k <= n + 1; ++k) m = std::min(m, at(k).gap);
    return m;
  }

  /// min over k in {1..n} of T(x^{k+1}).
  double min_T(int n) const {
    if (n < 1 || n + 1 > static_cast<int>(records.size())) throw std::out_of_range("min_T range");
    double m = std::numeric_limits<double>::infinity();
    for (int k = 1; k <= n; ++k) m = std::min(m, at(k + 1).T);
    return m;
  }

  /// min over k in {1..n} of |x^{k+1} - x^k|.
  double min_step(int n) const {
    if (n < 1 || n + 1 > static_cast<int>(records.size())) throw std::out_of_range("min_step range");
    double m = std::numeric_limits<double>::infinity();
    for (int k = 1; k <= n; ++k) m = std::min(m, (at(k + 1).x - at(k).x).norm());
    return m;
  }
};

/// Error raised when an oracle is evaluated outside its domain.
class OracleFailure : public std::runtime_error {
 public:
  OracleFailure(const std::string& what, Vector point)
      : std::runtime_error(what), point_(std::move(point)) {}
  const Vector& point() const noexcept { return point_; }

 private:
  Vector point_;
};

/// Algorithm 1. Every iterate gets a fresh g2 from the f2 oracle, the
/// subproblem is solved by the instance's argmin oracle, and g1^{k+1} is set
/// to g2^k. Stops at the first k with gap^k <= eps (gradient_gap), the first
/// step with T(x^{k+1}) < eps (model_decrease), or after max_iter solves.
/// An oracle failure ends the run with stop_reason = oracle_failure and the
/// offending point recorded.
inline Trace run(const DCInstance& inst, const Vector& x1, const StopRule& rule) {
  rule.validate();
  Trace tr;

  auto eval2 = [&](const Vector& x) {
    auto r2 = inst.f2(x);
    if (!r2.in_domain()) throw OracleFailure("f2 oracle failed", x);
    return r2;
  };

  auto r1 = inst.f1(x1);
  if (!r1.in_domain()) {
    tr.stop_reason = StopReason::oracle_failure;
    tr.failure_point = x1;
    return tr;
  }
  IterateRecord cur;
  try {
    auto r2 = eval2(x1);
    cur.x = x1;
    cur.g1 = *r1.subgradient;
    cur.g2 = *r2.subgradient;
    cur.f1 = r1.value;
    cur.f2 = r2.value;
    cur.gap = (cur.g1 - cur.g2).norm();
  } catch (const OracleFailure& e) {
    tr.stop_reason = StopReason::oracle_failure;
    tr.failure_point = e.point();
    return tr;
  }
  tr.records.push_back(cur);

  for (;;) {
    const IterateRecord& last = tr.records.back();
    if (rule.kind == StopKind::gradient_gap && last.gap <= rule.epsilon) {
      tr.stop_reason = StopReason::gap_tol;
      return tr;
    }
    if (rule.kind == StopKind::model_decrease && tr.records.size() >= 2 && last.T < rule.epsilon) {
      tr.stop_reason = StopReason::T_tol;
      return tr;
    }
    if (tr.N_performed >= rule.max_iter) {
      tr.stop_reason = StopReason::max_iter;
      return tr;
    }

    IterateRecord next;
    try {
      next.x = inst.argmin(last.x, last.g2);
      auto n1 = inst.f1(next.x);
      if (!n1.in_domain()) throw OracleFailure("f1 oracle failed", next.x);
      auto n2 = eval2(next.x);
      next.g1 = last.g2;  // subproblem optimality
      next.g2 = *n2.subgradient;
      next.f1 = n1.value;
      next.f2 = n2.value;
    } catch (const OracleFailure& e) {
      tr.stop_reason = StopReason::oracle_failure;
      tr.failure_point = e.point();
      return tr;
    }
    next.gap = (next.g1 - next.g2).norm();
    next.T = last.f1 - next.f1 - last.g2.dot(last.x - next.x);
    tr.records.push_back(std::move(next));
    ++tr.N_performed;
  }
}

/// T(x^{k+1}) = f1(x^k) - f1(x^{k+1}) - <g2^k, x^k - x^{k+1}>, 1 <= k <= N_performed.
inline double termination_measure(const Trace& trace, int k) {
  if (k < 1 || k > trace.N_performed) {
    throw std::out_of_range("termination_measure: k = " + std::to_string(k) +
                            " outside 1.." + std::to_string(trace.N_performed));
  }
  const auto& a = trace.at(k);
  const auto& b = trace.at(k + 1);
  return a.f1 - b.f1 - a.g2.dot(a.x - b.x);
}

/// CSV with columns k, x_1..x_n, gap, T, f1, f2, f at 17 significant digits.
inline void write_trace_csv(std::ostream& os, const Trace& trace) {
  const int n = trace.records.empty() ? 0 : static_cast<int>(trace.records.front().x.size());
  os << "k";
  for (int i = 1; i <= n; ++i) os << ",x" << i;
  os << ",gap,T,f1,f2,f\n";
  char buf[64];
  auto num = [&](double v) -> const char* {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
  };
  for (std::size_t k = 0; k < trace.records.size(); ++k) {
    const auto& r = trace.records[k];
    os << (k + 1);
    for (int i = 0; i < n; ++i) os << ',' << num(r.x(i));
    os << ',' << num(r.gap);
    os << ',' << (k == 0 ? "" : num(r.T));
    os << ',' << num(r.f1);
    os << ',' << num(r.f2);
    os << ',' << num(r.f()) << '\n';
  }
}

}  // namespace dcapep
