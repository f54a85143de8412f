#pragma once

// SDPA sparse format (".dat-s"), primal form
//
//   minimize  c'x   subject to   sum_i F_i x_i - F_0  PSD   (block diagonal)
//
// Layout: optional comment lines starting with '*' or '"', then mDIM, nBLOCK,
// the block structure (negative size = diagonal block), the c vector, and
// entries "matno blkno i j value" with 1-based indices and i <= j.

#include <Eigen/Dense>

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "dcapep/sdp.hpp"

namespace dcapep::sdpa {

struct Entry {
  int mat = 0;  // 0 = F_0
  int blk = 1;
  int i = 1;
  int j = 1;
  double v = 0.0;

  friend bool operator==(const Entry&, const Entry&) = default;
};

struct Problem {
  std::vector<std::string> comments;  // without the leading '*'
  int m = 0;
  std::vector<int> block_struct;
  std::vector<double> c;
  std::vector<Entry> entries;

  friend bool operator==(const Problem&, const Problem&) = default;
};

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Deterministic text; entries are written in the stored order.
inline std::string write(const Problem& p) {
  std::ostringstream os;
  for (const auto& c : p.comments) os << '*' << c << '\n';
  os << p.m << " = mDIM\n";
  os << p.block_struct.size() << " = nBLOCK\n";
  for (std::size_t k = 0; k < p.block_struct.size(); ++k) os << (k ? " " : "") << p.block_struct[k];
  os << " = bLOCKsTRUCT\n";
  for (std::size_t k = 0; k < p.c.size(); ++k) os << (k ? " " : "") << format_double(p.c[k]);
  os << '\n';
  for (const auto& e : p.entries) {
    os << e.mat << ' ' << e.blk << ' ' << e.i << ' ' << e.j << ' ' << format_double(e.v) << '\n';
  }
  return os.str();
}

namespace detail {

// Splits a header line into numeric tokens, treating ",(){}=" as separators
// and stopping at the first non-numeric word.
inline std::vector<std::string> numeric_tokens(const std::string& line) {
  std::string s = line;
  for (char& ch : s) {
    if (ch == ',' || ch == '(' || ch == ')' || ch == '{' || ch == '}' || ch == '=') ch = ' ';
  }
  std::istringstream is(s);
  std::vector<std::string> out;
  std::string tok;
  while (is >> tok) {
    char* end = nullptr;
    std::strtod(tok.c_str(), &end);
    if (end == tok.c_str() || *end != '\0') break;
    out.push_back(tok);
  }
  return out;
}

inline double to_double(const std::string& t) {
  char* end = nullptr;
  const double v = std::strtod(t.c_str(), &end);
  if (end == t.c_str() || *end != '\0') throw std::runtime_error("sdpa: bad number '" + t + "'");
  return v;
}

inline int to_int(const std::string& t) {
  const double v = to_double(t);
  const int k = static_cast<int>(v);
  if (static_cast<double>(k) != v) throw std::runtime_error("sdpa: expected integer, got '" + t + "'");
  return k;
}

}  // namespace detail

inline Problem parse(const std::string& text) {
  Problem p;
  std::istringstream is(text);
  std::string line;
  std::vector<std::string> pending;  // numeric tokens not yet consumed
  enum { M, NB, BS, C, ENT } stage = M;
  int nblocks = 0;

  auto take = [&](std::vector<std::string>& toks) {
    std::size_t pos = 0;
    while (pos < toks.size()) {
      switch (stage) {
        case M:
          p.m = detail::to_int(toks[pos++]);
          stage = NB;
          break;
        case NB:
          nblocks = detail::to_int(toks[pos++]);
          stage = nblocks > 0 ? BS : C;
          break;
        case BS:
          p.block_struct.push_back(detail::to_int(toks[pos++]));
          if (static_cast<int>(p.block_struct.size()) == nblocks) stage = p.m > 0 ? C : ENT;
          break;
        case C:
          p.c.push_back(detail::to_double(toks[pos++]));
          if (static_cast<int>(p.c.size()) == p.m) stage = ENT;
          break;
        case ENT:
          return pos;
      }
    }
    return pos;
  };

  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '*' || line[0] == '"') {
      if (stage == M) p.comments.push_back(line.substr(1));
      continue;
    }
    if (stage != ENT) {
      auto toks = detail::numeric_tokens(line);
      const std::size_t used = take(toks);
      if (used < toks.size()) throw std::runtime_error("sdpa: unexpected tokens in header");
      continue;
    }
    std::istringstream ls(line);
    std::string a, b, c, d, v;
    if (!(ls >> a >> b >> c >> d >> v)) throw std::runtime_error("sdpa: malformed entry line: " + line);
    Entry e{detail::to_int(a), detail::to_int(b), detail::to_int(c), detail::to_int(d), detail::to_double(v)};
    if (e.mat < 0 || e.mat > p.m) throw std::runtime_error("sdpa: matrix index out of range");
    if (e.blk < 1 || e.blk > static_cast<int>(p.block_struct.size())) {
      throw std::runtime_error("sdpa: block index out of range");
    }
    const int sz = std::abs(p.block_struct[static_cast<std::size_t>(e.blk - 1)]);
    if (e.i < 1 || e.j < 1 || e.i > sz || e.j > sz) throw std::runtime_error("sdpa: entry index out of range");
    if (p.block_struct[static_cast<std::size_t>(e.blk - 1)] < 0 && e.i != e.j) {
      throw std::runtime_error("sdpa: off-diagonal entry in a diagonal block");
    }
    p.entries.push_back(e);
  }
  if (stage != ENT) throw std::runtime_error("sdpa: truncated header");
  return p;
}

/// Generic conversion to the solver's form: x becomes the free vector,
/// diagonal-block entries become "<=" rows, and each non-diagonal block
/// (at most one) is tied to the PSD variable by equality rows. The SDPA
/// objective is minimized, so the standard form maximizes -c'x.
inline sdp::StandardForm to_standard_form(const Problem& p) {
  using sdp::Matrix;
  using sdp::Vector;
  int psd_block = -1;
  for (std::size_t k = 0; k < p.block_struct.size(); ++k) {
    if (p.block_struct[k] > 0) {
      if (psd_block >= 0) throw std::runtime_error("sdpa: more than one PSD block is not supported");
      psd_block = static_cast<int>(k) + 1;
    }
  }
  // F matrices per block, dense
  std::vector<std::vector<Matrix>> F(p.block_struct.size());
  for (std::size_t k = 0; k < p.block_struct.size(); ++k) {
    const int sz = std::abs(p.block_struct[k]);
    F[k].assign(static_cast<std::size_t>(p.m + 1), Matrix::Zero(sz, sz));
  }
  for (const auto& e : p.entries) {
    Matrix& M = F[static_cast<std::size_t>(e.blk - 1)][static_cast<std::size_t>(e.mat)];
    M(e.i - 1, e.j - 1) = e.v;
    M(e.j - 1, e.i - 1) = e.v;
  }
  sdp::StandardForm f;
  f.nfree = p.m;
  f.c = -Eigen::Map<const Vector>(p.c.data(), static_cast<Eigen::Index>(p.c.size()));
  const int n = psd_block > 0 ? p.block_struct[static_cast<std::size_t>(psd_block - 1)] : 1;
  f.n = n;
  f.C = Matrix::Zero(n, n);
  for (std::size_t k = 0; k < p.block_struct.size(); ++k) {
    const auto& Fk = F[k];
    if (static_cast<int>(k) + 1 == psd_block) {
      // X = sum_i F_i x_i - F_0  ->  <E_ab, X> - sum_i F_i(a,b) x_i = -F_0(a,b)
      for (int a = 0; a < n; ++a) {
        for (int b = a; b < n; ++b) {
          sdp::Row r;
          r.A = Matrix::Zero(n, n);
          r.A(a, b) += a == b ? 1.0 : 0.5;
          r.A(b, a) += a == b ? 0.0 : 0.5;
          r.a.resize(p.m);
          for (int i = 0; i < p.m; ++i) r.a(i) = -Fk[static_cast<std::size_t>(i + 1)](a, b);
          r.sense = sdp::Sense::eq;
          r.b = -Fk[0](a, b);
          r.name = "blk" + std::to_string(k + 1) + "(" + std::to_string(a + 1) + "," + std::to_string(b + 1) + ")";
          f.rows.push_back(std::move(r));
        }
      }
    } else {
      const int sz = std::abs(p.block_struct[k]);
      for (int d = 0; d < sz; ++d) {
        // sum_i F_i(d,d) x_i - F_0(d,d) >= 0
        sdp::Row r;
        r.A = Matrix::Zero(n, n);
        r.a.resize(p.m);
        for (int i = 0; i < p.m; ++i) r.a(i) = -Fk[static_cast<std::size_t>(i + 1)](d, d);
        r.sense = sdp::Sense::le;
        r.b = -Fk[0](d, d);
        r.name = "blk" + std::to_string(k + 1) + "(" + std::to_string(d + 1) + ")";
        f.rows.push_back(std::move(r));
      }
    }
  }
  return f;
}

}  // namespace dcapep::sdpa
