#pragma once

// JSON instance configuration.
//
//   {
//     "family": "quadratic" | "tightness" | "nonsmooth-counterexample" | "pl-quadratic",
//     "dimension": 2,
//     "params": { ... family specific ... },
//     "f_star": 0.0,            // optional
//     "start_point": [1.0, 0.0] // optional
//   }
//
// params per family:
//   quadratic:                Q1, Q2 (row arrays), b1, b2; optional mu1, L1, mu2, L2
//   tightness:                L1, N
//   nonsmooth-counterexample: max_terms (default 60)
//   pl-quadratic:             L1, a (default 0)
// A modulus may be the string "inf".

#include <json.hpp>

#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>

#include "dcapep/instances.hpp"

namespace dcapep::config {

using json = nlohmann::json;

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct LoadedInstance {
  DCInstance instance;
  Vector start;
  std::string family;
};

namespace detail {

inline double number(const json& j, const std::string& what) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf" || s == "infinity" || s == "Infinity") return std::numeric_limits<double>::infinity();
  }
  throw ConfigError("config: '" + what + "' must be a number");
}

inline double number_or(const json& obj, const char* key, double dflt) {
  return obj.contains(key) ? number(obj.at(key), key) : dflt;
}

inline Vector vector_of(const json& j, const std::string& what, int n) {
  if (!j.is_array() || static_cast<int>(j.size()) != n) {
    throw ConfigError("config: '" + what + "' must be an array of length " + std::to_string(n));
  }
  Vector v(n);
  for (int i = 0; i < n; ++i) v(i) = number(j[static_cast<std::size_t>(i)], what);
  return v;
}

inline Matrix matrix_of(const json& j, const std::string& what, int n) {
  if (!j.is_array() || static_cast<int>(j.size()) != n) {
    throw ConfigError("config: '" + what + "' must have " + std::to_string(n) + " rows");
  }
  Matrix M(n, n);
  for (int i = 0; i < n; ++i) M.row(i) = vector_of(j[static_cast<std::size_t>(i)], what, n).transpose();
  return M;
}

inline ClassParams class_of(double mu, double L) {
  return ClassParams(mu, std::isinf(L) ? Smoothness::infinite() : Smoothness(L));
}

}  // namespace detail

inline LoadedInstance from_json(const json& j) {
  using namespace detail;
  if (!j.is_object()) throw ConfigError("config: top level must be an object");
  if (!j.contains("family") || !j.at("family").is_string()) throw ConfigError("config: missing 'family'");
  const std::string family = j.at("family").get<std::string>();
  const json params = j.value("params", json::object());
  if (!params.is_object()) throw ConfigError("config: 'params' must be an object");
  std::optional<double> f_star;
  if (j.contains("f_star") && !j.at("f_star").is_null()) f_star = number(j.at("f_star"), "f_star");

  try {
    std::optional<DCInstance> inst;
    if (family == "quadratic") {
      if (!j.contains("dimension")) throw ConfigError("config: quadratic family needs 'dimension'");
      const int n = j.at("dimension").get<int>();
      if (n < 1) throw ConfigError("config: dimension must be >= 1");
      for (const char* k : {"Q1", "Q2"}) {
        if (!params.contains(k)) throw ConfigError(std::string("config: quadratic needs params.") + k);
      }
      const Matrix Q1 = matrix_of(params.at("Q1"), "Q1", n);
      const Matrix Q2 = matrix_of(params.at("Q2"), "Q2", n);
      const Vector b1 = params.contains("b1") ? vector_of(params.at("b1"), "b1", n) : Vector::Zero(n);
      const Vector b2 = params.contains("b2") ? vector_of(params.at("b2"), "b2", n) : Vector::Zero(n);
      const bool declared = params.contains("mu1") || params.contains("L1") || params.contains("mu2") ||
                            params.contains("L2");
      if (declared) {
        const auto p1 = class_of(number_or(params, "mu1", 0.0),
                                 number_or(params, "L1", std::numeric_limits<double>::infinity()));
        const auto p2 = class_of(number_or(params, "mu2", 0.0),
                                 number_or(params, "L2", std::numeric_limits<double>::infinity()));
        inst.emplace(make_quadratic_instance(Q1, b1, Q2, b2, p1, p2, f_star));
      } else {
        inst.emplace(make_quadratic_instance(Q1, b1, Q2, b2, f_star));
      }
    } else if (family == "tightness") {
      const double L1 = number_or(params, "L1", std::numeric_limits<double>::quiet_NaN());
      if (!params.contains("N")) throw ConfigError("config: tightness needs params.N");
      inst.emplace(make_tightness_instance(L1, params.at("N").get<int>()));
    } else if (family == "nonsmooth-counterexample") {
      inst.emplace(make_nonsmooth_counterexample(params.value("max_terms", 60)));
    } else if (family == "pl-quadratic") {
      const int n = j.value("dimension", 1);
      inst.emplace(make_pl_quadratic(number_or(params, "L1", std::numeric_limits<double>::quiet_NaN()),
                                     number_or(params, "a", 0.0), n));
    } else {
      throw ConfigError("config: unknown family '" + family + "'");
    }
    if (j.contains("dimension") && j.at("dimension").get<int>() != inst->dimension()) {
      throw ConfigError("config: dimension does not match the family");
    }
    Vector start;
    if (j.contains("start_point")) {
      start = vector_of(j.at("start_point"), "start_point", inst->dimension());
    } else if (inst->default_start()) {
      start = *inst->default_start();
    } else {
      start = Vector::Zero(inst->dimension());
    }
    return LoadedInstance{std::move(*inst), std::move(start), family};
  } catch (const ConfigError&) {
    throw;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

inline LoadedInstance from_string(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: JSON parse error: ") + e.what());
  }
  return from_json(j);
}

inline LoadedInstance from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_string(ss.str());
}

}  // namespace dcapep::config
