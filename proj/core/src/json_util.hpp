#pragma once

// Shared JSON encoding helpers for solution files and configuration.

#include <json.hpp>

#include <cmath>
#include <limits>
#include <string>

#include "pctl/basis.hpp"
#include "pctl/error.hpp"

namespace pctl::detail {

using json = nlohmann::json;

// Non-finite values are spelled as strings; JSON has no literal for them.
inline json encode(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

inline json encode(const Vector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(encode(v(i)));
  return a;
}

inline json encode(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) rows.push_back(encode(Vector(m.row(r).transpose())));
  return rows;
}

inline std::string type_name(const json& j) { return j.type_name(); }

inline double decode_number(const json& j, const std::string& path) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto& s = j.get_ref<const std::string&>();
    if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  }
  throw ConfigError(path, "expected a number, got " + type_name(j));
}

inline double decode_finite(const json& j, const std::string& path) {
  const double v = decode_number(j, path);
  if (!std::isfinite(v)) throw ConfigError(path, "value must be finite");
  return v;
}

inline Vector decode_vector(const json& j, const std::string& path, Eigen::Index expected = -1) {
  if (!j.is_array()) throw ConfigError(path, "expected an array of numbers, got " + type_name(j));
  if (expected >= 0 && static_cast<Eigen::Index>(j.size()) != expected) {
    throw ConfigError(path, "expected " + std::to_string(expected) + " entries, got " + std::to_string(j.size()));
  }
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = decode_number(j[i], path + "." + std::to_string(i));
  return v;
}

inline Matrix decode_matrix(const json& j, const std::string& path, Eigen::Index rows = -1, Eigen::Index cols = -1) {
  if (!j.is_array()) throw ConfigError(path, "expected an array of rows, got " + type_name(j));
  if (rows >= 0 && static_cast<Eigen::Index>(j.size()) != rows) {
    throw ConfigError(path, "expected " + std::to_string(rows) + " rows, got " + std::to_string(j.size()));
  }
  const Eigen::Index r = static_cast<Eigen::Index>(j.size());
  Eigen::Index c = cols;
  if (c < 0) c = r == 0 ? 0 : static_cast<Eigen::Index>(j[0].is_array() ? j[0].size() : 0);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    m.row(i) = decode_vector(j[static_cast<std::size_t>(i)], path + "." + std::to_string(i), c).transpose();
  }
  return m;
}

}  // namespace pctl::detail
