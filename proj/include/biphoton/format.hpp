#pragma once

// Deterministic number formatting: shortest decimal that round-trips.

#include <charconv>
#include <cmath>
#include <string>
#include <string_view>
#include <system_error>

#include "error.hpp"

namespace biphoton {

inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (v == 0.0) v = 0.0; // drop the sign of -0
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

/// Strict decimal parse; the whole field must be consumed.
inline bool try_parse_double(std::string_view s, double& out) {
  s = trim(s);
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size() &&
         std::isfinite(out);
}

inline double parse_double(std::string_view s, const std::string& context) {
  double v = 0.0;
  if (!try_parse_double(s, v))
    fail(ErrorCode::parse, context + ": cannot parse number '" +
                               std::string(s) + "'");
  return v;
}

} // namespace biphoton
