#pragma once

#include <charconv>
#include <cstdio>
#include <string>

namespace cimforge {

/// Reals in every CSV and report use 9 significant digits.
inline std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

/// Shortest text that parses back to the same double.
inline std::string format_exact(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace cimforge
