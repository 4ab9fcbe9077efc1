#pragma once

#include <cmath>
#include <cstdio>
#include <initializer_list>
#include <ostream>
#include <string>

namespace asymnet {

/// Shortest-safe text for a double ('.' decimal point, round-trips exactly).
/// NaN is written as an empty field.
inline std::string csv_number(double v) {
  if (std::isnan(v)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void csv_row(std::ostream& os, std::initializer_list<std::string> fields) {
  bool first = true;
  for (const auto& f : fields) {
    if (!first) os << ',';
    os << f;
    first = false;
  }
  os << '\n';
}

}  // namespace asymnet
