#pragma once

#include <cstdio>
#include <string>

namespace dblex {

/// Fixed-point rendering used by every TSV writer ("%.Nf", C locale).
inline std::string format_fixed(double value, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, value);
  return buf;
}

}  // namespace dblex
