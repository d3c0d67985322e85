#pragma once

#include <cmath>
#include <cstdio>
#include <cstdlib>

namespace calfmon {

/// Rounds to 9 significant digits so serialized reports are byte-stable.
inline double round_sig(double v) {
  if (!std::isfinite(v) || v == 0.0) return v;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return std::strtod(buf, nullptr);
}

}  // namespace calfmon
