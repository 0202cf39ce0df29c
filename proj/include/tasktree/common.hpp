#pragma once

#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace tasktree {

// Errors are split into two families so the CLI can map them to exit codes:
// ValidationError covers malformed inputs, contract violations, and config
// problems; NumericError covers non-finite values discovered mid-computation.
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Deterministic double -> text used by every report and log writer.  %.17g
// round-trips doubles exactly, so identical values always print identically.
inline std::string fmt_g(double v, int digits = 17) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*g", digits, v);
  return buf;
}

inline bool is_finite(double v) { return std::isfinite(v); }

}  // namespace tasktree
