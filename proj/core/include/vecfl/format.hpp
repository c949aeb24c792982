#pragma once

#include <cstdio>
#include <string>

namespace vecfl {

// Deterministic double formatting for CSV/JSON bodies (%.12g). Byte-identical
// reruns of a command depend on never formatting through locale-sensitive or
// precision-unstable paths.
inline std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

}  // namespace vecfl
