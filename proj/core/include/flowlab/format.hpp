#pragma once

#include <charconv>
#include <cmath>
#include <string>
#include <system_error>

namespace flowlab {

// Shortest round-trip decimal form of a double. Output is locale-independent
// and identical across platforms, which keeps emitted CSV byte-stable.
inline std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

}  // namespace flowlab
