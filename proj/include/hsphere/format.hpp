#pragma once

#include <charconv>
#include <string>
#include <system_error>

namespace hsphere {

// Locale-independent shortest round-trip decimal formatting.
inline std::string format_double(double value) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

}  // namespace hsphere
