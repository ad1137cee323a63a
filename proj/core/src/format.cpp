#include "pointdep/format.hpp"

#include <charconv>
#include <cstdio>

namespace pointdep {

std::string format_full(double value) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

std::string format_human(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", value);
  return buf;
}

}  // namespace pointdep
