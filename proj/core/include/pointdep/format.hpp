#pragma once

#include <string>

namespace pointdep {

// Shortest representation that parses back to the same double (CSV output).
std::string format_full(double value);
// Six significant digits (human-readable logs).
std::string format_human(double value);

}  // namespace pointdep
