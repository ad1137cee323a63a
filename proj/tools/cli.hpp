#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace pointdep::cli {

enum ExitCode : int { kOk = 0, kIoFailure = 1, kInvalidInput = 2 };

// Entry point shared by the binary and the tests. Subcommands: bench,
// gradcheck, retrieve, selfsup, debug-dataset.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// `key = value` lines with `#` comments, turned into `--key=value` flags.
std::vector<std::string> read_config_file(const std::string& path);

}  // namespace pointdep::cli
