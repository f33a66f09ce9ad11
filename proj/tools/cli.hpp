#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ewboot::cli {

// Exit codes.
inline constexpr int kPass = 0;
inline constexpr int kCheckFailed = 1;
inline constexpr int kConfigError = 2;
inline constexpr int kIoError = 3;

// Runs one command line (args excludes the program name) and returns the
// exit code. Human-readable output goes to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ewboot::cli
