#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace bellkit::cli {

/// Exit codes shared by every subcommand.
inline constexpr int kOk = 0;
inline constexpr int kUsage = 1;
inline constexpr int kProtocolViolation = 2;
inline constexpr int kChallengerFailure = 3;

/// Runs the `bellkit` command line. `args` excludes the program name.
/// Reports go to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace bellkit::cli
