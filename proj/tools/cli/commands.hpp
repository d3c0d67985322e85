#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace calfmon::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

/// Runs one subcommand (args exclude the program name). Primary output goes
/// to `out`, logs and diagnostics to `err`.
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace calfmon::cli
