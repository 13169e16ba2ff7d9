#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace natcmd {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitDataError = 2;

/// Runs one subcommand (gen-data, train, evaluate, predict, match, run).
/// `args` excludes the program name. JSON/NDJSON goes to `out`, diagnostics
/// to `err`. Options may also come from NATCMD_<OPTION> environment variables.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace natcmd
