#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace vacdaq::cli {

enum ExitCode : int { kOk = 0, kFailure = 1, kTransport = 2 };

/// args excludes the program name. Long-running subcommands return when
/// --duration elapses or SIGINT/SIGTERM arrives.
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace vacdaq::cli
