#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace hal {

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitData = 2, kExitDivergence = 3 };

/// Runs one command line (args[0] is the program name). Reports go to `out`,
/// single-line diagnostics to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace hal
