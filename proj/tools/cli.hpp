#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ibr::cli {

enum ExitCode : int { kOk = 0, kInputError = 2, kNumericalError = 3 };

// Parses argv-style arguments (args[0] is the program name) and runs the
// selected subcommand. Never throws; every failure maps onto an exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ibr::cli
