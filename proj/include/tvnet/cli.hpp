#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace tvnet {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitIo = 2,
  kExitNumerical = 3,
};

/// Runs one command line (args excludes the program name) and returns its
/// exit code. Normal output goes to out, diagnostics to err.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace tvnet
