#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace dida {

// Process exit codes.
enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitData = 2,
  kExitMissingArtifact = 3,
  kExitNumerical = 4,
  kExitSelfcheck = 5,
};

// Entry point of the dida_cdr tool. `args` excludes the program name.
// Tables go to `out`, diagnostics to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dida
