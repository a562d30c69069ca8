#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ehnode {

enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 2,
  kExitViolation = 3,
  kExitRuntime = 4,
};

/// Runs one command line (args excludes the program name). CSV output goes
/// to --out or `out`; failures print a JSON error record to `err`.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ehnode
