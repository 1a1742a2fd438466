#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace logicrec::cli {

enum ExitCode : int {
  kOk = 0,
  kInternalError = 1,
  kUsageError = 2,
  kNumericFailure = 3,
  kArtifactMismatch = 4,
};

/// Runs the logicrec command line with `args` (args[0] is the program name).
int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err);

}  // namespace logicrec::cli
