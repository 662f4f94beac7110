#pragma once

#include <iostream>

namespace relloc::cli {

enum ExitCode : int {
  kSuccess = 0,
  kUsageError = 1,      ///< bad flags or a config that does not parse / validate
  kAssertionFailed = 2,  ///< --assert was given and a threshold was missed
  kInternalFault = 3,
};

/// Entry point of the `relloc` tool. Every artifact goes under the --out directory.
int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr);

}  // namespace relloc::cli
