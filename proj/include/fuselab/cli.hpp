#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace fuselab::cli {

enum ExitCode : int {
  kOk = 0,
  kInternal = 1,
  kUsage = 2,       ///< bad arguments, config, capacity guard, output clobbering
  kBadInput = 3,    ///< input files fail validation
  kDegenerate = 4,  ///< EM hit a degenerate posterior
};

/// Runs `fuselab <args...>` in-process. args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace fuselab::cli
