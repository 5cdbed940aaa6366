#pragma once

// Command-line front end: simulate, filter, track, eval, oracle.

#include <iosfwd>
#include <string>
#include <vector>

namespace occhmm::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kConfigError = 2,
  kStreamError = 3,
  kEvalError = 4,
};

/// `args` excludes the program name. Output files go to --out, or to `out`
/// when no path is given; diagnostics go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err);

}  // namespace occhmm::cli
