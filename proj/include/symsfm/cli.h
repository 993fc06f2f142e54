#ifndef SYMSFM_CLI_H_
#define SYMSFM_CLI_H_

#include <ostream>
#include <string>
#include <vector>

namespace symsfm {

enum ExitCode : int {
  kExitSuccess = 0,
  kExitInputError = 2,
  kExitNumericalError = 3,
  kExitNonConvergence = 4,
};

// Runs the command line with `args` excluding the program name.
int RunCli(const std::vector<std::string>& args, std::ostream& out,
           std::ostream& err);

}  // namespace symsfm

#endif  // SYMSFM_CLI_H_
