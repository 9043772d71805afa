#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace suite::cli {

enum ExitCode : int {
    kComputed = 0,
    kInputError = 2,
    kContractViolation = 3,
    kUnreachable = 4,
};

/// Runs the `suite` command line. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace suite::cli
