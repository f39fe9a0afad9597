#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace hicomp::cli {

enum ExitCode : int { kOk = 0, kInvalidInput = 2, kIoFailure = 3 };

// Runs one command line (args excludes the program name). Never throws.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace hicomp::cli
