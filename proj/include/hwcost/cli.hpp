#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace hwcost::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kDataError = 2, kInternal = 3 };

/// Runs one invocation. args excludes the program name. Machine-readable
/// results go to out, diagnostics and progress to err.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int run(int argc, char** argv);

}  // namespace hwcost::cli
