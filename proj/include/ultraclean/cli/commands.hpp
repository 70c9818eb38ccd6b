#pragma once

#include <string>
#include <vector>

namespace ultraclean::cli {

enum ExitCode : int { kSuccess = 0, kRuntimeFailure = 1, kUsageError = 2 };

// Entry point shared by the executable and the tests. args[0] is the program name.
int run(const std::vector<std::string>& args);

}  // namespace ultraclean::cli
