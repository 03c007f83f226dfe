#pragma once

#include <string>
#include <vector>

namespace troop::cli {

/// Exit statuses of the command-line driver.
enum ExitCode : int { kOk = 0, kValidation = 2, kNumerical = 3 };

/// Runs the `troop` command line; args[0] is the program name.
int run(const std::vector<std::string>& args);

int run(int argc, const char* const* argv);

}  // namespace troop::cli
