#pragma once

#include <string>
#include <vector>

namespace zpd::cli {

// Runs one subcommand; args exclude the program name. Returns a process exit
// code (0 on success); failures print a machine-readable error object on
// stderr.
int run(const std::vector<std::string>& args);

}  // namespace zpd::cli
