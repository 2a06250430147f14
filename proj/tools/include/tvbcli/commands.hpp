#pragma once

#include <string>
#include <vector>

namespace tvbcli {

// CLI entry point; returns the process exit code.
// Contract: 0 success, 2 validation error, 3 theorem-check failure, 4 I/O error.
int run(int argc, const char* const* argv);

// Convenience overload for tests; args exclude the program name.
int run(const std::vector<std::string>& args);

}  // namespace tvbcli
