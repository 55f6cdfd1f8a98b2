#pragma once

#include <string>
#include <vector>

namespace zoneliq {

// Full command-line driver. Exit codes: 0 pass, 2 validation error,
// 3 numerical check failure, 4 IO error.
int run_cli(int argc, char** argv);
int run_cli(const std::vector<std::string>& args);

} // namespace zoneliq
