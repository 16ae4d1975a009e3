#pragma once

#include <string>
#include <vector>

namespace d2i::cli {

// Full command-line entry point (argv without the program name).
// Exit codes: 0 success, 1 usage error, 2 data/format error, 3 numeric
// divergence. Diagnostics go to stderr, results to the flagged files.
int run(const std::vector<std::string>& args);

}  // namespace d2i::cli
