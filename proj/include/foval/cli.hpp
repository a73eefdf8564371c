#pragma once

#include <string>
#include <vector>

namespace foval {

inline constexpr const char* kToolkitVersion = "0.1.0";

// Entry point behind the `foval` binary. Exit codes: 0 success, 1 validation
// error (usage, config, malformed input), 2 runtime error.
int run_cli(const std::vector<std::string>& args);

} // namespace foval
