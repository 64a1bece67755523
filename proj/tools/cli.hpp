// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

namespace numrep::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;  // run completed with failed pairs or a runtime error
inline constexpr int kExitUsage = 2;

/// Parses and runs one numrep command. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args);

}  // namespace numrep::cli
