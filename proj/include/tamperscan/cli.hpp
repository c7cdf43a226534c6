#pragma once

namespace tamperscan {

inline constexpr int kExitClean = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitFindings = 2;
inline constexpr int kExitUsage = 64;

// Entry point of the `tamperscan` binary; returns the process exit code.
int run_cli(int argc, char** argv);

}  // namespace tamperscan
