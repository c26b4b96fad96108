#pragma once

#include <iosfwd>

namespace dmrl {

// Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

// dmrl <mode> --config <path> [--seed N] [--out DIR] [--checkpoint PATH]
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace dmrl
