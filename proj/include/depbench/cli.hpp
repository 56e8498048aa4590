#pragma once

#include <ostream>

namespace depbench::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Entry point of the `depbench` tool. Subcommands: extract, build-prompts,
/// gen-tests, evaluate, debug, report. Returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace depbench::cli
