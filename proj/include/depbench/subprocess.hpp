#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace depbench {

struct ProcessResult {
  int exit_code = -1;  // -1 when killed by a signal
  int signal = 0;
  bool timed_out = false;
  std::string out;
  std::string err;
  double wall_time = 0.0;
};

struct ProcessOptions {
  std::filesystem::path cwd;  // empty: inherit
  std::map<std::string, std::string> env;  // added to (or overriding) the parent environment
  std::chrono::milliseconds timeout{0};    // 0: no limit
  std::string stdin_text;
};

/// Runs argv[0] (PATH lookup) in its own process group and captures both
/// streams. On timeout the whole group gets SIGKILL. Throws HarnessError
/// if the process cannot be started.
ProcessResult run_process(const std::vector<std::string>& argv, const ProcessOptions& options = {});

}  // namespace depbench
