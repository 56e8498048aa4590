#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "depbench/backend.hpp"
#include "depbench/debug_loop.hpp"
#include "depbench/types.hpp"

namespace depbench {

/// Settings shared by all stages. Defaults: coverage gate 40, flaky screen
/// 10 runs, 3 debug rounds, dependency depth 1, 30 s per test.
struct RunConfig {
  std::vector<std::filesystem::path> repos;
  std::vector<ContextLevel> levels{std::begin(kAllLevels), std::end(kAllLevels)};
  std::vector<PromptFormat> formats{std::begin(kAllFormats), std::end(kAllFormats)};
  GenerationParams params{};
  double coverage_threshold = 40.0;
  int flaky_repeats = 10;
  int max_debug_rounds = 3;
  int dependency_depth = 1;
  int test_timeout_s = 30;
  std::optional<std::size_t> max_prompt_tokens;
  std::vector<std::string> shim;  // runtime shim command; DEPBENCH_SHIM when empty
  std::string interpreter = "python3";
  int jobs = 0;  // 0: logical CPU count

  /// Keys mirror the field names; unknown keys are a UsageError.
  static RunConfig from_file(const std::filesystem::path& path);
  int effective_jobs() const;
  std::vector<std::string> shim_command() const;
};

/// Every eligible function of every module that parses, with depth-limited
/// dependencies and all configured prompts. Skipped functions are appended
/// to `skipped` as "module:function: reason".
std::vector<BenchmarkSample> extract_samples(const std::filesystem::path& repo, const RunConfig& config,
                                             std::vector<std::string>* skipped = nullptr);

/// Rebuilds the configured prompt variants of each sample in place.
void rebuild_prompts(std::vector<BenchmarkSample>& samples, const RunConfig& config);

void save_generation_records(const std::vector<GenerationRecord>& records, const std::filesystem::path& path);
std::vector<GenerationRecord> load_generation_records(const std::filesystem::path& path);

void save_traces(const std::vector<DebugTrace>& traces, const std::filesystem::path& path);
std::vector<DebugTrace> load_traces(const std::filesystem::path& path);

}  // namespace depbench
