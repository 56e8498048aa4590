#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "depbench/backend.hpp"
#include "depbench/harness.hpp"
#include "depbench/types.hpp"

namespace depbench {

inline constexpr std::size_t kMaxInitialAssertions = 20;
inline constexpr int kFlakyRepeats = 10;
inline constexpr double kCoverageThreshold = 40.0;

enum class TestPhase { Initial, Enhancement };

struct TestBatch {
  std::string sample_id;
  TestPhase phase = TestPhase::Initial;
  std::vector<TestRecord> tests;
  CoverageStats coverage;  // of the validated tests after this batch
  std::vector<std::string> warnings;
};

/// Top-level `assert` statements of `text`, in order. Unparseable regions
/// that start with `assert` are kept too so the syntax filter can judge them.
/// With `nested`, asserts inside function bodies count as well.
std::vector<std::string> split_assertions(std::string_view text, bool nested = false);

/// Whitespace runs collapsed to one space, ends trimmed.
std::string normalize_whitespace(std::string_view text);

std::string make_test_id(std::string_view sample_id, TestOrigin origin, std::size_t index);

/// Prompt for the first generation pass; it ends with a dangling `assert `.
std::string initial_test_prompt(const BenchmarkSample& sample);

/// Completion -> first 20 assertions -> whitespace-normalized dedupe.
TestBatch tests_from_completion(const BenchmarkSample& sample, std::string_view completion);

struct TestGenOptions {
  GenerationParams params{};  // temperature 0.2, top-p 0.95
  int flaky_repeats = kFlakyRepeats;
  std::filesystem::path blob_dir;  // where fixed tests keep their expected values
};

/// One backend call; its first completion is split into raw tests.
TestBatch generate_initial_tests(const BenchmarkSample& sample, Backend& backend, const TestGenOptions& options = {});

/// Keeps tests that parse and call `target_name`; they become syntax_ok.
std::vector<TestRecord> syntax_filter(const std::vector<TestRecord>& tests, std::string_view target_name);

/// Runs each syntax_ok test `flaky_repeats` times against the gold solution.
/// All runs pass: exec_ok. All runs fail an assertion: handed to fix_assertion.
/// Runs disagree: rejected_flaky. Anything else: rejected. Every input test
/// comes back with its final status.
std::vector<TestRecord> execution_filter(TestRunner& runner, const EnvHandle& env, const BenchmarkSample& sample,
                                         const std::vector<TestRecord>& tests, const TestGenOptions& options = {});

/// Rewrites the expected side of `assert <call> == <expected>` from the gold
/// output: a literal when the shim can render one, else a pickled blob. The
/// rewritten test must then pass every screening run to become fixed.
TestRecord fix_assertion(TestRunner& runner, const EnvHandle& env, const BenchmarkSample& sample,
                         const TestRecord& test, const TestGenOptions& options = {});

/// The three enhancement prompts, with `existing` as examples.
std::vector<std::string> enhancement_prompts(const BenchmarkSample& sample, const std::vector<TestRecord>& existing);

/// Issues the three enhancement prompts; new assertions go through the
/// syntax filter, execution filter and fixer. Returns the validated union
/// (existing first) and its coverage.
TestBatch enhance_coverage(TestRunner& runner, const EnvHandle& env, const BenchmarkSample& sample,
                           const std::vector<TestRecord>& existing, Backend& backend,
                           const TestGenOptions& options = {});

/// Keep iff line coverage >= threshold.
bool gate_sample(const BenchmarkSample& sample, double threshold = kCoverageThreshold);

struct TestPipelineResult {
  BenchmarkSample sample;  // validated tests and coverage filled in
  bool kept = false;
  double initial_coverage = 0.0;
  std::vector<std::string> warnings;
};

/// generate -> filter -> fix -> measure -> enhance -> measure -> gate.
TestPipelineResult run_test_pipeline(TestRunner& runner, const EnvHandle& env, const BenchmarkSample& sample,
                                     Backend& backend, const TestGenOptions& options = {},
                                     double threshold = kCoverageThreshold);

}  // namespace depbench
