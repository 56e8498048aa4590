#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <unistd.h>

#include "depbench/error.hpp"
#include "depbench/pipeline.hpp"
#include "paths.hpp"

using namespace depbench;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
  return fs::temp_directory_path() / ("depbench-pl-" + std::to_string(::getpid()) + "-" + name);
}

}  // namespace

TEST(RunConfig, DefaultsAndFile) {
  const RunConfig d;
  EXPECT_EQ(d.coverage_threshold, 40.0);
  EXPECT_EQ(d.flaky_repeats, 10);
  EXPECT_EQ(d.max_debug_rounds, 3);
  EXPECT_EQ(d.dependency_depth, 1);
  EXPECT_EQ(d.params.num_samples, 10);
  EXPECT_GE(d.effective_jobs(), 1);

  const auto p = temp_file("cfg.json");
  std::ofstream(p) << R"({"levels": ["small"], "formats": ["instruct_v2"], "num_samples": 5, "jobs": 3,
                          "shim": ["python3", "shim.py"], "coverage_threshold": 50})";
  const auto c = RunConfig::from_file(p);
  EXPECT_EQ(c.levels, (std::vector<ContextLevel>{ContextLevel::Small}));
  EXPECT_EQ(c.formats, (std::vector<PromptFormat>{PromptFormat::InstructV2}));
  EXPECT_EQ(c.params.num_samples, 5);
  EXPECT_EQ(c.effective_jobs(), 3);
  EXPECT_EQ(c.shim_command(), (std::vector<std::string>{"python3", "shim.py"}));
  EXPECT_EQ(c.coverage_threshold, 50.0);

  std::ofstream(p) << R"({"no_such_key": 1})";
  EXPECT_THROW(RunConfig::from_file(p), UsageError);
  std::ofstream(p) << R"({"levels": ["huge"]})";
  EXPECT_THROW(RunConfig::from_file(p), UsageError);
  fs::remove(p);
}

TEST(RunConfig, ShimFromEnvironment) {
  ::setenv("DEPBENCH_SHIM", "py  /x/shim.py", 1);
  EXPECT_EQ(RunConfig{}.shim_command(), (std::vector<std::string>{"py", "/x/shim.py"}));
  ::unsetenv("DEPBENCH_SHIM");
  EXPECT_THROW(RunConfig{}.shim_command(), UsageError);
}

TEST(ExtractSamples, StrutilFixture) {
  std::vector<std::string> skipped;
  const auto samples = extract_samples(testkit::strutil_repo(), RunConfig{}, &skipped);
  ASSERT_EQ(samples.size(), 10u);
  EXPECT_EQ(samples[0].sample_id, "strutil:string_utils.manipulation:reverse");
  EXPECT_EQ(samples[0].repo, "strutil");
  EXPECT_EQ(samples[0].module_path, "string_utils/manipulation.py");
  EXPECT_EQ(samples[0].prompts.size(), 9u);
  EXPECT_EQ(samples[0].solution, samples[0].target.source);
  EXPECT_EQ(skipped.size(), 1u);
}

TEST(ExtractSamples, ConfiguredPromptSubset) {
  RunConfig c;
  c.levels = {ContextLevel::Small};
  c.formats = {PromptFormat::Base};
  const auto samples = extract_samples(testkit::imports_repo(), c);
  ASSERT_FALSE(samples.empty());
  for (const auto& s : samples) EXPECT_EQ(s.prompts.size(), 1u);
}

TEST(Records, GenerationsRoundTrip) {
  std::vector<GenerationRecord> r(2);
  r[0] = {"s", 0, "def f():\n    pass\n", {TestOutcome::Fail, TestOutcome::Pass}, false, 0.5};
  r[1] = {"s", 1, "def f():\n    return 1\n", {TestOutcome::Pass}, true, std::nullopt};
  const auto p = temp_file("gen.jsonl");
  save_generation_records(r, p);
  EXPECT_EQ(load_generation_records(p), r);
  std::ofstream(p) << R"({"sample_id":"s","candidate_index":0,"generated_text":"","per_test_outcome":["fail"],"passed_all":true})"
                   << "\n";
  EXPECT_THROW(load_generation_records(p), Error);
  fs::remove(p);
}

TEST(Records, TracesRoundTrip) {
  DebugTrace t;
  t.sample_id = "s";
  t.rounds = {{0, "a", {TestOutcome::Fail}, 0.0}, {1, "b", {TestOutcome::Pass}, 1.0}};
  t.terminal_status = TerminalStatus::Solved;
  DebugTrace u;
  u.sample_id = "u";
  u.error = "backend down";
  const auto p = temp_file("traces.jsonl");
  save_traces({t, u}, p);
  const auto back = load_traces(p);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].rounds.size(), 2u);
  EXPECT_EQ(back[0].rounds[1].candidate, "b");
  EXPECT_EQ(back[0].terminal_status, TerminalStatus::Solved);
  EXPECT_EQ(back[1].error, "backend down");
  fs::remove(p);
}
