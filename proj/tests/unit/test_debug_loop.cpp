#include <gtest/gtest.h>

#include "depbench/debug_loop.hpp"
#include "depbench/error.hpp"
#include "fake_runner.hpp"
#include "samples.hpp"

using namespace depbench;
using testkit::FakeRunner;

namespace {

BenchmarkSample sample_with_tests() {
  auto s = testkit::strutil_sample("reverse");
  s.tests = {{"r-init-00", "assert reverse('ab') == 'ba'", TestStatus::ExecOk, std::nullopt, TestOrigin::Initial},
             {"r-init-01", "assert reverse('') == ''", TestStatus::Fixed, std::nullopt, TestOrigin::Initial},
             {"r-init-02", "assert reverse(1)", TestStatus::Rejected, std::nullopt, TestOrigin::Initial}};
  return s;
}

/// Candidates pass iff the spliced module holds the gold definition.
void gold_passes(FakeRunner& runner, const BenchmarkSample& s) {
  runner.on_candidate = [gold = s.target.source](std::string_view module, const TestRecord& t) {
    if (module.find(gold) != std::string_view::npos) return ExecutionOutcome{};
    auto o = testkit::failed();
    o.stderr_text = "Traceback: " + t.test_id + " failed";
    return o;
  };
}

}  // namespace

TEST(DebugLoop, SolvedAtRoundTwo) {
  const auto s = sample_with_tests();
  FakeRunner runner;
  gold_passes(runner, s);
  std::vector<std::string> prompts;
  ScriptedBackend backend([&](const std::string& prompt, const GenerationParams& p) {
    EXPECT_EQ(p.mode, DecodingMode::Greedy);
    prompts.push_back(prompt);
    if (prompts.size() == 3) return std::vector<std::string>{"```python\n" + s.target.source + "\n```"};
    return std::vector<std::string>{"def reverse(input_string):\n    return input_string\n"};
  });
  const auto trace = run_debug(runner, testkit::fake_env(testkit::strutil_repo()), s, backend);
  EXPECT_EQ(trace.terminal_status, TerminalStatus::Solved);
  ASSERT_EQ(trace.rounds.size(), 3u);
  EXPECT_FALSE(trace.solved_by(0));
  EXPECT_FALSE(trace.solved_by(1));
  EXPECT_TRUE(trace.solved_by(2));
  EXPECT_TRUE(trace.solved_by(3));
  EXPECT_EQ(trace.rounds[2].dir_value, 1.0);
  // Only validated tests run.
  EXPECT_EQ(trace.rounds[0].per_test_outcome.size(), 2u);
  // Repair prompts carry the failing test and its log.
  EXPECT_NE(prompts[1].find("assert reverse('ab') == 'ba'"), std::string::npos);
  EXPECT_NE(prompts[1].find("Traceback: r-init-00 failed"), std::string::npos);
  EXPECT_NE(prompts[1].find("return input_string\n"), std::string::npos);
}

TEST(DebugLoop, ExhaustsAfterMaxRounds) {
  const auto s = sample_with_tests();
  FakeRunner runner;
  gold_passes(runner, s);
  ScriptedBackend backend([](const std::string&, const GenerationParams&) {
    return std::vector<std::string>{"    return None\n"};
  });
  DebugOptions opts;
  opts.max_rounds = 2;
  const auto trace = run_debug(runner, testkit::fake_env(testkit::strutil_repo()), s, backend, opts);
  EXPECT_EQ(trace.terminal_status, TerminalStatus::Exhausted);
  EXPECT_EQ(trace.rounds.size(), 3u);
  EXPECT_FALSE(trace.error);
}

TEST(DebugLoop, PassingFirstAttemptStopsImmediately) {
  const auto s = sample_with_tests();
  FakeRunner runner;
  gold_passes(runner, s);
  int calls = 0;
  ScriptedBackend backend([&](const std::string&, const GenerationParams&) {
    ++calls;
    return std::vector<std::string>{s.target.source};
  });
  const auto trace = run_debug(runner, testkit::fake_env(testkit::strutil_repo()), s, backend);
  EXPECT_EQ(trace.terminal_status, TerminalStatus::Solved);
  EXPECT_EQ(trace.rounds.size(), 1u);
  EXPECT_EQ(calls, 1);
}

TEST(DebugLoop, BackendFailureEndsTheTrace) {
  const auto s = sample_with_tests();
  FakeRunner runner;
  gold_passes(runner, s);
  int calls = 0;
  ScriptedBackend backend([&](const std::string&, const GenerationParams&) -> std::vector<std::string> {
    if (++calls == 2) throw BackendError("down", 4, 503);
    return {"def reverse(input_string):\n    return 1\n"};
  });
  const auto trace = run_debug(runner, testkit::fake_env(testkit::strutil_repo()), s, backend);
  EXPECT_EQ(trace.rounds.size(), 1u);
  EXPECT_EQ(trace.error, "down");
  EXPECT_EQ(trace.terminal_status, TerminalStatus::Exhausted);
}

TEST(DebugLoop, ErrorLog) {
  ExecutionOutcome o = testkit::failed(ExecStatus::OtherError, "KeyError");
  EXPECT_EQ(error_log_of(o), "other_error: KeyError");
  o.stderr_text = "trace\n";
  o.stdout_text = "printed";
  EXPECT_EQ(error_log_of(o), "trace\nprinted");
  EXPECT_EQ(error_log_of(o, 3), "tra");
}

TEST(DebugLoop, PassAtOneByRound) {
  DebugTrace a, b;
  a.rounds = {{0, "", {TestOutcome::Pass}, {}}};
  b.rounds = {{0, "", {TestOutcome::Fail}, {}}, {1, "", {TestOutcome::Pass}, {}}};
  EXPECT_EQ(pass_at_1_by_round({a, b}, 0), 0.5);
  EXPECT_EQ(pass_at_1_by_round({a, b}, 1), 1.0);
  EXPECT_EQ(pass_at_1_by_round({}, 0), 0.0);
}
