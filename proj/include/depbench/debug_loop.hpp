#pragma once

#include <optional>
#include <string>
#include <vector>

#include "depbench/backend.hpp"
#include "depbench/harness.hpp"
#include "depbench/types.hpp"

namespace depbench {

inline constexpr int kDefaultDebugRounds = 3;
inline constexpr std::size_t kErrorLogLimit = 4000;

struct DebugRound {
  int round_index = 0;  // 0 is the initial generation
  std::string candidate;
  std::vector<TestOutcome> per_test_outcome;
  std::optional<double> dir_value;

  bool passed() const;
};

enum class TerminalStatus { Solved, Exhausted };
std::string_view to_string(TerminalStatus status);

struct DebugTrace {
  std::string sample_id;
  std::vector<DebugRound> rounds;
  TerminalStatus terminal_status = TerminalStatus::Exhausted;
  std::optional<std::string> error;  // set when the backend failed mid-loop

  /// Whether the candidate standing after round r passes (the last round
  /// reached counts for every later r).
  bool solved_by(int round) const;
};

struct DebugOptions {
  int max_rounds = kDefaultDebugRounds;
  ContextLevel level = ContextLevel::Full;
  PromptFormat format = PromptFormat::InstructV2;
  std::size_t error_log_limit = kErrorLogLimit;
  int max_new_tokens = 512;
};

/// Runner output of a failed test, truncated to `limit` characters.
std::string error_log_of(const ExecutionOutcome& outcome, std::size_t limit = kErrorLogLimit);

/// Greedy round 0 from the instruct prompt, then up to max_rounds repair
/// rounds fed with the first failing test and its log. Stops at the first
/// candidate that passes every validated test.
DebugTrace run_debug(TestRunner& runner, const EnvHandle& env, const BenchmarkSample& sample, Backend& backend,
                     const DebugOptions& options = {});

/// Fraction of traces whose standing candidate passes after `round`.
double pass_at_1_by_round(const std::vector<DebugTrace>& traces, int round);

}  // namespace depbench
