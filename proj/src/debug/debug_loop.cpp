#include "depbench/debug_loop.hpp"

#include <algorithm>

#include "depbench/error.hpp"
#include "depbench/prompts.hpp"

namespace depbench {

bool DebugRound::passed() const {
  return std::all_of(per_test_outcome.begin(), per_test_outcome.end(),
                     [](TestOutcome o) { return o == TestOutcome::Pass; });
}

std::string_view to_string(TerminalStatus status) {
  return status == TerminalStatus::Solved ? "solved" : "exhausted";
}

bool DebugTrace::solved_by(int round) const {
  if (rounds.empty() || round < 0) return false;
  const auto idx = std::min<std::size_t>(static_cast<std::size_t>(round), rounds.size() - 1);
  return rounds[idx].passed();
}

std::string error_log_of(const ExecutionOutcome& outcome, std::size_t limit) {
  std::string log = outcome.stderr_text;
  if (!outcome.stdout_text.empty()) {
    if (!log.empty() && log.back() != '\n') log += '\n';
    log += outcome.stdout_text;
  }
  if (log.find_first_not_of(" \n\t") == std::string::npos) {
    log = std::string(to_string(outcome.status));
    if (outcome.exception_type) log += ": " + *outcome.exception_type;
  }
  if (log.size() > limit) log.resize(limit);
  return log;
}

DebugTrace run_debug(TestRunner& runner, const EnvHandle& env, const BenchmarkSample& sample, Backend& backend,
                     const DebugOptions& options) {
  DebugTrace trace;
  trace.sample_id = sample.sample_id;
  const auto tests = sample.validated_tests();
  const auto params = GenerationParams::greedy(options.max_new_tokens);

  std::string prompt = build_prompt(sample, options.level, options.format).text;
  for (int round = 0; round <= options.max_rounds; ++round) {
    std::string completion;
    try {
      completion = backend.complete(prompt, params).front();
    } catch (const BackendError& e) {
      trace.error = e.what();
      break;
    }
    const auto candidate = assemble_candidate(sample.target, extract_code(completion));
    const auto run = run_candidate(runner, env, sample, candidate, tests, round);
    trace.rounds.push_back({round, candidate, run.record.per_test_outcome, run.record.dir_value});
    if (run.record.passed_all) break;
    if (round == options.max_rounds) break;

    const auto failed = std::find_if(run.outcomes.begin(), run.outcomes.end(),
                                     [](const ExecutionOutcome& o) { return o.status != ExecStatus::Pass; });
    const auto i = static_cast<std::size_t>(failed - run.outcomes.begin());
    prompt = build_debug_prompt(sample, candidate, tests[i].source_text, error_log_of(*failed, options.error_log_limit))
                 .text;
  }
  trace.terminal_status =
      !trace.rounds.empty() && trace.rounds.back().passed() ? TerminalStatus::Solved : TerminalStatus::Exhausted;
  return trace;
}

double pass_at_1_by_round(const std::vector<DebugTrace>& traces, int round) {
  if (traces.empty()) return 0.0;
  std::size_t solved = 0;
  for (const auto& t : traces) solved += t.solved_by(round) ? 1 : 0;
  return static_cast<double>(solved) / static_cast<double>(traces.size());
}

}  // namespace depbench
