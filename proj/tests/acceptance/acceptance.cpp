// One PASS/FAIL line per acceptance criterion. Exit status is nonzero if any fails.
#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "depbench/debug_loop.hpp"
#include "depbench/depgraph.hpp"
#include "depbench/metrics.hpp"
#include "depbench/pipeline.hpp"
#include "depbench/prompts.hpp"
#include "depbench/source.hpp"
#include "depbench/testgen.hpp"
#include "fake_runner.hpp"
#include "json.hpp"
#include "paths.hpp"
#include "samples.hpp"

using namespace depbench;
namespace fs = std::filesystem;

namespace {

constexpr double kPassAtKTolerance = 1e-12;
constexpr double kTimeLimitSeconds = 1.0;
constexpr int kMaxN = 12;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Check {
  bool ok = true;
  std::ostringstream why;
  void expect(bool cond, const std::string& what) {
    if (!cond && ok) why << what;
    ok = ok && cond;
  }
};

// ---- criteria ---------------------------------------------------------------------

Check pass_at_k_oracle() {
  Check c;
  const auto start = Clock::now();
  double worst = 0.0;
  for (int n = 1; n <= kMaxN; ++n) {
    for (int correct = 0; correct <= n; ++correct) {
      // Candidates [0, correct) pass. Count k-subsets that hold at least one.
      const std::uint32_t passing = (1u << correct) - 1u;
      std::vector<double> hit(n + 1, 0.0), total(n + 1, 0.0);
      for (std::uint32_t mask = 1; mask < (1u << n); ++mask) {
        const int k = std::popcount(mask);
        total[k] += 1.0;
        if (mask & passing) hit[k] += 1.0;
      }
      for (int k = 1; k <= n; ++k) {
        const double err = std::abs(pass_at_k(n, correct, k) - hit[k] / total[k]);
        worst = std::max(worst, err);
        if (err >= kPassAtKTolerance) {
          c.expect(false, "n=" + std::to_string(n) + " c=" + std::to_string(correct) + " k=" + std::to_string(k));
        }
      }
    }
  }
  const double elapsed = seconds_since(start);
  c.expect(elapsed < kTimeLimitSeconds, "took " + std::to_string(elapsed) + " s");
  if (c.ok) c.why << "max |error| " << worst << ", " << elapsed << " s";
  return c;
}

Check dir_fixture() {
  Check c;
  const std::string header =
      "def reverse(input_string: str) -> str:\n"
      "    \"\"\"\n"
      "    Returns the string with its chars reversed.\n"
      "\n"
      "    *Example:*\n"
      "\n"
      "    >>> reverse('hello') # returns 'olleh'\n"
      "\n"
      "    :param input_string: String to revert.\n"
      "    :type input_string: str\n"
      "    :return: Reversed string.\n"
      "    \"\"\"\n";
  const std::string pretrained = header + "    return input_string[::-1]\n";
  const std::string instruct = header +
                               "    if not is_string(input_string):\n"
                               "        raise InvalidInputError(input_string)\n"
                               "    return input_string[::-1]\n";
  const auto names = testkit::strutil_sample("reverse").dependency_names();
  c.expect(names == std::set<std::string>{"InvalidInputError", "is_string"}, "unexpected dependency set of reverse");
  const auto p = dir_of(pretrained, names);
  const auto i = dir_of(instruct, names);
  c.expect(p && *p == 0.0, "pretrained DIR is not 0");
  c.expect(i && *i == 1.0, "instruction-tuned DIR is not 1");
  if (c.ok) c.why << "pretrained 0.0, instruction-tuned 1.0";
  return c;
}

FunctionRecord target_of(const RepositorySnapshot& g, std::string_view module, std::string_view name) {
  const auto* m = g.module(module);
  if (m) {
    for (auto& f : extract_functions(ParsedModule{m->id, m->tree, m->parse_errors}).functions) {
      if (f.qualified_name == name) return f;
    }
  }
  throw std::runtime_error("no function " + std::string(module) + "." + std::string(name));
}

std::vector<std::string> dep_names(const std::vector<DependencyRecord>& deps) {
  std::vector<std::string> out;
  for (const auto& d : deps) out.push_back(d.name);
  return out;
}

Check dependency_extraction() {
  Check c;
  const auto start = Clock::now();
  const auto g = build_repo_graph(testkit::strutil_repo());
  const auto deps = extract_dependencies(target_of(g, "string_utils.manipulation", "camel_case_to_snake"), g, 1);
  c.expect(dep_names(deps) ==
               std::vector<std::string>{"InvalidInputError", "is_string", "is_camel_case", "CAMEL_CASE_REPLACE_RE"},
           "camel_case_to_snake dependencies differ");
  for (const auto& d : deps) {
    const bool in_file = d.name == "CAMEL_CASE_REPLACE_RE";
    c.expect(d.depth == 1, d.name + " not at depth 1");
    c.expect((d.locality == Locality::InFile) == in_file, d.name + " has the wrong locality");
    if (!in_file) {
      c.expect(d.origin == "string_utils.errors" || d.origin == "string_utils.validation",
               d.name + " comes from " + d.origin);
    }
  }

  const auto ig = build_repo_graph(testkit::imports_repo());
  const auto t = extract_dependencies(target_of(ig, "pkg.consumer", "target"), ig, 1);
  c.expect(dep_names(t) == std::vector<std::string>{"Widget", "LIMIT", "h", "area"}, "alias/wildcard target differs");
  c.expect(extract_dependencies(target_of(ig, "pkg.consumer", "hidden"), ig, 1).empty(),
           "names outside __all__ leaked through a wildcard");
  c.expect(dep_names(extract_dependencies(target_of(ig, "pkg.consumer", "chained"), ig, 1)) ==
               std::vector<std::string>{"LIMIT", "Widget"},
           "chained wildcard differs");
  const auto re = extract_dependencies(target_of(ig, "pkg.consumer", "reexported"), ig, 1);
  c.expect(re.size() == 1 && re[0].origin == "pkg.core", "package re-export not resolved");

  const double elapsed = seconds_since(start);
  c.expect(elapsed < kTimeLimitSeconds, "took " + std::to_string(elapsed) + " s");
  if (c.ok) c.why << elapsed << " s";
  return c;
}

bool has_code_dependency(const BenchmarkSample& s) {
  return std::any_of(s.dependencies.begin(), s.dependencies.end(),
                     [](const DependencyRecord& d) { return d.kind != DefinitionKind::Variable; });
}

Check prompt_fidelity() {
  Check c;
  const auto& s = testkit::strutil_sample("camel_case_to_snake");
  const std::pair<std::string, PromptKey> cases[] = {
      {"full.base", {ContextLevel::Full, PromptFormat::Base}},
      {"medium.base", {ContextLevel::Medium, PromptFormat::Base}},
      {"small.base", {ContextLevel::Small, PromptFormat::Base}},
      {"small.instruct_v1", {ContextLevel::Small, PromptFormat::InstructV1}},
      {"small.instruct_v2", {ContextLevel::Small, PromptFormat::InstructV2}},
  };
  for (const auto& [name, key] : cases) {
    const auto expected = read_file(testkit::fixtures() / "golden" / ("camel_case_to_snake." + name + ".txt"));
    const auto got = build_prompt(s, key.first, key.second).text;
    c.expect(!expected.empty() && source::normalize_trailing(got) == source::normalize_trailing(expected),
             name + " differs from its golden file");
  }
  std::size_t strict = 0;
  for (const auto& sample : testkit::strutil_samples()) {
    for (const auto format : kAllFormats) {
      const auto small = build_prompt(sample, ContextLevel::Small, format).token_count;
      const auto medium = build_prompt(sample, ContextLevel::Medium, format).token_count;
      const auto full = build_prompt(sample, ContextLevel::Full, format).token_count;
      // Without class or function dependencies all three levels coincide.
      if (has_code_dependency(sample)) {
        c.expect(small < medium && medium < full, sample.sample_id + " token counts not ordered");
        ++strict;
      } else {
        c.expect(small == medium && medium == full, sample.sample_id + " token counts differ without dependencies");
      }
    }
  }
  c.expect(strict > 0, "no sample exercised the strict ordering");
  if (c.ok) c.why << "5 golden prompts, " << strict << " strictly ordered prompt triples";
  return c;
}

Check filter_suite() {
  Check c;
  auto test = [](std::string text) {
    return TestRecord{"t", std::move(text), TestStatus::Raw, std::nullopt, TestOrigin::Initial};
  };
  const std::vector<TestRecord> raw = {test("assert 1"), test("assert is_string('a')"), test("assert reverse('a' =="),
                                       test("assert reverse('ab') == 'ba'")};
  const auto kept = syntax_filter(raw, "reverse");
  c.expect(kept.size() == 1 && kept[0].source_text == "assert reverse('ab') == 'ba'" &&
               kept[0].status == TestStatus::SyntaxOk,
           "syntax filter kept the wrong tests");

  auto s = testkit::strutil_sample("reverse");
  testkit::FakeRunner runner;
  runner.on_test = [](const TestRecord&, int) { return ExecutionOutcome{}; };
  const auto screened = execution_filter(runner, testkit::fake_env(testkit::strutil_repo()), s, kept);
  c.expect(screened.size() == 1 && screened[0].status == TestStatus::ExecOk, "in-process runner did not pass the test");

  s.coverage = CoverageStats{39.9, {}, 0};
  c.expect(!gate_sample(s), "39.9% was kept");
  s.coverage = CoverageStats{40.0, {}, 0};
  c.expect(gate_sample(s), "40.0% was dropped");
  if (c.ok) c.why << "3 of 4 rejected by syntax, gate at 40.0";
  return c;
}

/// Debug run where the backend's `solve_at`-th call returns the gold body.
DebugTrace scripted_debug(const BenchmarkSample& sample, int solve_at) {
  testkit::FakeRunner runner;
  runner.on_candidate = [gold = sample.target.source](std::string_view module, const TestRecord&) {
    return module.find(gold) != std::string_view::npos ? ExecutionOutcome{} : testkit::failed();
  };
  int calls = 0;
  ScriptedBackend backend([&](const std::string&, const GenerationParams&) {
    const bool gold = calls++ == solve_at;
    return std::vector<std::string>{gold ? sample.target.source
                                         : sample.target.signature + "\n    return None\n"};
  });
  return run_debug(runner, testkit::fake_env(testkit::strutil_repo()), sample, backend);
}

BenchmarkSample with_test(BenchmarkSample s) {
  s.tests = {{s.sample_id + "-t", "assert " + s.target.name + " is not None", TestStatus::ExecOk, std::nullopt,
              TestOrigin::Initial}};
  return s;
}

Check debug_loop() {
  Check c;
  const auto trace = scripted_debug(with_test(testkit::strutil_sample("reverse")), 2);
  c.expect(trace.terminal_status == TerminalStatus::Solved, "trace exhausted");
  c.expect(!trace.solved_by(1) && trace.solved_by(2), "not solved exactly at round 2");
  c.expect(trace.rounds.size() <= 4, "more than 4 rounds");

  // Sample i solves at round i % 5; 4 never happens within 3 repair rounds.
  const auto& corpus = testkit::strutil_samples();
  std::vector<DebugTrace> traces;
  for (std::size_t i = 0; i < corpus.size(); ++i) traces.push_back(scripted_debug(with_test(corpus[i]), i % 5));
  std::vector<double> by_round;
  for (int r = 0; r <= kDefaultDebugRounds; ++r) by_round.push_back(pass_at_1_by_round(traces, r));
  for (std::size_t r = 1; r < by_round.size(); ++r) {
    c.expect(by_round[r] > by_round[r - 1], "pass@1 did not increase at round " + std::to_string(r));
  }
  if (c.ok) {
    c.why << "solved at round 2; pass@1 by round";
    for (const double v : by_round) c.why << ' ' << v;
  }
  return c;
}

Check empty_detection() {
  Check c;
  const auto texts = nlohmann::json::parse(read_file(testkit::fixtures() / "empty_bodies.json"));
  std::vector<GenerationRecord> records;
  for (const auto& t : texts) records.push_back({"s", static_cast<int>(records.size()), t.get<std::string>(), {}, true, {}});
  c.expect(records.size() == 10, "fixture does not hold 10 bodies");
  const double rate = empty_rate(records);
  c.expect(rate == 0.3, "empty rate " + std::to_string(rate));
  if (c.ok) c.why << "empty_rate " << rate;
  return c;
}

Check aggregation() {
  Check c;
  const auto expected = nlohmann::json::parse(read_file(testkit::source_dir() / "tests" / "oracles" / "aggregate_expected.json"));
  const auto summary =
      aggregate(group_by_sample(load_generation_records(testkit::fixtures() / "agg" / "generations.jsonl")), {1, 5});
  auto bits = [](double v) { return std::bit_cast<std::uint64_t>(v); };
  auto hex = [&](const char* key) { return std::strtod(expected.at(key).get<std::string>().c_str(), nullptr); };
  c.expect(summary.samples == expected.at("samples").get<std::size_t>(), "sample count differs");
  c.expect(bits(summary.pass_at_k.at(1)) == bits(hex("pass@1")), "pass@1 differs");
  c.expect(bits(summary.pass_at_k.at(5)) == bits(hex("pass@5")), "pass@5 differs");
  c.expect(summary.mean_dir && bits(*summary.mean_dir) == bits(hex("mean_dir")), "mean DIR differs");
  if (c.ok) c.why << "pass@1, pass@5, mean DIR bit-equal";
  return c;
}

}  // namespace

int main() {
  const std::pair<const char*, std::function<Check()>> criteria[] = {
      {"pass@k matches subset enumeration", pass_at_k_oracle},
      {"DIR on the reverse outputs", dir_fixture},
      {"dependency extraction", dependency_extraction},
      {"prompt fidelity and token ordering", prompt_fidelity},
      {"test filter suite", filter_suite},
      {"debug loop", debug_loop},
      {"empty-function detection", empty_detection},
      {"aggregation matches the scripted recomputation", aggregation},
  };
  int failures = 0;
  for (const auto& [name, run] : criteria) {
    Check c;
    try {
      c = run();
    } catch (const std::exception& e) {
      c.ok = false;
      c.why << "exception: " << e.what();
    }
    std::cout << (c.ok ? "PASS" : "FAIL") << "  " << name << "  (" << c.why.str() << ")\n";
    failures += c.ok ? 0 : 1;
  }
  std::cout << (failures == 0 ? "all criteria pass" : std::to_string(failures) + " criteria failed") << '\n';
  return failures == 0 ? EXIT_SUCCESS : EXIT_FAILURE;
}
