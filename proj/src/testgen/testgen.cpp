#include "depbench/testgen.hpp"

#include <cctype>
#include <cstdio>
#include <set>

#include "depbench/error.hpp"
#include "depbench/prompts.hpp"
#include "depbench/python/parser.hpp"
#include "depbench/source.hpp"
#include "depbench/templates.hpp"

namespace depbench {

namespace fs = std::filesystem;
using python::kNoNode;
using python::NodeId;
using python::NodeKind;
using python::ParseResult;

namespace {

std::string trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return std::string(s);
}

void collect_asserts(const ParseResult& r, NodeId block, bool nested, std::vector<std::string>& out) {
  for (const NodeId s : r.tree[block].children) {
    const auto& n = r.tree[s];
    if (n.kind == NodeKind::Assert) {
      out.push_back(std::string(r.text(s)));
    } else if (n.kind == NodeKind::Error) {
      auto text = trim(r.text(s));
      if (text.starts_with("assert")) out.push_back(std::move(text));
    } else if (nested) {
      for (const NodeId c : n.children) {
        if (c != kNoNode && r.tree[c].kind == NodeKind::Block) collect_asserts(r, c, nested, out);
      }
    }
  }
}

bool calls(const ParseResult& r, std::string_view name, NodeId root) {
  if (root == kNoNode) return false;
  const auto& n = r.tree[root];
  if (n.kind == NodeKind::Call && !n.children.empty()) {
    const auto& f = r.tree[n.children[0]];
    if ((f.kind == NodeKind::Name || f.kind == NodeKind::Attribute) && f.value == name) return true;
  }
  for (const NodeId c : n.children) {
    if (calls(r, name, c)) return true;
  }
  return false;
}

std::string_view origin_tag(TestOrigin o) {
  switch (o) {
    case TestOrigin::Initial:
      return "init";
    case TestOrigin::Enhancement1:
      return "enh1";
    case TestOrigin::Enhancement2:
      return "enh2";
    case TestOrigin::Enhancement3:
      return "enh3";
  }
  return "x";
}

GenerationParams single(GenerationParams p) {
  p.num_samples = 1;
  return p;
}

fs::path blob_dir_of(const EnvHandle& env, const TestGenOptions& options) {
  return options.blob_dir.empty() ? env.workspace.parent_path() / "blobs" : options.blob_dir;
}

/// All runs behave the same; the status of that behaviour.
std::optional<ExecStatus> consistent_status(const std::vector<ExecutionOutcome>& runs) {
  if (runs.empty()) return std::nullopt;
  for (const auto& r : runs) {
    if (!r.same_behaviour(runs.front())) return std::nullopt;
  }
  return runs.front().status;
}

std::vector<TestRecord> records_from(const BenchmarkSample& sample, const std::vector<std::string>& asserts,
                                     TestOrigin origin, std::set<std::string>& seen) {
  std::vector<TestRecord> out;
  for (const auto& a : asserts) {
    if (!seen.insert(normalize_whitespace(a)).second) continue;
    TestRecord t;
    t.test_id = make_test_id(sample.sample_id, origin, out.size());
    t.source_text = a;
    t.origin = origin;
    out.push_back(std::move(t));
  }
  return out;
}

std::string render_examples(const std::vector<TestRecord>& tests) {
  std::string out;
  for (std::size_t i = 0; i < tests.size(); ++i) {
    if (i > 0) out += "\n";
    out += "def test_" + std::to_string(i) + "():\n";
    auto body = source::indent(source::dedent(tests[i].source_text), "    ");
    while (!body.empty() && body.back() == '\n') body.pop_back();
    out += body + "\n";
  }
  while (!out.empty() && out.back() == '\n') out.pop_back();
  return out;
}

std::string solution_text(const BenchmarkSample& sample) {
  std::string s = source::dedent(sample.solution);
  while (!s.empty() && (s.back() == '\n' || s.back() == ' ')) s.pop_back();
  return s;
}

}  // namespace

std::vector<std::string> split_assertions(std::string_view text, bool nested) {
  const auto r = python::parse(std::string(text));
  std::vector<std::string> out;
  collect_asserts(*r, r->tree.root(), nested, out);
  return out;
}

std::string normalize_whitespace(std::string_view text) {
  std::string out;
  bool space = false;
  for (const char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      space = !out.empty();
      continue;
    }
    if (space) out += ' ';
    space = false;
    out += c;
  }
  return out;
}

std::string make_test_id(std::string_view sample_id, TestOrigin origin, std::size_t index) {
  std::string id;
  for (const char c : sample_id) id += std::isalnum(static_cast<unsigned char>(c)) ? c : '_';
  char num[16];
  std::snprintf(num, sizeof num, "%02zu", index);
  return id + "-" + std::string(origin_tag(origin)) + "-" + num;
}

std::string initial_test_prompt(const BenchmarkSample& sample) {
  return substitute(templates::testgen_initial,
                    {{"function_under_test", solution_text(sample)}, {"function_name", sample.target.name}});
}

TestBatch tests_from_completion(const BenchmarkSample& sample, std::string_view completion) {
  TestBatch batch;
  batch.sample_id = sample.sample_id;
  batch.phase = TestPhase::Initial;
  std::string text = completion.find("```") != std::string_view::npos ? extract_code(completion)
                                                                       : std::string(completion);
  if (trim(text).empty()) {
    batch.warnings.push_back("empty completion for " + sample.sample_id);
    return batch;
  }
  if (!trim(text).starts_with("assert")) text = "assert " + text;
  auto asserts = split_assertions(text);
  if (asserts.size() > kMaxInitialAssertions) asserts.resize(kMaxInitialAssertions);
  std::set<std::string> seen;
  batch.tests = records_from(sample, asserts, TestOrigin::Initial, seen);
  return batch;
}

TestBatch generate_initial_tests(const BenchmarkSample& sample, Backend& backend, const TestGenOptions& options) {
  const auto completions = backend.complete(initial_test_prompt(sample), single(options.params));
  return tests_from_completion(sample, completions.empty() ? std::string() : completions.front());
}

std::vector<TestRecord> syntax_filter(const std::vector<TestRecord>& tests, std::string_view target_name) {
  std::vector<TestRecord> out;
  for (const auto& t : tests) {
    const auto r = python::parse(source::dedent(t.source_text));
    if (!r->ok() || r->tree[r->tree.root()].children.empty()) continue;
    if (!calls(*r, target_name, r->tree.root())) continue;
    auto kept = t;
    kept.status = TestStatus::SyntaxOk;
    out.push_back(std::move(kept));
  }
  return out;
}

std::vector<TestRecord> execution_filter(TestRunner& runner, const EnvHandle& env, const BenchmarkSample& sample,
                                         const std::vector<TestRecord>& tests, const TestGenOptions& options) {
  std::vector<TestRecord> out;
  for (const auto& t : tests) {
    if (t.status != TestStatus::SyntaxOk) {
      out.push_back(t);
      continue;
    }
    const auto runs = runner.run_test(env, sample, t, options.flaky_repeats);
    const auto status = consistent_status(runs);
    auto next = t;
    if (!status) {
      next.status = TestStatus::RejectedFlaky;
    } else if (*status == ExecStatus::Pass) {
      next.status = TestStatus::ExecOk;
    } else if (*status == ExecStatus::AssertionError) {
      next = fix_assertion(runner, env, sample, t, options);
    } else {
      next.status = TestStatus::Rejected;
    }
    out.push_back(std::move(next));
  }
  return out;
}

TestRecord fix_assertion(TestRunner& runner, const EnvHandle& env, const BenchmarkSample& sample,
                         const TestRecord& test, const TestGenOptions& options) {
  TestRecord out = test;
  out.status = TestStatus::Rejected;
  const std::string text = source::dedent(test.source_text);
  const auto r = python::parse(text);
  const auto& stmts = r->tree[r->tree.root()].children;
  if (!r->ok() || stmts.size() != 1 || r->tree[stmts[0]].kind != NodeKind::Assert) return out;
  const NodeId cmp = r->tree[stmts[0]].children[0];
  const auto& c = r->tree[cmp];
  if (c.kind != NodeKind::Compare || c.value != "==" || c.children.size() != 2) return out;
  const bool left_calls = calls(*r, sample.target.name, c.children[0]);
  const bool right_calls = calls(*r, sample.target.name, c.children[1]);
  if (!left_calls && !right_calls) return out;
  const NodeId call = left_calls ? c.children[0] : c.children[1];
  const NodeId expected = left_calls ? c.children[1] : c.children[0];

  const auto blob_name = test.test_id + ".pkl";
  const auto blob_path = blob_dir_of(env, options) / blob_name;
  const auto capture = runner.capture_call(env, sample, r->text(call), blob_path);
  if (capture.outcome.status != ExecStatus::Pass) return out;

  std::string replacement;
  std::optional<std::string> blob;
  if (capture.literal) {
    replacement = *capture.literal;
    std::error_code ec;
    fs::remove(blob_path, ec);
  } else if (capture.value_blob) {
    replacement = std::string(kBlobHelper) + "('" + blob_name + "')";
    blob = blob_name;
  } else {
    return out;  // value could not be serialized
  }
  const auto& span = r->tree[expected].span;
  TestRecord fixed = test;
  fixed.source_text = text.substr(0, span.begin) + replacement + text.substr(span.end);
  fixed.expected_blob = blob;
  fixed.status = TestStatus::Fixed;

  const auto runs = runner.run_test(env, sample, fixed, options.flaky_repeats);
  const auto status = consistent_status(runs);
  if (!status) {
    fixed.status = TestStatus::RejectedFlaky;
  } else if (*status != ExecStatus::Pass) {
    fixed.status = TestStatus::Rejected;
  }
  return fixed;
}

std::vector<std::string> enhancement_prompts(const BenchmarkSample& sample, const std::vector<TestRecord>& existing) {
  const std::map<std::string, std::string> vars = {{"existing_test_functions", render_examples(existing)},
                                                   {"function_under_test", solution_text(sample)}};
  return {substitute(templates::enhance_1, vars), substitute(templates::enhance_2, vars),
          substitute(templates::enhance_3, vars)};
}

TestBatch enhance_coverage(TestRunner& runner, const EnvHandle& env, const BenchmarkSample& sample,
                           const std::vector<TestRecord>& existing, Backend& backend, const TestGenOptions& options) {
  TestBatch batch;
  batch.sample_id = sample.sample_id;
  batch.phase = TestPhase::Enhancement;
  std::set<std::string> seen;
  std::set<std::string> kept;  // fixed tests can collide with earlier ones
  for (const auto& t : existing) {
    if (!is_validated(t.status)) continue;
    seen.insert(normalize_whitespace(t.source_text));
    if (kept.insert(normalize_whitespace(t.source_text)).second) batch.tests.push_back(t);
  }
  const auto prompts = enhancement_prompts(sample, batch.tests);
  const TestOrigin origins[] = {TestOrigin::Enhancement1, TestOrigin::Enhancement2, TestOrigin::Enhancement3};
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    const auto completions = backend.complete(prompts[i], single(options.params));
    if (completions.empty() || trim(completions.front()).empty()) {
      batch.warnings.push_back("empty enhancement completion " + std::to_string(i + 1));
      continue;
    }
    const auto asserts = split_assertions(extract_code(completions.front()), true);
    const auto raw = records_from(sample, asserts, origins[i], seen);
    for (auto& t : execution_filter(runner, env, sample, syntax_filter(raw, sample.target.name), options)) {
      if (is_validated(t.status) && kept.insert(normalize_whitespace(t.source_text)).second) {
        batch.tests.push_back(std::move(t));
      }
    }
  }
  batch.coverage = measure_coverage(runner, env, sample, batch.tests);
  return batch;
}

bool gate_sample(const BenchmarkSample& sample, double threshold) {
  return sample.coverage.line_coverage_pct >= threshold;
}

TestPipelineResult run_test_pipeline(TestRunner& runner, const EnvHandle& env, const BenchmarkSample& sample,
                                     Backend& backend, const TestGenOptions& options, double threshold) {
  TestPipelineResult result;
  result.sample = sample;
  auto initial = generate_initial_tests(sample, backend, options);
  result.warnings = initial.warnings;
  std::vector<TestRecord> validated;
  for (auto& t : execution_filter(runner, env, sample, syntax_filter(initial.tests, sample.target.name), options)) {
    if (is_validated(t.status)) validated.push_back(std::move(t));
  }
  result.initial_coverage = measure_coverage(runner, env, sample, validated).line_coverage_pct;
  auto enhanced = enhance_coverage(runner, env, sample, validated, backend, options);
  result.warnings.insert(result.warnings.end(), enhanced.warnings.begin(), enhanced.warnings.end());
  result.sample.tests = std::move(enhanced.tests);
  result.sample.coverage = std::move(enhanced.coverage);
  result.kept = gate_sample(result.sample, threshold);
  return result;
}

}  // namespace depbench
