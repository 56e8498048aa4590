#include "depbench/harness.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "depbench/depgraph.hpp"
#include "depbench/error.hpp"
#include "depbench/metrics.hpp"
#include "depbench/python/names.hpp"
#include "depbench/source.hpp"
#include "depbench/subprocess.hpp"
#include "json.hpp"

namespace depbench {

namespace fs = std::filesystem;
using nlohmann::json;

// ---- wire formats -----------------------------------------------------------------

std::string_view to_string(ExecStatus status) {
  switch (status) {
    case ExecStatus::Pass:
      return "pass";
    case ExecStatus::AssertionError:
      return "assertion_error";
    case ExecStatus::OtherError:
      return "other_error";
    case ExecStatus::Timeout:
      return "timeout";
  }
  return "?";
}

std::optional<ExecStatus> parse_exec_status(std::string_view s) {
  for (const auto st : {ExecStatus::Pass, ExecStatus::AssertionError, ExecStatus::OtherError, ExecStatus::Timeout}) {
    if (to_string(st) == s) return st;
  }
  return std::nullopt;
}

bool ExecutionOutcome::same_behaviour(const ExecutionOutcome& o) const {
  return status == o.status && exception_type == o.exception_type && stdout_text == o.stdout_text;
}

TestOutcome ExecutionOutcome::as_test_outcome() const {
  switch (status) {
    case ExecStatus::Pass:
      return TestOutcome::Pass;
    case ExecStatus::AssertionError:
      return TestOutcome::Fail;
    default:
      return TestOutcome::Error;
  }
}

namespace {

ExecutionOutcome outcome_from(const json& j) {
  ExecutionOutcome o;
  const auto status = parse_exec_status(j.at("status").get<std::string>());
  if (!status) throw HarnessError("shim outcome has unknown status: " + j.at("status").dump());
  o.status = *status;
  if (j.contains("exception_type") && !j.at("exception_type").is_null()) {
    o.exception_type = j.at("exception_type").get<std::string>();
  }
  o.stdout_text = j.value("stdout", std::string());
  o.stderr_text = j.value("stderr", std::string());
  o.wall_time = j.value("wall_time", 0.0);
  if (o.status == ExecStatus::OtherError && !o.exception_type) {
    throw HarnessError("shim outcome other_error without exception_type");
  }
  return o;
}

json outcome_json(const ExecutionOutcome& o) {
  return {{"status", to_string(o.status)},
          {"exception_type", o.exception_type ? json(*o.exception_type) : json(nullptr)},
          {"stdout", o.stdout_text},
          {"stderr", o.stderr_text},
          {"wall_time", o.wall_time}};
}

template <typename F>
auto parse_wire(std::string_view text, const char* what, F&& f) {
  try {
    return f(json::parse(text));
  } catch (const json::exception& e) {
    throw HarnessError(std::string("malformed ") + what + ": " + e.what());
  }
}

}  // namespace

ExecutionOutcome parse_outcome(std::string_view text) {
  return parse_wire(text, "outcome JSON", [](const json& j) { return outcome_from(j); });
}

std::vector<ExecutionOutcome> parse_outcomes(std::string_view text) {
  return parse_wire(text, "outcome JSON", [](const json& j) {
    if (!j.is_array()) throw HarnessError("shim output is not a JSON array");
    std::vector<ExecutionOutcome> out;
    for (const auto& e : j) out.push_back(outcome_from(e));
    return out;
  });
}

std::string to_json(const ExecutionOutcome& outcome) { return outcome_json(outcome).dump(); }

CoverageReport parse_coverage(std::string_view text) {
  return parse_wire(text, "coverage JSON", [](const json& j) {
    CoverageReport r;
    r.file = j.at("file").get<std::string>();
    r.executable_lines = j.at("executable_lines").get<std::set<int>>();
    r.covered_lines = j.at("covered_lines").get<std::set<int>>();
    return r;
  });
}

std::string to_json(const CoverageReport& r) {
  return json{{"file", r.file}, {"executable_lines", r.executable_lines}, {"covered_lines", r.covered_lines}}.dump();
}

// ---- workspaces ---------------------------------------------------------------------

namespace {

class TempDir {
 public:
  explicit TempDir(const fs::path& parent, const std::string& prefix) {
    const auto base = parent.empty() ? fs::temp_directory_path() : parent;
    fs::create_directories(base);
    std::string tmpl = (base / (prefix + "XXXXXX")).string();
    if (!::mkdtemp(tmpl.data())) throw HarnessError("mkdtemp failed under " + base.string());
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

bool skipped_entry(const fs::path& p) {
  const auto name = p.filename().string();
  return name == ".git" || name == "__pycache__" || name == "node_modules" || name == ".venv" || name == "venv";
}

void copy_tree(const fs::path& from, const fs::path& to) {
  fs::create_directories(to);
  for (const auto& entry : fs::directory_iterator(from)) {
    if (skipped_entry(entry.path())) continue;
    const auto dest = to / entry.path().filename();
    if (entry.is_directory()) {
      copy_tree(entry.path(), dest);
    } else if (entry.is_regular_file()) {
      fs::copy_file(entry.path(), dest, fs::copy_options::overwrite_existing);
    }
  }
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw HarnessError("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, std::string_view text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw HarnessError("cannot write " + p.string());
}

std::map<std::string, std::string> python_env(const fs::path& root) {
  std::string path = root.string() + ":" + root.parent_path().string();
  if (const char* existing = std::getenv("PYTHONPATH"); existing && *existing) path += std::string(":") + existing;
  return {{"PYTHONPATH", path}, {"PYTHONDONTWRITEBYTECODE", "1"}};
}

std::string tail(std::string_view s, std::size_t n = 2000) {
  return std::string(s.size() > n ? s.substr(s.size() - n) : s);
}

}  // namespace

std::vector<std::string> detect_requirements(const RepositorySnapshot& graph) {
  std::set<std::string> out;
  for (const auto& e : graph.import_edges) {
    if (!e.external || e.imported.empty() || e.imported.front() == '.') continue;
    const auto top = e.imported.substr(0, e.imported.find('.'));
    if (python::is_stdlib_module(top) || graph.lookup_module(top)) continue;
    out.insert(top);
  }
  return {out.begin(), out.end()};
}

EnvHandle provision_env(const fs::path& repo_root, const ProvisionOptions& options) {
  std::error_code ec;
  if (!fs::is_directory(repo_root, ec)) throw HarnessError("repository not found: " + repo_root.string());
  auto dir = std::make_shared<TempDir>(options.work_root, "depbench-env-");
  EnvHandle env;
  env.repo_root = fs::weakly_canonical(repo_root);
  env.workspace = dir->path() / env.repo_root.filename();
  env.interpreter = options.interpreter;
  env.owner = dir;
  copy_tree(env.repo_root, env.workspace);

  const auto pyenv = python_env(env.workspace);
  auto importable = [&](const std::string& module, std::string* err) {
    const auto r = run_process({env.interpreter, "-c", "import " + module},
                               {env.workspace, pyenv, std::chrono::seconds(120), {}});
    if (err) *err = r.err;
    return r.exit_code == 0 && !r.timed_out;
  };

  env.manifest = detect_requirements(build_repo_graph(env.workspace));
  for (const auto& pkg : env.manifest) {
    if (importable(pkg, nullptr)) continue;
    if (options.install_missing) {
      run_process({env.interpreter, "-m", "pip", "install", "--user", pkg}, {{}, {}, std::chrono::minutes(10), {}});
      if (importable(pkg, nullptr)) continue;
    }
    env.degraded.push_back(pkg);
  }
  for (const auto& module : options.check_modules) {
    std::string err;
    if (!importable(module, &err)) throw HarnessError("module " + module + " fails to import:\n" + tail(err));
  }
  env.ready = true;
  return env;
}

// ---- test files and splicing ------------------------------------------------------

namespace {

std::string identifier_for(std::string_view s) {
  std::string out;
  for (const char c : s) out += std::isalnum(static_cast<unsigned char>(c)) ? c : '_';
  return out;
}

}  // namespace

std::string render_test_file(const BenchmarkSample& sample, const TestRecord& test) {
  const auto& mod = sample.target.module_id;
  const auto outer = sample.target.qualified_name.substr(0, sample.target.qualified_name.find('.'));
  std::string out;
  out += "from " + mod + " import *\n";
  out += "from " + mod + " import " + outer + "\n";
  out += "\n\ndef " + std::string(kBlobHelper) + "(name):\n";
  out += "    import os, pickle\n";
  out += "    with open(os.path.join(os.environ['DEPBENCH_BLOB_DIR'], name), 'rb') as f:\n";
  out += "        return pickle.load(f)\n";
  out += "\n\ndef test_" + identifier_for(test.test_id) + "():\n";
  auto body = source::indent(source::dedent(test.source_text), "    ");
  while (!body.empty() && body.back() == '\n') body.pop_back();
  out += body + "\n";
  return out;
}

std::optional<std::string> splice_candidate(std::string_view module_text, const FunctionRecord& target,
                                            std::string_view candidate) {
  const auto& span = target.span;
  if (span.end > module_text.size() || span.begin > span.end ||
      module_text.substr(span.begin, span.end - span.begin) != target.source) {
    throw HarnessError("module text no longer matches " + target.module_id + ":" + target.qualified_name);
  }
  std::string indent;
  for (const char c : target.source) {
    if (c != ' ' && c != '\t') break;
    indent += c;
  }
  auto body = source::dedent(candidate);
  while (!body.empty() && (body.back() == '\n' || body.back() == ' ')) body.pop_back();
  if (!indent.empty()) body = source::indent(body, indent);
  std::string out(module_text.substr(0, span.begin));
  out += body;
  out += module_text.substr(span.end);
  if (!parse_module(out).ok()) return std::nullopt;
  return out;
}

// ---- shim runner ------------------------------------------------------------------

ShimRunner::ShimRunner(ShimConfig config) : config_(std::move(config)) {
  if (config_.command.empty()) throw UsageError("no runtime shim command configured");
}

std::vector<ExecutionOutcome> ShimRunner::run_in(const fs::path& root, const BenchmarkSample& sample,
                                                 const TestRecord& test, int repeats, CoverageReport* coverage) {
  if (repeats < 1) throw HarnessError("repeats must be >= 1");
  const TempDir scratch({}, "depbench-run-");
  const auto test_file = scratch.path() / "test_case.py";
  const auto cov_file = scratch.path() / "coverage.json";
  write_file(test_file, render_test_file(sample, test));
  const auto module = root / sample.module_path;
  if (!fs::exists(module)) throw HarnessError("workspace is missing " + module.string());

  auto argv = config_.command;
  argv.insert(argv.end(), {"run-test", "--module", module.string(), "--test-file", test_file.string(), "--repeat",
                           std::to_string(repeats), "--timeout", std::to_string(config_.test_timeout.count())});
  if (coverage) argv.insert(argv.end(), {"--coverage-out", cov_file.string()});
  auto env = python_env(root);
  env["DEPBENCH_BLOB_DIR"] = config_.blob_dir.empty() ? scratch.path().string() : fs::absolute(config_.blob_dir).string();
  const auto limit = repeats * (config_.test_timeout + std::chrono::seconds(10)) + std::chrono::seconds(30);
  const auto r = run_process(argv, {root, env, std::chrono::duration_cast<std::chrono::milliseconds>(limit), {}});

  if (r.timed_out) {
    ExecutionOutcome t;
    t.status = ExecStatus::Timeout;
    t.wall_time = r.wall_time;
    return std::vector<ExecutionOutcome>(static_cast<std::size_t>(repeats), t);
  }
  std::vector<ExecutionOutcome> out;
  try {
    out = parse_outcomes(r.out);
  } catch (const HarnessError& e) {
    throw HarnessError(std::string(e.what()) + " (shim exit " + std::to_string(r.exit_code) + ")\n" + tail(r.err));
  }
  if (out.size() != static_cast<std::size_t>(repeats)) {
    throw HarnessError("shim returned " + std::to_string(out.size()) + " outcomes for " + std::to_string(repeats) +
                       " runs");
  }
  if (coverage) {
    if (!fs::exists(cov_file)) throw HarnessError("coverage instrumentation produced no report\n" + tail(r.err));
    *coverage = parse_coverage(read_file(cov_file));
  }
  return out;
}

std::vector<ExecutionOutcome> ShimRunner::run_test(const EnvHandle& env, const BenchmarkSample& sample,
                                                   const TestRecord& test, int repeats, CoverageReport* coverage) {
  if (!env.ready) throw HarnessError("environment not ready: " + env.repo_root.string());
  return run_in(env.workspace, sample, test, repeats, coverage);
}

std::vector<ExecutionOutcome> ShimRunner::run_tests_with_module(const EnvHandle& env, const BenchmarkSample& sample,
                                                                std::string_view module_text,
                                                                const std::vector<TestRecord>& tests) {
  if (!env.ready) throw HarnessError("environment not ready: " + env.repo_root.string());
  const TempDir copy({}, "depbench-cand-");
  const auto root = copy.path() / env.workspace.filename();
  copy_tree(env.workspace, root);
  write_file(root / sample.module_path, module_text);
  std::vector<ExecutionOutcome> out;
  out.reserve(tests.size());
  for (const auto& t : tests) out.push_back(run_in(root, sample, t, 1, nullptr).front());
  return out;
}

CallCapture ShimRunner::capture_call(const EnvHandle& env, const BenchmarkSample& sample,
                                     std::string_view call_expression, const fs::path& blob_out) {
  if (!env.ready) throw HarnessError("environment not ready: " + env.repo_root.string());
  if (!blob_out.parent_path().empty()) fs::create_directories(blob_out.parent_path());
  auto argv = config_.command;
  argv.insert(argv.end(), {"capture-call", "--module", (env.workspace / sample.module_path).string(), "--call",
                           std::string(call_expression), "--blob-out", fs::absolute(blob_out).string(), "--timeout",
                           std::to_string(config_.test_timeout.count())});
  const auto r = run_process(
      argv, {env.workspace, python_env(env.workspace),
             std::chrono::duration_cast<std::chrono::milliseconds>(config_.test_timeout + std::chrono::seconds(30)),
             {}});
  CallCapture c;
  if (r.timed_out) {
    c.outcome.status = ExecStatus::Timeout;
    return c;
  }
  try {
    const auto j = json::parse(r.out);
    c.outcome = outcome_from(j);
    if (j.contains("literal") && !j.at("literal").is_null()) c.literal = j.at("literal").get<std::string>();
    if (j.contains("value_blob") && !j.at("value_blob").is_null()) c.value_blob = j.at("value_blob").get<std::string>();
  } catch (const json::exception& e) {
    throw HarnessError(std::string("malformed capture output: ") + e.what() + "\n" + tail(r.err));
  }
  return c;
}

// ---- candidates and coverage --------------------------------------------------------

CandidateRun run_candidate(TestRunner& runner, const EnvHandle& env, const BenchmarkSample& sample,
                           std::string_view candidate, const std::vector<TestRecord>& tests, int candidate_index) {
  CandidateRun run;
  run.record.sample_id = sample.sample_id;
  run.record.candidate_index = candidate_index;
  run.record.generated_text = std::string(candidate);
  run.record.dir_value = dir_of(candidate, sample.dependency_names());

  const auto module = read_file(env.workspace / sample.module_path);
  const auto spliced = splice_candidate(module, sample.target, candidate);
  if (!spliced) {
    ExecutionOutcome bad;
    bad.status = ExecStatus::OtherError;
    bad.exception_type = "SyntaxError";
    bad.stderr_text = "candidate does not parse";
    run.outcomes.assign(tests.size(), bad);
  } else {
    run.outcomes = runner.run_tests_with_module(env, sample, *spliced, tests);
    if (run.outcomes.size() != tests.size()) throw HarnessError("runner returned the wrong number of outcomes");
  }
  run.record.passed_all = true;
  for (const auto& o : run.outcomes) {
    run.record.per_test_outcome.push_back(o.as_test_outcome());
    run.record.passed_all = run.record.passed_all && o.status == ExecStatus::Pass;
  }
  return run;
}

std::pair<int, int> body_lines(const FunctionRecord& target) {
  const int last = target.span.end_line;
  if (target.body.empty()) return {last + 1, last};
  const int lines = static_cast<int>(std::count(target.body.begin(), target.body.end(), '\n')) + 1;
  return {last - lines + 1, last};
}

CoverageStats measure_coverage(TestRunner& runner, const EnvHandle& env, const BenchmarkSample& sample,
                               const std::vector<TestRecord>& tests) {
  if (tests.empty()) return CoverageStats::from_lines({}, 0);
  const auto [first, last] = body_lines(sample.target);
  std::set<int> executable;
  std::set<int> covered;
  for (const auto& t : tests) {
    CoverageReport report;
    runner.run_test(env, sample, t, 1, &report);
    for (const int l : report.executable_lines) {
      if (l >= first && l <= last) executable.insert(l);
    }
    for (const int l : report.covered_lines) {
      if (l >= first && l <= last) covered.insert(l);
    }
  }
  std::erase_if(covered, [&](int l) { return !executable.count(l); });
  return CoverageStats::from_lines(std::move(covered), static_cast<int>(executable.size()));
}

}  // namespace depbench
