#pragma once

#include <chrono>
#include <filesystem>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "depbench/repository.hpp"
#include "depbench/types.hpp"

namespace depbench {

enum class ExecStatus { Pass, AssertionError, OtherError, Timeout };
std::string_view to_string(ExecStatus status);
std::optional<ExecStatus> parse_exec_status(std::string_view s);

struct ExecutionOutcome {
  ExecStatus status = ExecStatus::Pass;
  std::optional<std::string> exception_type;  // always set for OtherError
  std::string stdout_text;
  std::string stderr_text;
  double wall_time = 0.0;

  /// Equal status, exception type and stdout; wall time and stderr are ignored.
  bool same_behaviour(const ExecutionOutcome& other) const;
  TestOutcome as_test_outcome() const;
  friend bool operator==(const ExecutionOutcome&, const ExecutionOutcome&) = default;
};

/// Wire format of the runtime shim:
/// {"status", "exception_type", "stdout", "stderr", "wall_time"}.
ExecutionOutcome parse_outcome(std::string_view json_text);
std::vector<ExecutionOutcome> parse_outcomes(std::string_view json_text);  // a JSON array of the above
std::string to_json(const ExecutionOutcome& outcome);

/// {"file", "executable_lines": [...], "covered_lines": [...]}
struct CoverageReport {
  std::string file;
  std::set<int> executable_lines;
  std::set<int> covered_lines;

  friend bool operator==(const CoverageReport&, const CoverageReport&) = default;
};
CoverageReport parse_coverage(std::string_view json_text);
std::string to_json(const CoverageReport& report);

/// A private copy of one repository, removed when the last handle goes away.
struct EnvHandle {
  std::filesystem::path repo_root;
  std::filesystem::path workspace;
  std::string interpreter = "python3";
  std::vector<std::string> manifest;  // third-party top-level packages found by import scan
  std::vector<std::string> degraded;  // manifest entries that are not importable
  bool ready = false;

  std::shared_ptr<void> owner;  // deletes `workspace`
};

struct ProvisionOptions {
  std::string interpreter = "python3";
  /// Module ids that must import cleanly for the env to be ready.
  std::vector<std::string> check_modules;
  /// pip-install missing packages into the interpreter's user site.
  bool install_missing = false;
  std::filesystem::path work_root;  // default: the system temp directory
};

/// Top-level names imported anywhere in the repo that are neither stdlib
/// nor repository modules, sorted.
std::vector<std::string> detect_requirements(const RepositorySnapshot& graph);

/// Copies the repository into a private workspace, checks that third-party
/// imports resolve and that `check_modules` import. Missing packages mark the
/// env degraded; an import failure of a checked module throws HarnessError.
EnvHandle provision_env(const std::filesystem::path& repo_root, const ProvisionOptions& options = {});

/// Result of evaluating one call expression against the gold solution.
struct CallCapture {
  ExecutionOutcome outcome;
  std::optional<std::string> literal;  // source literal for simple values
  std::optional<std::filesystem::path> value_blob;
};

/// Executes tests. Implementations must be safe to call from several
/// threads for different samples.
class TestRunner {
 public:
  virtual ~TestRunner() = default;
  /// Runs `test` against the workspace module `repeats` times, one fresh
  /// process per run. Coverage of the final run goes to `coverage` when given.
  virtual std::vector<ExecutionOutcome> run_test(const EnvHandle& env, const BenchmarkSample& sample,
                                                 const TestRecord& test, int repeats,
                                                 CoverageReport* coverage = nullptr) = 0;
  /// Runs each test once against `module_text` in place of the sample's module.
  /// The workspace itself is never modified.
  virtual std::vector<ExecutionOutcome> run_tests_with_module(const EnvHandle& env, const BenchmarkSample& sample,
                                                              std::string_view module_text,
                                                              const std::vector<TestRecord>& tests) = 0;
  /// Evaluates `call_expression` in the gold module; the value is serialized to `blob_out`.
  virtual CallCapture capture_call(const EnvHandle& env, const BenchmarkSample& sample,
                                   std::string_view call_expression, const std::filesystem::path& blob_out) = 0;
};

struct ShimConfig {
  std::vector<std::string> command;  // e.g. {"python3", "/opt/shim.py"}
  std::chrono::seconds test_timeout{30};
  std::filesystem::path blob_dir;  // exported to tests as DEPBENCH_BLOB_DIR
};

/// TestRunner over the runtime shim's command-line contract.
class ShimRunner : public TestRunner {
 public:
  explicit ShimRunner(ShimConfig config);
  std::vector<ExecutionOutcome> run_test(const EnvHandle& env, const BenchmarkSample& sample, const TestRecord& test,
                                         int repeats, CoverageReport* coverage = nullptr) override;
  std::vector<ExecutionOutcome> run_tests_with_module(const EnvHandle& env, const BenchmarkSample& sample,
                                                      std::string_view module_text,
                                                      const std::vector<TestRecord>& tests) override;
  CallCapture capture_call(const EnvHandle& env, const BenchmarkSample& sample, std::string_view call_expression,
                           const std::filesystem::path& blob_out) override;

  const ShimConfig& config() const { return config_; }

 private:
  std::vector<ExecutionOutcome> run_in(const std::filesystem::path& root, const BenchmarkSample& sample,
                                       const TestRecord& test, int repeats, CoverageReport* coverage);
  ShimConfig config_;
};

/// Python source of the test module the shim runs for one test.
std::string render_test_file(const BenchmarkSample& sample, const TestRecord& test);
/// Name of the helper a blob-backed assertion calls for its expected value.
inline constexpr std::string_view kBlobHelper = "_depbench_expected";

/// Module text with the target's definition replaced by `candidate`
/// (re-indented for methods), or nullopt when the result does not parse.
std::optional<std::string> splice_candidate(std::string_view module_text, const FunctionRecord& target,
                                            std::string_view candidate);

struct CandidateRun {
  GenerationRecord record;
  std::vector<ExecutionOutcome> outcomes;  // one per test
};

/// Splices `candidate` over the gold definition in a private copy and runs
/// every test once. A candidate that does not parse fails every test with
/// OtherError/SyntaxError.
CandidateRun run_candidate(TestRunner& runner, const EnvHandle& env, const BenchmarkSample& sample,
                           std::string_view candidate, const std::vector<TestRecord>& tests, int candidate_index = 0);

/// First and last line of the target's body (after the docstring).
std::pair<int, int> body_lines(const FunctionRecord& target);

/// Line coverage of the target body by `tests`, each run once.
CoverageStats measure_coverage(TestRunner& runner, const EnvHandle& env, const BenchmarkSample& sample,
                               const std::vector<TestRecord>& tests);

}  // namespace depbench
