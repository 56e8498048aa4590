#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "depbench/python/token.hpp"

namespace depbench {

using python::Span;

enum class DefinitionKind { Function, Class, Variable };
enum class Locality { InFile, CrossFile };
enum class TestStatus { Raw, SyntaxOk, ExecOk, Fixed, RejectedFlaky, Rejected };
enum class TestOrigin { Initial, Enhancement1, Enhancement2, Enhancement3 };
enum class ContextLevel { Full, Medium, Small };
enum class PromptFormat { Base, InstructV1, InstructV2 };
enum class TestOutcome { Pass, Fail, Error };

inline constexpr ContextLevel kAllLevels[] = {ContextLevel::Full, ContextLevel::Medium, ContextLevel::Small};
inline constexpr PromptFormat kAllFormats[] = {PromptFormat::Base, PromptFormat::InstructV1,
                                               PromptFormat::InstructV2};

std::string_view to_string(DefinitionKind kind);
std::string_view to_string(Locality locality);
std::string_view to_string(TestStatus status);
std::string_view to_string(TestOrigin origin);
std::string_view to_string(ContextLevel level);
std::string_view to_string(PromptFormat format);
std::string_view to_string(TestOutcome outcome);

// Inverse mappings; std::nullopt for unknown spellings.
std::optional<DefinitionKind> parse_definition_kind(std::string_view s);
std::optional<Locality> parse_locality(std::string_view s);
std::optional<TestStatus> parse_test_status(std::string_view s);
std::optional<TestOrigin> parse_test_origin(std::string_view s);
std::optional<ContextLevel> parse_context_level(std::string_view s);
std::optional<PromptFormat> parse_prompt_format(std::string_view s);
std::optional<TestOutcome> parse_test_outcome(std::string_view s);

inline bool is_validated(TestStatus s) { return s == TestStatus::ExecOk || s == TestStatus::Fixed; }

/// Hard cap on transitive dependency depth.
inline constexpr int kMaxDependencyDepth = 100;

struct FunctionRecord {
  std::string qualified_name;  // "func" or "Class.method"
  std::string name;
  std::string signature;  // `def name(params) -> ret:` exactly as written
  std::optional<std::string> docstring;  // raw literal, quotes included
  std::string body;  // statements after the header, original indentation
  std::string source;  // whole definition incl. decorators, from the start of its first line
  std::string module_id;
  Span span;
  std::set<std::string> identifiers;  // harvested from the body
  std::vector<std::string> parameters;

  friend bool operator==(const FunctionRecord&, const FunctionRecord&) = default;
};

struct DependencyRecord {
  std::string name;
  DefinitionKind kind = DefinitionKind::Function;
  std::string origin;  // module id of the defining module
  Locality locality = Locality::InFile;
  std::string definition_text;
  std::string signature;
  std::optional<std::string> docstring;
  int depth = 1;

  friend bool operator==(const DependencyRecord&, const DependencyRecord&) = default;
};

struct TestRecord {
  std::string test_id;
  std::string source_text;
  TestStatus status = TestStatus::Raw;
  std::optional<std::string> expected_blob;  // path relative to the dataset's blob directory
  TestOrigin origin = TestOrigin::Initial;

  friend bool operator==(const TestRecord&, const TestRecord&) = default;
};

struct CoverageStats {
  double line_coverage_pct = 0.0;
  std::set<int> covered_lines;
  int total_executable_lines = 0;

  static CoverageStats from_lines(std::set<int> covered, int total_executable);
  friend bool operator==(const CoverageStats&, const CoverageStats&) = default;
};

struct PromptSpec {
  ContextLevel level = ContextLevel::Full;
  PromptFormat format = PromptFormat::Base;
  std::string text;
  std::size_t token_count = 0;

  friend bool operator==(const PromptSpec&, const PromptSpec&) = default;
};

using PromptKey = std::pair<ContextLevel, PromptFormat>;

struct BenchmarkSample {
  std::string sample_id;
  std::string repo;
  std::string module_path;  // repo-relative, forward slashes
  FunctionRecord target;
  std::vector<std::string> module_imports;  // raw import statements of the target module, in order
  std::vector<DependencyRecord> dependencies;
  std::map<PromptKey, PromptSpec> prompts;
  std::string solution;
  std::vector<TestRecord> tests;
  CoverageStats coverage;

  /// D_s: the deduplicated dependency names.
  std::set<std::string> dependency_names() const;
  /// Collapses dependency records sharing a name, keeping the first.
  void dedupe_dependencies();
  std::vector<TestRecord> validated_tests() const;

  friend bool operator==(const BenchmarkSample&, const BenchmarkSample&) = default;
};

struct GenerationRecord {
  std::string sample_id;
  int candidate_index = 0;
  std::string generated_text;
  std::vector<TestOutcome> per_test_outcome;
  bool passed_all = false;
  std::optional<double> dir_value;

  friend bool operator==(const GenerationRecord&, const GenerationRecord&) = default;
};

}  // namespace depbench
