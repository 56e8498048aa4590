#include "depbench/types.hpp"

#include <algorithm>
#include <array>

namespace depbench {
namespace {

template <typename E, std::size_t N>
using Table = std::array<std::pair<E, std::string_view>, N>;

constexpr Table<DefinitionKind, 3> kKinds{{{DefinitionKind::Function, "function"},
                                           {DefinitionKind::Class, "class"},
                                           {DefinitionKind::Variable, "variable"}}};
constexpr Table<Locality, 2> kLocalities{{{Locality::InFile, "in_file"}, {Locality::CrossFile, "cross_file"}}};
constexpr Table<TestStatus, 6> kStatuses{{{TestStatus::Raw, "raw"},
                                          {TestStatus::SyntaxOk, "syntax_ok"},
                                          {TestStatus::ExecOk, "exec_ok"},
                                          {TestStatus::Fixed, "fixed"},
                                          {TestStatus::RejectedFlaky, "rejected_flaky"},
                                          {TestStatus::Rejected, "rejected"}}};
constexpr Table<TestOrigin, 4> kOrigins{{{TestOrigin::Initial, "initial"},
                                         {TestOrigin::Enhancement1, "enhancement_prompt_1"},
                                         {TestOrigin::Enhancement2, "enhancement_prompt_2"},
                                         {TestOrigin::Enhancement3, "enhancement_prompt_3"}}};
constexpr Table<ContextLevel, 3> kLevels{
    {{ContextLevel::Full, "full"}, {ContextLevel::Medium, "medium"}, {ContextLevel::Small, "small"}}};
constexpr Table<PromptFormat, 3> kFormats{{{PromptFormat::Base, "base"},
                                           {PromptFormat::InstructV1, "instruct_v1"},
                                           {PromptFormat::InstructV2, "instruct_v2"}}};
constexpr Table<TestOutcome, 3> kOutcomes{
    {{TestOutcome::Pass, "pass"}, {TestOutcome::Fail, "fail"}, {TestOutcome::Error, "error"}}};

template <typename E, std::size_t N>
std::string_view name_of(const Table<E, N>& table, E value) {
  for (const auto& [e, s] : table) {
    if (e == value) return s;
  }
  return "?";
}

template <typename E, std::size_t N>
std::optional<E> value_of(const Table<E, N>& table, std::string_view s) {
  for (const auto& [e, name] : table) {
    if (name == s) return e;
  }
  return std::nullopt;
}

}  // namespace

std::string_view to_string(DefinitionKind v) { return name_of(kKinds, v); }
std::string_view to_string(Locality v) { return name_of(kLocalities, v); }
std::string_view to_string(TestStatus v) { return name_of(kStatuses, v); }
std::string_view to_string(TestOrigin v) { return name_of(kOrigins, v); }
std::string_view to_string(ContextLevel v) { return name_of(kLevels, v); }
std::string_view to_string(PromptFormat v) { return name_of(kFormats, v); }
std::string_view to_string(TestOutcome v) { return name_of(kOutcomes, v); }

std::optional<DefinitionKind> parse_definition_kind(std::string_view s) { return value_of(kKinds, s); }
std::optional<Locality> parse_locality(std::string_view s) { return value_of(kLocalities, s); }
std::optional<TestStatus> parse_test_status(std::string_view s) { return value_of(kStatuses, s); }
std::optional<TestOrigin> parse_test_origin(std::string_view s) { return value_of(kOrigins, s); }
std::optional<ContextLevel> parse_context_level(std::string_view s) { return value_of(kLevels, s); }
std::optional<PromptFormat> parse_prompt_format(std::string_view s) { return value_of(kFormats, s); }
std::optional<TestOutcome> parse_test_outcome(std::string_view s) { return value_of(kOutcomes, s); }

CoverageStats CoverageStats::from_lines(std::set<int> covered, int total_executable) {
  CoverageStats stats;
  stats.covered_lines = std::move(covered);
  stats.total_executable_lines = total_executable;
  stats.line_coverage_pct =
      total_executable > 0
          ? 100.0 * static_cast<double>(stats.covered_lines.size()) / static_cast<double>(total_executable)
          : 0.0;
  return stats;
}

std::set<std::string> BenchmarkSample::dependency_names() const {
  std::set<std::string> names;
  for (const auto& d : dependencies) names.insert(d.name);
  return names;
}

void BenchmarkSample::dedupe_dependencies() {
  std::set<std::string> seen;
  std::erase_if(dependencies, [&](const DependencyRecord& d) { return !seen.insert(d.name).second; });
}

std::vector<TestRecord> BenchmarkSample::validated_tests() const {
  std::vector<TestRecord> out;
  std::copy_if(tests.begin(), tests.end(), std::back_inserter(out),
               [](const TestRecord& t) { return is_validated(t.status); });
  return out;
}

}  // namespace depbench
