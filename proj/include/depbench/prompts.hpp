#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "depbench/types.hpp"

namespace depbench {

/// Replaces each `{key}` with vars[key] in one left-to-right pass.
/// Substituted text is never rescanned; unknown keys are left as written.
std::string substitute(std::string_view tmpl, const std::map<std::string, std::string>& vars);

/// Imports block, variable dependencies, then class/function dependencies,
/// blank line between blocks, final newline. Empty when there is nothing to show.
/// `max_dependencies` keeps only that many dependency blocks (in render order).
std::string render_context(const BenchmarkSample& sample, ContextLevel level,
                           std::optional<std::size_t> max_dependencies = std::nullopt);

/// Header, decorators and docstring of the target, dedented, ending in "\n".
std::string target_prompt(const FunctionRecord& target);

/// Optional limit on prompt size in tokens. Dependency blocks are dropped
/// from the end until the prompt fits; the target header is never cut.
struct PromptBudget {
  std::optional<std::size_t> max_tokens;
};

PromptSpec build_base_prompt(const BenchmarkSample& sample, ContextLevel level, PromptBudget budget = {});
/// `variant` is 1 or 2; anything else throws PromptError.
PromptSpec build_instruct_prompt(const BenchmarkSample& sample, ContextLevel level, int variant,
                                 PromptBudget budget = {});
PromptSpec build_prompt(const BenchmarkSample& sample, ContextLevel level, PromptFormat format,
                        PromptBudget budget = {});
/// All nine level/format combinations.
std::map<PromptKey, PromptSpec> build_all_prompts(const BenchmarkSample& sample, PromptBudget budget = {});

/// Full-context debugging prompt. Throws PromptError when `error_log` is empty.
PromptSpec build_debug_prompt(const BenchmarkSample& sample, std::string_view failed_candidate,
                              std::string_view failed_test, std::string_view error_log);

enum class TuningStyle { Instruct, RawFull, RawSmall };
std::string_view to_string(TuningStyle style);
std::optional<TuningStyle> parse_tuning_style(std::string_view s);

struct TuningRecord {
  TuningStyle style = TuningStyle::Instruct;
  std::string prompt;
  std::string completion;  // the gold body
};

/// Throws PromptError for the instruct style when the target has no docstring.
TuningRecord build_tuning_record(const FunctionRecord& target, const std::vector<DependencyRecord>& deps,
                                 TuningStyle style, const std::vector<std::string>& module_imports = {});

/// Turns a completion into a full function definition: when it does not
/// define the target itself, it is taken as the body continuing the target prompt.
std::string assemble_candidate(const FunctionRecord& target, std::string_view completion);

}  // namespace depbench
