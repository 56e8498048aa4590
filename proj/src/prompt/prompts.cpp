#include "depbench/prompts.hpp"

#include <cctype>

#include "depbench/error.hpp"
#include "depbench/source.hpp"
#include "depbench/templates.hpp"

namespace depbench {

namespace {

std::string strip_final_newline(std::string s) {
  while (!s.empty() && (s.back() == '\n' || s.back() == '\r')) s.pop_back();
  return s;
}

/// Dependency blocks in render order: variables first, then the rest.
std::vector<std::string> dependency_blocks(const BenchmarkSample& sample, ContextLevel level) {
  std::vector<std::string> vars;
  std::vector<std::string> defs;
  for (const auto& d : sample.dependencies) {
    if (d.kind == DefinitionKind::Variable) {
      vars.push_back(strip_final_newline(d.definition_text));
      continue;
    }
    switch (level) {
      case ContextLevel::Full:
        defs.push_back(strip_final_newline(d.definition_text));
        break;
      case ContextLevel::Medium:
        defs.push_back(strip_final_newline(source::outline(d.definition_text, true)));
        break;
      case ContextLevel::Small:
        defs.push_back(strip_final_newline(source::outline(d.definition_text, false)));
        break;
    }
  }
  vars.insert(vars.end(), std::make_move_iterator(defs.begin()), std::make_move_iterator(defs.end()));
  return vars;
}

std::size_t dependency_block_count(const BenchmarkSample& sample) { return sample.dependencies.size(); }

PromptSpec make_spec(ContextLevel level, PromptFormat format, std::string text) {
  PromptSpec p{level, format, std::move(text), 0};
  p.token_count = count_tokens(p.text);
  return p;
}

std::string base_text(const BenchmarkSample& sample, ContextLevel level, std::optional<std::size_t> keep) {
  const auto context = render_context(sample, level, keep);
  const auto target = target_prompt(sample.target);
  return context.empty() ? target : context + "\n" + target;
}

std::map<std::string, std::string> target_vars(const FunctionRecord& target) {
  return {
      {"target_function_name", target.name},
      {"target_function_signature", source::bare_signature(target.signature)},
      {"target_function_docstring", strip_final_newline(source::dedented_docstring(target.source))},
      {"target_function_prompt", strip_final_newline(target_prompt(target))},
  };
}

std::string instruct_text(const BenchmarkSample& sample, ContextLevel level, int variant,
                          std::optional<std::size_t> keep) {
  auto vars = target_vars(sample.target);
  if (variant == 1) {
    vars["BasePrompt"] = base_text(sample, level, keep);
    return substitute(templates::instruct_v1, vars);
  }
  vars["dependency_context"] = render_context(sample, level, keep);
  return substitute(templates::instruct_v2, vars);
}

/// Largest prefix of dependency blocks whose prompt fits the budget.
template <typename Render>
PromptSpec fit(const BenchmarkSample& sample, ContextLevel level, PromptFormat format, PromptBudget budget,
               Render&& render) {
  auto spec = make_spec(level, format, render(std::nullopt));
  if (!budget.max_tokens || spec.token_count <= *budget.max_tokens) return spec;
  for (std::size_t keep = dependency_block_count(sample); keep-- > 0;) {
    spec = make_spec(level, format, render(keep));
    if (spec.token_count <= *budget.max_tokens) break;
  }
  return spec;
}

bool defines(std::string_view text, std::string_view name) {
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    auto line = text.substr(pos, eol - pos);
    pos = eol + 1;
    while (!line.empty() && (line.front() == ' ' || line.front() == '\t')) line.remove_prefix(1);
    if (line.starts_with("async ")) {
      line.remove_prefix(6);
      while (!line.empty() && line.front() == ' ') line.remove_prefix(1);
    }
    if (!line.starts_with("def ")) continue;
    line.remove_prefix(4);
    while (!line.empty() && line.front() == ' ') line.remove_prefix(1);
    if (!line.starts_with(name)) continue;
    line.remove_prefix(name.size());
    while (!line.empty() && line.front() == ' ') line.remove_prefix(1);
    if (!line.empty() && line.front() == '(') return true;
  }
  return false;
}

}  // namespace

std::string substitute(std::string_view tmpl, const std::map<std::string, std::string>& vars) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t pos = 0;
  while (pos < tmpl.size()) {
    const auto open = tmpl.find('{', pos);
    if (open == std::string_view::npos) break;
    const auto close = tmpl.find('}', open + 1);
    if (close == std::string_view::npos) break;
    out.append(tmpl.substr(pos, open - pos));
    const auto key = std::string(tmpl.substr(open + 1, close - open - 1));
    if (const auto it = vars.find(key); it != vars.end()) {
      out += it->second;
      pos = close + 1;
    } else {
      out += '{';
      pos = open + 1;
    }
  }
  out.append(tmpl.substr(pos));
  return out;
}

std::string render_context(const BenchmarkSample& sample, ContextLevel level,
                           std::optional<std::size_t> max_dependencies) {
  std::vector<std::string> blocks;
  if (!sample.module_imports.empty()) {
    std::string imports;
    for (const auto& s : sample.module_imports) imports += strip_final_newline(s) + "\n";
    blocks.push_back(strip_final_newline(std::move(imports)));
  }
  auto deps = dependency_blocks(sample, level);
  if (max_dependencies && deps.size() > *max_dependencies) deps.resize(*max_dependencies);
  std::move(deps.begin(), deps.end(), std::back_inserter(blocks));
  std::string out;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    if (i > 0) out += "\n\n";
    out += blocks[i];
  }
  if (!out.empty()) out += '\n';
  return out;
}

std::string target_prompt(const FunctionRecord& target) { return source::function_prompt(target.source); }

PromptSpec build_base_prompt(const BenchmarkSample& sample, ContextLevel level, PromptBudget budget) {
  return fit(sample, level, PromptFormat::Base, budget,
             [&](std::optional<std::size_t> keep) { return base_text(sample, level, keep); });
}

PromptSpec build_instruct_prompt(const BenchmarkSample& sample, ContextLevel level, int variant,
                                 PromptBudget budget) {
  if (variant != 1 && variant != 2) throw PromptError("instruct variant must be 1 or 2, got " + std::to_string(variant));
  const auto format = variant == 1 ? PromptFormat::InstructV1 : PromptFormat::InstructV2;
  return fit(sample, level, format, budget,
             [&](std::optional<std::size_t> keep) { return instruct_text(sample, level, variant, keep); });
}

PromptSpec build_prompt(const BenchmarkSample& sample, ContextLevel level, PromptFormat format, PromptBudget budget) {
  switch (format) {
    case PromptFormat::Base:
      return build_base_prompt(sample, level, budget);
    case PromptFormat::InstructV1:
      return build_instruct_prompt(sample, level, 1, budget);
    case PromptFormat::InstructV2:
      return build_instruct_prompt(sample, level, 2, budget);
  }
  throw PromptError("unknown prompt format");
}

std::map<PromptKey, PromptSpec> build_all_prompts(const BenchmarkSample& sample, PromptBudget budget) {
  std::map<PromptKey, PromptSpec> out;
  for (const auto level : kAllLevels) {
    for (const auto format : kAllFormats) out[{level, format}] = build_prompt(sample, level, format, budget);
  }
  return out;
}

PromptSpec build_debug_prompt(const BenchmarkSample& sample, std::string_view failed_candidate,
                              std::string_view failed_test, std::string_view error_log) {
  if (error_log.empty()) throw PromptError("debug prompt needs a non-empty error log");
  auto vars = target_vars(sample.target);
  vars["dependency_context"] = render_context(sample, ContextLevel::Full);
  vars["error_solution"] = strip_final_newline(std::string(failed_candidate));
  vars["failed_test_case"] = strip_final_newline(std::string(failed_test));
  vars["error_log"] = strip_final_newline(std::string(error_log));
  return make_spec(ContextLevel::Full, PromptFormat::InstructV2, substitute(templates::debug, vars));
}

std::string_view to_string(TuningStyle style) {
  switch (style) {
    case TuningStyle::Instruct:
      return "instruct";
    case TuningStyle::RawFull:
      return "raw_full";
    case TuningStyle::RawSmall:
      return "raw_small";
  }
  return "?";
}

std::optional<TuningStyle> parse_tuning_style(std::string_view s) {
  for (const auto style : {TuningStyle::Instruct, TuningStyle::RawFull, TuningStyle::RawSmall}) {
    if (to_string(style) == s) return style;
  }
  return std::nullopt;
}

TuningRecord build_tuning_record(const FunctionRecord& target, const std::vector<DependencyRecord>& deps,
                                 TuningStyle style, const std::vector<std::string>& module_imports) {
  BenchmarkSample sample;
  sample.sample_id = target.module_id + ":" + target.qualified_name;
  sample.target = target;
  sample.dependencies = deps;
  sample.module_imports = module_imports;
  sample.dedupe_dependencies();
  TuningRecord rec;
  rec.style = style;
  rec.completion = target.body;
  switch (style) {
    case TuningStyle::Instruct:
      if (!target.docstring) throw PromptError("instruct tuning record needs a docstring: " + target.qualified_name);
      rec.prompt = build_instruct_prompt(sample, ContextLevel::Full, 2).text;
      break;
    case TuningStyle::RawFull:
      rec.prompt = build_base_prompt(sample, ContextLevel::Full).text;
      break;
    case TuningStyle::RawSmall:
      rec.prompt = build_base_prompt(sample, ContextLevel::Small).text;
      break;
  }
  return rec;
}

std::string assemble_candidate(const FunctionRecord& target, std::string_view completion) {
  if (defines(completion, target.name)) return std::string(completion);
  return target_prompt(target) + std::string(completion);
}

}  // namespace depbench
