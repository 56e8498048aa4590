#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "depbench/error.hpp"
#include "depbench/prompts.hpp"
#include "depbench/source.hpp"
#include "samples.hpp"

using namespace depbench;

namespace {

std::string golden(const std::string& name) {
  std::ifstream in(testkit::fixtures() / "golden" / (name + ".txt"));
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Substitute, SinglePassAndUnknownKeys) {
  EXPECT_EQ(substitute("{a}-{b}-{c}", {{"a", "{b}"}, {"b", "2"}}), "{b}-2-{c}");
  EXPECT_EQ(substitute("{}{a", {{"a", "x"}}), "{}{a");
  EXPECT_EQ(substitute("", {}), "");
}

TEST(Prompts, GoldenFiles) {
  const auto& s = testkit::strutil_sample("camel_case_to_snake");
  const std::pair<std::string, PromptSpec> cases[] = {
      {"full.base", build_prompt(s, ContextLevel::Full, PromptFormat::Base)},
      {"medium.base", build_prompt(s, ContextLevel::Medium, PromptFormat::Base)},
      {"small.base", build_prompt(s, ContextLevel::Small, PromptFormat::Base)},
      {"small.instruct_v1", build_prompt(s, ContextLevel::Small, PromptFormat::InstructV1)},
      {"small.instruct_v2", build_prompt(s, ContextLevel::Small, PromptFormat::InstructV2)},
  };
  for (const auto& [name, spec] : cases) {
    EXPECT_EQ(source::normalize_trailing(spec.text),
              source::normalize_trailing(golden("camel_case_to_snake." + name)))
        << name;
    EXPECT_EQ(spec.token_count, count_tokens(spec.text)) << name;
  }
}

TEST(Prompts, ContextOrderAndLevels) {
  const auto& s = testkit::strutil_sample("camel_case_to_snake");
  const auto full = render_context(s, ContextLevel::Full);
  const auto small = render_context(s, ContextLevel::Small);
  EXPECT_LT(full.find("import base64"), full.find("CAMEL_CASE_REPLACE_RE ="));
  EXPECT_LT(full.find("CAMEL_CASE_REPLACE_RE ="), full.find("class InvalidInputError"));
  EXPECT_NE(full.find("super().__init__(msg)"), std::string::npos);
  EXPECT_EQ(small.find("super().__init__(msg)"), std::string::npos);
  EXPECT_EQ(full.back(), '\n');
  EXPECT_EQ(render_context(s, ContextLevel::Full, 0).find("class InvalidInputError"), std::string::npos);
}

TEST(Prompts, TokenOrdering) {
  for (const auto& s : testkit::strutil_samples()) {
    const auto f = build_prompt(s, ContextLevel::Full, PromptFormat::Base).token_count;
    const auto m = build_prompt(s, ContextLevel::Medium, PromptFormat::Base).token_count;
    const auto sm = build_prompt(s, ContextLevel::Small, PromptFormat::Base).token_count;
    EXPECT_LE(sm, m) << s.sample_id;
    EXPECT_LE(m, f) << s.sample_id;
  }
}

TEST(Prompts, BudgetDropsTrailingBlocks) {
  const auto& s = testkit::strutil_sample("snake_case_to_camel");
  const auto unlimited = build_prompt(s, ContextLevel::Full, PromptFormat::Base);
  const auto limited = build_prompt(s, ContextLevel::Full, PromptFormat::Base, {unlimited.token_count - 1});
  EXPECT_LT(limited.token_count, unlimited.token_count);
  EXPECT_NE(limited.text.find(target_prompt(s.target)), std::string::npos);
  const auto tiny = build_prompt(s, ContextLevel::Full, PromptFormat::Base, {1});
  EXPECT_NE(tiny.text.find("def snake_case_to_camel("), std::string::npos);
}

TEST(Prompts, AllNineVariants) {
  const auto all = build_all_prompts(testkit::strutil_sample("reverse"));
  EXPECT_EQ(all.size(), 9u);
  for (const auto& [key, spec] : all) {
    EXPECT_EQ(spec.level, key.first);
    EXPECT_EQ(spec.format, key.second);
  }
}

TEST(Prompts, InstructVariantErrors) {
  const auto& s = testkit::strutil_sample("reverse");
  EXPECT_THROW(build_instruct_prompt(s, ContextLevel::Full, 3), PromptError);
}

TEST(Prompts, DebugPrompt) {
  const auto& s = testkit::strutil_sample("reverse");
  const auto p = build_debug_prompt(s, "def reverse(x):\n    return x\n", "assert reverse('ab') == 'ba'",
                                    "AssertionError");
  EXPECT_NE(p.text.find("assert reverse('ab') == 'ba'"), std::string::npos);
  EXPECT_NE(p.text.find("AssertionError"), std::string::npos);
  EXPECT_NE(p.text.find("class InvalidInputError"), std::string::npos);
  EXPECT_EQ(p.level, ContextLevel::Full);
  EXPECT_THROW(build_debug_prompt(s, "x", "y", ""), PromptError);
}

TEST(Prompts, TuningRecords) {
  const auto& s = testkit::strutil_sample("reverse");
  const auto instruct = build_tuning_record(s.target, s.dependencies, TuningStyle::Instruct, s.module_imports);
  EXPECT_EQ(instruct.completion, s.target.body);
  const auto raw = build_tuning_record(s.target, s.dependencies, TuningStyle::RawSmall, s.module_imports);
  EXPECT_LT(count_tokens(raw.prompt), count_tokens(
                                          build_tuning_record(s.target, s.dependencies, TuningStyle::RawFull,
                                                              s.module_imports).prompt));
  auto bare = s.target;
  bare.docstring.reset();
  EXPECT_THROW(build_tuning_record(bare, s.dependencies, TuningStyle::Instruct), PromptError);
  EXPECT_EQ(parse_tuning_style(to_string(TuningStyle::RawFull)), TuningStyle::RawFull);
}

TEST(Prompts, AssembleCandidate) {
  const auto& t = testkit::strutil_sample("reverse").target;
  const std::string whole = "def reverse(s):\n    return s[::-1]\n";
  EXPECT_EQ(assemble_candidate(t, whole), whole);
  const auto body = assemble_candidate(t, "    return input_string[::-1]\n");
  EXPECT_EQ(body.rfind("def reverse(input_string: str) -> str:", 0), 0u);
  EXPECT_NE(body.find("return input_string[::-1]"), std::string::npos);
  EXPECT_TRUE(parse_module(body).ok());
}
