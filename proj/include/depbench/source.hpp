#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "depbench/python/parser.hpp"
#include "depbench/types.hpp"

namespace depbench {

struct ParsedModule {
  std::string module_id;
  std::shared_ptr<const python::ParseResult> syntax_tree;
  std::vector<python::ParseError> parse_errors;

  bool ok() const { return parse_errors.empty(); }
  const python::ParseResult& tree() const { return *syntax_tree; }
};

/// Total: syntax errors are reported in `parse_errors`, never thrown.
ParsedModule parse_module(std::string source_text, std::string module_id = {});

enum class SkipReason { NoDocstring, EntryPoint, NoVerifiableOutput };
std::string_view to_string(SkipReason reason);

struct SkippedFunction {
  std::string qualified_name;
  SkipReason reason;
  int line = 0;
};

struct ExtractedFunctions {
  std::vector<FunctionRecord> functions;
  std::vector<SkippedFunction> skipped;
};

/// Top-level functions and methods of top-level classes, filtered to those
/// with a docstring, a value-returning `return`, and not an entry point.
ExtractedFunctions extract_functions(const ParsedModule& module);

struct IdentifierSet {
  std::set<std::string> names;

  bool contains(std::string_view name) const { return names.find(std::string(name)) != names.end(); }
  std::size_t size() const { return names.size(); }
};

/// Names, attribute members, definition and parameter names, keyword-argument
/// names and names inside f-string replacement fields. Falls back to a token
/// scan when `code` does not parse.
IdentifierSet collect_identifiers(std::string_view code);

/// Lexical tokens excluding layout (NEWLINE/INDENT/DEDENT/ENDMARKER) and comments.
std::size_t count_tokens(std::string_view text);

/// True iff the first function in `function_text` has a body made only of a
/// docstring, `pass`, `...`, bare `return` or `return None`. Unparseable
/// input is reported as non-empty.
bool detect_empty_body(std::string_view function_text);

namespace source {

/// Byte layout of a FunctionDef/ClassDef node within its buffer.
struct DefinitionLayout {
  std::size_t start = 0;       // beginning of the line holding the first decorator (or the keyword)
  std::size_t head = 0;        // `def` / `async` / `class`
  std::size_t header_end = 0;  // one past the header's ':'
  std::size_t end = 0;         // end of the last body token
  int column = 0;              // column of the first decorator or keyword
  python::NodeId docstring = python::kNoNode;
  python::NodeId body = python::kNoNode;
};

DefinitionLayout layout_of(const python::ParseResult& tree, python::NodeId def);

/// The docstring Constant of a Block, if its first statement is a string literal.
python::NodeId docstring_of(const python::ParseResult& tree, python::NodeId block);

std::size_t line_start(std::string_view text, std::size_t offset);

/// Expressions of the replacement fields of every f-string in `literal`,
/// including fields nested in format specs.
std::vector<std::string> fstring_expressions(std::string_view literal);

/// Removes the longest common leading whitespace of non-blank lines.
std::string dedent(std::string_view text);
/// Prefixes every non-blank line with `prefix`.
std::string indent(std::string_view text, std::string_view prefix);
/// Strips trailing whitespace on each line and trailing blank lines; keeps a final newline.
std::string normalize_trailing(std::string_view text);

/// Decorator and header lines: from `layout.start` through the ':'.
std::string header_text(const python::ParseResult& tree, const DefinitionLayout& layout);
/// Docstring rendered as its own lines at body indentation, original text.
std::string docstring_block(const python::ParseResult& tree, const DefinitionLayout& layout);

/// Outline of a single class or function definition. Functions render as
/// header (+ docstring); classes as header (+ class docstring), then each
/// method as a blank line followed by its header (+ docstring).
/// Other statement kinds are returned unchanged.
std::string outline(std::string_view definition_text, bool with_docstrings);

/// Pieces of one definition re-derived from its text.
struct DefinitionParts {
  DefinitionKind kind = DefinitionKind::Variable;
  std::string name;
  std::string signature;  // header without decorators, or first line of a variable statement
  std::optional<std::string> docstring;
};
std::optional<DefinitionParts> definition_parts(std::string_view definition_text);

/// Header and docstring of a function at its own indentation removed,
/// e.g. the text a completion model is asked to continue.
std::string function_prompt(std::string_view function_source);
/// `name(params) -> ret` without the `def` and the trailing colon.
std::string bare_signature(std::string_view signature);
/// The docstring literal with its body indentation removed.
std::string dedented_docstring(std::string_view function_source);

}  // namespace source
}  // namespace depbench
