#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "depbench/python/lexer.hpp"
#include "depbench/python/syntax_tree.hpp"

namespace depbench::python {

struct ParseError {
  Span span;
  std::string message;
};

/// A parsed source buffer. Owns its text so spans stay valid.
struct ParseResult {
  std::string source;
  std::vector<Token> tokens;  // comments excluded
  std::vector<Token> comments;
  SyntaxTree tree;
  std::vector<ParseError> errors;

  bool ok() const { return errors.empty(); }
  std::string_view text(const Span& s) const {
    return std::string_view(source).substr(s.begin, s.end - s.begin);
  }
  std::string_view text(NodeId id) const { return text(tree[id].span); }
};

/// Parses a whole module. Total: statement-level error recovery produces
/// Error nodes and entries in `errors` instead of throwing.
std::shared_ptr<const ParseResult> parse(std::string source);

}  // namespace depbench::python
