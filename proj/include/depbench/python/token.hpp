#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace depbench::python {

/// Byte range into a source buffer plus the line/column of its first byte.
/// Lines are 1-based, columns 0-based (in bytes).
struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;
  int line = 0;
  int col = 0;
  int end_line = 0;

  bool empty() const { return begin == end; }
  friend bool operator==(const Span&, const Span&) = default;
};

enum class TokenKind : std::uint8_t {
  Name,
  Number,
  String,
  Op,
  Newline,
  Indent,
  Dedent,
  Comment,
  EndMarker,
  Error,
};

struct Token {
  TokenKind kind = TokenKind::Error;
  std::string text;
  Span span;

  bool is(TokenKind k) const { return kind == k; }
  bool is_op(std::string_view op) const { return kind == TokenKind::Op && text == op; }
  bool is_name(std::string_view name) const { return kind == TokenKind::Name && text == name; }
};

/// Layout tokens carry structure but no lexeme of their own.
inline bool is_layout(TokenKind k) {
  return k == TokenKind::Newline || k == TokenKind::Indent || k == TokenKind::Dedent ||
         k == TokenKind::EndMarker;
}

}  // namespace depbench::python
