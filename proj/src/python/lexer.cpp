#include "depbench/python/lexer.hpp"

#include <array>
#include <cctype>

namespace depbench::python {
namespace {

constexpr std::array<std::string_view, 5> kThreeCharOps = {"**=", "//=", ">>=", "<<=", "..."};
constexpr std::array<std::string_view, 19> kTwoCharOps = {
    "->", ":=", "**", "//", ">>", "<<", "<=", ">=", "==", "!=",
    "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "@="};
constexpr std::string_view kOneCharOps = "+-*/%@&|^~<>()[]{},:;.=!";

bool is_name_start(unsigned char c) { return std::isalpha(c) || c == '_' || c >= 0x80; }
bool is_name_char(unsigned char c) { return std::isalnum(c) || c == '_' || c >= 0x80; }

bool is_string_prefix(std::string_view word) {
  if (word.size() > 2) return false;
  std::string lower;
  for (char c : word) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  return lower == "r" || lower == "u" || lower == "b" || lower == "f" || lower == "br" ||
         lower == "rb" || lower == "fr" || lower == "rf";
}

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  TokenStream run() {
    while (true) {
      if (at_line_start_ && depth_ == 0) {
        if (!handle_line_start()) break;
        if (pos_ >= src_.size()) break;
      }
      if (pos_ >= src_.size()) break;
      const unsigned char c = static_cast<unsigned char>(src_[pos_]);
      if (c == ' ' || c == '\t' || c == '\f') {
        ++pos_;
      } else if (c == '\n' || c == '\r') {
        if (depth_ == 0 && line_has_content_) emit_at(TokenKind::Newline, pos_, pos_);
        consume_newline();
        if (depth_ == 0) {
          at_line_start_ = true;
          line_has_content_ = false;
        }
      } else if (c == '#') {
        lex_comment();
      } else if (c == '\\') {
        const std::size_t next = pos_ + 1;
        if (next < src_.size() && (src_[next] == '\n' || src_[next] == '\r')) {
          ++pos_;
          consume_newline();
        } else {
          error_token(pos_, pos_ + 1, "unexpected character after line continuation");
        }
      } else if (c == '"' || c == '\'') {
        lex_string(pos_);
      } else if (std::isdigit(c) || (c == '.' && pos_ + 1 < src_.size() &&
                                     std::isdigit(static_cast<unsigned char>(src_[pos_ + 1])))) {
        lex_number();
      } else if (is_name_start(c)) {
        lex_name_or_prefixed_string();
      } else {
        lex_operator();
      }
    }
    finish();
    return std::move(out_);
  }

 private:
  // Measures indentation of a fresh logical line and emits Indent/Dedent.
  // Returns false at end of input.
  bool handle_line_start() {
    while (true) {
      std::size_t p = pos_;
      int width = 0;
      while (p < src_.size() && (src_[p] == ' ' || src_[p] == '\t' || src_[p] == '\f')) {
        width = src_[p] == '\t' ? (width / 8 + 1) * 8 : (src_[p] == '\f' ? 0 : width + 1);
        ++p;
      }
      if (p >= src_.size()) {
        pos_ = p;
        return false;
      }
      const char c = src_[p];
      if (c == '\n' || c == '\r') {
        pos_ = p;
        consume_newline();
        continue;
      }
      if (c == '#') {
        pos_ = p;
        lex_comment();
        if (pos_ < src_.size()) consume_newline();
        continue;
      }
      pos_ = p;
      at_line_start_ = false;
      if (width > indents_.back()) {
        indents_.push_back(width);
        emit_at(TokenKind::Indent, pos_, pos_);
      } else {
        while (width < indents_.back()) {
          indents_.pop_back();
          emit_at(TokenKind::Dedent, pos_, pos_);
        }
        if (width != indents_.back()) {
          error_token(pos_, pos_, "unindent does not match any outer indentation level");
        }
      }
      return true;
    }
  }

  void consume_newline() {
    if (src_[pos_] == '\r' && pos_ + 1 < src_.size() && src_[pos_ + 1] == '\n') ++pos_;
    ++pos_;
    ++line_;
    line_start_ = pos_;
  }

  void lex_comment() {
    const std::size_t start = pos_;
    while (pos_ < src_.size() && src_[pos_] != '\n' && src_[pos_] != '\r') ++pos_;
    emit_at(TokenKind::Comment, start, pos_, line_, static_cast<int>(start - line_start_));
  }

  void lex_name_or_prefixed_string() {
    const std::size_t start = pos_;
    while (pos_ < src_.size() && is_name_char(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    const std::string_view word = src_.substr(start, pos_ - start);
    if (pos_ < src_.size() && (src_[pos_] == '"' || src_[pos_] == '\'') && is_string_prefix(word)) {
      lex_string(start);
      return;
    }
    emit_content(TokenKind::Name, start, pos_);
  }

  // `start` points at the prefix (if any); pos_ points at the opening quote.
  void lex_string(std::size_t start) {
    const int start_line = line_;
    const int start_col = static_cast<int>(start - line_start_);
    const char quote = src_[pos_];
    const bool triple = pos_ + 2 < src_.size() && src_[pos_ + 1] == quote && src_[pos_ + 2] == quote;
    pos_ += triple ? 3 : 1;
    while (pos_ < src_.size()) {
      const char c = src_[pos_];
      if (c == '\\') {
        ++pos_;
        if (pos_ < src_.size()) {
          if (src_[pos_] == '\n' || src_[pos_] == '\r') {
            consume_newline();
          } else {
            ++pos_;
          }
        }
        continue;
      }
      if (triple) {
        if (c == quote && pos_ + 2 < src_.size() && src_[pos_ + 1] == quote &&
            src_[pos_ + 2] == quote) {
          pos_ += 3;
          emit_at(TokenKind::String, start, pos_, start_line, start_col);
          line_has_content_ = true;
          return;
        }
        if (c == '\n' || c == '\r') {
          consume_newline();
          continue;
        }
        ++pos_;
      } else {
        if (c == quote) {
          ++pos_;
          emit_at(TokenKind::String, start, pos_, start_line, start_col);
          line_has_content_ = true;
          return;
        }
        if (c == '\n' || c == '\r') break;
        ++pos_;
      }
    }
    out_.errors.push_back({make_span(start, pos_, start_line, start_col), "unterminated string literal"});
    emit_at(TokenKind::Error, start, pos_, start_line, start_col);
    line_has_content_ = true;
  }

  void lex_number() {
    const std::size_t start = pos_;
    auto digits = [&](auto pred) {
      while (pos_ < src_.size() && (pred(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) ++pos_;
    };
    const auto is_dec = [](unsigned char c) { return std::isdigit(c) != 0; };
    if (src_[pos_] == '0' && pos_ + 1 < src_.size() &&
        std::string_view("xXoObB").find(src_[pos_ + 1]) != std::string_view::npos) {
      pos_ += 2;
      digits([](unsigned char c) { return std::isxdigit(c) != 0; });
    } else {
      digits(is_dec);
      if (pos_ < src_.size() && src_[pos_] == '.') {
        ++pos_;
        digits(is_dec);
      }
      if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
        std::size_t p = pos_ + 1;
        if (p < src_.size() && (src_[p] == '+' || src_[p] == '-')) ++p;
        if (p < src_.size() && std::isdigit(static_cast<unsigned char>(src_[p]))) {
          pos_ = p;
          digits(is_dec);
        }
      }
      if (pos_ < src_.size() && (src_[pos_] == 'j' || src_[pos_] == 'J')) ++pos_;
    }
    emit_content(TokenKind::Number, start, pos_);
  }

  void lex_operator() {
    const std::string_view rest = src_.substr(pos_);
    std::size_t len = 0;
    for (auto op : kThreeCharOps) {
      if (rest.starts_with(op)) {
        len = 3;
        break;
      }
    }
    if (len == 0) {
      for (auto op : kTwoCharOps) {
        if (rest.starts_with(op)) {
          len = 2;
          break;
        }
      }
    }
    if (len == 0 && kOneCharOps.find(rest.front()) != std::string_view::npos) len = 1;
    if (len == 0) {
      error_token(pos_, pos_ + 1, "invalid character");
      return;
    }
    const char c = rest.front();
    if (len == 1 && (c == '(' || c == '[' || c == '{')) ++depth_;
    if (len == 1 && (c == ')' || c == ']' || c == '}')) {
      if (depth_ == 0) {
        out_.errors.push_back({make_span(pos_, pos_ + 1, line_, col()), "unmatched closing bracket"});
      } else {
        --depth_;
      }
    }
    emit_content(TokenKind::Op, pos_, pos_ + len);
  }

  void error_token(std::size_t begin, std::size_t end, std::string message) {
    out_.errors.push_back({make_span(begin, end, line_, static_cast<int>(begin - line_start_)), std::move(message)});
    emit_at(TokenKind::Error, begin, end);
    pos_ = std::max(pos_, end);
    line_has_content_ = true;
  }

  void emit_content(TokenKind kind, std::size_t begin, std::size_t end) {
    emit_at(kind, begin, end);
    pos_ = end;
    line_has_content_ = true;
  }

  void emit_at(TokenKind kind, std::size_t begin, std::size_t end) {
    emit_at(kind, begin, end, line_, static_cast<int>(begin >= line_start_ ? begin - line_start_ : 0));
  }

  void emit_at(TokenKind kind, std::size_t begin, std::size_t end, int line, int column) {
    Token t;
    t.kind = kind;
    t.text = std::string(src_.substr(begin, end - begin));
    t.span = make_span(begin, end, line, column);
    out_.tokens.push_back(std::move(t));
  }

  Span make_span(std::size_t begin, std::size_t end, int line, int column) const {
    return Span{begin, end, line, column, line_};
  }

  int col() const { return static_cast<int>(pos_ - line_start_); }

  void finish() {
    if (line_has_content_) emit_at(TokenKind::Newline, pos_, pos_);
    if (depth_ > 0) {
      out_.errors.push_back({make_span(pos_, pos_, line_, col()), "unexpected end of input inside brackets"});
      emit_at(TokenKind::Error, pos_, pos_);
      emit_at(TokenKind::Newline, pos_, pos_);
    }
    while (indents_.size() > 1) {
      indents_.pop_back();
      emit_at(TokenKind::Dedent, pos_, pos_);
    }
    emit_at(TokenKind::EndMarker, pos_, pos_);
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  std::size_t line_start_ = 0;
  int line_ = 1;
  int depth_ = 0;
  bool at_line_start_ = true;
  bool line_has_content_ = false;
  std::vector<int> indents_{0};
  TokenStream out_;
};

}  // namespace

TokenStream tokenize(std::string_view source) { return Lexer(source).run(); }

}  // namespace depbench::python
