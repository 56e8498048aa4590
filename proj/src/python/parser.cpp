#include "depbench/python/parser.hpp"

#include <algorithm>
#include <cctype>

#include "depbench/python/names.hpp"

namespace depbench::python {
namespace {

struct Failure {
  Span span;
  std::string message;
};

constexpr std::string_view kAugOps[] = {"+=", "-=", "*=", "/=", "//=", "%=", "@=",
                                        "&=", "|=", "^=", ">>=", "<<=", "**="};

class Parser {
 public:
  explicit Parser(ParseResult& result) : r_(result), t_(result.tokens) {}

  void run() {
    Node module;
    module.kind = NodeKind::Module;
    module.span = Span{0, r_.source.size(), 1, 0, t_.back().span.end_line};
    const NodeId root = r_.tree.add(std::move(module));
    r_.tree.set_root(root);
    std::vector<NodeId> stmts;
    while (!peek().is(TokenKind::EndMarker)) {
      if (peek().is(TokenKind::Dedent) || peek().is(TokenKind::Newline)) {
        advance();
        continue;
      }
      statement_with_recovery(stmts);
    }
    r_.tree[root].children = std::move(stmts);
  }

 private:
  // ---- token helpers -------------------------------------------------------

  const Token& peek(std::size_t k = 0) const { return t_[std::min(i_ + k, t_.size() - 1)]; }

  const Token& advance() {
    const Token& tk = t_[i_];
    if (i_ + 1 < t_.size()) ++i_;
    if (!is_layout(tk.kind)) {
      prev_end_ = tk.span.end;
      prev_line_ = tk.span.end_line;
    }
    return tk;
  }

  bool at_op(std::string_view op, std::size_t k = 0) const { return peek(k).is_op(op); }
  bool at_kw(std::string_view kw, std::size_t k = 0) const { return peek(k).is_name(kw); }

  bool accept_op(std::string_view op) {
    if (!at_op(op)) return false;
    advance();
    return true;
  }
  bool accept_kw(std::string_view kw) {
    if (!at_kw(kw)) return false;
    advance();
    return true;
  }

  [[noreturn]] void fail(std::string message) const {
    const Token& tk = peek();
    if (tk.is(TokenKind::Error)) message = "invalid token";
    throw Failure{tk.span, std::move(message)};
  }

  void expect_op(std::string_view op) {
    if (!accept_op(op)) fail("expected '" + std::string(op) + "'");
  }
  void expect_kw(std::string_view kw) {
    if (!accept_kw(kw)) fail("expected '" + std::string(kw) + "'");
  }
  void expect_newline() {
    if (peek().is(TokenKind::Newline)) {
      advance();
      return;
    }
    if (peek().is(TokenKind::EndMarker)) return;
    fail("expected end of statement");
  }

  std::string expect_name() {
    const Token& tk = peek();
    if (!tk.is(TokenKind::Name) || is_keyword(tk.text)) fail("expected identifier");
    return advance().text;
  }

  // ---- node helpers --------------------------------------------------------

  NodeId open(NodeKind kind) { return open_at(kind, peek().span); }

  NodeId open_at(NodeKind kind, const Span& start) {
    Node n;
    n.kind = kind;
    n.span = Span{start.begin, start.begin, start.line, start.col, start.line};
    return r_.tree.add(std::move(n));
  }

  NodeId open_from(NodeKind kind, NodeId first_child) {
    const NodeId id = open_at(kind, r_.tree[first_child].span);
    r_.tree[id].children.push_back(first_child);
    return id;
  }

  NodeId close(NodeId id) {
    Node& n = r_.tree[id];
    n.span.end = std::max(prev_end_, n.span.begin);
    n.span.end_line = std::max(prev_line_, n.span.line);
    return id;
  }

  void add_child(NodeId parent, NodeId child) { r_.tree[parent].children.push_back(child); }
  Node& node(NodeId id) { return r_.tree[id]; }

  // ---- statements ----------------------------------------------------------

  void statement_with_recovery(std::vector<NodeId>& out) {
    const std::size_t start = i_;
    const Span start_span = peek().span;
    try {
      statement(out);
    } catch (const Failure& f) {
      r_.errors.push_back({f.span, f.message});
      skip_statement();
      if (i_ == start && !peek().is(TokenKind::EndMarker)) advance();
      const NodeId err = open_at(NodeKind::Error, start_span);
      node(err).value = f.message;
      out.push_back(close(err));
    }
  }

  void skip_block() {
    int depth = 0;
    while (!peek().is(TokenKind::EndMarker)) {
      const Token& tk = advance();
      if (tk.is(TokenKind::Indent)) ++depth;
      if (tk.is(TokenKind::Dedent) && --depth <= 0) return;
    }
  }

  void skip_statement() {
    if (peek().is(TokenKind::Indent)) {
      skip_block();
      return;
    }
    while (!peek().is(TokenKind::Newline) && !peek().is(TokenKind::EndMarker) &&
           !peek().is(TokenKind::Dedent)) {
      if (peek().is(TokenKind::Indent)) {
        skip_block();
        return;
      }
      advance();
    }
    if (peek().is(TokenKind::Newline)) {
      advance();
      if (peek().is(TokenKind::Indent)) skip_block();
    }
  }

  void statement(std::vector<NodeId>& out) {
    const Token& tk = peek();
    if (tk.is(TokenKind::Indent)) fail("unexpected indent");
    if (tk.is_op("@")) {
      out.push_back(decorated());
      return;
    }
    if (tk.is(TokenKind::Name)) {
      const std::string& w = tk.text;
      if (w == "def") return out.push_back(funcdef(open(NodeKind::FunctionDef), kNoNode, false));
      if (w == "class") return out.push_back(classdef(open(NodeKind::ClassDef), kNoNode));
      if (w == "if") return out.push_back(if_stmt());
      if (w == "while") return out.push_back(while_stmt());
      if (w == "for") return out.push_back(for_stmt(open(NodeKind::For), false));
      if (w == "try") return out.push_back(try_stmt());
      if (w == "with") return out.push_back(with_stmt(open(NodeKind::With), false));
      if (w == "async") {
        if (at_kw("def", 1)) {
          const NodeId id = open(NodeKind::FunctionDef);
          advance();
          return out.push_back(funcdef(id, kNoNode, true));
        }
        if (at_kw("for", 1)) {
          const NodeId id = open(NodeKind::For);
          advance();
          return out.push_back(for_stmt(id, true));
        }
        if (at_kw("with", 1)) {
          const NodeId id = open(NodeKind::With);
          advance();
          return out.push_back(with_stmt(id, true));
        }
      }
    }
    simple_statements(out);
  }

  void simple_statements(std::vector<NodeId>& out) {
    while (true) {
      out.push_back(small_statement());
      if (accept_op(";")) {
        if (peek().is(TokenKind::Newline) || peek().is(TokenKind::EndMarker)) break;
        continue;
      }
      break;
    }
    expect_newline();
  }

  NodeId block() {
    const NodeId id = open(NodeKind::Block);
    std::vector<NodeId> stmts;
    if (peek().is(TokenKind::Newline)) {
      advance();
      if (!peek().is(TokenKind::Indent)) fail("expected an indented block");
      advance();
      while (!peek().is(TokenKind::Dedent) && !peek().is(TokenKind::EndMarker)) {
        if (peek().is(TokenKind::Newline)) {
          advance();
          continue;
        }
        statement_with_recovery(stmts);
      }
      node(id).children = std::move(stmts);
      close(id);
      if (peek().is(TokenKind::Dedent)) advance();
      if (!node(id).children.empty()) {
        // Block span covers its statements, not the trailing dedent.
        const Span& last = node(node(id).children.back()).span;
        node(id).span.end = last.end;
        node(id).span.end_line = last.end_line;
        const Span& first = node(node(id).children.front()).span;
        node(id).span.begin = first.begin;
        node(id).span.line = first.line;
        node(id).span.col = first.col;
      }
      return id;
    }
    simple_statements(stmts);
    node(id).children = std::move(stmts);
    return close(id);
  }

  NodeId decorated() {
    const NodeId decorators = open(NodeKind::Decorators);
    const Span start = peek().span;
    while (accept_op("@")) {
      add_child(decorators, named_expr());
      expect_newline();
    }
    close(decorators);
    if (at_kw("def")) return funcdef(open_at(NodeKind::FunctionDef, start), decorators, false);
    if (at_kw("class")) return classdef(open_at(NodeKind::ClassDef, start), decorators);
    if (at_kw("async") && at_kw("def", 1)) {
      advance();
      return funcdef(open_at(NodeKind::FunctionDef, start), decorators, true);
    }
    fail("expected function or class after decorator");
  }

  NodeId empty_decorators() {
    const NodeId d = open(NodeKind::Decorators);
    return d;
  }

  NodeId funcdef(NodeId id, NodeId decorators, bool is_async) {
    if (decorators == kNoNode) decorators = empty_decorators();
    node(id).head = is_async ? t_[i_ - 1].span.begin : peek().span.begin;
    expect_kw("def");
    node(id).is_async = is_async;
    node(id).value = expect_name();
    expect_op("(");
    const NodeId params = parameters(")", true);
    expect_op(")");
    NodeId returns = kNoNode;
    if (accept_op("->")) returns = test();
    expect_op(":");
    node(id).aux = prev_end_;
    const NodeId body = block();
    node(id).children = {decorators, params, returns, body};
    return close(id);
  }

  NodeId classdef(NodeId id, NodeId decorators) {
    if (decorators == kNoNode) decorators = empty_decorators();
    node(id).head = peek().span.begin;
    expect_kw("class");
    node(id).value = expect_name();
    NodeId bases = kNoNode;
    if (at_op("(")) {
      bases = open(NodeKind::Call);
      advance();
      arguments(bases);
      expect_op(")");
      close(bases);
    }
    expect_op(":");
    node(id).aux = prev_end_;
    const NodeId body = block();
    node(id).children = {decorators, bases, body};
    return close(id);
  }

  NodeId parameters(std::string_view closer, bool annotations) {
    const NodeId params = open(NodeKind::Parameters);
    while (!at_op(closer)) {
      const NodeId p = open(NodeKind::Param);
      NodeId annotation = kNoNode;
      NodeId def = kNoNode;
      if (accept_op("/")) {
        node(p).flag = static_cast<std::uint8_t>(ParamKind::Slash);
      } else if (accept_op("*")) {
        if (peek().is(TokenKind::Name)) {
          node(p).flag = static_cast<std::uint8_t>(ParamKind::VarArgs);
          node(p).value = expect_name();
          if (annotations && accept_op(":")) annotation = test();
        } else {
          node(p).flag = static_cast<std::uint8_t>(ParamKind::BareStar);
        }
      } else if (accept_op("**")) {
        node(p).flag = static_cast<std::uint8_t>(ParamKind::KwArgs);
        node(p).value = expect_name();
        if (annotations && accept_op(":")) annotation = test();
      } else {
        node(p).value = expect_name();
        if (annotations && accept_op(":")) annotation = test();
        if (accept_op("=")) def = test();
      }
      node(p).children = {annotation, def};
      add_child(params, close(p));
      if (!accept_op(",")) break;
    }
    return close(params);
  }

  NodeId if_stmt() {
    const NodeId id = open(NodeKind::If);
    advance();  // 'if' or 'elif'
    const NodeId cond = named_expr();
    expect_op(":");
    const NodeId body = block();
    NodeId orelse = kNoNode;
    if (at_kw("elif")) {
      orelse = if_stmt();
    } else if (accept_kw("else")) {
      expect_op(":");
      orelse = block();
    }
    node(id).children = {cond, body, orelse};
    return close(id);
  }

  NodeId while_stmt() {
    const NodeId id = open(NodeKind::While);
    advance();
    const NodeId cond = named_expr();
    expect_op(":");
    const NodeId body = block();
    NodeId orelse = kNoNode;
    if (accept_kw("else")) {
      expect_op(":");
      orelse = block();
    }
    node(id).children = {cond, body, orelse};
    return close(id);
  }

  NodeId for_stmt(NodeId id, bool is_async) {
    expect_kw("for");
    node(id).is_async = is_async;
    const NodeId target = target_list();
    expect_kw("in");
    const NodeId iter = testlist_star_expr();
    expect_op(":");
    const NodeId body = block();
    NodeId orelse = kNoNode;
    if (accept_kw("else")) {
      expect_op(":");
      orelse = block();
    }
    node(id).children = {target, iter, body, orelse};
    return close(id);
  }

  NodeId try_stmt() {
    const NodeId id = open(NodeKind::Try);
    advance();
    expect_op(":");
    std::vector<NodeId> children{block()};
    std::size_t handlers = 0;
    while (at_kw("except")) {
      const NodeId h = open(NodeKind::ExceptHandler);
      advance();
      accept_op("*");
      NodeId type = kNoNode;
      if (!at_op(":")) {
        type = test();
        if (accept_op(",")) {
          const NodeId tup = open_from(NodeKind::Tuple, type);
          do {
            add_child(tup, test());
          } while (accept_op(","));
          type = close(tup);
        }
        if (accept_kw("as")) node(h).value = expect_name();
      }
      expect_op(":");
      const NodeId body = block();
      node(h).children = {type, body};
      children.push_back(close(h));
      ++handlers;
    }
    NodeId orelse = kNoNode;
    NodeId finally = kNoNode;
    if (accept_kw("else")) {
      expect_op(":");
      orelse = block();
    }
    if (accept_kw("finally")) {
      expect_op(":");
      finally = block();
    }
    if (handlers == 0 && finally == kNoNode) fail("expected 'except' or 'finally' block");
    children.push_back(orelse);
    children.push_back(finally);
    node(id).aux = handlers;
    node(id).children = std::move(children);
    return close(id);
  }

  NodeId with_stmt(NodeId id, bool is_async) {
    expect_kw("with");
    node(id).is_async = is_async;
    std::vector<NodeId> items;
    bool parsed = false;
    if (at_op("(")) {
      // Parenthesized item list; fall back to a plain expression on failure.
      const std::size_t save = i_;
      const std::size_t save_end = prev_end_;
      const int save_line = prev_line_;
      try {
        advance();
        while (!at_op(")")) {
          items.push_back(with_item());
          if (!accept_op(",")) break;
        }
        expect_op(")");
        if (!at_op(":")) fail("expected ':'");
        parsed = true;
      } catch (const Failure&) {
        i_ = save;
        prev_end_ = save_end;
        prev_line_ = save_line;
        items.clear();
      }
    }
    if (!parsed) {
      do {
        items.push_back(with_item());
      } while (accept_op(","));
    }
    expect_op(":");
    items.push_back(block());
    node(id).children = std::move(items);
    return close(id);
  }

  NodeId with_item() {
    const NodeId expr = test();
    const NodeId item = open_from(NodeKind::WithItem, expr);
    NodeId target = kNoNode;
    if (accept_kw("as")) target = this->expr();
    add_child(item, target);
    return close(item);
  }

  NodeId small_statement() {
    const Token& tk = peek();
    if (tk.is(TokenKind::Name)) {
      const std::string w = tk.text;
      if (w == "pass" || w == "break" || w == "continue") {
        const NodeId id = open(w == "pass" ? NodeKind::Pass : w == "break" ? NodeKind::Break : NodeKind::Continue);
        advance();
        return close(id);
      }
      if (w == "return") {
        const NodeId id = open(NodeKind::Return);
        advance();
        add_child(id, at_statement_end() ? kNoNode : testlist_star_expr());
        return close(id);
      }
      if (w == "raise") {
        const NodeId id = open(NodeKind::Raise);
        advance();
        NodeId exc = kNoNode;
        NodeId cause = kNoNode;
        if (!at_statement_end()) {
          exc = test();
          if (accept_kw("from")) cause = test();
        }
        node(id).children = {exc, cause};
        return close(id);
      }
      if (w == "global" || w == "nonlocal") {
        const NodeId id = open(w == "global" ? NodeKind::Global : NodeKind::Nonlocal);
        advance();
        do {
          const NodeId name = open(NodeKind::Name);
          node(name).value = expect_name();
          add_child(id, close(name));
        } while (accept_op(","));
        return close(id);
      }
      if (w == "del") {
        const NodeId id = open(NodeKind::Delete);
        advance();
        do {
          if (at_statement_end()) break;
          add_child(id, expr());
        } while (accept_op(","));
        return close(id);
      }
      if (w == "assert") {
        const NodeId id = open(NodeKind::Assert);
        advance();
        const NodeId cond = test();
        NodeId msg = kNoNode;
        if (accept_op(",")) msg = test();
        node(id).children = {cond, msg};
        return close(id);
      }
      if (w == "import") return import_name();
      if (w == "from") return import_from();
    }
    return expression_statement();
  }

  bool at_statement_end() const {
    return peek().is(TokenKind::Newline) || peek().is(TokenKind::EndMarker) || at_op(";");
  }

  std::string dotted_name() {
    std::string name = expect_name();
    while (accept_op(".")) name += "." + expect_name();
    return name;
  }

  NodeId import_name() {
    const NodeId id = open(NodeKind::Import);
    advance();
    do {
      const NodeId alias = open(NodeKind::Alias);
      node(alias).value = dotted_name();
      if (accept_kw("as")) node(alias).alias = expect_name();
      add_child(id, close(alias));
    } while (accept_op(","));
    return close(id);
  }

  NodeId import_from() {
    const NodeId id = open(NodeKind::ImportFrom);
    advance();
    std::size_t level = 0;
    while (true) {
      if (accept_op(".")) {
        ++level;
      } else if (accept_op("...")) {
        level += 3;
      } else {
        break;
      }
    }
    if (!at_kw("import")) node(id).value = dotted_name();
    if (level == 0 && node(id).value.empty()) fail("expected module name");
    node(id).aux = level;
    expect_kw("import");
    if (at_op("*")) {
      const NodeId alias = open(NodeKind::Alias);
      advance();
      node(alias).value = "*";
      add_child(id, close(alias));
      return close(id);
    }
    const bool paren = accept_op("(");
    while (true) {
      if (paren && at_op(")")) break;
      const NodeId alias = open(NodeKind::Alias);
      node(alias).value = expect_name();
      if (accept_kw("as")) node(alias).alias = expect_name();
      add_child(id, close(alias));
      if (!accept_op(",")) break;
      if (!paren && at_statement_end()) fail("trailing comma not allowed without parentheses");
    }
    if (paren) expect_op(")");
    if (node(id).children.empty()) fail("expected import names");
    return close(id);
  }

  NodeId expression_statement() {
    NodeId first = at_kw("yield") ? yield_expr() : testlist_star_expr();
    if (at_op(":")) {
      advance();
      const NodeId id = open_from(NodeKind::AnnAssign, first);
      add_child(id, test());
      NodeId value = kNoNode;
      if (accept_op("=")) value = at_kw("yield") ? yield_expr() : testlist_star_expr();
      add_child(id, value);
      return close(id);
    }
    for (auto op : kAugOps) {
      if (at_op(op)) {
        advance();
        const NodeId id = open_from(NodeKind::AugAssign, first);
        node(id).value = std::string(op);
        add_child(id, at_kw("yield") ? yield_expr() : testlist_star_expr());
        return close(id);
      }
    }
    if (at_op("=")) {
      const NodeId id = open_from(NodeKind::Assign, first);
      while (accept_op("=")) add_child(id, at_kw("yield") ? yield_expr() : testlist_star_expr());
      return close(id);
    }
    const NodeId id = open_from(NodeKind::ExprStmt, first);
    return close(id);
  }

  // ---- expressions ---------------------------------------------------------

  bool starts_expression() const {
    const Token& tk = peek();
    switch (tk.kind) {
      case TokenKind::Number:
      case TokenKind::String:
        return true;
      case TokenKind::Name:
        return !is_keyword(tk.text) || tk.text == "not" || tk.text == "lambda" ||
               tk.text == "await" || tk.text == "None" || tk.text == "True" || tk.text == "False" ||
               tk.text == "yield";
      case TokenKind::Op:
        return tk.text == "(" || tk.text == "[" || tk.text == "{" || tk.text == "-" ||
               tk.text == "+" || tk.text == "~" || tk.text == "*" || tk.text == "..." ||
               tk.text == "**";
      default:
        return false;
    }
  }

  NodeId star_or_named() {
    if (at_op("*")) {
      const NodeId id = open(NodeKind::Starred);
      advance();
      add_child(id, expr());
      return close(id);
    }
    return named_expr();
  }

  NodeId testlist_star_expr() {
    const NodeId first = star_or_named();
    if (!at_op(",")) return first;
    const NodeId tup = open_from(NodeKind::Tuple, first);
    while (accept_op(",")) {
      if (!starts_expression() || at_op("**")) break;
      add_child(tup, star_or_named());
    }
    return close(tup);
  }

  // Targets of `for` and comprehension clauses: `in` must not be consumed.
  NodeId target_list() {
    auto one = [&]() -> NodeId {
      if (at_op("*")) {
        const NodeId id = open(NodeKind::Starred);
        advance();
        add_child(id, expr());
        return close(id);
      }
      return expr();
    };
    const NodeId first = one();
    if (!at_op(",")) return first;
    const NodeId tup = open_from(NodeKind::Tuple, first);
    while (accept_op(",")) {
      if (at_kw("in") || !starts_expression()) break;
      add_child(tup, one());
    }
    return close(tup);
  }

  NodeId named_expr() {
    if (peek().is(TokenKind::Name) && !is_keyword(peek().text) && at_op(":=", 1)) {
      const NodeId id = open(NodeKind::NamedExpr);
      const NodeId name = open(NodeKind::Name);
      node(name).value = advance().text;
      close(name);
      advance();
      const NodeId value = test();
      node(id).children = {name, value};
      return close(id);
    }
    return test();
  }

  NodeId test() {
    if (at_kw("lambda")) return lambdef();
    const NodeId cond_body = or_test();
    if (at_kw("if")) {
      // Not inside a comprehension clause here; comprehension `if` is parsed by the caller.
      const std::size_t save = i_;
      advance();
      const NodeId cond = or_test();
      if (!accept_kw("else")) {
        i_ = save;
        fail("expected 'else' in conditional expression");
      }
      const NodeId orelse = test();
      const NodeId id = open_from(NodeKind::IfExp, cond_body);
      add_child(id, cond);
      add_child(id, orelse);
      return close(id);
    }
    return cond_body;
  }

  NodeId lambdef() {
    const NodeId id = open(NodeKind::Lambda);
    advance();
    const NodeId params = parameters(":", false);
    expect_op(":");
    const NodeId body = test();
    node(id).children = {params, body};
    return close(id);
  }

  NodeId or_test() { return bool_chain("or", [&] { return and_test(); }); }
  NodeId and_test() { return bool_chain("and", [&] { return not_test(); }); }

  template <typename F>
  NodeId bool_chain(std::string_view op, F next) {
    const NodeId first = next();
    if (!at_kw(op)) return first;
    const NodeId id = open_from(NodeKind::BoolOp, first);
    node(id).value = std::string(op);
    while (accept_kw(op)) add_child(id, next());
    return close(id);
  }

  NodeId not_test() {
    if (at_kw("not")) {
      const NodeId id = open(NodeKind::UnaryOp);
      advance();
      node(id).value = "not";
      add_child(id, not_test());
      return close(id);
    }
    return comparison();
  }

  bool comparison_op(std::string& op) {
    static constexpr std::string_view kOps[] = {"<", ">", "==", ">=", "<=", "!="};
    for (auto o : kOps) {
      if (at_op(o)) {
        advance();
        op = std::string(o);
        return true;
      }
    }
    if (at_kw("in")) {
      advance();
      op = "in";
      return true;
    }
    if (at_kw("not") && at_kw("in", 1)) {
      advance();
      advance();
      op = "not in";
      return true;
    }
    if (at_kw("is")) {
      advance();
      op = accept_kw("not") ? "is not" : "is";
      return true;
    }
    return false;
  }

  NodeId comparison() {
    const NodeId first = expr();
    std::string op;
    if (!comparison_op(op)) return first;
    const NodeId id = open_from(NodeKind::Compare, first);
    std::string ops = op;
    add_child(id, expr());
    while (comparison_op(op)) {
      ops += " " + op;
      add_child(id, expr());
    }
    node(id).value = ops;
    return close(id);
  }

  // Binary operator precedence levels, loosest first.
  NodeId expr() { return binary(0); }

  NodeId binary(int level) {
    static const std::vector<std::vector<std::string_view>> kLevels = {
        {"|"}, {"^"}, {"&"}, {"<<", ">>"}, {"+", "-"}, {"*", "/", "//", "%", "@"}};
    if (level >= static_cast<int>(kLevels.size())) return factor();
    NodeId left = binary(level + 1);
    while (true) {
      const auto& ops = kLevels[static_cast<std::size_t>(level)];
      const auto it = std::find_if(ops.begin(), ops.end(), [&](std::string_view o) { return at_op(o); });
      if (it == ops.end()) return left;
      advance();
      const NodeId id = open_from(NodeKind::BinOp, left);
      node(id).value = std::string(*it);
      add_child(id, binary(level + 1));
      left = close(id);
    }
  }

  NodeId factor() {
    if (at_op("-") || at_op("+") || at_op("~")) {
      const NodeId id = open(NodeKind::UnaryOp);
      node(id).value = advance().text;
      add_child(id, factor());
      return close(id);
    }
    return power();
  }

  NodeId power() {
    NodeId base;
    if (at_kw("await")) {
      const NodeId id = open(NodeKind::Await);
      advance();
      add_child(id, primary());
      base = close(id);
    } else {
      base = primary();
    }
    if (at_op("**")) {
      advance();
      const NodeId id = open_from(NodeKind::BinOp, base);
      node(id).value = "**";
      add_child(id, factor());
      return close(id);
    }
    return base;
  }

  NodeId primary() {
    NodeId cur = atom();
    while (true) {
      if (at_op("(")) {
        const NodeId call = open_from(NodeKind::Call, cur);
        advance();
        arguments(call);
        expect_op(")");
        cur = close(call);
      } else if (at_op("[")) {
        const NodeId sub = open_from(NodeKind::Subscript, cur);
        advance();
        add_child(sub, subscript_list());
        expect_op("]");
        cur = close(sub);
      } else if (at_op(".")) {
        advance();
        const NodeId attr = open_from(NodeKind::Attribute, cur);
        node(attr).value = expect_name();
        cur = close(attr);
      } else {
        return cur;
      }
    }
  }

  void arguments(NodeId call) {
    std::size_t count = 0;
    while (!at_op(")")) {
      NodeId arg;
      if (at_op("*")) {
        arg = open(NodeKind::Starred);
        advance();
        add_child(arg, test());
        close(arg);
      } else if (at_op("**")) {
        arg = open(NodeKind::DoubleStarred);
        advance();
        add_child(arg, test());
        close(arg);
      } else if (peek().is(TokenKind::Name) && !is_keyword(peek().text) && at_op("=", 1)) {
        arg = open(NodeKind::Keyword);
        node(arg).value = advance().text;
        advance();
        add_child(arg, test());
        close(arg);
      } else {
        arg = named_expr();
        if (at_kw("for") || (at_kw("async") && at_kw("for", 1))) {
          const NodeId gen = open_from(NodeKind::GeneratorExp, arg);
          comprehensions(gen);
          arg = close(gen);
        }
      }
      add_child(call, arg);
      ++count;
      if (!accept_op(",")) break;
    }
    (void)count;
  }

  NodeId subscript_list() {
    const NodeId first = subscript();
    if (!at_op(",")) return first;
    const NodeId tup = open_from(NodeKind::Tuple, first);
    while (accept_op(",")) {
      if (at_op("]")) break;
      add_child(tup, subscript());
    }
    return close(tup);
  }

  NodeId subscript() {
    NodeId lower = kNoNode;
    const Span start = peek().span;
    if (!at_op(":")) {
      lower = at_op("*") ? star_or_named() : named_expr();
      if (!at_op(":")) return lower;
    }
    const NodeId slice = open_at(NodeKind::Slice, lower == kNoNode ? start : node(lower).span);
    expect_op(":");
    NodeId upper = kNoNode;
    NodeId step = kNoNode;
    if (!at_op("]") && !at_op(",") && !at_op(":")) upper = test();
    if (accept_op(":")) {
      if (!at_op("]") && !at_op(",")) step = test();
    }
    node(slice).children = {lower, upper, step};
    return close(slice);
  }

  void comprehensions(NodeId owner) {
    while (at_kw("for") || (at_kw("async") && at_kw("for", 1))) {
      const NodeId comp = open(NodeKind::Comprehension);
      if (accept_kw("async")) node(comp).is_async = true;
      expect_kw("for");
      add_child(comp, target_list());
      expect_kw("in");
      add_child(comp, or_test());
      while (accept_kw("if")) add_child(comp, or_test_nocond());
      add_child(owner, close(comp));
    }
  }

  NodeId or_test_nocond() {
    if (at_kw("lambda")) return lambdef();
    return or_test();
  }

  NodeId yield_expr() {
    const NodeId id = open(NodeKind::Yield);
    advance();
    if (accept_kw("from")) {
      node(id).kind = NodeKind::YieldFrom;
      add_child(id, test());
      return close(id);
    }
    const bool end = at_statement_end() || at_op(")") || at_op("]") || at_op("}") || at_op("=");
    add_child(id, end ? kNoNode : testlist_star_expr());
    return close(id);
  }

  NodeId atom() {
    const Token& tk = peek();
    switch (tk.kind) {
      case TokenKind::Number: {
        const NodeId id = open(NodeKind::Constant);
        node(id).flag = static_cast<std::uint8_t>(ConstantKind::Number);
        node(id).value = advance().text;
        return close(id);
      }
      case TokenKind::String:
        return strings();
      case TokenKind::Name: {
        if (tk.text == "None" || tk.text == "True" || tk.text == "False") {
          const NodeId id = open(NodeKind::Constant);
          node(id).flag = static_cast<std::uint8_t>(
              tk.text == "None" ? ConstantKind::None : tk.text == "True" ? ConstantKind::True : ConstantKind::False);
          node(id).value = advance().text;
          return close(id);
        }
        if (is_keyword(tk.text)) fail("invalid syntax");
        const NodeId id = open(NodeKind::Name);
        node(id).value = advance().text;
        return close(id);
      }
      case TokenKind::Op:
        if (tk.text == "(") return paren_atom();
        if (tk.text == "[") return list_atom();
        if (tk.text == "{") return brace_atom();
        if (tk.text == "...") {
          const NodeId id = open(NodeKind::Constant);
          node(id).flag = static_cast<std::uint8_t>(ConstantKind::Ellipsis);
          node(id).value = advance().text;
          return close(id);
        }
        break;
      default:
        break;
    }
    fail("invalid syntax");
  }

  NodeId strings() {
    const NodeId id = open(NodeKind::Constant);
    ConstantKind kind = ConstantKind::String;
    std::string text;
    while (peek().is(TokenKind::String)) {
      const Token& s = advance();
      const auto quote = s.text.find_first_of("'\"");
      for (std::size_t k = 0; k < quote; ++k) {
        const char c = static_cast<char>(std::tolower(static_cast<unsigned char>(s.text[k])));
        if (c == 'f') kind = ConstantKind::FString;
        if (c == 'b' && kind != ConstantKind::FString) kind = ConstantKind::Bytes;
      }
    }
    node(id).flag = static_cast<std::uint8_t>(kind);
    close(id);
    node(id).value = std::string(r_.text(node(id).span));
    return id;
  }

  NodeId paren_atom() {
    const Span start = peek().span;
    advance();
    if (at_op(")")) {
      const NodeId tup = open_at(NodeKind::Tuple, start);
      advance();
      return close(tup);
    }
    if (at_kw("yield")) {
      const NodeId y = yield_expr();
      expect_op(")");
      return y;
    }
    const NodeId first = star_or_named();
    if (at_kw("for") || (at_kw("async") && at_kw("for", 1))) {
      const NodeId gen = open_at(NodeKind::GeneratorExp, start);
      add_child(gen, first);
      comprehensions(gen);
      expect_op(")");
      return close(gen);
    }
    if (at_op(",")) {
      const NodeId tup = open_at(NodeKind::Tuple, start);
      add_child(tup, first);
      while (accept_op(",")) {
        if (at_op(")")) break;
        add_child(tup, star_or_named());
      }
      expect_op(")");
      return close(tup);
    }
    expect_op(")");
    return first;
  }

  NodeId list_atom() {
    const NodeId id = open(NodeKind::List);
    advance();
    if (accept_op("]")) return close(id);
    const NodeId first = star_or_named();
    add_child(id, first);
    if (at_kw("for") || (at_kw("async") && at_kw("for", 1))) {
      node(id).kind = NodeKind::ListComp;
      comprehensions(id);
      expect_op("]");
      return close(id);
    }
    while (accept_op(",")) {
      if (at_op("]")) break;
      add_child(id, star_or_named());
    }
    expect_op("]");
    return close(id);
  }

  NodeId dict_entry(bool& is_dict) {
    if (at_op("**")) {
      is_dict = true;
      const NodeId id = open(NodeKind::DoubleStarred);
      advance();
      add_child(id, expr());
      return close(id);
    }
    const NodeId key = star_or_named();
    if (accept_op(":")) {
      is_dict = true;
      const NodeId item = open_from(NodeKind::DictItem, key);
      add_child(item, test());
      return close(item);
    }
    return key;
  }

  NodeId brace_atom() {
    const NodeId id = open(NodeKind::Dict);
    advance();
    if (accept_op("}")) return close(id);
    bool is_dict = false;
    const NodeId first = dict_entry(is_dict);
    if (at_kw("for") || (at_kw("async") && at_kw("for", 1))) {
      if (node(first).kind == NodeKind::DictItem) {
        node(id).kind = NodeKind::DictComp;
        node(id).children = node(first).children;
      } else {
        node(id).kind = NodeKind::SetComp;
        add_child(id, first);
      }
      comprehensions(id);
      expect_op("}");
      return close(id);
    }
    add_child(id, first);
    while (accept_op(",")) {
      if (at_op("}")) break;
      add_child(id, dict_entry(is_dict));
    }
    expect_op("}");
    if (!is_dict) node(id).kind = NodeKind::Set;
    return close(id);
  }

  ParseResult& r_;
  const std::vector<Token>& t_;
  std::size_t i_ = 0;
  std::size_t prev_end_ = 0;
  int prev_line_ = 1;
};

}  // namespace

std::shared_ptr<const ParseResult> parse(std::string source) {
  auto result = std::make_shared<ParseResult>();
  result->source = std::move(source);
  TokenStream stream = tokenize(result->source);
  for (auto& tk : stream.tokens) {
    if (tk.is(TokenKind::Comment)) {
      result->comments.push_back(std::move(tk));
    } else {
      result->tokens.push_back(std::move(tk));
    }
  }
  for (auto& e : stream.errors) result->errors.push_back({e.span, std::move(e.message)});
  Parser(*result).run();
  std::stable_sort(result->errors.begin(), result->errors.end(),
                   [](const ParseError& a, const ParseError& b) { return a.span.begin < b.span.begin; });
  return result;
}

}  // namespace depbench::python
