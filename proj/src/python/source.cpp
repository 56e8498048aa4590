#include "depbench/source.hpp"

#include <algorithm>
#include <cctype>

#include "depbench/python/lexer.hpp"
#include "depbench/python/names.hpp"

namespace depbench {

using python::ConstantKind;
using python::NodeId;
using python::NodeKind;
using python::ParseResult;
using python::kNoNode;

namespace {

bool is_blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c) != 0; });
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) {
      lines.push_back(text.substr(pos));
      break;
    }
    lines.push_back(text.substr(pos, nl - pos));
    pos = nl + 1;
  }
  return lines;
}

std::string rstrip_newlines(std::string s) {
  while (!s.empty() && (s.back() == '\n' || s.back() == '\r')) s.pop_back();
  return s;
}

bool is_string_constant(const python::Node& n) {
  return n.kind == NodeKind::Constant && static_cast<ConstantKind>(n.flag) == ConstantKind::String;
}

bool is_none(const ParseResult& r, NodeId id) {
  return id != kNoNode && r.tree[id].kind == NodeKind::Constant &&
         static_cast<ConstantKind>(r.tree[id].flag) == ConstantKind::None;
}

// ---- identifier harvest -----------------------------------------------------

void harvest_text(std::string_view code, std::set<std::string>& out);

void harvest_fstring_literal(std::string_view literal, std::set<std::string>& out) {
  for (const auto& e : source::fstring_expressions(literal)) harvest_text("(" + e + "\n)\n", out);
}

void add_dotted(std::string_view dotted, std::set<std::string>& out) {
  std::size_t pos = 0;
  while (pos <= dotted.size()) {
    const auto dot = dotted.find('.', pos);
    const auto part = dotted.substr(pos, dot == std::string_view::npos ? std::string_view::npos : dot - pos);
    if (!part.empty()) out.emplace(part);
    if (dot == std::string_view::npos) break;
    pos = dot + 1;
  }
}

void lexical_scan(std::string_view code, std::set<std::string>& out) {
  const auto stream = python::tokenize(code);
  for (const auto& tk : stream.tokens) {
    if (tk.kind == python::TokenKind::Name && !python::is_keyword(tk.text)) {
      out.insert(tk.text);
    } else if (tk.kind == python::TokenKind::String) {
      harvest_fstring_literal(tk.text, out);
    }
  }
}

void harvest_node(const ParseResult& r, NodeId id, std::set<std::string>& out) {
  if (id == kNoNode) return;
  const auto& n = r.tree[id];
  switch (n.kind) {
    case NodeKind::Name:
      out.insert(n.value);
      return;
    case NodeKind::Attribute:
    case NodeKind::FunctionDef:
    case NodeKind::ClassDef:
    case NodeKind::Param:
    case NodeKind::Keyword:
    case NodeKind::ExceptHandler:
      if (!n.value.empty()) out.insert(n.value);
      break;
    case NodeKind::Alias:
      if (n.value != "*") add_dotted(n.value, out);
      if (!n.alias.empty()) out.insert(n.alias);
      return;
    case NodeKind::ImportFrom:
      add_dotted(n.value, out);
      break;
    case NodeKind::Constant:
      if (static_cast<ConstantKind>(n.flag) == ConstantKind::FString) harvest_fstring_literal(n.value, out);
      return;
    case NodeKind::Error:
      lexical_scan(r.text(id), out);
      return;
    default:
      break;
  }
  for (const NodeId c : n.children) harvest_node(r, c, out);
}

// Skips a quoted run starting at s[i]; returns the index past the closing quote.
std::size_t skip_quoted(std::string_view s, std::size_t i) {
  const char q = s[i];
  const bool triple = s.substr(i, 3) == std::string(3, q);
  const std::size_t open = triple ? 3 : 1;
  std::size_t k = i + open;
  while (k < s.size()) {
    if (s[k] == '\\') {
      k += 2;
      continue;
    }
    if (triple ? s.substr(k, 3) == std::string(3, q) : s[k] == q) return k + open;
    ++k;
  }
  return s.size();
}

// Walks the body of an f-string (between the quotes), collecting each
// replacement field's expression and nested fields in its format spec.
void fstring_fields(std::string_view body, std::vector<std::string>& out) {
  std::size_t i = 0;
  while (i < body.size()) {
    if (body[i] != '{') {
      ++i;
      continue;
    }
    if (i + 1 < body.size() && body[i + 1] == '{') {
      i += 2;
      continue;
    }
    const std::size_t expr_begin = i + 1;
    std::size_t k = expr_begin;
    int depth = 0;
    std::size_t expr_end = std::string_view::npos;
    while (k < body.size()) {
      const char c = body[k];
      if (c == '\'' || c == '"') {
        k = skip_quoted(body, k);
        continue;
      }
      if (c == '(' || c == '[' || c == '{') {
        ++depth;
      } else if ((c == ')' || c == ']' || c == '}') && depth > 0) {
        --depth;
      } else if (depth == 0 && (c == '}' || c == ':' || (c == '!' && (k + 1 >= body.size() || body[k + 1] != '=')))) {
        expr_end = k;
        break;
      }
      ++k;
    }
    if (expr_end == std::string_view::npos) return;
    std::string expr(body.substr(expr_begin, expr_end - expr_begin));
    // Self-documenting `{x=}`.
    while (!expr.empty() && std::isspace(static_cast<unsigned char>(expr.back()))) expr.pop_back();
    if (!expr.empty() && expr.back() == '=' &&
        (expr.size() < 2 || std::string_view("=!<>").find(expr[expr.size() - 2]) == std::string_view::npos)) {
      expr.pop_back();
    }
    out.push_back(std::move(expr));
    // Conversion and format spec up to the matching brace.
    std::size_t j = expr_end;
    int braces = 0;
    const std::size_t spec_begin = j;
    while (j < body.size()) {
      if (body[j] == '{') ++braces;
      if (body[j] == '}') {
        if (braces == 0) break;
        --braces;
      }
      ++j;
    }
    if (j > spec_begin + 1) fstring_fields(body.substr(spec_begin + 1, j - spec_begin - 1), out);
    i = j + 1;
  }
}

void harvest_text(std::string_view code, std::set<std::string>& out) {
  const auto r = python::parse(std::string(code));
  if (!r->ok()) {
    lexical_scan(code, out);
    return;
  }
  harvest_node(*r, r->tree.root(), out);
}

// ---- function extraction ----------------------------------------------------

bool has_value_return(const ParseResult& r, NodeId id) {
  if (id == kNoNode) return false;
  const auto& n = r.tree[id];
  switch (n.kind) {
    case NodeKind::FunctionDef:
    case NodeKind::ClassDef:
    case NodeKind::Lambda:
      return false;
    case NodeKind::Return: {
      const NodeId v = n.children.empty() ? kNoNode : n.children[0];
      return v != kNoNode && !is_none(r, v);
    }
    default:
      break;
  }
  return std::any_of(n.children.begin(), n.children.end(), [&](NodeId c) { return has_value_return(r, c); });
}

bool is_main_guard(const ParseResult& r, NodeId id) {
  const auto& n = r.tree[id];
  if (n.kind != NodeKind::If) return false;
  const NodeId test = n.children[0];
  if (test == kNoNode || r.tree[test].kind != NodeKind::Compare || r.tree[test].value != "==") return false;
  const auto& operands = r.tree[test].children;
  if (operands.size() != 2) return false;
  bool name = false;
  bool literal = false;
  for (const NodeId o : operands) {
    const auto& on = r.tree[o];
    name |= on.kind == NodeKind::Name && on.value == "__name__";
    literal |= is_string_constant(on) && (on.value == "'__main__'" || on.value == "\"__main__\"");
  }
  return name && literal;
}

std::vector<std::string> parameter_names(const ParseResult& r, NodeId params) {
  std::vector<std::string> names;
  if (params == kNoNode) return names;
  for (const NodeId p : r.tree[params].children) {
    if (!r.tree[p].value.empty()) names.push_back(r.tree[p].value);
  }
  return names;
}

class FunctionCollector {
 public:
  explicit FunctionCollector(const ParsedModule& m) : m_(m), r_(m.tree()) {}

  ExtractedFunctions run() {
    for (const NodeId stmt : r_.tree[r_.tree.root()].children) {
      const auto& n = r_.tree[stmt];
      if (n.kind == NodeKind::FunctionDef) {
        consider(stmt, n.value);
      } else if (n.kind == NodeKind::ClassDef) {
        for (const NodeId inner : r_.tree[n.children.back()].children) {
          if (r_.tree[inner].kind == NodeKind::FunctionDef) consider(inner, n.value + "." + r_.tree[inner].value);
        }
      } else if (is_main_guard(r_, stmt)) {
        mark_entry_points(r_.tree[stmt].children[1]);
      }
    }
    return std::move(out_);
  }

 private:
  void mark_entry_points(NodeId block) {
    for (const NodeId s : r_.tree[block].children) {
      if (r_.tree[s].kind == NodeKind::FunctionDef) {
        out_.skipped.push_back({r_.tree[s].value, SkipReason::EntryPoint, r_.tree[s].span.line});
      }
    }
  }

  void consider(NodeId def, const std::string& qualified) {
    const auto& n = r_.tree[def];
    const auto layout = source::layout_of(r_, def);
    auto skip = [&](SkipReason why) { out_.skipped.push_back({qualified, why, n.span.line}); };
    if (n.value == "main") return skip(SkipReason::EntryPoint);
    if (layout.docstring == kNoNode) return skip(SkipReason::NoDocstring);
    if (!has_value_return(r_, layout.body)) return skip(SkipReason::NoVerifiableOutput);

    const std::string_view src = r_.source;
    FunctionRecord f;
    f.qualified_name = qualified;
    f.name = n.value;
    f.signature = std::string(src.substr(layout.head, layout.header_end - layout.head));
    f.docstring = std::string(r_.text(layout.docstring));
    f.source = std::string(src.substr(layout.start, layout.end - layout.start));
    f.module_id = m_.module_id;
    const auto first_line = static_cast<int>(std::count(src.begin(), src.begin() + static_cast<long>(layout.start), '\n')) + 1;
    f.span = python::Span{layout.start, layout.end, first_line, 0, n.span.end_line};
    f.parameters = parameter_names(r_, n.children[1]);

    const auto& stmts = r_.tree[layout.body].children;
    std::size_t first = 0;
    if (!stmts.empty() && r_.tree[stmts[0]].kind == NodeKind::ExprStmt && r_.tree[stmts[0]].children[0] == layout.docstring) {
      first = 1;
    }
    if (first < stmts.size()) {
      const auto begin = r_.tree[stmts[first]].span.begin;
      const auto ls = source::line_start(src, begin);
      const auto from = is_blank(src.substr(ls, begin - ls)) ? ls : begin;
      f.body = std::string(src.substr(from, layout.end - from));
    }
    for (std::size_t k = first; k < stmts.size(); ++k) harvest_node(r_, stmts[k], f.identifiers);
    out_.functions.push_back(std::move(f));
  }

  const ParsedModule& m_;
  const ParseResult& r_;
  ExtractedFunctions out_;
};

NodeId first_function(const ParseResult& r, NodeId id) {
  if (id == kNoNode) return kNoNode;
  if (r.tree[id].kind == NodeKind::FunctionDef) return id;
  for (const NodeId c : r.tree[id].children) {
    const NodeId f = first_function(r, c);
    if (f != kNoNode) return f;
  }
  return kNoNode;
}

}  // namespace

ParsedModule parse_module(std::string source_text, std::string module_id) {
  ParsedModule m;
  m.module_id = std::move(module_id);
  m.syntax_tree = python::parse(std::move(source_text));
  m.parse_errors = m.syntax_tree->errors;
  return m;
}

std::string_view to_string(SkipReason reason) {
  switch (reason) {
    case SkipReason::NoDocstring:
      return "no docstring";
    case SkipReason::EntryPoint:
      return "entry point";
    case SkipReason::NoVerifiableOutput:
      return "no verifiable output";
  }
  return "?";
}

ExtractedFunctions extract_functions(const ParsedModule& module) { return FunctionCollector(module).run(); }

IdentifierSet collect_identifiers(std::string_view code) {
  IdentifierSet ids;
  harvest_text(code, ids.names);
  return ids;
}

std::size_t count_tokens(std::string_view text) {
  const auto stream = python::tokenize(text);
  return static_cast<std::size_t>(std::count_if(stream.tokens.begin(), stream.tokens.end(), [](const python::Token& t) {
    return !python::is_layout(t.kind) && t.kind != python::TokenKind::Comment;
  }));
}

bool detect_empty_body(std::string_view function_text) {
  const auto r = python::parse(source::dedent(function_text));
  if (!r->ok()) return false;
  const NodeId def = first_function(*r, r->tree.root());
  if (def == kNoNode) return false;
  const auto layout = source::layout_of(*r, def);
  for (const NodeId s : r->tree[layout.body].children) {
    const auto& n = r->tree[s];
    if (n.kind == NodeKind::Pass) continue;
    if (n.kind == NodeKind::Return && (n.children.empty() || n.children[0] == kNoNode || is_none(*r, n.children[0]))) {
      continue;
    }
    if (n.kind == NodeKind::ExprStmt) {
      const NodeId e = n.children[0];
      if (e == layout.docstring) continue;
      if (r->tree[e].kind == NodeKind::Constant && static_cast<ConstantKind>(r->tree[e].flag) == ConstantKind::Ellipsis) {
        continue;
      }
    }
    return false;
  }
  return true;
}

namespace source {

std::vector<std::string> fstring_expressions(std::string_view literal) {
  std::vector<std::string> exprs;
  // Implicit concatenation arrives as several literals; split them first.
  const auto stream = python::tokenize(literal);
  for (const auto& tk : stream.tokens) {
    if (tk.kind != python::TokenKind::String) continue;
    const std::string_view s = tk.text;
    const auto q = s.find_first_of("'\"");
    if (q == std::string_view::npos) continue;
    bool is_f = false;
    for (std::size_t k = 0; k < q; ++k) is_f |= (s[k] == 'f' || s[k] == 'F');
    if (!is_f) continue;
    const bool triple = s.substr(q, 3) == std::string(3, s[q]);
    const std::size_t open = triple ? 3 : 1;
    if (s.size() < q + 2 * open) continue;
    fstring_fields(s.substr(q + open, s.size() - q - 2 * open), exprs);
  }
  return exprs;
}

std::size_t line_start(std::string_view text, std::size_t offset) {
  offset = std::min(offset, text.size());
  const auto nl = text.rfind('\n', offset == 0 ? 0 : offset - 1);
  if (offset == 0 || nl == std::string_view::npos) return 0;
  return nl + 1;
}

NodeId docstring_of(const ParseResult& r, NodeId block) {
  if (block == kNoNode || r.tree[block].children.empty()) return kNoNode;
  const NodeId first = r.tree[block].children[0];
  if (r.tree[first].kind != NodeKind::ExprStmt) return kNoNode;
  const NodeId e = r.tree[first].children[0];
  return e != kNoNode && is_string_constant(r.tree[e]) ? e : kNoNode;
}

DefinitionLayout layout_of(const ParseResult& r, NodeId def) {
  const auto& n = r.tree[def];
  DefinitionLayout l;
  const NodeId decorators = n.children[0];
  std::size_t first = n.head;
  if (decorators != kNoNode && !r.tree[decorators].children.empty()) {
    first = std::min(first, r.tree[r.tree[decorators].children[0]].span.begin);
  }
  l.start = line_start(r.source, first);
  std::size_t k = l.start;
  while (k < r.source.size() && (r.source[k] == ' ' || r.source[k] == '\t')) ++k;
  l.column = static_cast<int>(k - l.start);
  l.head = n.head;
  l.header_end = n.aux;
  l.end = n.span.end;
  l.body = n.children.back();
  l.docstring = docstring_of(r, l.body);
  return l;
}

std::string dedent(std::string_view text) {
  const auto lines = split_lines(text);
  std::size_t common = std::string_view::npos;
  std::string_view margin;
  for (const auto line : lines) {
    if (is_blank(line)) continue;
    const auto ws = line.find_first_not_of(" \t");
    const auto lead = line.substr(0, ws);
    if (common == std::string_view::npos) {
      margin = lead;
      common = lead.size();
      continue;
    }
    std::size_t k = 0;
    while (k < std::min(common, lead.size()) && margin[k] == lead[k]) ++k;
    common = k;
  }
  if (common == std::string_view::npos || common == 0) return std::string(text);
  std::string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto line = lines[i];
    out.append(line.substr(std::min(line.size(), common)));
    if (i + 1 < lines.size() || (!text.empty() && text.back() == '\n')) out.push_back('\n');
  }
  return out;
}

std::string indent(std::string_view text, std::string_view prefix) {
  std::string out;
  const auto lines = split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (!is_blank(lines[i])) out.append(prefix);
    out.append(lines[i]);
    if (i + 1 < lines.size() || (!text.empty() && text.back() == '\n')) out.push_back('\n');
  }
  return out;
}

std::string normalize_trailing(std::string_view text) {
  std::vector<std::string> lines;
  for (auto line : split_lines(text)) {
    const auto end = line.find_last_not_of(" \t\r");
    lines.emplace_back(end == std::string_view::npos ? std::string_view{} : line.substr(0, end + 1));
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  std::string out;
  for (const auto& l : lines) out.append(l).push_back('\n');
  return out;
}

std::string header_text(const ParseResult& r, const DefinitionLayout& l) {
  return r.source.substr(l.start, l.header_end - l.start);
}

std::string docstring_block(const ParseResult& r, const DefinitionLayout& l) {
  if (l.docstring == kNoNode) return {};
  const auto& span = r.tree[l.docstring].span;
  const auto ls = line_start(r.source, span.begin);
  const std::string_view src = r.source;
  if (is_blank(src.substr(ls, span.begin - ls))) return std::string(src.substr(ls, span.end - ls));
  // Docstring shares the header line.
  return std::string(static_cast<std::size_t>(l.column) + 4, ' ') + std::string(r.text(l.docstring));
}

std::string outline(std::string_view definition_text, bool with_docstrings) {
  const std::string body = dedent(definition_text);
  std::string margin;
  for (const char c : definition_text) {
    if (c != ' ' && c != '\t') break;
    margin.push_back(c);
  }
  const auto r = python::parse(body);
  const auto& stmts = r->tree[r->tree.root()].children;
  if (stmts.empty()) return rstrip_newlines(std::string(definition_text));
  const NodeId def = stmts[0];
  const auto kind = r->tree[def].kind;
  if (kind != NodeKind::FunctionDef && kind != NodeKind::ClassDef) return rstrip_newlines(std::string(definition_text));

  auto one = [&](NodeId id) {
    const auto l = layout_of(*r, id);
    std::string s = header_text(*r, l);
    if (with_docstrings && l.docstring != kNoNode) s += "\n" + docstring_block(*r, l);
    return s;
  };
  std::string out = one(def);
  if (kind == NodeKind::ClassDef) {
    for (const NodeId inner : r->tree[r->tree[def].children.back()].children) {
      if (r->tree[inner].kind == NodeKind::FunctionDef) out += "\n\n" + one(inner);
    }
  }
  return margin.empty() ? out : indent(out, margin);
}

std::optional<DefinitionParts> definition_parts(std::string_view definition_text) {
  const auto r = python::parse(dedent(definition_text));
  const auto& stmts = r->tree[r->tree.root()].children;
  if (stmts.empty()) return std::nullopt;
  const NodeId s = stmts[0];
  const auto& n = r->tree[s];
  DefinitionParts parts;
  switch (n.kind) {
    case NodeKind::FunctionDef:
    case NodeKind::ClassDef: {
      const auto l = layout_of(*r, s);
      parts.kind = n.kind == NodeKind::ClassDef ? DefinitionKind::Class : DefinitionKind::Function;
      parts.name = n.value;
      parts.signature = r->source.substr(l.head, l.header_end - l.head);
      if (l.docstring != kNoNode) parts.docstring = std::string(r->text(l.docstring));
      return parts;
    }
    case NodeKind::Assign:
    case NodeKind::AnnAssign: {
      const NodeId target = n.children[0];
      if (target == kNoNode || r->tree[target].kind != NodeKind::Name) return std::nullopt;
      parts.kind = DefinitionKind::Variable;
      parts.name = r->tree[target].value;
      const auto text = r->text(s);
      parts.signature = std::string(text.substr(0, text.find('\n')));
      return parts;
    }
    default:
      return std::nullopt;
  }
}

std::string function_prompt(std::string_view function_source) {
  const auto r = python::parse(dedent(function_source));
  const NodeId def = first_function(*r, r->tree.root());
  if (def == kNoNode) return std::string(function_source);
  const auto l = layout_of(*r, def);
  std::string out = header_text(*r, l) + "\n";
  if (l.docstring != kNoNode) out += docstring_block(*r, l) + "\n";
  return out;
}

std::string bare_signature(std::string_view signature) {
  std::string_view s = signature;
  auto drop = [&](std::string_view word) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    if (s.substr(0, word.size()) == word && s.size() > word.size() &&
        std::isspace(static_cast<unsigned char>(s[word.size()]))) {
      s.remove_prefix(word.size() + 1);
    }
  };
  drop("async");
  drop("def");
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  if (!s.empty() && s.back() == ':') s.remove_suffix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return std::string(s);
}

std::string dedented_docstring(std::string_view function_source) {
  const auto r = python::parse(dedent(function_source));
  const NodeId def = first_function(*r, r->tree.root());
  if (def == kNoNode) return {};
  return dedent(docstring_block(*r, layout_of(*r, def)));
}

}  // namespace source
}  // namespace depbench
