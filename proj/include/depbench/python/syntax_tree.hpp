#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "depbench/python/token.hpp"

namespace depbench::python {

using NodeId = std::uint32_t;
inline constexpr NodeId kNoNode = std::numeric_limits<NodeId>::max();

// Child layouts (absent optional children are kNoNode):
//   Module          stmts...
//   FunctionDef     value=name aux=offset past ':'  [Decorators, Parameters, returns?, Block]
//   ClassDef        value=name aux=offset past ':'  [Decorators, Arguments?, Block]
//   Decorators      exprs...
//   Parameters      Param...
//   Param           value=name flag=ParamKind [annotation?, default?]
//   Block           stmts...
//   If / While      [test, Block, orelse?]   (elif is an If in orelse)
//   For             [target, iter, Block, orelse?]
//   Try             [Block, ExceptHandler..., orelse?(Block), finally?(Block)]  aux=handler count
//   ExceptHandler   value=as-name [type?, Block]
//   With            [WithItem..., Block]
//   WithItem        [expr, target?]
//   Return          [value?]
//   Raise           [exc?, cause?]
//   Assert          [test, msg?]
//   Delete          targets...
//   Global/Nonlocal Name...
//   Import          Alias...
//   ImportFrom      value=module aux=level  Alias...
//   Alias           value=dotted name, alias=as-name
//   ExprStmt        [expr]
//   Assign          [target..., value]
//   AugAssign       value=op [target, value]
//   AnnAssign       [target, annotation, value?]
//   Name            value=identifier
//   Constant        value=source text, flag=ConstantKind
//   Attribute       value=attr [object]
//   Call            [func, arg...]   (Keyword, Starred, DoubleStarred or exprs)
//   Keyword         value=name [expr]
//   Subscript       [object, index]
//   Slice           [lower?, upper?, step?]
//   BinOp/UnaryOp   value=op
//   BoolOp          value=op operands...
//   Compare         value=space-joined ops [left, right...]
//   IfExp           [body, test, orelse]
//   Lambda          [Parameters, body]
//   NamedExpr       [target, value]
//   Tuple/List/Set  elts...
//   Dict            DictItem | DoubleStarred ...
//   DictItem        [key, value]
//   ListComp/SetComp/GeneratorExp [elt, Comprehension...]
//   DictComp        [key, value, Comprehension...]
//   Comprehension   flag=async [target, iter, ifs...]
//   Await/Starred/DoubleStarred/YieldFrom [expr]
//   Yield           [value?]
//   Error           unparseable region
enum class NodeKind : std::uint8_t {
  Module,
  FunctionDef,
  ClassDef,
  Decorators,
  Parameters,
  Param,
  Block,
  If,
  While,
  For,
  Try,
  ExceptHandler,
  With,
  WithItem,
  Return,
  Raise,
  Assert,
  Delete,
  Pass,
  Break,
  Continue,
  Global,
  Nonlocal,
  Import,
  ImportFrom,
  Alias,
  ExprStmt,
  Assign,
  AugAssign,
  AnnAssign,
  Name,
  Constant,
  Attribute,
  Call,
  Keyword,
  Subscript,
  Slice,
  BinOp,
  UnaryOp,
  BoolOp,
  Compare,
  IfExp,
  Lambda,
  NamedExpr,
  Tuple,
  List,
  Set,
  Dict,
  DictItem,
  ListComp,
  SetComp,
  GeneratorExp,
  DictComp,
  Comprehension,
  Await,
  Starred,
  DoubleStarred,
  Yield,
  YieldFrom,
  Error,
};

enum class ParamKind : std::uint8_t { Normal, VarArgs, KwArgs, BareStar, Slash };
enum class ConstantKind : std::uint8_t { Number, String, FString, Bytes, True, False, None, Ellipsis };

struct Node {
  NodeKind kind = NodeKind::Error;
  std::uint8_t flag = 0;
  bool is_async = false;
  Span span;
  std::size_t aux = 0;
  std::size_t head = 0;  // FunctionDef/ClassDef: offset of the `def`/`async`/`class` keyword
  std::string value;
  std::string alias;
  std::vector<NodeId> children;
};

/// Arena-allocated tree. Node ids are indices into `nodes`.
class SyntaxTree {
 public:
  const Node& operator[](NodeId id) const { return nodes_[id]; }
  Node& operator[](NodeId id) { return nodes_[id]; }
  std::size_t size() const { return nodes_.size(); }
  NodeId root() const { return root_; }
  void set_root(NodeId id) { root_ = id; }

  NodeId add(Node node) {
    nodes_.push_back(std::move(node));
    return static_cast<NodeId>(nodes_.size() - 1);
  }

  NodeId child(NodeId id, std::size_t i) const {
    const auto& c = nodes_[id].children;
    return i < c.size() ? c[i] : kNoNode;
  }

 private:
  std::vector<Node> nodes_;
  NodeId root_ = kNoNode;
};

}  // namespace depbench::python
