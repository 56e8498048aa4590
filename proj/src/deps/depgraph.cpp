#include "depbench/depgraph.hpp"

#include <omp.h>

#include <algorithm>
#include <fstream>
#include <functional>
#include <iterator>
#include <sstream>

#include "depbench/error.hpp"
#include "depbench/python/names.hpp"
#include "depbench/source.hpp"

namespace depbench {

namespace fs = std::filesystem;
using python::ConstantKind;
using python::kNoNode;
using python::NodeId;
using python::NodeKind;
using python::ParseResult;

namespace {

constexpr int kMaxReexportHops = 100;

// ---- discovery and per-file loading ----------------------------------------

bool skipped_directory(const fs::path& p) {
  const auto name = p.filename().string();
  return !name.empty() && (name[0] == '.' || name == "__pycache__" || name == "node_modules" ||
                           name == "site-packages" || name == "venv");
}

std::vector<std::string> discover_sources(const fs::path& root) {
  std::error_code ec;
  if (!fs::is_directory(root, ec)) throw DependencyError("not a directory: " + root.string());
  std::vector<std::string> files;
  fs::recursive_directory_iterator it(root, fs::directory_options::skip_permission_denied, ec);
  for (const fs::recursive_directory_iterator end; !ec && it != end; it.increment(ec)) {
    if (it->is_directory(ec)) {
      if (skipped_directory(it->path())) it.disable_recursion_pending();
      continue;
    }
    if (it->path().extension() == ".py") files.push_back(it->path().lexically_relative(root).generic_string());
  }
  std::sort(files.begin(), files.end());
  return files;
}

void collect_target_names(const ParseResult& r, NodeId id, std::vector<std::string>& out) {
  if (id == kNoNode) return;
  const auto& n = r.tree[id];
  switch (n.kind) {
    case NodeKind::Name:
      out.push_back(n.value);
      break;
    case NodeKind::Tuple:
    case NodeKind::List:
    case NodeKind::Starred:
      for (const NodeId c : n.children) collect_target_names(r, c, out);
      break;
    default:
      break;
  }
}

class LineIndex {
 public:
  explicit LineIndex(std::string_view text) {
    for (std::size_t i = 0; i < text.size(); ++i) {
      if (text[i] == '\n') newlines_.push_back(i);
    }
  }
  int line_of(std::size_t offset) const {
    return static_cast<int>(std::lower_bound(newlines_.begin(), newlines_.end(), offset) - newlines_.begin()) + 1;
  }

 private:
  std::vector<std::size_t> newlines_;
};

void collect_top_level(SourceModule& m) {
  const ParseResult& r = *m.tree;
  const LineIndex lines(r.source);
  auto add = [&](std::string name, DefinitionKind kind, std::size_t begin, std::size_t end, std::size_t index) {
    std::erase_if(m.top_level_definitions, [&](const Definition& d) { return d.name == name; });
    m.top_level_definitions.push_back(
        {std::move(name), kind, Span{begin, end, lines.line_of(begin), 0, lines.line_of(end)}, index});
  };
  const auto& stmts = r.tree[r.tree.root()].children;
  for (std::size_t i = 0; i < stmts.size(); ++i) {
    const NodeId s = stmts[i];
    const auto& n = r.tree[s];
    switch (n.kind) {
      case NodeKind::FunctionDef:
      case NodeKind::ClassDef: {
        const auto l = source::layout_of(r, s);
        add(n.value, n.kind == NodeKind::ClassDef ? DefinitionKind::Class : DefinitionKind::Function, l.start, l.end,
            i);
        break;
      }
      case NodeKind::Assign:
      case NodeKind::AnnAssign: {
        if (n.kind == NodeKind::AnnAssign && (n.children.size() < 3 || n.children[2] == kNoNode)) break;
        std::vector<std::string> names;
        const std::size_t targets = n.kind == NodeKind::Assign ? n.children.size() - 1 : 1;
        for (std::size_t k = 0; k < targets; ++k) collect_target_names(r, n.children[k], names);
        const auto begin = source::line_start(r.source, n.span.begin);
        for (auto& name : names) add(std::move(name), DefinitionKind::Variable, begin, n.span.end, i);
        break;
      }
      case NodeKind::Import:
      case NodeKind::ImportFrom:
        m.import_statements.emplace_back(r.text(s));
        m.import_statement_indices.push_back(i);
        break;
      default:
        break;
    }
  }
  std::stable_sort(m.top_level_definitions.begin(), m.top_level_definitions.end(),
                   [](const Definition& a, const Definition& b) { return a.span.begin < b.span.begin; });
}

SourceModule load_module(const fs::path& root, const std::string& relative) noexcept {
  SourceModule m;
  try {
    m.path = relative;
    m.id = module_id_for(relative);
    m.is_package = fs::path(relative).filename() == "__init__.py";
    std::ifstream in(root / relative, std::ios::binary);
    if (!in) {
      m.load_error = "cannot read " + relative;
      return m;
    }
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) {
      m.load_error = "read failed: " + relative;
      return m;
    }
    m.tree = python::parse(std::move(text));
    m.parse_errors = m.tree->errors;
    collect_top_level(m);
  } catch (const std::exception& e) {
    m.tree.reset();
    m.load_error = e.what();
  }
  return m;
}

// ---- import binding ---------------------------------------------------------

std::vector<std::string> split_dotted(std::string_view s) {
  std::vector<std::string> parts;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    const auto dot = s.find('.', pos);
    parts.emplace_back(s.substr(pos, dot == std::string_view::npos ? std::string_view::npos : dot - pos));
    if (dot == std::string_view::npos) break;
    pos = dot + 1;
  }
  return parts;
}

std::string join_dotted(const std::vector<std::string>& parts) {
  std::string out;
  for (const auto& p : parts) {
    if (p.empty()) continue;
    if (!out.empty()) out += '.';
    out += p;
  }
  return out;
}

std::string child_module(std::string_view parent, std::string_view name) {
  return parent.empty() ? std::string(name) : std::string(parent) + "." + std::string(name);
}

/// Absolute id of the base module of `from <level dots><module> import ...`,
/// or nullopt when the relative import climbs above the repository root.
std::optional<std::string> from_base(const RepositorySnapshot& g, const SourceModule& m, std::size_t level,
                                     const std::string& module) {
  if (level == 0) return g.lookup_module(module);
  auto parts = split_dotted(m.id);
  if (!m.is_package && !parts.empty()) parts.pop_back();
  for (std::size_t k = 1; k < level; ++k) {
    if (parts.empty()) return std::nullopt;
    parts.pop_back();
  }
  if (!module.empty()) parts.push_back(module);
  return join_dotted(parts);
}

bool is_module_like(const RepositorySnapshot& g, std::string_view id) {
  return !id.empty() && (g.index_of(id) || g.is_namespace_package(id));
}

/// `__all__` as a list/tuple of string literals, if the module declares one.
std::optional<std::vector<std::string>> declared_all(const SourceModule& m) {
  if (!m.tree) return std::nullopt;
  const ParseResult& r = *m.tree;
  std::optional<std::vector<std::string>> out;
  for (const NodeId s : r.tree[r.tree.root()].children) {
    const auto& n = r.tree[s];
    if (n.kind != NodeKind::Assign || n.children.size() != 2) continue;
    const NodeId t = n.children[0];
    if (r.tree[t].kind != NodeKind::Name || r.tree[t].value != "__all__") continue;
    const auto& v = r.tree[n.children[1]];
    if (v.kind != NodeKind::List && v.kind != NodeKind::Tuple) continue;
    std::vector<std::string> names;
    for (const NodeId e : v.children) {
      const auto& c = r.tree[e];
      if (c.kind != NodeKind::Constant || static_cast<ConstantKind>(c.flag) != ConstantKind::String ||
          c.value.size() < 2) {
        continue;
      }
      names.push_back(c.value.substr(1, c.value.size() - 2));
    }
    out = std::move(names);
  }
  return out;
}

using WildcardFn = std::function<std::vector<std::string>(std::size_t module_index)>;

/// Raw (unfollowed) bindings introduced by one import statement of module `m`.
void bind_statement(const RepositorySnapshot& g, const SourceModule& m, const ParseResult& r, NodeId stmt,
                    std::size_t stmt_index, std::size_t import_index, const WildcardFn& wildcard,
                    std::map<std::string, Binding>& out) {
  const auto& n = r.tree[stmt];
  auto put = [&](const std::string& local, Binding b) {
    b.statement_index = stmt_index;
    b.import_index = import_index;
    out[local] = std::move(b);
  };
  if (n.kind == NodeKind::Import) {
    for (const NodeId a : n.children) {
      const auto& alias = r.tree[a];
      Binding b;
      if (!alias.alias.empty()) {
        const auto id = g.lookup_module(alias.value);
        b.kind = id ? BindingKind::Module : BindingKind::External;
        b.origin = id ? *id : alias.value;
        b.original_name = alias.value;
        put(alias.alias, std::move(b));
      } else {
        const auto top = split_dotted(alias.value).front();
        const auto id = g.lookup_module(top);
        b.kind = id ? BindingKind::Module : BindingKind::External;
        b.origin = id ? *id : top;
        b.original_name = top;
        put(top, std::move(b));
      }
    }
    return;
  }
  if (n.kind != NodeKind::ImportFrom) return;
  const auto base = from_base(g, m, n.aux, n.value);
  const bool base_known = base && (is_module_like(g, *base) || (base->empty() && n.aux > 0));
  const std::string base_text = base ? *base : n.value;
  for (const NodeId a : n.children) {
    const auto& alias = r.tree[a];
    if (alias.value == "*") {
      const auto idx = base ? g.index_of(*base) : std::nullopt;
      if (!idx) continue;
      for (const auto& name : wildcard(*idx)) {
        Binding b;
        b.kind = BindingKind::Definition;
        b.origin = *base;
        b.original_name = name;
        put(name, std::move(b));
      }
      continue;
    }
    const std::string local = alias.alias.empty() ? alias.value : alias.alias;
    Binding b;
    b.original_name = alias.value;
    const auto sub = base_known ? child_module(*base, alias.value) : std::string();
    if (base_known && is_module_like(g, sub)) {
      b.kind = BindingKind::Module;
      b.origin = sub;
    } else if (base_known && g.index_of(*base)) {
      b.kind = BindingKind::Definition;
      b.origin = *base;
    } else {
      b.kind = BindingKind::External;
      b.origin = base_text;
    }
    put(local, std::move(b));
  }
}

struct Resolved {
  BindingKind kind = BindingKind::External;
  std::size_t module = 0;  // Definition: defining module index
  std::string module_id;   // Module: the module or namespace package
  std::string name;        // Definition: definition name in `module`
};

/// Follows names through module namespaces (definitions and import bindings,
/// last binding wins) until a definition, a module or something external.
class NameResolver {
 public:
  NameResolver(const RepositorySnapshot& g, const std::vector<ImportMap>& maps) : g_(g), maps_(maps) {}

  Resolved follow(const Binding& b) const {
    switch (b.kind) {
      case BindingKind::Module:
        return {BindingKind::Module, 0, b.origin, {}};
      case BindingKind::External:
        return {};
      case BindingKind::Definition: {
        const auto idx = g_.index_of(b.origin);
        if (!idx) return {};
        return resolve(*idx, b.original_name);
      }
    }
    return {};
  }

  Resolved resolve(std::size_t module, std::string name) const {
    for (int hop = 0; hop < kMaxReexportHops; ++hop) {
      const auto& m = g_.modules[module];
      const Definition* def = m.find_definition(name);
      const auto& bindings = maps_[module].bindings;
      const auto it = bindings.find(name);
      const Binding* b = it == bindings.end() ? nullptr : &it->second;
      if (def && (!b || def->statement_index > b->statement_index)) {
        return {BindingKind::Definition, module, m.id, name};
      }
      if (!b) {
        const auto sub = child_module(m.is_package ? m.id : std::string(), name);
        if (m.is_package && is_module_like(g_, sub)) return {BindingKind::Module, 0, sub, {}};
        return {};
      }
      if (b->kind != BindingKind::Definition) return follow(*b);
      const auto next = g_.index_of(b->origin);
      if (!next) return {};
      module = *next;
      name = b->original_name;
    }
    return {};
  }

  /// Resolves `attrs` against module `module_id` (e.g. `pkg.mod` + [f]).
  Resolved descend(std::string module_id, const std::vector<std::string>& attrs) const {
    for (const auto& a : attrs) {
      const auto sub = child_module(module_id, a);
      if (is_module_like(g_, sub)) {
        module_id = sub;
        continue;
      }
      const auto idx = g_.index_of(module_id);
      if (!idx) return {};
      auto r = resolve(*idx, a);
      if (r.kind != BindingKind::Module) return r;
      module_id = r.module_id;
    }
    return {BindingKind::Module, 0, module_id, {}};
  }

 private:
  const RepositorySnapshot& g_;
  const std::vector<ImportMap>& maps_;
};

/// Computes raw import maps for every module (wildcards need the exporting
/// module's namespace first), then fills the resolved fields.
class ImportMapBuilder {
 public:
  explicit ImportMapBuilder(const RepositorySnapshot& g) : g_(g), maps_(g.modules.size()), state_(g.modules.size()) {}

  std::vector<ImportMap> build_all() {
    for (std::size_t i = 0; i < g_.modules.size(); ++i) raw(i);
    finish();
    return std::move(maps_);
  }

  ImportMap build_one(std::size_t idx) {
    // Wildcard sources of idx are computed on the way; resolution reads only those.
    raw(idx);
    for (std::size_t i = 0; i < g_.modules.size(); ++i) raw(i);
    finish();
    return std::move(maps_[idx]);
  }

 private:
  enum State : char { kNone, kActive, kDone };

  void raw(std::size_t idx) {
    if (state_[idx] != kNone) return;
    state_[idx] = kActive;
    const auto& m = g_.modules[idx];
    maps_[idx].module_id = m.id;
    if (m.tree) {
      const ParseResult& r = *m.tree;
      const auto& stmts = r.tree[r.tree.root()].children;
      const WildcardFn wildcard = [this](std::size_t source) { return exported(source); };
      for (std::size_t k = 0; k < m.import_statement_indices.size(); ++k) {
        const auto s = m.import_statement_indices[k];
        bind_statement(g_, m, r, stmts[s], s, k, wildcard, maps_[idx].bindings);
      }
    }
    state_[idx] = kDone;
  }

  std::vector<std::string> exported(std::size_t idx) {
    const auto& m = g_.modules[idx];
    if (auto all = declared_all(m)) return *all;
    raw(idx);  // no-op on an import cycle; the partial namespace is used
    std::set<std::string> names;
    for (const auto& d : m.top_level_definitions) {
      if (!d.name.starts_with('_')) names.insert(d.name);
    }
    for (const auto& [name, b] : maps_[idx].bindings) {
      if (!name.starts_with('_')) names.insert(name);
    }
    return {names.begin(), names.end()};
  }

  void finish() {
    const NameResolver resolver(g_, maps_);
    std::vector<std::vector<std::pair<std::string, Resolved>>> updates(maps_.size());
    for (std::size_t i = 0; i < maps_.size(); ++i) {
      for (const auto& [name, b] : maps_[i].bindings) updates[i].emplace_back(name, resolver.follow(b));
    }
    for (std::size_t i = 0; i < maps_.size(); ++i) {
      for (auto& [name, res] : updates[i]) {
        Binding& b = maps_[i].bindings[name];
        switch (res.kind) {
          case BindingKind::Definition: {
            b.resolved_origin = g_.modules[res.module].id;
            b.resolved_name = res.name;
            if (const auto* d = g_.modules[res.module].find_definition(res.name)) b.kind_hint = d->kind;
            break;
          }
          case BindingKind::Module:
            b.kind = BindingKind::Module;
            b.origin = res.module_id;
            b.resolved_origin = res.module_id;
            break;
          case BindingKind::External:
            if (b.kind == BindingKind::Definition) b.kind = BindingKind::External;
            break;
        }
      }
    }
  }

  const RepositorySnapshot& g_;
  std::vector<ImportMap> maps_;
  std::vector<State> state_;
};

std::vector<ImportEdge> import_edges_of(const RepositorySnapshot& g, const SourceModule& m) {
  std::vector<ImportEdge> edges;
  if (!m.tree) return edges;
  const ParseResult& r = *m.tree;
  const auto& stmts = r.tree[r.tree.root()].children;
  for (const auto s : m.import_statement_indices) {
    const auto& n = r.tree[stmts[s]];
    if (n.kind == NodeKind::Import) {
      for (const NodeId a : n.children) {
        const auto& dotted = r.tree[a].value;
        const auto id = g.lookup_module(dotted);
        if (id && g.index_of(*id)) edges.push_back({m.id, *id, false, {}});
        else if (!id) edges.push_back({m.id, dotted, true, {}});
      }
      continue;
    }
    const auto base = from_base(g, m, n.aux, n.value);
    ImportEdge to_base{m.id, base ? *base : n.value, false, {}};
    const bool base_is_module = base && g.index_of(*base).has_value();
    for (const NodeId a : n.children) {
      const auto& name = r.tree[a].value;
      const auto sub = base ? child_module(*base, name) : std::string();
      if (base && name != "*" && g.index_of(sub)) {
        edges.push_back({m.id, sub, false, {}});
      } else {
        to_base.names.push_back(name);
      }
    }
    if (to_base.names.empty()) continue;
    to_base.external = !base_is_module;
    if (to_base.external && base && g.is_namespace_package(*base)) continue;
    if (to_base.external && n.aux > 0) to_base.imported = std::string(n.aux, '.') + n.value;
    edges.push_back(std::move(to_base));
  }
  return edges;
}

RepositorySnapshot build_graph(const fs::path& root, bool parallel) {
  RepositorySnapshot g;
  std::error_code ec;
  g.root = fs::weakly_canonical(root, ec);
  if (ec) g.root = root.lexically_normal();
  const auto files = discover_sources(g.root);
  g.modules.resize(files.size());
  const auto count = static_cast<std::ptrdiff_t>(files.size());
  if (parallel) {
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < count; ++i) g.modules[i] = load_module(g.root, files[i]);
  } else {
    for (std::ptrdiff_t i = 0; i < count; ++i) g.modules[i] = load_module(g.root, files[i]);
  }
  g.reindex();
  g.import_maps = ImportMapBuilder(g).build_all();
  for (const auto& m : g.modules) {
    auto e = import_edges_of(g, m);
    std::move(e.begin(), e.end(), std::back_inserter(g.import_edges));
  }
  return g;
}

// ---- reference walking ------------------------------------------------------

struct Reference {
  std::string root;
  std::vector<std::string> attrs;
  std::optional<Binding> local_import;
};

using LocalImportFn = std::function<void(const ParseResult&, NodeId, std::map<std::string, Binding>&)>;

/// Single pass over a definition collecting free-name reads in order.
/// A name counts as local once something in an enclosing function scope
/// has bound it earlier in the text.
class ReferenceWalker {
 public:
  explicit ReferenceWalker(LocalImportFn local_import) : local_import_(std::move(local_import)) {}

  void function(const ParseResult& r, NodeId def) {
    r_ = &r;
    function_def(def, /*bind_name=*/false);
  }
  void class_def(const ParseResult& r, NodeId def) {
    r_ = &r;
    klass(def, /*bind_name=*/false);
  }
  void statement(const ParseResult& r, NodeId s) {
    r_ = &r;
    const auto& n = node(s);
    if (n.kind == NodeKind::Assign) expr(n.children.back());
    else if (n.kind == NodeKind::AnnAssign && n.children.size() > 2) expr(n.children[2]);
    else stmt(s);
  }

  std::vector<Reference> take() { return std::move(refs_); }

 private:
  struct Scope {
    std::set<std::string> bound;
    std::set<std::string> globals;
    std::map<std::string, Binding> imports;
    bool comprehension = false;
  };

  const python::Node& node(NodeId id) const { return r_->tree[id]; }

  void read(const std::string& name, std::vector<std::string> attrs) {
    for (auto it = scopes_.rbegin(); it != scopes_.rend(); ++it) {
      if (it->globals.count(name)) break;
      if (const auto imp = it->imports.find(name); imp != it->imports.end()) {
        record({name, std::move(attrs), imp->second});
        return;
      }
      if (it->bound.count(name)) return;
    }
    record({name, std::move(attrs), std::nullopt});
  }

  void record(Reference ref) {
    auto key = ref.root;
    for (const auto& a : ref.attrs) key += "." + a;
    if (ref.local_import) key += "#local";
    if (seen_.insert(key).second) refs_.push_back(std::move(ref));
  }

  void bind(const std::string& name) {
    if (scopes_.empty()) return;
    auto& s = scopes_.back();
    if (s.globals.count(name)) return;
    s.imports.erase(name);
    s.bound.insert(name);
  }

  void bind_target(NodeId id) {
    if (id == kNoNode) return;
    const auto& n = node(id);
    switch (n.kind) {
      case NodeKind::Name:
        bind(n.value);
        break;
      case NodeKind::Tuple:
      case NodeKind::List:
      case NodeKind::Starred:
        for (const NodeId c : n.children) bind_target(c);
        break;
      default:
        expr(id);
        break;
    }
  }

  void push_parameters(NodeId params) {
    Scope s;
    if (params != kNoNode) {
      for (const NodeId p : node(params).children) {
        if (!node(p).value.empty()) s.bound.insert(node(p).value);
      }
    }
    scopes_.push_back(std::move(s));
  }

  void parameter_defaults(NodeId params) {
    if (params == kNoNode) return;
    for (const NodeId p : node(params).children) {
      const auto& c = node(p).children;
      if (c.size() > 1) expr(c[1]);  // annotations (c[0]) are never walked
    }
  }

  void decorators(NodeId decos) {
    if (decos == kNoNode) return;
    for (const NodeId d : node(decos).children) expr(d);
  }

  void function_def(NodeId def, bool bind_name) {
    const auto& n = node(def);
    decorators(n.children[0]);
    parameter_defaults(n.children[1]);
    if (bind_name) bind(n.value);
    push_parameters(n.children[1]);
    block(n.children.back());
    scopes_.pop_back();
  }

  void klass(NodeId def, bool bind_name) {
    const auto& n = node(def);
    decorators(n.children[0]);
    if (n.children.size() > 2 && n.children[1] != kNoNode) {
      for (const NodeId a : node(n.children[1]).children) expr(a);
    }
    if (bind_name) bind(n.value);
    scopes_.emplace_back();
    block(n.children.back());
    scopes_.pop_back();
  }

  void block(NodeId id) {
    if (id == kNoNode) return;
    if (node(id).kind != NodeKind::Block) {
      stmt(id);
      return;
    }
    for (const NodeId s : node(id).children) stmt(s);
  }

  void stmt(NodeId id) {
    if (id == kNoNode) return;
    const auto& n = node(id);
    const auto& c = n.children;
    switch (n.kind) {
      case NodeKind::FunctionDef:
        function_def(id, true);
        break;
      case NodeKind::ClassDef:
        klass(id, true);
        break;
      case NodeKind::Block:
        block(id);
        break;
      case NodeKind::If:
      case NodeKind::While:
        expr(c[0]);
        block(c[1]);
        if (c.size() > 2) block(c[2]);
        break;
      case NodeKind::For:
        expr(c[1]);
        bind_target(c[0]);
        block(c[2]);
        if (c.size() > 3) block(c[3]);
        break;
      case NodeKind::Try:
        for (const NodeId part : c) stmt(part);
        break;
      case NodeKind::ExceptHandler:
        expr(c[0]);
        if (!n.value.empty()) bind(n.value);
        block(c[1]);
        break;
      case NodeKind::With:
        for (std::size_t k = 0; k + 1 < c.size(); ++k) {
          const auto& item = node(c[k]).children;
          expr(item[0]);
          if (item.size() > 1) bind_target(item[1]);
        }
        block(c.back());
        break;
      case NodeKind::Assign:
        expr(c.back());
        for (std::size_t k = 0; k + 1 < c.size(); ++k) bind_target(c[k]);
        break;
      case NodeKind::AugAssign:
        expr(c[1]);
        expr(c[0]);
        if (node(c[0]).kind == NodeKind::Name) bind(node(c[0]).value);
        break;
      case NodeKind::AnnAssign:
        if (c.size() > 2) expr(c[2]);
        if (node(c[0]).kind == NodeKind::Name) bind(node(c[0]).value);
        else expr(c[0]);
        break;
      case NodeKind::Import:
      case NodeKind::ImportFrom:
        if (!scopes_.empty()) {
          std::map<std::string, Binding> bindings;
          local_import_(*r_, id, bindings);
          for (auto& [name, b] : bindings) {
            scopes_.back().bound.erase(name);
            scopes_.back().imports[name] = std::move(b);
          }
        }
        break;
      case NodeKind::Global:
        for (const NodeId g : c) {
          if (!scopes_.empty()) scopes_.back().globals.insert(node(g).value);
        }
        break;
      case NodeKind::Nonlocal:
        for (const NodeId g : c) bind(node(g).value);
        break;
      case NodeKind::Pass:
      case NodeKind::Break:
      case NodeKind::Continue:
      case NodeKind::Error:
        break;
      default:
        for (const NodeId e : c) expr(e);
        break;
    }
  }

  void comprehension(const std::vector<NodeId>& elts, const std::vector<NodeId>& comps) {
    if (comps.empty()) return;
    expr(node(comps[0]).children[1]);
    Scope s;
    s.comprehension = true;
    scopes_.push_back(std::move(s));
    for (std::size_t k = 0; k < comps.size(); ++k) {
      const auto& cc = node(comps[k]).children;
      if (k > 0) expr(cc[1]);
      bind_target(cc[0]);
      for (std::size_t f = 2; f < cc.size(); ++f) expr(cc[f]);
    }
    for (const NodeId e : elts) expr(e);
    scopes_.pop_back();
  }

  void fstring(const std::string& literal) {
    for (const auto& e : source::fstring_expressions(literal)) {
      const auto inner = python::parse("(" + e + "\n)\n");
      if (!inner->ok()) continue;
      const auto& stmts = inner->tree[inner->tree.root()].children;
      if (stmts.empty()) continue;
      const ParseResult* outer = r_;
      r_ = inner.get();
      stmt(stmts[0]);
      r_ = outer;
    }
  }

  void expr(NodeId id) {
    if (id == kNoNode) return;
    const auto& n = node(id);
    const auto& c = n.children;
    switch (n.kind) {
      case NodeKind::Name:
        read(n.value, {});
        break;
      case NodeKind::Attribute: {
        std::vector<std::string> attrs;
        NodeId cur = id;
        while (node(cur).kind == NodeKind::Attribute) {
          attrs.push_back(node(cur).value);
          cur = node(cur).children[0];
        }
        std::reverse(attrs.begin(), attrs.end());
        if (node(cur).kind == NodeKind::Name) read(node(cur).value, std::move(attrs));
        else expr(cur);
        break;
      }
      case NodeKind::Lambda:
        parameter_defaults(c[0]);
        push_parameters(c[0]);
        expr(c[1]);
        scopes_.pop_back();
        break;
      case NodeKind::ListComp:
      case NodeKind::SetComp:
      case NodeKind::GeneratorExp:
      case NodeKind::DictComp: {
        const std::size_t head = n.kind == NodeKind::DictComp ? 2 : 1;
        comprehension({c.begin(), c.begin() + static_cast<long>(std::min(head, c.size()))},
                      {c.begin() + static_cast<long>(std::min(head, c.size())), c.end()});
        break;
      }
      case NodeKind::NamedExpr: {
        expr(c[1]);
        for (auto it = scopes_.rbegin(); it != scopes_.rend(); ++it) {
          if (!it->comprehension) {
            it->bound.insert(node(c[0]).value);
            break;
          }
        }
        break;
      }
      case NodeKind::Constant:
        if (static_cast<ConstantKind>(n.flag) == ConstantKind::FString) fstring(n.value);
        break;
      default:
        for (const NodeId e : c) expr(e);
        break;
    }
  }

  const ParseResult* r_ = nullptr;
  LocalImportFn local_import_;
  std::vector<Scope> scopes_;
  std::vector<Reference> refs_;
  std::set<std::string> seen_;
};

// ---- extraction -------------------------------------------------------------

NodeId find_target_node(const ParseResult& r, const std::string& qualified) {
  const auto dot = qualified.find('.');
  const std::string outer = qualified.substr(0, dot);
  NodeId found = kNoNode;
  for (const NodeId s : r.tree[r.tree.root()].children) {
    const auto& n = r.tree[s];
    if (n.value != outer) continue;
    if (dot == std::string::npos && n.kind == NodeKind::FunctionDef) found = s;
    if (dot != std::string::npos && n.kind == NodeKind::ClassDef) {
      const std::string inner = qualified.substr(dot + 1);
      for (const NodeId m : r.tree[n.children.back()].children) {
        if (r.tree[m].kind == NodeKind::FunctionDef && r.tree[m].value == inner) found = m;
      }
    }
  }
  return found;
}

class Extractor {
 public:
  Extractor(const RepositorySnapshot& g, std::size_t target_module)
      : g_(g), resolver_(g, g.import_maps), target_module_(target_module) {}

  std::vector<DependencyRecord> run(const FunctionRecord& target, NodeId def, int max_depth) {
    excluded_ = {target_module_, target.qualified_name.substr(0, target.qualified_name.find('.'))};
    std::vector<Key> frontier = visit(target_module_, [&](ReferenceWalker& w) { w.function(*tree(target_module_), def); }, 1);
    for (int depth = 2; depth <= max_depth && !frontier.empty(); ++depth) {
      std::vector<Key> next;
      for (const auto& key : frontier) {
        const Definition* d = g_.modules[key.first].find_definition(key.second);
        if (!d) continue;
        const ParseResult& r = *tree(key.first);
        const NodeId s = r.tree[r.tree.root()].children[d->statement_index];
        auto found = visit(key.first, [&](ReferenceWalker& w) {
          switch (r.tree[s].kind) {
            case NodeKind::FunctionDef:
              w.function(r, s);
              break;
            case NodeKind::ClassDef:
              w.class_def(r, s);
              break;
            default:
              w.statement(r, s);
              break;
          }
        }, depth);
        std::move(found.begin(), found.end(), std::back_inserter(next));
      }
      frontier = std::move(next);
    }
    return records();
  }

 private:
  using Key = std::pair<std::size_t, std::string>;  // defining module, definition name

  struct Found {
    std::string display;
    int depth = 1;
    std::optional<std::size_t> import_index;
    std::size_t first_seen = 0;
  };

  const ParseResult* tree(std::size_t module) const { return g_.modules[module].tree.get(); }

  template <typename Walk>
  std::vector<Key> visit(std::size_t module, Walk&& walk, int depth) {
    const auto& m = g_.modules[module];
    ReferenceWalker walker([&](const ParseResult& r, NodeId stmt, std::map<std::string, Binding>& out) {
      const WildcardFn none = [](std::size_t) { return std::vector<std::string>{}; };
      bind_statement(g_, m, r, stmt, 0, 0, none, out);
    });
    walk(walker);
    std::vector<Key> added;
    for (const auto& ref : walker.take()) {
      std::optional<std::size_t> import_index;
      Resolved res;
      if (ref.local_import) {
        res = resolver_.follow(*ref.local_import);
      } else {
        const Definition* def = m.find_definition(ref.root);
        const auto& bindings = g_.import_maps[module].bindings;
        const auto it = bindings.find(ref.root);
        const Binding* b = it == bindings.end() ? nullptr : &it->second;
        if (def && (!b || def->statement_index > b->statement_index)) {
          res = {BindingKind::Definition, module, m.id, ref.root};
        } else if (b) {
          res = resolver_.follow(*b);
          if (module == target_module_) import_index = b->import_index;
        } else {
          continue;  // builtin or unbound
        }
      }
      std::string display = ref.root;
      if (res.kind == BindingKind::Module) {
        if (ref.attrs.empty()) continue;
        res = resolver_.descend(res.module_id, ref.attrs);
        display = last_attr_resolved(res, ref.attrs);
      }
      if (res.kind != BindingKind::Definition) continue;
      Key key{res.module, res.name};
      if (key == excluded_) continue;
      auto [it, inserted] = found_.try_emplace(key);
      if (inserted) {
        it->second = Found{display, depth, import_index, found_.size()};
        added.push_back(key);
      } else if (import_index && (!it->second.import_index || *import_index < *it->second.import_index)) {
        it->second.import_index = import_index;
      }
    }
    return added;
  }

  static std::string last_attr_resolved(const Resolved& res, const std::vector<std::string>& attrs) {
    for (const auto& a : attrs) {
      if (a == res.name) return a;
    }
    return attrs.back();
  }

  std::vector<DependencyRecord> records() {
    // Import statements of the target module that bring a definition in.
    const auto& bindings = g_.import_maps[target_module_].bindings;
    for (const auto& [name, b] : bindings) {
      if (!b.resolved() || b.kind != BindingKind::Definition) continue;
      const auto idx = g_.index_of(b.resolved_origin);
      if (!idx) continue;
      const auto it = found_.find({*idx, b.resolved_name});
      if (it == found_.end()) continue;
      auto& ii = it->second.import_index;
      if (!ii || b.import_index < *ii) ii = b.import_index;
    }

    struct Row {
      int bucket;
      std::size_t import_index;
      std::size_t module;
      std::size_t offset;
      DependencyRecord record;
    };
    std::vector<Row> rows;
    for (const auto& [key, f] : found_) {
      const auto& m = g_.modules[key.first];
      const Definition* d = m.find_definition(key.second);
      if (!d) continue;
      DependencyRecord rec;
      rec.name = f.display;
      rec.kind = d->kind;
      rec.origin = m.id;
      rec.locality = key.first == target_module_ ? Locality::InFile : Locality::CrossFile;
      rec.definition_text = std::string(m.definition_text(*d));
      if (const auto parts = source::definition_parts(rec.definition_text)) {
        rec.signature = parts->signature;
        rec.docstring = parts->docstring;
      }
      rec.depth = f.depth;
      const int bucket = rec.locality == Locality::InFile ? 2 : (f.import_index ? 0 : 1);
      rows.push_back({bucket, f.import_index.value_or(0), key.first, d->span.begin, std::move(rec)});
    }
    std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
      return std::tie(a.bucket, a.import_index, a.module, a.offset) <
             std::tie(b.bucket, b.import_index, b.module, b.offset);
    });
    std::vector<DependencyRecord> out;
    out.reserve(rows.size());
    for (auto& row : rows) out.push_back(std::move(row.record));
    return out;
  }

  const RepositorySnapshot& g_;
  NameResolver resolver_;
  std::size_t target_module_;
  Key excluded_;
  std::map<Key, Found> found_;
};

}  // namespace

RepositorySnapshot build_repo_graph(const fs::path& root) { return build_graph(root, true); }
RepositorySnapshot build_repo_graph_serial(const fs::path& root) { return build_graph(root, false); }

ImportMap resolve_imports(const SourceModule& module, const RepositorySnapshot& graph) {
  const auto idx = graph.index_of(module.id);
  if (!idx) return ImportMap{module.id, {}};
  if (graph.import_maps.size() == graph.modules.size()) return graph.import_maps[*idx];
  return ImportMapBuilder(graph).build_one(*idx);
}

std::vector<DependencyRecord> extract_dependencies(const FunctionRecord& target, const RepositorySnapshot& graph,
                                                   int max_depth) {
  if (max_depth < 1 || max_depth > kMaxDependencyDepth) {
    throw DependencyError("max_depth must be in [1, " + std::to_string(kMaxDependencyDepth) + "], got " +
                          std::to_string(max_depth));
  }
  const auto idx = graph.index_of(target.module_id);
  if (!idx || !graph.modules[*idx].tree) {
    throw DependencyError("target module not in graph: " + target.module_id);
  }
  if (graph.import_maps.size() != graph.modules.size()) throw DependencyError("graph has no resolved imports");
  const NodeId def = find_target_node(*graph.modules[*idx].tree, target.qualified_name);
  if (def == kNoNode) {
    throw DependencyError("target not in graph: " + target.module_id + ":" + target.qualified_name);
  }
  return Extractor(graph, *idx).run(target, def, max_depth);
}

std::vector<std::vector<DependencyRecord>> extract_all_dependencies(const std::vector<FunctionRecord>& targets,
                                                                    const RepositorySnapshot& graph, int max_depth) {
  std::vector<std::vector<DependencyRecord>> out(targets.size());
  std::vector<std::string> errors(targets.size());
  const auto count = static_cast<std::ptrdiff_t>(targets.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    try {
      out[i] = extract_dependencies(targets[i], graph, max_depth);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  }
  for (const auto& e : errors) {
    if (!e.empty()) throw DependencyError(e);
  }
  return out;
}

std::vector<std::vector<DependencyRecord>> extract_all_dependencies_serial(const std::vector<FunctionRecord>& targets,
                                                                           const RepositorySnapshot& graph,
                                                                           int max_depth) {
  std::vector<std::vector<DependencyRecord>> out;
  out.reserve(targets.size());
  for (const auto& t : targets) out.push_back(extract_dependencies(t, graph, max_depth));
  return out;
}

}  // namespace depbench
