#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "depbench/python/parser.hpp"
#include "depbench/types.hpp"

namespace depbench {

struct Definition {
  std::string name;
  DefinitionKind kind = DefinitionKind::Function;
  Span span;  // from the start of the first line (decorators included) to the last token
  std::size_t statement_index = 0;  // position among the module's top-level statements
};

struct SourceModule {
  std::string id;    // dotted; `pkg/__init__.py` is `pkg`
  std::string path;  // repo-relative, forward slashes
  bool is_package = false;
  std::vector<Definition> top_level_definitions;
  std::vector<std::string> import_statements;
  std::vector<std::size_t> import_statement_indices;  // statement index of each import statement
  std::shared_ptr<const python::ParseResult> tree;  // null when the file could not be read
  std::vector<python::ParseError> parse_errors;
  std::string load_error;

  bool parse_failed() const { return !tree || !parse_errors.empty(); }
  const Definition* find_definition(std::string_view name) const;
  std::string_view definition_text(const Definition& d) const;
};

enum class BindingKind { Module, Definition, External };

/// What an import statement binds a local name to. `origin`/`original_name`
/// name the immediate source; `resolved_*` follow re-export chains to the
/// defining module.
struct Binding {
  BindingKind kind = BindingKind::External;
  std::string origin;
  std::string original_name;
  std::optional<DefinitionKind> kind_hint;
  std::string resolved_origin;
  std::string resolved_name;
  std::size_t statement_index = 0;
  std::size_t import_index = 0;  // index into SourceModule::import_statements

  bool resolved() const { return !resolved_origin.empty(); }
};

struct ImportMap {
  std::string module_id;
  std::map<std::string, Binding> bindings;
};

struct ImportEdge {
  std::string importer;
  std::string imported;
  bool external = false;
  std::vector<std::string> names;

  friend bool operator==(const ImportEdge&, const ImportEdge&) = default;
};

struct RepositorySnapshot {
  std::filesystem::path root;
  std::vector<SourceModule> modules;  // sorted by path
  std::vector<ImportEdge> import_edges;
  std::vector<ImportMap> import_maps;  // parallel to `modules`

  const SourceModule* module(std::string_view id) const;
  std::optional<std::size_t> index_of(std::string_view id) const;
  /// Directory levels of module ids that have no `__init__.py` of their own.
  bool is_namespace_package(std::string_view id) const;
  /// Exact id, or the id with the repository directory name stripped.
  std::optional<std::string> lookup_module(std::string_view dotted) const;

  void reindex();

 private:
  std::map<std::string, std::size_t, std::less<>> by_id_;
  std::set<std::string, std::less<>> namespace_packages_;
};

/// Maps a repo-relative `.py` path to a dotted module id.
std::string module_id_for(std::string_view relative_path);

}  // namespace depbench
