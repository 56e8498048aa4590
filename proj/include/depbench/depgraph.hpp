#pragma once

#include <filesystem>
#include <vector>

#include "depbench/repository.hpp"
#include "depbench/types.hpp"

namespace depbench {

/// Parses every `.py` file under `root` (per-file work runs under OpenMP),
/// then resolves imports in a single-threaded pass. Unreadable files become
/// modules with `load_error` set.
RepositorySnapshot build_repo_graph(const std::filesystem::path& root);
/// Same result as build_repo_graph, one file at a time.
RepositorySnapshot build_repo_graph_serial(const std::filesystem::path& root);

/// Import bindings of one module, last binding wins in file order. Never
/// throws: anything unresolvable inside the repository is External.
ImportMap resolve_imports(const SourceModule& module, const RepositorySnapshot& graph);

/// Repository definitions referenced by `target`, transitively up to
/// `max_depth`. Ordering: cross-file records by the target module's import
/// statement that brings them in, then by declaration order in their origin;
/// cross-file records with no such import by module order; in-file records
/// last, by declaration order.
/// Throws DependencyError if the target is not in the graph or
/// `max_depth` is outside [1, kMaxDependencyDepth].
std::vector<DependencyRecord> extract_dependencies(const FunctionRecord& target, const RepositorySnapshot& graph,
                                                   int max_depth = 1);

/// extract_dependencies over many targets, one OpenMP task per target.
std::vector<std::vector<DependencyRecord>> extract_all_dependencies(const std::vector<FunctionRecord>& targets,
                                                                    const RepositorySnapshot& graph, int max_depth);
std::vector<std::vector<DependencyRecord>> extract_all_dependencies_serial(const std::vector<FunctionRecord>& targets,
                                                                           const RepositorySnapshot& graph,
                                                                           int max_depth);

}  // namespace depbench
