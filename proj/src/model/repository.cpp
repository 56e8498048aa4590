#include "depbench/repository.hpp"

#include <algorithm>

namespace depbench {

const Definition* SourceModule::find_definition(std::string_view name) const {
  for (const auto& d : top_level_definitions) {
    if (d.name == name) return &d;
  }
  return nullptr;
}

std::string_view SourceModule::definition_text(const Definition& d) const {
  if (!tree) return {};
  return std::string_view(tree->source).substr(d.span.begin, d.span.end - d.span.begin);
}

std::string module_id_for(std::string_view relative_path) {
  std::string p(relative_path);
  std::replace(p.begin(), p.end(), '\\', '/');
  if (p.size() >= 3 && p.compare(p.size() - 3, 3, ".py") == 0) p.resize(p.size() - 3);
  constexpr std::string_view kInit = "__init__";
  if (p.size() > kInit.size() && p.compare(p.size() - kInit.size(), kInit.size(), kInit) == 0 &&
      p[p.size() - kInit.size() - 1] == '/') {
    p.resize(p.size() - kInit.size() - 1);
  }
  std::replace(p.begin(), p.end(), '/', '.');
  return p;
}

void RepositorySnapshot::reindex() {
  by_id_.clear();
  namespace_packages_.clear();
  for (std::size_t i = 0; i < modules.size(); ++i) by_id_.emplace(modules[i].id, i);
  for (const auto& m : modules) {
    for (auto dot = m.id.find('.'); dot != std::string::npos; dot = m.id.find('.', dot + 1)) {
      const auto prefix = m.id.substr(0, dot);
      if (!by_id_.count(prefix)) namespace_packages_.insert(prefix);
    }
  }
}

std::optional<std::size_t> RepositorySnapshot::index_of(std::string_view id) const {
  const auto it = by_id_.find(id);
  if (it == by_id_.end()) return std::nullopt;
  return it->second;
}

const SourceModule* RepositorySnapshot::module(std::string_view id) const {
  const auto i = index_of(id);
  return i ? &modules[*i] : nullptr;
}

bool RepositorySnapshot::is_namespace_package(std::string_view id) const { return namespace_packages_.count(id) > 0; }

std::optional<std::string> RepositorySnapshot::lookup_module(std::string_view dotted) const {
  if (by_id_.count(dotted) || is_namespace_package(dotted)) return std::string(dotted);
  const std::string top = root.filename().string();
  if (!top.empty() && dotted.size() > top.size() + 1 && dotted.substr(0, top.size()) == top &&
      dotted[top.size()] == '.') {
    const auto rest = dotted.substr(top.size() + 1);
    if (by_id_.count(rest) || is_namespace_package(rest)) return std::string(rest);
  }
  return std::nullopt;
}

}  // namespace depbench
