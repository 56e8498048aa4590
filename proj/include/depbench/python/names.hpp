#pragma once

#include <string_view>

namespace depbench::python {

// Hard keywords of Python 3.10+. Soft keywords (match, case, type, _) are
// identifiers as far as this package is concerned.
bool is_keyword(std::string_view word);

// Snapshot of `dir(builtins)` (public names).
bool is_builtin(std::string_view name);

// Snapshot of `sys.stdlib_module_names` (top-level names only).
bool is_stdlib_module(std::string_view top_level_name);

// Modules whose exports are treated as typing objects.
bool is_typing_module(std::string_view module_name);

}  // namespace depbench::python
