#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "depbench/python/token.hpp"

namespace depbench::python {

struct LexError {
  Span span;
  std::string message;
};

struct TokenStream {
  std::vector<Token> tokens;
  std::vector<LexError> errors;
};

// Tokenizes Python 3 source. Never throws: malformed input yields Error
// tokens and entries in `errors`. The stream always ends with EndMarker.
TokenStream tokenize(std::string_view source);

}  // namespace depbench::python
