#pragma once

#include <algorithm>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "depbench/pipeline.hpp"
#include "paths.hpp"

namespace depbench::testkit {

/// Samples extracted from the strutil fixture with the default config.
inline const std::vector<BenchmarkSample>& strutil_samples() {
  static const std::vector<BenchmarkSample> samples = extract_samples(strutil_repo(), RunConfig{});
  return samples;
}

inline const BenchmarkSample& strutil_sample(std::string_view qualified_name) {
  const auto& all = strutil_samples();
  const auto it = std::find_if(all.begin(), all.end(),
                               [&](const BenchmarkSample& s) { return s.target.qualified_name == qualified_name; });
  if (it == all.end()) throw std::runtime_error("no fixture sample " + std::string(qualified_name));
  return *it;
}

}  // namespace depbench::testkit
