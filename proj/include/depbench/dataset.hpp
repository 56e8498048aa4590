#pragma once

#include <filesystem>
#include <vector>

#include "depbench/types.hpp"

namespace depbench {

/// Writes one JSON record per line. Every sample is validated first; the
/// first violation throws SchemaError naming the sample and nothing is written.
void save_dataset(const std::vector<BenchmarkSample>& samples, const std::filesystem::path& destination);

/// Reads a file written by save_dataset and re-checks every invariant.
/// Throws SchemaError carrying the 1-based line of the bad record.
std::vector<BenchmarkSample> load_dataset(const std::filesystem::path& source);

/// Invariant check shared by save and load. `line` is only used in messages.
void validate_sample(const BenchmarkSample& sample, std::size_t line = 0);

/// Directory holding expected-value blobs for a dataset file:
/// `<dataset>.blobs/`, one `<test_id>.pkl` per fixed test.
std::filesystem::path blob_dir_for(const std::filesystem::path& dataset);

}  // namespace depbench
