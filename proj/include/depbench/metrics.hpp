#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "depbench/source.hpp"
#include "depbench/types.hpp"

namespace depbench {

/// |D_g ∩ D_s| / |D_s| by exact name equality; nullopt when D_s is empty.
std::optional<double> dir(const IdentifierSet& generated, const std::set<std::string>& dependency_names);
/// DIR of a candidate's text against a sample's D_s.
std::optional<double> dir_of(std::string_view generated_text, const std::set<std::string>& dependency_names);

struct PassAtKInput {
  int n = 0;
  int c = 0;
  int k = 0;
};

/// 1 - prod_{i=n-c+1}^{n} (1 - k/i); exactly 1 when n - c < k.
/// Throws MetricError unless 0 <= c <= n and 1 <= k <= n.
double pass_at_k(PassAtKInput in);
inline double pass_at_k(int n, int c, int k) { return pass_at_k(PassAtKInput{n, c, k}); }

/// Fraction of records whose generated_text has an empty body; 0 for no records.
double empty_rate(const std::vector<GenerationRecord>& records);

struct AggregateSummary {
  std::map<int, double> pass_at_k;
  std::optional<double> mean_dir;  // over samples whose DIR is defined
  double empty_rate = 0.0;
  std::size_t samples = 0;
  std::size_t samples_with_dir = 0;
  std::size_t candidates_per_sample = 0;
  std::size_t records = 0;
};

using RecordsBySample = std::map<std::string, std::vector<GenerationRecord>>;

/// pass@k and DIR are means over samples in sample-id order. A sample's DIR
/// is the mean of its candidates' defined DIR values. Per-sample terms are
/// computed in parallel and summed serially, so the result equals
/// aggregate_serial bit for bit.
/// Throws MetricError when samples have different candidate counts or a k exceeds n.
AggregateSummary aggregate(const RecordsBySample& records, const std::vector<int>& ks);
AggregateSummary aggregate_serial(const RecordsBySample& records, const std::vector<int>& ks);

RecordsBySample group_by_sample(const std::vector<GenerationRecord>& records);

/// Plain-text table: one header row and one value row, columns pass@k... DIR Empty Samples.
std::string render_table(const AggregateSummary& summary);
std::string summary_json(const AggregateSummary& summary);
/// Writes summary.json and table.txt into `out_dir`.
void write_report(const AggregateSummary& summary, const std::filesystem::path& out_dir);

}  // namespace depbench
