#include "depbench/metrics.hpp"

#include <cstdio>
#include <fstream>

#include "depbench/error.hpp"
#include "json.hpp"

namespace depbench {

std::optional<double> dir(const IdentifierSet& generated, const std::set<std::string>& dependency_names) {
  if (dependency_names.empty()) return std::nullopt;
  std::size_t hit = 0;
  for (const auto& name : dependency_names) hit += generated.contains(name) ? 1 : 0;
  return static_cast<double>(hit) / static_cast<double>(dependency_names.size());
}

std::optional<double> dir_of(std::string_view generated_text, const std::set<std::string>& dependency_names) {
  if (dependency_names.empty()) return std::nullopt;
  return dir(collect_identifiers(generated_text), dependency_names);
}

double pass_at_k(PassAtKInput in) {
  if (in.n < 0 || in.c < 0 || in.c > in.n) {
    throw MetricError("pass@k needs 0 <= c <= n, got n=" + std::to_string(in.n) + " c=" + std::to_string(in.c));
  }
  if (in.k < 1 || in.k > in.n) {
    throw MetricError("pass@k needs 1 <= k <= n, got n=" + std::to_string(in.n) + " k=" + std::to_string(in.k));
  }
  if (in.n - in.c < in.k) return 1.0;
  double prod = 1.0;
  for (int i = in.n - in.c + 1; i <= in.n; ++i) prod *= 1.0 - static_cast<double>(in.k) / static_cast<double>(i);
  return 1.0 - prod;
}

double empty_rate(const std::vector<GenerationRecord>& records) {
  if (records.empty()) return 0.0;
  std::size_t empty = 0;
  for (const auto& r : records) empty += detect_empty_body(r.generated_text) ? 1 : 0;
  return static_cast<double>(empty) / static_cast<double>(records.size());
}

namespace {

struct SampleTerms {
  std::vector<double> pass;  // one per k
  std::optional<double> dir;
  std::size_t empty = 0;
};

SampleTerms sample_terms(const std::vector<GenerationRecord>& recs, const std::vector<int>& ks) {
  SampleTerms t;
  const int n = static_cast<int>(recs.size());
  int c = 0;
  double dir_acc = 0.0;
  int dir_count = 0;
  for (const auto& r : recs) {
    c += r.passed_all ? 1 : 0;
    if (r.dir_value) {
      dir_acc += *r.dir_value;
      ++dir_count;
    }
    t.empty += detect_empty_body(r.generated_text) ? 1 : 0;
  }
  for (const int k : ks) t.pass.push_back(pass_at_k(n, c, k));
  if (dir_count > 0) t.dir = dir_acc / dir_count;
  return t;
}

std::size_t common_n(const RecordsBySample& records, const std::vector<int>& ks) {
  std::optional<std::size_t> n;
  for (const auto& [id, recs] : records) {
    if (n && *n != recs.size()) {
      throw MetricError("samples have different candidate counts: " + std::to_string(*n) + " vs " +
                        std::to_string(recs.size()) + " (sample " + id + ")");
    }
    n = recs.size();
  }
  for (const int k : ks) {
    if (n && (k < 1 || static_cast<std::size_t>(k) > *n)) {
      throw MetricError("k=" + std::to_string(k) + " outside [1, n=" + std::to_string(*n) + "]");
    }
  }
  return n.value_or(0);
}

AggregateSummary reduce(const std::vector<SampleTerms>& terms, const std::vector<int>& ks, std::size_t n) {
  AggregateSummary s;
  s.samples = terms.size();
  s.candidates_per_sample = n;
  s.records = n * terms.size();
  std::vector<double> pass_acc(ks.size(), 0.0);
  double dir_acc = 0.0;
  std::size_t empty = 0;
  for (const auto& t : terms) {
    for (std::size_t j = 0; j < ks.size(); ++j) pass_acc[j] += t.pass[j];
    if (t.dir) {
      dir_acc += *t.dir;
      ++s.samples_with_dir;
    }
    empty += t.empty;
  }
  for (std::size_t j = 0; j < ks.size(); ++j) {
    s.pass_at_k[ks[j]] = terms.empty() ? 0.0 : pass_acc[j] / static_cast<double>(terms.size());
  }
  if (s.samples_with_dir > 0) s.mean_dir = dir_acc / static_cast<double>(s.samples_with_dir);
  s.empty_rate = s.records == 0 ? 0.0 : static_cast<double>(empty) / static_cast<double>(s.records);
  return s;
}

}  // namespace

AggregateSummary aggregate(const RecordsBySample& records, const std::vector<int>& ks) {
  const auto n = common_n(records, ks);
  std::vector<const std::vector<GenerationRecord>*> groups;
  for (const auto& [id, recs] : records) groups.push_back(&recs);
  std::vector<SampleTerms> terms(groups.size());
  const auto count = static_cast<std::ptrdiff_t>(groups.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < count; ++i) terms[i] = sample_terms(*groups[i], ks);
  return reduce(terms, ks, n);
}

AggregateSummary aggregate_serial(const RecordsBySample& records, const std::vector<int>& ks) {
  const auto n = common_n(records, ks);
  std::vector<SampleTerms> terms;
  for (const auto& [id, recs] : records) terms.push_back(sample_terms(recs, ks));
  return reduce(terms, ks, n);
}

RecordsBySample group_by_sample(const std::vector<GenerationRecord>& records) {
  RecordsBySample out;
  for (const auto& r : records) out[r.sample_id].push_back(r);
  for (auto& [id, recs] : out) {
    std::stable_sort(recs.begin(), recs.end(), [](const GenerationRecord& a, const GenerationRecord& b) {
      return a.candidate_index < b.candidate_index;
    });
  }
  return out;
}

std::string render_table(const AggregateSummary& s) {
  auto cell = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", 100.0 * v);
    return std::string(buf);
  };
  std::vector<std::pair<std::string, std::string>> cols;
  for (const auto& [k, v] : s.pass_at_k) cols.emplace_back("pass@" + std::to_string(k), cell(v));
  cols.emplace_back("DIR", s.mean_dir ? cell(*s.mean_dir) : "n/a");
  cols.emplace_back("Empty", cell(s.empty_rate));
  cols.emplace_back("Samples", std::to_string(s.samples));
  std::string head, row;
  for (const auto& [h, v] : cols) {
    const auto width = std::max(h.size(), v.size()) + 2;
    head += h + std::string(width - h.size(), ' ');
    row += v + std::string(width - v.size(), ' ');
  }
  while (!head.empty() && head.back() == ' ') head.pop_back();
  while (!row.empty() && row.back() == ' ') row.pop_back();
  return head + "\n" + row + "\n";
}

std::string summary_json(const AggregateSummary& s) {
  nlohmann::json j;
  for (const auto& [k, v] : s.pass_at_k) j["pass_at_k"][std::to_string(k)] = v;
  j["mean_dir"] = s.mean_dir ? nlohmann::json(*s.mean_dir) : nlohmann::json(nullptr);
  j["empty_rate"] = s.empty_rate;
  j["samples"] = s.samples;
  j["samples_with_dir"] = s.samples_with_dir;
  j["candidates_per_sample"] = s.candidates_per_sample;
  j["records"] = s.records;
  return j.dump(2) + "\n";
}

void write_report(const AggregateSummary& summary, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  std::ofstream(out_dir / "summary.json") << summary_json(summary);
  std::ofstream(out_dir / "table.txt") << render_table(summary);
}

}  // namespace depbench
