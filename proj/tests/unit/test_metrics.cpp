#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <unistd.h>

#include "depbench/error.hpp"
#include "depbench/metrics.hpp"
#include "depbench/pipeline.hpp"
#include "depbench/source.hpp"
#include "paths.hpp"

using namespace depbench;
namespace fs = std::filesystem;

namespace {

// 1 - C(n-c, k) / C(n, k) with exact integer binomials.
double exact_pass_at_k(int n, int c, int k) {
  auto binom = [](int a, int b) {
    if (b < 0 || b > a) return 0.0L;
    long double r = 1;
    for (int i = 1; i <= b; ++i) r = r * (a - b + i) / i;
    return r;
  };
  return static_cast<double>(1.0L - binom(n - c, k) / binom(n, k));
}

GenerationRecord rec(const std::string& id, int idx, bool pass, std::optional<double> dir,
                     const std::string& text = "def f():\n    return 1\n") {
  GenerationRecord r;
  r.sample_id = id;
  r.candidate_index = idx;
  r.generated_text = text;
  r.per_test_outcome = {pass ? TestOutcome::Pass : TestOutcome::Fail};
  r.passed_all = pass;
  r.dir_value = dir;
  return r;
}

}  // namespace

TEST(PassAtK, KnownValues) {
  EXPECT_DOUBLE_EQ(pass_at_k(10, 0, 1), 0.0);
  EXPECT_DOUBLE_EQ(pass_at_k(10, 10, 1), 1.0);
  EXPECT_NEAR(pass_at_k(10, 3, 1), 0.3, 1e-15);
  EXPECT_NEAR(pass_at_k(10, 1, 5), 0.5, 1e-15);
  EXPECT_DOUBLE_EQ(pass_at_k(5, 3, 3), 1.0);  // n - c < k
}

TEST(PassAtK, AgreesWithBinomialForm) {
  for (int n = 1; n <= 40; ++n) {
    for (int c = 0; c <= n; ++c) {
      for (int k = 1; k <= n; ++k) EXPECT_NEAR(pass_at_k(n, c, k), exact_pass_at_k(n, c, k), 1e-12);
    }
  }
}

TEST(PassAtK, MonotoneInK) {
  for (int c = 0; c <= 10; ++c) {
    for (int k = 1; k < 10; ++k) EXPECT_LE(pass_at_k(10, c, k), pass_at_k(10, c, k + 1));
  }
}

TEST(PassAtK, RejectsBadInput) {
  EXPECT_THROW(pass_at_k(5, 6, 1), MetricError);
  EXPECT_THROW(pass_at_k(5, -1, 1), MetricError);
  EXPECT_THROW(pass_at_k(5, 1, 0), MetricError);
  EXPECT_THROW(pass_at_k(5, 1, 6), MetricError);
}

TEST(Dir, Formula) {
  IdentifierSet g{{"a", "b", "x"}};
  EXPECT_EQ(dir(g, {"a", "b", "c", "d"}), 0.5);
  EXPECT_EQ(dir(g, {}), std::nullopt);
  EXPECT_EQ(dir(IdentifierSet{}, {"a"}), 0.0);
  EXPECT_EQ(dir_of("def f():\n    return a.b(c)\n", {"b", "c"}), 1.0);
}

TEST(EmptyRate, CountsEmptyBodies) {
  EXPECT_EQ(empty_rate({}), 0.0);
  const std::vector<GenerationRecord> r = {rec("s", 0, false, {}, "def f():\n    pass\n"), rec("s", 1, true, {})};
  EXPECT_EQ(empty_rate(r), 0.5);
}

TEST(Aggregate, MeansOverSamples) {
  RecordsBySample by;
  by["a"] = {rec("a", 0, true, 1.0), rec("a", 1, false, 0.0)};
  by["b"] = {rec("b", 0, false, std::nullopt), rec("b", 1, false, std::nullopt)};
  const auto s = aggregate(by, {1, 2});
  EXPECT_EQ(s.samples, 2u);
  EXPECT_EQ(s.records, 4u);
  EXPECT_EQ(s.candidates_per_sample, 2u);
  EXPECT_DOUBLE_EQ(s.pass_at_k.at(1), 0.25);
  EXPECT_DOUBLE_EQ(s.pass_at_k.at(2), 0.5);
  EXPECT_EQ(s.mean_dir, 0.5);
  EXPECT_EQ(s.samples_with_dir, 1u);
}

TEST(Aggregate, Errors) {
  RecordsBySample by;
  by["a"] = {rec("a", 0, true, 1.0), rec("a", 1, false, 0.0)};
  by["b"] = {rec("b", 0, true, 1.0)};
  EXPECT_THROW(aggregate(by, {1}), MetricError);
  by.erase("b");
  EXPECT_THROW(aggregate(by, {3}), MetricError);
}

TEST(Aggregate, ParallelIsBitEqualToSerial) {
  const auto records = load_generation_records(testkit::fixtures() / "agg" / "generations.jsonl");
  const auto grouped = group_by_sample(records);
  const auto a = aggregate(grouped, {1, 5, 10});
  const auto b = aggregate_serial(grouped, {1, 5, 10});
  for (const int k : {1, 5, 10}) EXPECT_EQ(std::memcmp(&a.pass_at_k.at(k), &b.pass_at_k.at(k), sizeof(double)), 0);
  EXPECT_EQ(a.mean_dir, b.mean_dir);
  EXPECT_EQ(a.empty_rate, b.empty_rate);
}

TEST(Aggregate, GroupBySampleOrdersCandidates) {
  const auto g = group_by_sample({rec("b", 1, true, {}), rec("a", 0, true, {}), rec("b", 0, false, {})});
  ASSERT_EQ(g.size(), 2u);
  EXPECT_EQ(g.at("b")[0].candidate_index, 0);
  EXPECT_EQ(g.at("b")[1].candidate_index, 1);
}

TEST(Report, TableAndFiles) {
  RecordsBySample by;
  by["a"] = {rec("a", 0, true, 1.0), rec("a", 1, false, 0.5, "def f():\n    pass\n")};
  const auto s = aggregate(by, {1});
  const auto table = render_table(s);
  EXPECT_NE(table.find("pass@1"), std::string::npos);
  EXPECT_NE(table.find("50.00"), std::string::npos);
  EXPECT_NE(table.find("75.00"), std::string::npos);
  const auto dir = fs::temp_directory_path() / ("depbench-report-" + std::to_string(::getpid()));
  write_report(s, dir);
  EXPECT_TRUE(fs::exists(dir / "summary.json"));
  EXPECT_TRUE(fs::exists(dir / "table.txt"));
  fs::remove_all(dir);
}
