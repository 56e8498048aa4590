#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <unistd.h>

#include "depbench/dataset.hpp"
#include "depbench/error.hpp"
#include "depbench/source.hpp"
#include "samples.hpp"

using namespace depbench;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
  return fs::temp_directory_path() / ("depbench-ds-" + std::to_string(::getpid()) + "-" + name);
}

BenchmarkSample with_tests() {
  auto s = testkit::strutil_sample("reverse");
  s.tests = {{"t-init-00", "assert reverse('ab') == 'ba'", TestStatus::ExecOk, std::nullopt, TestOrigin::Initial},
             {"t-init-01", "assert reverse(x) == _depbench_expected('t-init-01.pkl')", TestStatus::Fixed,
              "t-init-01.pkl", TestOrigin::Initial}};
  s.coverage.covered_lines = {30, 31};
  s.coverage.total_executable_lines = 3;
  s.coverage.line_coverage_pct = 200.0 / 3.0;
  return s;
}

void expect_load_error(const std::string& line, std::string_view fragment) {
  const auto p = temp_file("bad.jsonl");
  std::ofstream(p) << "\n" << line << "\n";
  try {
    load_dataset(p);
    ADD_FAILURE() << "no error for " << line.substr(0, 80);
  } catch (const SchemaError& e) {
    EXPECT_NE(std::string(e.what()).find(fragment), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
  fs::remove(p);
}

}  // namespace

TEST(Dataset, RoundTripIsLossless) {
  std::vector<BenchmarkSample> samples = testkit::strutil_samples();
  samples.push_back(with_tests());
  samples.back().sample_id += "#tests";
  const auto p = temp_file("rt.jsonl");
  save_dataset(samples, p);
  EXPECT_EQ(load_dataset(p), samples);
  fs::remove(p);
}

TEST(Dataset, EmptyListWritesEmptyFile) {
  const auto p = temp_file("empty.jsonl");
  save_dataset({}, p);
  EXPECT_EQ(fs::file_size(p), 0u);
  EXPECT_TRUE(load_dataset(p).empty());
  fs::remove(p);
}

TEST(Dataset, ValidatedTestsAndDependencyNames) {
  auto s = with_tests();
  s.tests.push_back({"t-enh1-00", "assert reverse(1)", TestStatus::Rejected, std::nullopt, TestOrigin::Enhancement1});
  EXPECT_EQ(s.validated_tests().size(), 2u);
  EXPECT_EQ(s.dependency_names(), (std::set<std::string>{"InvalidInputError", "is_string"}));
}

TEST(Dataset, BlobDirectory) { EXPECT_EQ(blob_dir_for("out/ds.jsonl"), fs::path("out/ds.jsonl.blobs")); }

TEST(Dataset, RejectsMalformedRecords) {
  const auto p = temp_file("good.jsonl");
  save_dataset({with_tests()}, p);
  std::string good;
  std::getline(std::ifstream(p), good);
  fs::remove(p);

  expect_load_error("{not json", "");
  auto replace = [&](const std::string& from, const std::string& to) {
    auto s = good;
    const auto at = s.find(from);
    EXPECT_NE(at, std::string::npos) << from;
    return s.replace(at, from.size(), to);
  };
  expect_load_error(replace("\"depth\":1", "\"depth\":0"), "depth");
  expect_load_error(replace("\"status\":\"exec_ok\"", "\"status\":\"bogus\""), "status");
  expect_load_error(replace("\"line_coverage_pct\":", "\"line_coverage_pct\":1e9,\"x\":"), "");
}

TEST(Dataset, ValidateSample) {
  auto s = with_tests();
  EXPECT_NO_THROW(validate_sample(s));
  s.sample_id.clear();
  EXPECT_THROW(validate_sample(s), SchemaError);
  s = with_tests();
  s.tests[1].test_id = s.tests[0].test_id;
  EXPECT_THROW(validate_sample(s), SchemaError);
  s = with_tests();
  s.coverage.line_coverage_pct = 10.0;  // disagrees with 2/3
  EXPECT_THROW(validate_sample(s), SchemaError);
  s = with_tests();
  s.prompts.begin()->second.token_count += 1;
  EXPECT_THROW(validate_sample(s), SchemaError);
  s = with_tests();
  s.tests[0].status = TestStatus::RejectedFlaky;
  EXPECT_THROW(validate_sample(s), SchemaError);
}

TEST(Dataset, DuplicateDependenciesCollapse) {
  auto s = with_tests();
  s.dependencies.push_back(s.dependencies.front());
  s.dedupe_dependencies();
  EXPECT_EQ(s.dependencies.size(), 2u);
}
