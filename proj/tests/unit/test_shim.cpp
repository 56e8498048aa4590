// ShimRunner against the reference Python shim in tests/support.
#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <unistd.h>

#include "depbench/backend.hpp"
#include "depbench/pipeline.hpp"
#include "depbench/testgen.hpp"
#include "paths.hpp"

using namespace depbench;
namespace fs = std::filesystem;

#ifdef DEPBENCH_PYTHON

namespace {

class ShimTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    samples_ = new std::vector<BenchmarkSample>(extract_samples(testkit::shim_repo(), RunConfig{}));
  }
  static void TearDownTestSuite() {
    delete samples_;
    samples_ = nullptr;
  }

  void SetUp() override {
    blobs_ = fs::temp_directory_path() / ("depbench-blobs-" + std::to_string(::getpid()));
    fs::create_directories(blobs_);
    ProvisionOptions opts;
    opts.interpreter = DEPBENCH_PYTHON;
    env_ = provision_env(testkit::shim_repo(), opts);
    runner_ = std::make_unique<ShimRunner>(
        ShimConfig{{DEPBENCH_PYTHON, testkit::reference_shim().string()}, std::chrono::seconds(20), blobs_});
  }
  void TearDown() override { fs::remove_all(blobs_); }

  static const BenchmarkSample& sample(std::string_view name) {
    return *std::find_if(samples_->begin(), samples_->end(),
                         [&](const BenchmarkSample& s) { return s.target.qualified_name == name; });
  }
  static TestRecord test(std::string id, std::string text, TestStatus status = TestStatus::SyntaxOk) {
    return {std::move(id), std::move(text), status, std::nullopt, TestOrigin::Initial};
  }

  static std::vector<BenchmarkSample>* samples_;
  fs::path blobs_;
  EnvHandle env_;
  std::unique_ptr<ShimRunner> runner_;
};

std::vector<BenchmarkSample>* ShimTest::samples_ = nullptr;

}  // namespace

TEST_F(ShimTest, FixtureSamples) {
  std::vector<std::string> names;
  for (const auto& s : *samples_) names.push_back(s.target.qualified_name);
  EXPECT_EQ(names, (std::vector<std::string>{"add", "roll", "make_point", "classify"}));
}

TEST_F(ShimTest, PassingTestIsStableOverTenRuns) {
  const auto out = runner_->run_test(env_, sample("add"), test("add-0", "assert add(2, 3) == 5"), 10);
  ASSERT_EQ(out.size(), 10u);
  for (const auto& o : out) {
    EXPECT_EQ(o.status, ExecStatus::Pass);
    EXPECT_TRUE(o.same_behaviour(out.front()));
  }
}

TEST_F(ShimTest, ErrorKinds) {
  const auto& s = sample("add");
  const auto name_error = runner_->run_test(env_, s, test("e", "assert add(undefined_name, 1) == 2"), 1);
  EXPECT_EQ(name_error[0].status, ExecStatus::OtherError);
  EXPECT_EQ(name_error[0].exception_type, "NameError");
  EXPECT_NE(name_error[0].stderr_text.find("NameError"), std::string::npos);
  const auto wrong = runner_->run_test(env_, s, test("w", "assert add(1, 1) == 3"), 1);
  EXPECT_EQ(wrong[0].status, ExecStatus::AssertionError);
  const auto printed = runner_->run_test(env_, s, test("p", "print(add(1, 1))\nassert True"), 1);
  EXPECT_EQ(printed[0].stdout_text, "2\n");
}

TEST_F(ShimTest, TimeoutIsReported) {
  ShimRunner quick({{DEPBENCH_PYTHON, testkit::reference_shim().string()}, std::chrono::seconds(1), blobs_});
  const auto out = quick.run_test(env_, sample("add"), test("t", "import time\ntime.sleep(30)\nassert add(1, 1) == 2"), 1);
  EXPECT_EQ(out[0].status, ExecStatus::Timeout);
}

TEST_F(ShimTest, SeededRandomnessIsFlaggedFlaky) {
  TestGenOptions opts;
  opts.blob_dir = blobs_;
  const auto out = execution_filter(*runner_, env_, sample("roll"), {test("r", "assert roll(2) == 1")}, opts);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].status, TestStatus::RejectedFlaky);
}

TEST_F(ShimTest, AssertionFixRoundTripWithLiteral) {
  TestGenOptions opts;
  opts.blob_dir = blobs_;
  const auto fixed = fix_assertion(*runner_, env_, sample("add"), test("f", "assert add(2, 2) == 5"), opts);
  EXPECT_EQ(fixed.status, TestStatus::Fixed);
  EXPECT_EQ(fixed.source_text, "assert add(2, 2) == 4");
  EXPECT_FALSE(fixed.expected_blob);
  const auto again = runner_->run_test(env_, sample("add"), fixed, 10);
  EXPECT_TRUE(std::all_of(again.begin(), again.end(), [](const auto& o) { return o.status == ExecStatus::Pass; }));
}

TEST_F(ShimTest, CustomObjectsRoundTripThroughBlobs) {
  TestGenOptions opts;
  opts.blob_dir = blobs_;
  const auto& s = sample("make_point");
  const auto fixed = fix_assertion(*runner_, env_, s, test("pt", "assert make_point(1, 2) == Point(0, 0)"), opts);
  ASSERT_EQ(fixed.status, TestStatus::Fixed) << fixed.source_text;
  ASSERT_TRUE(fixed.expected_blob);
  EXPECT_TRUE(fs::exists(blobs_ / *fixed.expected_blob));
  EXPECT_NE(fixed.source_text.find("_depbench_expected('pt.pkl')"), std::string::npos);

  // The blob still discriminates: a mutated candidate fails the rewritten test.
  const auto mutated = run_candidate(*runner_, env_, s, "def make_point(x, y):\n    return Point(y, x)\n", {fixed});
  EXPECT_EQ(mutated.record.per_test_outcome, (std::vector<TestOutcome>{TestOutcome::Fail}));

  // A corrupted blob surfaces as an error, not a pass.
  std::ofstream(blobs_ / *fixed.expected_blob, std::ios::trunc) << "garbage";
  const auto corrupt = runner_->run_test(env_, s, fixed, 1);
  EXPECT_EQ(corrupt[0].status, ExecStatus::OtherError);
}

TEST_F(ShimTest, CandidateRunsLeaveWorkspaceUntouched) {
  const auto& s = sample("add");
  const auto module = env_.workspace / s.module_path;
  std::ifstream before_in(module);
  const std::string before((std::istreambuf_iterator<char>(before_in)), {});
  const auto run = run_candidate(*runner_, env_, s, "def add(a, b):\n    return a - b\n",
                                 {test("c", "assert add(2, 3) == 5", TestStatus::ExecOk)});
  EXPECT_FALSE(run.record.passed_all);
  std::ifstream after_in(module);
  EXPECT_EQ(std::string((std::istreambuf_iterator<char>(after_in)), {}), before);
}

TEST_F(ShimTest, CoverageEnhancementRaisesCoverage) {
  const auto& s = sample("classify");
  TestGenOptions opts;
  opts.blob_dir = blobs_;
  opts.flaky_repeats = 2;
  const std::vector<TestRecord> initial = {test("c-init-00", "assert classify(3) == 'positive'", TestStatus::ExecOk)};
  const auto before = measure_coverage(*runner_, env_, s, initial);
  EXPECT_EQ(before.total_executable_lines, 5);
  EXPECT_NEAR(before.line_coverage_pct, 40.0, 1e-12);

  ScriptedBackend backend([](const std::string& prompt, const GenerationParams&) {
    return std::vector<std::string>{prompt.find("def test_") != std::string::npos
                                        ? "def test_more():\n    assert classify(-1) == 'negative'\n"
                                        : ""};
  });
  const auto batch = enhance_coverage(*runner_, env_, s, initial, backend, opts);
  EXPECT_GT(batch.coverage.line_coverage_pct, before.line_coverage_pct);
  EXPECT_NEAR(batch.coverage.line_coverage_pct, 80.0, 1e-12);
  EXPECT_EQ(batch.tests.size(), 2u);
}

#else

TEST(ShimTest, RequiresPython) { GTEST_SKIP() << "python3 not found at configure time"; }

#endif
