#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "depbench/cli.hpp"
#include "depbench/dataset.hpp"
#include "depbench/pipeline.hpp"
#include "paths.hpp"

using namespace depbench;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "depbench");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("depbench-cli-" + std::to_string(::getpid()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  fs::path dir_;
};

}  // namespace

TEST(Cli, UsageExitCodes) {
  EXPECT_EQ(invoke({}).code, cli::kExitUsage);
  EXPECT_EQ(invoke({"--help"}).code, cli::kExitOk);
  EXPECT_EQ(invoke({"extract", "--help"}).code, cli::kExitOk);
  EXPECT_EQ(invoke({"extract", "--bogus"}).code, cli::kExitUsage);
  EXPECT_EQ(invoke({"frobnicate"}).code, cli::kExitUsage);
  EXPECT_EQ(invoke({"build-prompts", "-d", "/no/such/file", "-o", "x"}).code, cli::kExitUsage);
}

TEST_F(CliTest, ExtractSkipsExistingOutput) {
  const auto out = (dir_ / "ds.jsonl").string();
  const auto repo = testkit::strutil_repo().string();
  auto r = invoke({"extract", "--repo", repo, "-o", out});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  EXPECT_NE(r.out.find("10 samples, 1 skipped"), std::string::npos) << r.out;
  EXPECT_EQ(load_dataset(out).size(), 10u);

  r = invoke({"extract", "--repo", repo, "-o", out});
  EXPECT_EQ(r.code, cli::kExitOk);
  EXPECT_NE(r.out.find("skipping"), std::string::npos);

  r = invoke({"extract", "--repo", repo, "-o", out, "--force"});
  EXPECT_EQ(r.code, cli::kExitOk);
  EXPECT_EQ(r.out.find("skipping"), std::string::npos);
}

TEST_F(CliTest, BuildPromptsSubset) {
  const auto ds = (dir_ / "ds.jsonl").string();
  const auto small = (dir_ / "small.jsonl").string();
  ASSERT_EQ(invoke({"extract", "--repo", testkit::strutil_repo().string(), "-o", ds}).code, cli::kExitOk);
  const auto r = invoke({"build-prompts", "-d", ds, "-o", small, "--level", "small", "--format", "base"});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  // Variants outside the selection are kept as they were.
  const auto before = load_dataset(ds);
  const auto after = load_dataset(small);
  ASSERT_EQ(after.size(), before.size());
  for (std::size_t i = 0; i < after.size(); ++i) EXPECT_EQ(after[i].prompts, before[i].prompts);
  EXPECT_EQ(invoke({"build-prompts", "-d", ds, "-o", small, "--level", "huge", "--force"}).code, cli::kExitUsage);
}

TEST_F(CliTest, ConfigFileRejectsUnknownKeys) {
  const auto cfg = dir_ / "cfg.json";
  std::ofstream(cfg) << R"({"bogus": true})";
  const auto r = invoke({"extract", "--config", cfg.string(), "--repo", testkit::strutil_repo().string(), "-o",
                         (dir_ / "x.jsonl").string()});
  EXPECT_EQ(r.code, cli::kExitUsage);
}

TEST_F(CliTest, MissingShimIsUsageError) {
  ::unsetenv("DEPBENCH_SHIM");
  const auto ds = (dir_ / "ds.jsonl").string();
  ASSERT_EQ(invoke({"extract", "--repo", testkit::strutil_repo().string(), "-o", ds}).code, cli::kExitOk);
  const auto stub = dir_ / "stub.json";
  std::ofstream(stub) << "{}";
  const auto r = invoke({"gen-tests", "-d", ds, "-b", "stub:" + stub.string(), "-o", (dir_ / "t.jsonl").string(),
                         "--repo", testkit::strutil_repo().string()});
  EXPECT_EQ(r.code, cli::kExitUsage) << r.err;
}

TEST_F(CliTest, ReportWritesSummary) {
  const auto ds = (dir_ / "ds.jsonl").string();
  ASSERT_EQ(invoke({"extract", "--repo", testkit::strutil_repo().string(), "-o", ds}).code, cli::kExitOk);
  const auto samples = load_dataset(ds);
  std::vector<GenerationRecord> records;
  for (int i = 0; i < 4; ++i) {
    const bool pass = i == 0;
    records.push_back({samples[0].sample_id, i, "x", {pass ? TestOutcome::Pass : TestOutcome::Fail}, pass, 1.0});
    records.push_back({samples[1].sample_id, i, "y", {TestOutcome::Pass}, true, std::nullopt});
  }
  records.push_back({"elsewhere:m:f", 0, "z", {TestOutcome::Pass}, true, std::nullopt});
  fs::create_directories(dir_ / "res");
  save_generation_records(records, dir_ / "res" / "generations.jsonl");

  const auto r = invoke({"report", ds, (dir_ / "res").string()});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  EXPECT_NE(r.err.find("elsewhere:m:f"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir_ / "res" / "summary.json"));
  EXPECT_TRUE(fs::exists(dir_ / "res" / "table.txt"));
  EXPECT_NE(r.out.find("pass@1"), std::string::npos) << r.out;
  // ks above n are dropped.
  EXPECT_EQ(r.out.find("pass@5"), std::string::npos) << r.out;

  fs::create_directories(dir_ / "empty");
  EXPECT_EQ(invoke({"report", ds, (dir_ / "empty").string()}).code, cli::kExitUsage);
}
