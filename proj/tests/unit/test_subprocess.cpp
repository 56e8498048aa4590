#include <gtest/gtest.h>

#include <filesystem>

#include "depbench/error.hpp"
#include "depbench/subprocess.hpp"

using namespace depbench;
using namespace std::chrono_literals;

TEST(RunProcess, CapturesStreamsAndExitCode) {
  const auto r = run_process({"sh", "-c", "echo out; echo err >&2; exit 3"});
  EXPECT_EQ(r.exit_code, 3);
  EXPECT_EQ(r.out, "out\n");
  EXPECT_EQ(r.err, "err\n");
  EXPECT_FALSE(r.timed_out);
}

TEST(RunProcess, StdinEnvAndCwd) {
  ProcessOptions o;
  o.stdin_text = "piped";
  o.env = {{"DEPBENCH_PROBE", "42"}};
  o.cwd = std::filesystem::temp_directory_path();
  const auto r = run_process({"sh", "-c", "cat; echo \" $DEPBENCH_PROBE\"; pwd"}, o);
  EXPECT_EQ(r.exit_code, 0);
  EXPECT_EQ(r.out, "piped 42\n" + std::filesystem::canonical(o.cwd).string() + "\n");
}

TEST(RunProcess, TimeoutKillsTheProcessGroup) {
  ProcessOptions o;
  o.timeout = 200ms;
  const auto start = std::chrono::steady_clock::now();
  const auto r = run_process({"sh", "-c", "sleep 30 & sleep 30"}, o);
  EXPECT_TRUE(r.timed_out);
  EXPECT_LT(std::chrono::steady_clock::now() - start, 10s);
}

TEST(RunProcess, LargeOutputDoesNotDeadlock) {
  const auto r = run_process({"sh", "-c", "head -c 1000000 /dev/zero; head -c 500000 /dev/zero >&2"});
  EXPECT_EQ(r.out.size(), 1000000u);
  EXPECT_EQ(r.err.size(), 500000u);
}

TEST(RunProcess, MissingExecutableThrows) {
  EXPECT_THROW(run_process({"/definitely/not/here"}), HarnessError);
  EXPECT_THROW(run_process({}), HarnessError);
}

TEST(RunProcess, SignalIsReported) {
  const auto r = run_process({"sh", "-c", "kill -TERM $$"});
  EXPECT_EQ(r.exit_code, -1);
  EXPECT_EQ(r.signal, 15);
}
