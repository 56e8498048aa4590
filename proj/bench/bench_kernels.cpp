// Parallel kernels against their serial references on a generated repository.
#include <benchmark/benchmark.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <unistd.h>

#include "depbench/depgraph.hpp"
#include "depbench/metrics.hpp"
#include "depbench/source.hpp"

using namespace depbench;
namespace fs = std::filesystem;

namespace {

constexpr int kModules = 120;
constexpr int kFunctionsPerModule = 12;

/// pkg/mNNN.py, each importing from the previous two modules.
class SyntheticRepo {
 public:
  SyntheticRepo() {
    root_ = fs::temp_directory_path() / ("depbench-bench-" + std::to_string(::getpid()));
    fs::create_directories(root_ / "pkg");
    std::ofstream(root_ / "pkg" / "__init__.py");
    for (int m = 0; m < kModules; ++m) {
      std::ofstream out(root_ / "pkg" / name(m, ".py"));
      for (int back = 1; back <= 2 && m - back >= 0; ++back) {
        out << "from ." << name(m - back, "") << " import f0, f1, C\n";
      }
      out << "\nLIMIT = " << m << "\n\n\nclass C:\n    \"\"\"Holder.\"\"\"\n\n    def get(self):\n        return LIMIT\n";
      for (int f = 0; f < kFunctionsPerModule; ++f) {
        out << "\n\ndef f" << f << "(x):\n    \"\"\"Step " << f << ".\"\"\"\n";
        out << "    y = x + LIMIT\n";
        if (m > 0) out << "    y += f" << (f % 2) << "(x) + C().get()\n";
        if (f > 0) out << "    y += f" << (f - 1) << "(y)\n";
        out << "    return y\n";
      }
    }
    graph_ = build_repo_graph(root_);
    for (const auto& mod : graph_.modules) {
      for (auto& f : extract_functions(ParsedModule{mod.id, mod.tree, mod.parse_errors}).functions) {
        targets_.push_back(std::move(f));
      }
    }
  }
  ~SyntheticRepo() { fs::remove_all(root_); }

  const fs::path& root() const { return root_; }
  const RepositorySnapshot& graph() const { return graph_; }
  const std::vector<FunctionRecord>& targets() const { return targets_; }

 private:
  static std::string name(int m, const char* ext) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "m%03d%s", m, ext);
    return buf;
  }
  fs::path root_;
  RepositorySnapshot graph_;
  std::vector<FunctionRecord> targets_;
};

const SyntheticRepo& repo() {
  static const SyntheticRepo r;
  return r;
}

RecordsBySample synthetic_records() {
  std::mt19937 rng(7);
  std::bernoulli_distribution pass(0.3);
  std::uniform_real_distribution<double> share(0.0, 1.0);
  RecordsBySample by;
  for (int s = 0; s < 5000; ++s) {
    auto& v = by["s" + std::to_string(s)];
    for (int i = 0; i < 10; ++i) {
      const bool ok = pass(rng);
      v.push_back({"s" + std::to_string(s), i, "def f(x):\n    return x\n",
                   {ok ? TestOutcome::Pass : TestOutcome::Fail}, ok, share(rng)});
    }
  }
  return by;
}

void BM_BuildRepoGraph(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(build_repo_graph(repo().root()));
}
void BM_BuildRepoGraphSerial(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(build_repo_graph_serial(repo().root()));
}

void BM_ExtractAllDependencies(benchmark::State& state) {
  for (auto _ : state) {
    benchmark::DoNotOptimize(extract_all_dependencies(repo().targets(), repo().graph(), state.range(0)));
  }
}
void BM_ExtractAllDependenciesSerial(benchmark::State& state) {
  for (auto _ : state) {
    benchmark::DoNotOptimize(extract_all_dependencies_serial(repo().targets(), repo().graph(), state.range(0)));
  }
}

void BM_Aggregate(benchmark::State& state) {
  static const auto records = synthetic_records();
  for (auto _ : state) benchmark::DoNotOptimize(aggregate(records, {1, 5, 10}));
}
void BM_AggregateSerial(benchmark::State& state) {
  static const auto records = synthetic_records();
  for (auto _ : state) benchmark::DoNotOptimize(aggregate_serial(records, {1, 5, 10}));
}

}  // namespace

BENCHMARK(BM_BuildRepoGraph)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_BuildRepoGraphSerial)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_ExtractAllDependencies)->Arg(1)->Arg(3)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_ExtractAllDependenciesSerial)->Arg(1)->Arg(3)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_Aggregate)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_AggregateSerial)->Unit(benchmark::kMillisecond)->UseRealTime();

int main(int argc, char** argv) {
  repo();  // generate and parse outside the timed loops
  benchmark::Initialize(&argc, argv);
  if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}
