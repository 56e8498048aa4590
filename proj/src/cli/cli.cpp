#include "depbench/cli.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "depbench/dataset.hpp"
#include "depbench/error.hpp"
#include "depbench/metrics.hpp"
#include "depbench/pipeline.hpp"
#include "depbench/prompts.hpp"
#include "depbench/testgen.hpp"

namespace depbench::cli {

namespace fs = std::filesystem;

namespace {

template <typename T>
void take(const CLI::Option* opt, const T& value, T& dst) {
  if (opt->count() > 0) dst = value;
}

std::vector<std::string> split_words(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream ss(s);
  for (std::string w; ss >> w;) out.push_back(w);
  return out;
}

/// Runs f(i) for i in [0, n) on `jobs` threads; returns one message per failed index.
template <typename F>
std::vector<std::string> parallel_each(std::size_t n, int jobs, F&& f) {
  std::vector<std::string> errors(n);
  const auto count = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(dynamic) num_threads(jobs)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    try {
      f(static_cast<std::size_t>(i));
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  }
  return errors;
}

bool skip_existing(const fs::path& out_path, bool force, std::ostream& out) {
  if (force || !fs::exists(out_path)) return false;
  out << out_path.string() << " exists; skipping (use --force to rebuild)\n";
  return true;
}

void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

/// Options every stage accepts.
struct Common {
  std::string config_path;
  int jobs = 0;
  bool force = false;
  CLI::Option* jobs_opt = nullptr;

  void attach(CLI::App* app) {
    app->add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
    jobs_opt = app->add_option("--jobs,-j", jobs, "worker threads (default: CPU count)")->check(CLI::PositiveNumber);
    app->add_flag("--force", force, "rebuild outputs that already exist");
  }

  RunConfig load() const {
    RunConfig c = config_path.empty() ? RunConfig{} : RunConfig::from_file(config_path);
    take(jobs_opt, jobs, c.jobs);
    return c;
  }
};

/// Options of the stages that execute code against a repository.
struct Execution {
  std::vector<std::string> repos;
  std::string shim;
  int timeout = 30;
  std::string interpreter = "python3";
  bool install_missing = false;
  CLI::Option* repos_opt = nullptr;
  CLI::Option* shim_opt = nullptr;
  CLI::Option* timeout_opt = nullptr;
  CLI::Option* interpreter_opt = nullptr;

  void attach(CLI::App* app) {
    repos_opt = app->add_option("--repo", repos, "repository checkout (repeatable)");
    shim_opt = app->add_option("--shim", shim, "runtime shim command (default: $DEPBENCH_SHIM)");
    timeout_opt = app->add_option("--timeout", timeout, "seconds per test run")->check(CLI::PositiveNumber);
    interpreter_opt = app->add_option("--python", interpreter, "interpreter for provisioning checks");
    app->add_flag("--install-missing", install_missing, "pip-install missing third-party packages");
  }

  void apply(RunConfig& c) const {
    if (repos_opt->count() > 0) c.repos.assign(repos.begin(), repos.end());
    if (shim_opt->count() > 0) c.shim = split_words(shim);
    take(timeout_opt, timeout, c.test_timeout_s);
    take(interpreter_opt, interpreter, c.interpreter);
  }
};

/// One provisioned workspace per repository the samples come from.
class Environments {
 public:
  Environments(const RunConfig& config, const std::vector<BenchmarkSample>& samples, bool install_missing,
               std::ostream& err) {
    std::map<std::string, fs::path> by_name;
    for (const auto& r : config.repos) {
      const auto root = fs::weakly_canonical(r);
      by_name[root.filename().string()] = root;
    }
    for (const auto& s : samples) {
      if (envs_.count(s.repo)) continue;
      const auto it = by_name.find(s.repo);
      if (it == by_name.end()) throw UsageError("no --repo given for repository '" + s.repo + "'");
      ProvisionOptions opts;
      opts.interpreter = config.interpreter;
      opts.install_missing = install_missing;
      auto env = provision_env(it->second, opts);
      if (!env.degraded.empty()) {
        err << "warning: " << s.repo << ": missing packages:";
        for (const auto& d : env.degraded) err << ' ' << d;
        err << '\n';
      }
      envs_.emplace(s.repo, std::move(env));
    }
  }

  const EnvHandle& at(const std::string& repo) const { return envs_.at(repo); }

 private:
  std::map<std::string, EnvHandle> envs_;
};

std::shared_ptr<Backend> open_backend(const std::string& spec, const std::string& record) {
  auto backend = make_backend(spec);
  if (!record.empty()) backend = std::make_shared<RecordingBackend>(backend, record);
  return backend;
}

void report_errors(const std::vector<BenchmarkSample>& samples, const std::vector<std::string>& errors,
                   std::ostream& err) {
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (!errors[i].empty()) err << "error: " << samples[i].sample_id << ": " << errors[i] << '\n';
  }
}

std::size_t count_errors(const std::vector<std::string>& errors) {
  return static_cast<std::size_t>(std::count_if(errors.begin(), errors.end(), [](const auto& e) { return !e.empty(); }));
}

std::vector<int> usable_ks(std::vector<int> ks, std::size_t n) {
  std::erase_if(ks, [n](int k) { return k < 1 || static_cast<std::size_t>(k) > n; });
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
  return ks;
}

void print_rounds(const std::vector<DebugTrace>& traces, int max_rounds, std::ostream& out) {
  out << "round  pass@1\n";
  for (int r = 0; r <= max_rounds; ++r) {
    char line[64];
    std::snprintf(line, sizeof line, "%5d  %6.2f\n", r, 100.0 * pass_at_1_by_round(traces, r));
    out << line;
  }
}

// ---- subcommands -----------------------------------------------------------------

struct ExtractCmd {
  Common common;
  std::vector<std::string> repos;
  int depth = 1;
  std::string out_path;
  std::optional<std::size_t> max_tokens;
  CLI::Option* repos_opt = nullptr;
  CLI::Option* depth_opt = nullptr;

  void attach(CLI::App* app) {
    common.attach(app);
    repos_opt = app->add_option("--repo", repos, "repository checkout (repeatable)");
    depth_opt = app->add_option("--depth", depth, "dependency depth")->check(CLI::Range(1, 100));
    app->add_option("--out,-o", out_path, "output dataset (JSONL)")->required();
    app->add_option("--max-tokens", max_tokens, "prompt token budget");
  }

  int run(std::ostream& out, std::ostream& err) {
    auto config = common.load();
    if (repos_opt->count() > 0) config.repos.assign(repos.begin(), repos.end());
    take(depth_opt, depth, config.dependency_depth);
    if (max_tokens) config.max_prompt_tokens = max_tokens;
    if (config.repos.empty()) throw UsageError("extract: at least one --repo is required");
    if (skip_existing(out_path, common.force, out)) return kExitOk;

    std::vector<BenchmarkSample> all;
    for (const auto& repo : config.repos) {
      if (!fs::is_directory(repo)) throw UsageError("not a directory: " + repo.string());
      std::vector<std::string> skipped;
      auto samples = extract_samples(repo, config, &skipped);
      out << repo.string() << ": " << samples.size() << " samples, " << skipped.size() << " skipped\n";
      for (const auto& s : skipped) err << "skip: " << s << '\n';
      std::move(samples.begin(), samples.end(), std::back_inserter(all));
    }
    ensure_parent(out_path);
    save_dataset(all, out_path);
    out << "wrote " << all.size() << " samples to " << out_path << '\n';
    return kExitOk;
  }
};

struct BuildPromptsCmd {
  Common common;
  std::string dataset;
  std::string out_path;
  std::vector<std::string> levels;
  std::vector<std::string> formats;
  std::optional<std::size_t> max_tokens;

  void attach(CLI::App* app) {
    common.attach(app);
    app->add_option("--dataset,-d", dataset, "input dataset")->required()->check(CLI::ExistingFile);
    app->add_option("--out,-o", out_path, "output dataset")->required();
    app->add_option("--level", levels, "full, medium or small (repeatable; default all)");
    app->add_option("--format", formats, "base, instruct_v1 or instruct_v2 (repeatable; default all)");
    app->add_option("--max-tokens", max_tokens, "prompt token budget");
  }

  int run(std::ostream& out, std::ostream&) {
    auto config = common.load();
    if (!levels.empty()) {
      config.levels.clear();
      for (const auto& l : levels) {
        const auto v = parse_context_level(l);
        if (!v) throw UsageError("unknown level '" + l + "'");
        config.levels.push_back(*v);
      }
    }
    if (!formats.empty()) {
      config.formats.clear();
      for (const auto& f : formats) {
        const auto v = parse_prompt_format(f);
        if (!v) throw UsageError("unknown format '" + f + "'");
        config.formats.push_back(*v);
      }
    }
    if (max_tokens) config.max_prompt_tokens = max_tokens;
    if (fs::weakly_canonical(out_path) != fs::weakly_canonical(dataset) &&
        skip_existing(out_path, common.force, out)) {
      return kExitOk;
    }
    auto samples = load_dataset(dataset);
    rebuild_prompts(samples, config);
    ensure_parent(out_path);
    save_dataset(samples, out_path);
    out << "rebuilt " << config.levels.size() * config.formats.size() << " prompt variants for " << samples.size()
        << " samples\n";
    return kExitOk;
  }
};

struct GenTestsCmd {
  Common common;
  Execution exec;
  std::string dataset;
  std::string backend;
  std::string record;
  std::string out_path;
  std::string blobs;
  double min_coverage = kCoverageThreshold;
  int repeats = kFlakyRepeats;
  CLI::Option* coverage_opt = nullptr;
  CLI::Option* repeats_opt = nullptr;

  void attach(CLI::App* app) {
    common.attach(app);
    exec.attach(app);
    app->add_option("--dataset,-d", dataset, "input dataset")->required()->check(CLI::ExistingFile);
    app->add_option("--backend,-b", backend, "stub:<file>, replay:<file> or http")->required();
    app->add_option("--record", record, "append every request to this transcript");
    app->add_option("--out,-o", out_path, "dataset of kept samples")->required();
    app->add_option("--blobs", blobs, "expected-value blobs (default: <out>.blobs)");
    coverage_opt = app->add_option("--min-coverage", min_coverage, "keep samples at or above this line coverage")
                       ->check(CLI::Range(0.0, 100.0));
    repeats_opt = app->add_option("--repeats", repeats, "flaky screen runs per test")->check(CLI::PositiveNumber);
  }

  int run(std::ostream& out, std::ostream& err) {
    auto config = common.load();
    exec.apply(config);
    take(coverage_opt, min_coverage, config.coverage_threshold);
    take(repeats_opt, repeats, config.flaky_repeats);
    if (skip_existing(out_path, common.force, out)) return kExitOk;

    const auto samples = load_dataset(dataset);
    const fs::path blob_dir = fs::absolute(blobs.empty() ? blob_dir_for(out_path) : fs::path(blobs));
    fs::create_directories(blob_dir);
    ShimRunner runner({config.shim_command(), std::chrono::seconds(config.test_timeout_s), blob_dir});
    const Environments envs(config, samples, exec.install_missing, err);
    auto model = open_backend(backend, record);

    TestGenOptions options;
    options.params = config.params;
    options.flaky_repeats = config.flaky_repeats;
    options.blob_dir = blob_dir;
    std::vector<TestPipelineResult> results(samples.size());
    const auto errors = parallel_each(samples.size(), config.effective_jobs(), [&](std::size_t i) {
      results[i] = run_test_pipeline(runner, envs.at(samples[i].repo), samples[i], *model, options,
                                     config.coverage_threshold);
    });
    report_errors(samples, errors, err);

    std::vector<BenchmarkSample> kept;
    for (std::size_t i = 0; i < results.size(); ++i) {
      for (const auto& w : results[i].warnings) err << "warning: " << samples[i].sample_id << ": " << w << '\n';
      if (errors[i].empty() && results[i].kept) kept.push_back(results[i].sample);
    }
    ensure_parent(out_path);
    save_dataset(kept, out_path);
    out << "kept " << kept.size() << " of " << samples.size() << " samples (coverage >= " << config.coverage_threshold
        << "%)\n";
    return count_errors(errors) == samples.size() && !samples.empty() ? kExitFailure : kExitOk;
  }
};

struct EvaluateCmd {
  Common common;
  Execution exec;
  std::string dataset;
  std::string backend;
  std::string record;
  std::string out_dir;
  std::string level = "full";
  std::string format = "base";
  int n = 10;
  double temperature = 0.2;
  double top_p = 0.95;
  int max_new_tokens = 512;
  bool greedy = false;
  CLI::Option* n_opt = nullptr;
  CLI::Option* temperature_opt = nullptr;
  CLI::Option* top_p_opt = nullptr;
  CLI::Option* tokens_opt = nullptr;

  void attach(CLI::App* app) {
    common.attach(app);
    exec.attach(app);
    app->add_option("--dataset,-d", dataset, "dataset with validated tests")->required()->check(CLI::ExistingFile);
    app->add_option("--backend,-b", backend, "stub:<file>, replay:<file> or http")->required();
    app->add_option("--record", record, "append every request to this transcript");
    app->add_option("--out,-o", out_dir, "results directory")->required();
    app->add_option("--level", level, "full, medium or small");
    app->add_option("--format", format, "base, instruct_v1 or instruct_v2");
    n_opt = app->add_option("--n", n, "candidates per sample")->check(CLI::PositiveNumber);
    temperature_opt = app->add_option("--temperature", temperature);
    top_p_opt = app->add_option("--top-p", top_p);
    tokens_opt = app->add_option("--max-new-tokens", max_new_tokens)->check(CLI::PositiveNumber);
    app->add_flag("--greedy", greedy, "one greedy candidate per sample");
  }

  int run(std::ostream& out, std::ostream& err) {
    auto config = common.load();
    exec.apply(config);
    take(n_opt, n, config.params.num_samples);
    take(temperature_opt, temperature, config.params.temperature);
    take(top_p_opt, top_p, config.params.top_p);
    take(tokens_opt, max_new_tokens, config.params.max_new_tokens);
    if (greedy) config.params = GenerationParams::greedy(config.params.max_new_tokens);
    config.params.validate();
    const auto lvl = parse_context_level(level);
    const auto fmt = parse_prompt_format(format);
    if (!lvl) throw UsageError("unknown level '" + level + "'");
    if (!fmt) throw UsageError("unknown format '" + format + "'");

    const auto records_path = fs::path(out_dir) / "generations.jsonl";
    if (skip_existing(records_path, common.force, out)) return kExitOk;

    const auto samples = load_dataset(dataset);
    ShimRunner runner({config.shim_command(), std::chrono::seconds(config.test_timeout_s),
                       fs::absolute(blob_dir_for(dataset))});
    const Environments envs(config, samples, exec.install_missing, err);
    auto model = open_backend(backend, record);

    std::vector<std::vector<GenerationRecord>> per_sample(samples.size());
    const auto errors = parallel_each(samples.size(), config.effective_jobs(), [&](std::size_t i) {
      const auto& s = samples[i];
      const auto it = s.prompts.find({*lvl, *fmt});
      const auto prompt = it != s.prompts.end() ? it->second.text : build_prompt(s, *lvl, *fmt).text;
      const auto completions = model->complete(prompt, config.params);
      const auto tests = s.validated_tests();
      for (std::size_t c = 0; c < completions.size(); ++c) {
        const auto candidate = assemble_candidate(s.target, extract_code(completions[c]));
        per_sample[i].push_back(
            run_candidate(runner, envs.at(s.repo), s, candidate, tests, static_cast<int>(c)).record);
      }
    });
    report_errors(samples, errors, err);
    if (count_errors(errors) > 0) return kExitFailure;

    std::vector<GenerationRecord> records;
    for (auto& group : per_sample) std::move(group.begin(), group.end(), std::back_inserter(records));
    fs::create_directories(out_dir);
    save_generation_records(records, records_path);
    out << "wrote " << records.size() << " generations to " << records_path.string() << '\n';
    return kExitOk;
  }
};

struct DebugCmd {
  Common common;
  Execution exec;
  std::string dataset;
  std::string backend;
  std::string record;
  std::string out_dir;
  int max_rounds = kDefaultDebugRounds;
  CLI::Option* rounds_opt = nullptr;

  void attach(CLI::App* app) {
    common.attach(app);
    exec.attach(app);
    app->add_option("--dataset,-d", dataset, "dataset with validated tests")->required()->check(CLI::ExistingFile);
    app->add_option("--backend,-b", backend, "stub:<file>, replay:<file> or http")->required();
    app->add_option("--record", record, "append every request to this transcript");
    app->add_option("--out,-o", out_dir, "results directory")->required();
    rounds_opt = app->add_option("--max-rounds", max_rounds, "repair rounds after the first attempt")
                     ->check(CLI::NonNegativeNumber);
  }

  int run(std::ostream& out, std::ostream& err) {
    auto config = common.load();
    exec.apply(config);
    take(rounds_opt, max_rounds, config.max_debug_rounds);
    const auto traces_path = fs::path(out_dir) / "traces.jsonl";
    if (skip_existing(traces_path, common.force, out)) return kExitOk;

    const auto samples = load_dataset(dataset);
    ShimRunner runner({config.shim_command(), std::chrono::seconds(config.test_timeout_s),
                       fs::absolute(blob_dir_for(dataset))});
    const Environments envs(config, samples, exec.install_missing, err);
    auto model = open_backend(backend, record);

    DebugOptions options;
    options.max_rounds = config.max_debug_rounds;
    options.max_new_tokens = config.params.max_new_tokens;
    std::vector<DebugTrace> traces(samples.size());
    const auto errors = parallel_each(samples.size(), config.effective_jobs(), [&](std::size_t i) {
      traces[i] = run_debug(runner, envs.at(samples[i].repo), samples[i], *model, options);
    });
    report_errors(samples, errors, err);
    if (count_errors(errors) > 0) return kExitFailure;
    for (const auto& t : traces) {
      if (t.error) err << "warning: " << t.sample_id << ": backend failed: " << *t.error << '\n';
    }

    fs::create_directories(out_dir);
    save_traces(traces, traces_path);
    print_rounds(traces, config.max_debug_rounds, out);
    return kExitOk;
  }
};

struct ReportCmd {
  std::string dataset;
  std::string results;
  std::string out_dir;
  std::vector<int> ks{1, 5, 10};

  void attach(CLI::App* app) {
    app->add_option("dataset", dataset, "dataset the results belong to")->required()->check(CLI::ExistingFile);
    app->add_option("results", results, "results directory or generations file")->required()->check(CLI::ExistingPath);
    app->add_option("--out,-o", out_dir, "where summary.json and table.txt go (default: results directory)");
    app->add_option("--k", ks, "pass@k values (repeatable)")->check(CLI::PositiveNumber);
  }

  int run(std::ostream& out, std::ostream& err) {
    const fs::path res(results);
    const fs::path dir = fs::is_directory(res) ? res : res.parent_path();
    const fs::path generations = fs::is_directory(res) ? res / "generations.jsonl" : res;
    const auto samples = load_dataset(dataset);
    std::set<std::string> known;
    for (const auto& s : samples) known.insert(s.sample_id);

    if (fs::exists(generations)) {
      auto grouped = group_by_sample(load_generation_records(generations));
      for (auto it = grouped.begin(); it != grouped.end();) {
        if (known.count(it->first)) {
          ++it;
          continue;
        }
        err << "warning: " << it->first << " is not in the dataset; ignored\n";
        it = grouped.erase(it);
      }
      const std::size_t n = grouped.empty() ? 0 : grouped.begin()->second.size();
      const auto summary = aggregate(grouped, usable_ks(ks, n));
      const fs::path target = out_dir.empty() ? dir : fs::path(out_dir);
      fs::create_directories(target);
      write_report(summary, target);
      out << render_table(summary);
    }
    const auto traces_path = dir / "traces.jsonl";
    if (fs::exists(traces_path)) {
      const auto traces = load_traces(traces_path);
      int rounds = 0;
      for (const auto& t : traces) {
        if (!t.rounds.empty()) rounds = std::max(rounds, t.rounds.back().round_index);
      }
      print_rounds(traces, std::max(rounds, kDefaultDebugRounds), out);
    }
    if (!fs::exists(generations) && !fs::exists(traces_path)) {
      throw UsageError("no generations.jsonl or traces.jsonl under " + dir.string());
    }
    return kExitOk;
  }
};

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Repository-level code generation benchmark toolkit", "depbench"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "depbench 0.1.0");

  ExtractCmd extract;
  BuildPromptsCmd build_prompts;
  GenTestsCmd gen_tests;
  EvaluateCmd evaluate;
  DebugCmd debug;
  ReportCmd report;
  auto* extract_app = app.add_subcommand("extract", "Build benchmark samples from repositories");
  auto* prompts_app = app.add_subcommand("build-prompts", "Rebuild prompt variants of a dataset");
  auto* tests_app = app.add_subcommand("gen-tests", "Generate, validate and gate unit tests");
  auto* evaluate_app = app.add_subcommand("evaluate", "Sample candidates and run them against the tests");
  auto* debug_app = app.add_subcommand("debug", "Iterative repair with test feedback");
  auto* report_app = app.add_subcommand("report", "Aggregate results into a table");
  extract.attach(extract_app);
  build_prompts.attach(prompts_app);
  gen_tests.attach(tests_app);
  evaluate.attach(evaluate_app);
  debug.attach(debug_app);
  report.attach(report_app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << app.version() << '\n';
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    // Subcommand help requests arrive here too, wrapped per subcommand.
    if (e.get_exit_code() == static_cast<int>(CLI::ExitCodes::Success)) {
      out << app.help();
      return kExitOk;
    }
    err << "depbench: " << e.what() << '\n' << "run 'depbench --help' for usage\n";
    return kExitUsage;
  }

  try {
    if (extract_app->parsed()) return extract.run(out, err);
    if (prompts_app->parsed()) return build_prompts.run(out, err);
    if (tests_app->parsed()) return gen_tests.run(out, err);
    if (evaluate_app->parsed()) return evaluate.run(out, err);
    if (debug_app->parsed()) return debug.run(out, err);
    if (report_app->parsed()) return report.run(out, err);
  } catch (const UsageError& e) {
    err << "depbench: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "depbench: error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace depbench::cli
