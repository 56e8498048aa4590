#include "depbench/pipeline.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include "depbench/depgraph.hpp"
#include "depbench/error.hpp"
#include "depbench/prompts.hpp"
#include "depbench/source.hpp"
#include "json.hpp"

namespace depbench {

namespace fs = std::filesystem;
using nlohmann::json;

// ---- config -----------------------------------------------------------------------

RunConfig RunConfig::from_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw UsageError("bad config " + path.string() + ": " + e.what());
  }
  RunConfig c;
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "repos") {
        c.repos.clear();
        for (const auto& r : v) c.repos.emplace_back(r.get<std::string>());
      } else if (key == "levels") {
        c.levels.clear();
        for (const auto& s : v) {
          const auto l = parse_context_level(s.get<std::string>());
          if (!l) throw UsageError("config: unknown level " + s.dump());
          c.levels.push_back(*l);
        }
      } else if (key == "formats") {
        c.formats.clear();
        for (const auto& s : v) {
          const auto f = parse_prompt_format(s.get<std::string>());
          if (!f) throw UsageError("config: unknown format " + s.dump());
          c.formats.push_back(*f);
        }
      } else if (key == "temperature") {
        c.params.temperature = v.get<double>();
      } else if (key == "top_p") {
        c.params.top_p = v.get<double>();
      } else if (key == "num_samples") {
        c.params.num_samples = v.get<int>();
      } else if (key == "max_new_tokens") {
        c.params.max_new_tokens = v.get<int>();
      } else if (key == "greedy") {
        if (v.get<bool>()) c.params = GenerationParams::greedy(c.params.max_new_tokens);
      } else if (key == "coverage_threshold") {
        c.coverage_threshold = v.get<double>();
      } else if (key == "flaky_repeats") {
        c.flaky_repeats = v.get<int>();
      } else if (key == "max_debug_rounds") {
        c.max_debug_rounds = v.get<int>();
      } else if (key == "dependency_depth") {
        c.dependency_depth = v.get<int>();
      } else if (key == "test_timeout_s") {
        c.test_timeout_s = v.get<int>();
      } else if (key == "max_prompt_tokens") {
        c.max_prompt_tokens = v.get<std::size_t>();
      } else if (key == "shim") {
        c.shim = v.get<std::vector<std::string>>();
      } else if (key == "interpreter") {
        c.interpreter = v.get<std::string>();
      } else if (key == "jobs") {
        c.jobs = v.get<int>();
      } else {
        throw UsageError("config: unknown key '" + key + "'");
      }
    }
  } catch (const json::exception& e) {
    throw UsageError("bad config value in " + path.string() + ": " + e.what());
  }
  return c;
}

int RunConfig::effective_jobs() const {
  if (jobs > 0) return jobs;
  return std::max(1u, std::thread::hardware_concurrency());
}

std::vector<std::string> RunConfig::shim_command() const {
  if (!shim.empty()) return shim;
  const char* env = std::getenv("DEPBENCH_SHIM");
  if (!env || !*env) throw UsageError("no runtime shim configured (use --shim or DEPBENCH_SHIM)");
  std::vector<std::string> out;
  std::istringstream ss(env);
  for (std::string part; ss >> part;) out.push_back(part);
  return out;
}

// ---- extraction -------------------------------------------------------------------

std::vector<BenchmarkSample> extract_samples(const fs::path& repo, const RunConfig& config,
                                             std::vector<std::string>* skipped) {
  const auto graph = build_repo_graph(repo);
  const auto repo_name = graph.root.filename().string();
  std::vector<FunctionRecord> targets;
  std::vector<const SourceModule*> owners;
  for (const auto& m : graph.modules) {
    if (m.parse_failed()) {
      if (skipped) skipped->push_back(m.id + ": " + (m.load_error.empty() ? "parse errors" : m.load_error));
      continue;
    }
    auto found = extract_functions(ParsedModule{m.id, m.tree, m.parse_errors});
    for (auto& s : found.skipped) {
      if (skipped) skipped->push_back(m.id + ":" + s.qualified_name + ": " + std::string(to_string(s.reason)));
    }
    for (auto& f : found.functions) {
      targets.push_back(std::move(f));
      owners.push_back(&m);
    }
  }
  const auto deps = extract_all_dependencies(targets, graph, config.dependency_depth);

  std::vector<BenchmarkSample> samples(targets.size());
  const auto count = static_cast<std::ptrdiff_t>(targets.size());
#pragma omp parallel for schedule(dynamic) num_threads(config.effective_jobs())
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    auto& s = samples[i];
    const auto& m = *owners[i];
    s.sample_id = repo_name + ":" + m.id + ":" + targets[i].qualified_name;
    s.repo = repo_name;
    s.module_path = m.path;
    s.module_imports = m.import_statements;
    s.target = targets[i];
    s.dependencies = deps[i];
    s.dedupe_dependencies();
    s.solution = targets[i].source;
  }
  rebuild_prompts(samples, config);
  return samples;
}

void rebuild_prompts(std::vector<BenchmarkSample>& samples, const RunConfig& config) {
  const PromptBudget budget{config.max_prompt_tokens};
  const auto count = static_cast<std::ptrdiff_t>(samples.size());
  std::vector<std::string> errors(samples.size());
#pragma omp parallel for schedule(dynamic) num_threads(config.effective_jobs())
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    try {
      for (const auto level : config.levels) {
        for (const auto format : config.formats) {
          samples[i].prompts[{level, format}] = build_prompt(samples[i], level, format, budget);
        }
      }
    } catch (const std::exception& e) {
      errors[i] = samples[i].sample_id + ": " + e.what();
    }
  }
  for (const auto& e : errors) {
    if (!e.empty()) throw PromptError(e);
  }
}

// ---- records ------------------------------------------------------------------------

namespace {

json outcomes_json(const std::vector<TestOutcome>& outcomes) {
  json a = json::array();
  for (const auto o : outcomes) a.push_back(to_string(o));
  return a;
}

std::vector<TestOutcome> outcomes_from(const json& a) {
  std::vector<TestOutcome> out;
  for (const auto& s : a) {
    const auto o = parse_test_outcome(s.get<std::string>());
    if (!o) throw Error("unknown test outcome " + s.dump());
    out.push_back(*o);
  }
  return out;
}

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }
std::optional<double> read_number(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

template <typename T, typename F>
std::vector<T> read_jsonl(const fs::path& path, F&& from) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path.string());
  std::vector<T> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(from(json::parse(line)));
    } catch (const std::exception& e) {
      throw Error(path.string() + ":" + std::to_string(number) + ": " + e.what());
    }
  }
  return out;
}

void write_lines(const fs::path& path, const std::vector<json>& lines) {
  std::ofstream out(path, std::ios::trunc);
  for (const auto& l : lines) out << l.dump() << '\n';
  if (!out) throw Error("cannot write " + path.string());
}

}  // namespace

void save_generation_records(const std::vector<GenerationRecord>& records, const fs::path& path) {
  std::vector<json> lines;
  for (const auto& r : records) {
    lines.push_back({{"sample_id", r.sample_id},
                     {"candidate_index", r.candidate_index},
                     {"generated_text", r.generated_text},
                     {"per_test_outcome", outcomes_json(r.per_test_outcome)},
                     {"passed_all", r.passed_all},
                     {"dir_value", optional_number(r.dir_value)}});
  }
  write_lines(path, lines);
}

std::vector<GenerationRecord> load_generation_records(const fs::path& path) {
  return read_jsonl<GenerationRecord>(path, [](const json& j) {
    GenerationRecord r;
    r.sample_id = j.at("sample_id").get<std::string>();
    r.candidate_index = j.at("candidate_index").get<int>();
    r.generated_text = j.at("generated_text").get<std::string>();
    r.per_test_outcome = outcomes_from(j.at("per_test_outcome"));
    r.passed_all = j.at("passed_all").get<bool>();
    r.dir_value = read_number(j, "dir_value");
    const bool all = std::all_of(r.per_test_outcome.begin(), r.per_test_outcome.end(),
                                 [](TestOutcome o) { return o == TestOutcome::Pass; });
    if (all != r.passed_all) throw Error("passed_all disagrees with per_test_outcome");
    return r;
  });
}

void save_traces(const std::vector<DebugTrace>& traces, const fs::path& path) {
  std::vector<json> lines;
  for (const auto& t : traces) {
    json rounds = json::array();
    for (const auto& r : t.rounds) {
      rounds.push_back({{"round_index", r.round_index},
                        {"candidate", r.candidate},
                        {"per_test_outcome", outcomes_json(r.per_test_outcome)},
                        {"dir_value", optional_number(r.dir_value)}});
    }
    lines.push_back({{"sample_id", t.sample_id},
                     {"rounds", std::move(rounds)},
                     {"terminal_status", to_string(t.terminal_status)},
                     {"error", t.error ? json(*t.error) : json(nullptr)}});
  }
  write_lines(path, lines);
}

std::vector<DebugTrace> load_traces(const fs::path& path) {
  return read_jsonl<DebugTrace>(path, [](const json& j) {
    DebugTrace t;
    t.sample_id = j.at("sample_id").get<std::string>();
    for (const auto& r : j.at("rounds")) {
      t.rounds.push_back({r.at("round_index").get<int>(), r.at("candidate").get<std::string>(),
                          outcomes_from(r.at("per_test_outcome")), read_number(r, "dir_value")});
    }
    t.terminal_status =
        j.at("terminal_status").get<std::string>() == "solved" ? TerminalStatus::Solved : TerminalStatus::Exhausted;
    if (j.contains("error") && !j.at("error").is_null()) t.error = j.at("error").get<std::string>();
    return t;
  });
}

}  // namespace depbench
