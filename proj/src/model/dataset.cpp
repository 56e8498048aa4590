#include "depbench/dataset.hpp"

#include <cmath>
#include <fstream>

#include "depbench/error.hpp"
#include "depbench/source.hpp"
#include "json.hpp"

namespace depbench {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kPctTolerance = 1e-9;

json optional_string(const std::optional<std::string>& s) { return s ? json(*s) : json(nullptr); }

std::optional<std::string> read_optional(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<std::string>();
}

template <typename E>
E read_enum(const json& j, const char* key, std::optional<E> (*parse)(std::string_view)) {
  const auto text = j.at(key).get<std::string>();
  const auto v = parse(text);
  if (!v) throw std::invalid_argument(std::string("bad ") + key + ": " + text);
  return *v;
}

json to_json(const BenchmarkSample& s) {
  json deps = json::array();
  for (const auto& d : s.dependencies) {
    deps.push_back({{"name", d.name},
                    {"kind", to_string(d.kind)},
                    {"origin", d.origin},
                    {"locality", to_string(d.locality)},
                    {"definition_text", d.definition_text},
                    {"depth", d.depth},
                    {"signature", d.signature},
                    {"docstring", optional_string(d.docstring)}});
  }
  json prompts = json::object();
  for (const auto& [key, p] : s.prompts) {
    prompts[std::string(to_string(key.first))][std::string(to_string(key.second))] = {
        {"text", p.text}, {"token_count", p.token_count}};
  }
  json tests = json::array();
  for (const auto& t : s.tests) {
    json jt = {{"test_id", t.test_id},
               {"source_text", t.source_text},
               {"status", to_string(t.status)},
               {"origin", to_string(t.origin)}};
    if (t.expected_blob) jt["expected_blob"] = *t.expected_blob;
    tests.push_back(std::move(jt));
  }
  const auto& f = s.target;
  return {
      {"sample_id", s.sample_id},
      {"repo", s.repo},
      {"module_path", s.module_path},
      {"function_name", f.name},
      {"signature", f.signature},
      {"docstring", optional_string(f.docstring)},
      {"solution", s.solution},
      {"dependencies", std::move(deps)},
      {"prompts", std::move(prompts)},
      {"tests", std::move(tests)},
      {"line_coverage_pct", s.coverage.line_coverage_pct},
      {"covered_lines", s.coverage.covered_lines},
      {"total_executable_lines", s.coverage.total_executable_lines},
      {"module_imports", s.module_imports},
      {"target",
       {{"qualified_name", f.qualified_name},
        {"module_id", f.module_id},
        {"body", f.body},
        {"source", f.source},
        {"span", {f.span.begin, f.span.end, f.span.line, f.span.col, f.span.end_line}},
        {"parameters", f.parameters},
        {"identifiers", f.identifiers}}},
  };
}

BenchmarkSample from_json(const json& j) {
  BenchmarkSample s;
  s.sample_id = j.at("sample_id").get<std::string>();
  s.repo = j.at("repo").get<std::string>();
  s.module_path = j.at("module_path").get<std::string>();
  s.solution = j.at("solution").get<std::string>();
  s.module_imports = j.value("module_imports", std::vector<std::string>{});

  auto& f = s.target;
  f.name = j.at("function_name").get<std::string>();
  f.signature = j.at("signature").get<std::string>();
  f.docstring = read_optional(j, "docstring");
  const json& t = j.at("target");
  f.qualified_name = t.at("qualified_name").get<std::string>();
  f.module_id = t.at("module_id").get<std::string>();
  f.body = t.at("body").get<std::string>();
  f.source = t.at("source").get<std::string>();
  const auto span = t.at("span");
  f.span = Span{span.at(0).get<std::size_t>(), span.at(1).get<std::size_t>(), span.at(2).get<int>(),
                span.at(3).get<int>(), span.at(4).get<int>()};
  f.parameters = t.at("parameters").get<std::vector<std::string>>();
  f.identifiers = t.at("identifiers").get<std::set<std::string>>();

  for (const auto& d : j.at("dependencies")) {
    DependencyRecord r;
    r.name = d.at("name").get<std::string>();
    r.kind = read_enum(d, "kind", parse_definition_kind);
    r.origin = d.at("origin").get<std::string>();
    r.locality = read_enum(d, "locality", parse_locality);
    r.definition_text = d.at("definition_text").get<std::string>();
    r.depth = d.at("depth").get<int>();
    if (d.contains("signature")) {
      r.signature = d.at("signature").get<std::string>();
      r.docstring = read_optional(d, "docstring");
    } else if (const auto parts = source::definition_parts(r.definition_text)) {
      r.signature = parts->signature;
      r.docstring = parts->docstring;
    }
    s.dependencies.push_back(std::move(r));
  }
  s.dedupe_dependencies();

  for (const auto& [level_name, formats] : j.at("prompts").items()) {
    const auto level = parse_context_level(level_name);
    if (!level) throw std::invalid_argument("bad context level: " + level_name);
    for (const auto& [format_name, p] : formats.items()) {
      const auto format = parse_prompt_format(format_name);
      if (!format) throw std::invalid_argument("bad prompt format: " + format_name);
      s.prompts[{*level, *format}] =
          PromptSpec{*level, *format, p.at("text").get<std::string>(), p.at("token_count").get<std::size_t>()};
    }
  }

  for (const auto& jt : j.at("tests")) {
    TestRecord r;
    r.test_id = jt.at("test_id").get<std::string>();
    r.source_text = jt.at("source_text").get<std::string>();
    r.status = read_enum(jt, "status", parse_test_status);
    r.origin = read_enum(jt, "origin", parse_test_origin);
    r.expected_blob = read_optional(jt, "expected_blob");
    s.tests.push_back(std::move(r));
  }

  s.coverage.line_coverage_pct = j.at("line_coverage_pct").get<double>();
  s.coverage.covered_lines = j.value("covered_lines", std::set<int>{});
  s.coverage.total_executable_lines = j.value("total_executable_lines", 0);
  return s;
}

}  // namespace

void validate_sample(const BenchmarkSample& s, std::size_t line) {
  auto fail = [&](const std::string& what) { throw SchemaError(s.sample_id, line, what); };
  if (s.sample_id.empty()) fail("empty sample_id");
  std::set<std::string> names;
  for (const auto& d : s.dependencies) {
    if (d.name.empty()) fail("dependency with empty name");
    if (d.depth < 1 || d.depth > kMaxDependencyDepth) fail("dependency depth out of range: " + d.name);
    if (!names.insert(d.name).second) fail("duplicate dependency name: " + d.name);
  }
  std::set<std::string> ids;
  for (const auto& t : s.tests) {
    if (!is_validated(t.status)) fail("test " + t.test_id + " is not validated (" + std::string(to_string(t.status)) + ")");
    if (!ids.insert(t.test_id).second) fail("duplicate test_id: " + t.test_id);
  }
  for (const auto& [key, p] : s.prompts) {
    if (p.level != key.first || p.format != key.second) fail("prompt key does not match its spec");
    if (p.token_count != count_tokens(p.text)) {
      fail("prompt token_count mismatch at " + std::string(to_string(p.level)) + "/" +
           std::string(to_string(p.format)));
    }
  }
  const auto& c = s.coverage;
  if (!std::isfinite(c.line_coverage_pct) || c.line_coverage_pct < 0.0 || c.line_coverage_pct > 100.0) {
    fail("line_coverage_pct out of [0, 100]: " + std::to_string(c.line_coverage_pct));
  }
  if (c.total_executable_lines < 0) fail("negative total_executable_lines");
  if (c.total_executable_lines > 0) {
    if (c.covered_lines.size() > static_cast<std::size_t>(c.total_executable_lines)) {
      fail("more covered lines than executable lines");
    }
    const double expected = 100.0 * static_cast<double>(c.covered_lines.size()) / c.total_executable_lines;
    if (std::abs(expected - c.line_coverage_pct) > kPctTolerance) fail("line_coverage_pct disagrees with covered_lines");
  }
}

void save_dataset(const std::vector<BenchmarkSample>& samples, const fs::path& destination) {
  std::string out;
  for (auto s : samples) {
    s.dedupe_dependencies();
    validate_sample(s);
    out += to_json(s).dump();
    out += '\n';
  }
  std::ofstream file(destination, std::ios::binary | std::ios::trunc);
  if (!file) throw Error("cannot open for writing: " + destination.string());
  file << out;
  file.close();
  if (!file) throw Error("write failed: " + destination.string());
}

std::vector<BenchmarkSample> load_dataset(const fs::path& source) {
  std::ifstream file(source, std::ios::binary);
  if (!file) throw Error("cannot open dataset: " + source.string());
  std::vector<BenchmarkSample> samples;
  std::string line;
  std::size_t number = 0;
  while (std::getline(file, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw SchemaError("", number, std::string("malformed record: ") + e.what());
    }
    const std::string id = j.is_object() && j.contains("sample_id") && j["sample_id"].is_string()
                               ? j["sample_id"].get<std::string>()
                               : std::string();
    BenchmarkSample s;
    try {
      s = from_json(j);
    } catch (const std::exception& e) {
      throw SchemaError(id, number, e.what());
    }
    validate_sample(s, number);
    samples.push_back(std::move(s));
  }
  return samples;
}

fs::path blob_dir_for(const fs::path& dataset) {
  fs::path dir = dataset;
  dir += ".blobs";
  return dir;
}

}  // namespace depbench
