#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "depbench/backend.hpp"

#include <openssl/evp.h>

#include <cstdlib>
#include <fstream>
#include <semaphore>
#include <thread>

#include "depbench/error.hpp"
#include "httplib.h"
#include "json.hpp"

namespace depbench {

namespace fs = std::filesystem;
using nlohmann::json;

GenerationParams GenerationParams::greedy(int max_new_tokens) {
  GenerationParams p;
  p.temperature = 0.0;
  p.top_p = 1.0;
  p.num_samples = 1;
  p.max_new_tokens = max_new_tokens;
  p.mode = DecodingMode::Greedy;
  return p;
}

void GenerationParams::validate() const {
  auto bad = [](const std::string& what) { throw BackendError("invalid generation params: " + what, 0); };
  if (!(temperature >= 0.0)) bad("temperature must be >= 0");
  if (!(top_p > 0.0 && top_p <= 1.0)) bad("top_p must be in (0, 1]");
  if (num_samples < 1) bad("num_samples must be >= 1");
  if (max_new_tokens < 1) bad("max_new_tokens must be >= 1");
  if (mode == DecodingMode::Greedy && num_samples != 1) bad("greedy decoding returns a single sample");
}

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("sha256 failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 0xf];
  }
  return out;
}

namespace {

json params_json(const GenerationParams& p) {
  return {{"temperature", p.temperature},
          {"top_p", p.top_p},
          {"num_samples", p.num_samples},
          {"max_new_tokens", p.max_new_tokens},
          {"mode", p.mode == DecodingMode::Greedy ? "greedy" : "sampling"}};
}

GenerationParams params_from_json(const json& j) {
  GenerationParams p;
  p.temperature = j.at("temperature").get<double>();
  p.top_p = j.at("top_p").get<double>();
  p.num_samples = j.at("num_samples").get<int>();
  p.max_new_tokens = j.at("max_new_tokens").get<int>();
  p.mode = j.at("mode").get<std::string>() == "greedy" ? DecodingMode::Greedy : DecodingMode::Sampling;
  return p;
}

std::vector<std::string> cycle_to(const std::vector<std::string>& stored, int n) {
  std::vector<std::string> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) out.push_back(stored[static_cast<std::size_t>(i) % stored.size()]);
  return out;
}

}  // namespace

std::string request_hash(std::string_view prompt, const GenerationParams& params) {
  return sha256_hex(params_json(params).dump() + "\n" + std::string(prompt));
}

// ---- stub ---------------------------------------------------------------------

StubBackend::StubBackend(std::map<std::string, std::vector<std::string>> by_prompt_hash)
    : by_hash_(std::move(by_prompt_hash)) {
  if (const auto it = by_hash_.find("*"); it != by_hash_.end()) {
    fallback_ = it->second;
    by_hash_.erase(it);
  }
}

StubBackend StubBackend::from_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read stub file: " + path.string());
  try {
    return StubBackend(json::parse(in).get<std::map<std::string, std::vector<std::string>>>());
  } catch (const json::exception& e) {
    throw UsageError("bad stub file " + path.string() + ": " + e.what());
  }
}

void StubBackend::add(std::string_view prompt, std::vector<std::string> completions) {
  by_hash_[sha256_hex(prompt)] = std::move(completions);
}

void StubBackend::set_default(std::vector<std::string> completions) { fallback_ = std::move(completions); }

std::vector<std::string> StubBackend::complete(const std::string& prompt, const GenerationParams& params) {
  params.validate();
  const auto it = by_hash_.find(sha256_hex(prompt));
  const auto& stored = it != by_hash_.end() ? it->second : fallback_;
  if (stored.empty()) throw BackendError("stub has no completion for prompt " + sha256_hex(prompt), 1);
  return cycle_to(stored, params.num_samples);
}

std::vector<std::string> ScriptedBackend::complete(const std::string& prompt, const GenerationParams& params) {
  params.validate();
  auto out = script_(prompt, params);
  if (out.size() != static_cast<std::size_t>(params.num_samples)) {
    if (out.empty()) throw BackendError("scripted backend returned nothing", 1);
    out = cycle_to(out, params.num_samples);
  }
  return out;
}

// ---- transcripts ----------------------------------------------------------------

std::vector<TranscriptEntry> read_transcript(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read transcript: " + path.string());
  std::vector<TranscriptEntry> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    try {
      const auto j = json::parse(line);
      out.push_back({j.at("request_hash").get<std::string>(), j.value("prompt", std::string()),
                     params_from_json(j.at("params")), j.at("completions").get<std::vector<std::string>>()});
    } catch (const json::exception& e) {
      throw UsageError(path.string() + ":" + std::to_string(number) + ": bad transcript line: " + e.what());
    }
  }
  return out;
}

ReplayBackend::ReplayBackend(const fs::path& transcript) {
  for (auto& e : read_transcript(transcript)) by_hash_[e.request_hash] = std::move(e.completions);
}

std::vector<std::string> ReplayBackend::complete(const std::string& prompt, const GenerationParams& params) {
  params.validate();
  const auto hash = request_hash(prompt, params);
  const auto it = by_hash_.find(hash);
  if (it == by_hash_.end()) throw BackendError("request not in transcript: " + hash, 1);
  if (it->second.size() != static_cast<std::size_t>(params.num_samples)) {
    throw BackendError("transcript entry " + hash + " has " + std::to_string(it->second.size()) + " completions", 1);
  }
  return it->second;
}

RecordingBackend::RecordingBackend(std::shared_ptr<Backend> inner, fs::path transcript)
    : inner_(std::move(inner)), transcript_(std::move(transcript)) {}

std::vector<std::string> RecordingBackend::complete(const std::string& prompt, const GenerationParams& params) {
  auto out = inner_->complete(prompt, params);
  const json line = {{"request_hash", request_hash(prompt, params)},
                     {"prompt", prompt},
                     {"params", params_json(params)},
                     {"completions", out}};
  std::lock_guard lock(mu_);
  std::ofstream file(transcript_, std::ios::app);
  file << line.dump() << '\n';
  if (!file) throw Error("cannot append to transcript " + transcript_.string());
  return out;
}

// ---- http -------------------------------------------------------------------------

HttpConfig HttpConfig::from_env() {
  HttpConfig c;
  auto env = [](const char* name) {
    const char* v = std::getenv(name);
    return v ? std::string(v) : std::string();
  };
  c.endpoint = env("DEPBENCH_ENDPOINT");
  c.api_key = env("DEPBENCH_API_KEY");
  c.model = env("DEPBENCH_MODEL");
  return c;
}

struct HttpBackend::Impl {
  explicit Impl(HttpConfig c) : config(std::move(c)), slots(std::max(1, config.max_in_flight)) {}
  HttpConfig config;
  std::counting_semaphore<> slots;
};

HttpBackend::HttpBackend(HttpConfig config) {
  if (config.endpoint.empty()) throw UsageError("http backend needs an endpoint (DEPBENCH_ENDPOINT)");
  impl_ = std::make_unique<Impl>(std::move(config));
}

HttpBackend::~HttpBackend() = default;

std::vector<std::string> HttpBackend::complete(const std::string& prompt, const GenerationParams& params) {
  params.validate();
  const auto& cfg = impl_->config;
  json body = {{"prompt", prompt},
               {"max_tokens", params.max_new_tokens},
               {"n", params.num_samples},
               {"temperature", params.mode == DecodingMode::Greedy ? 0.0 : params.temperature},
               {"top_p", params.mode == DecodingMode::Greedy ? 1.0 : params.top_p}};
  if (!cfg.model.empty()) body["model"] = cfg.model;
  httplib::Headers headers;
  if (!cfg.api_key.empty()) headers.emplace("Authorization", "Bearer " + cfg.api_key);

  impl_->slots.acquire();
  struct Release {
    std::counting_semaphore<>& s;
    ~Release() { s.release(); }
  } release{impl_->slots};

  auto backoff = cfg.initial_backoff;
  int last_status = 0;
  std::string last_error;
  for (int attempt = 1; attempt <= cfg.max_attempts; ++attempt) {
    httplib::Client client(cfg.endpoint);
    client.set_connection_timeout(cfg.timeout);
    client.set_read_timeout(cfg.timeout);
    client.set_write_timeout(cfg.timeout);
    const auto res = client.Post(cfg.path, headers, body.dump(), "application/json");
    bool transient = false;
    if (!res) {
      transient = true;
      last_error = httplib::to_string(res.error());
    } else {
      last_status = res->status;
      if (res->status == 200) {
        std::vector<std::string> out;
        try {
          const auto j = json::parse(res->body);
          for (const auto& choice : j.at("choices")) out.push_back(choice.at("text").get<std::string>());
        } catch (const json::exception& e) {
          throw BackendError(std::string("malformed response: ") + e.what(), attempt, res->status);
        }
        if (out.size() != static_cast<std::size_t>(params.num_samples)) {
          throw BackendError("expected " + std::to_string(params.num_samples) + " choices, got " +
                                 std::to_string(out.size()),
                             attempt, res->status);
        }
        return out;
      }
      transient = res->status == 429 || res->status >= 500;
      last_error = "HTTP " + std::to_string(res->status);
    }
    if (!transient) throw BackendError("request rejected: " + last_error, attempt, last_status);
    if (attempt < cfg.max_attempts) {
      std::this_thread::sleep_for(backoff);
      backoff = std::min(backoff * 2, cfg.max_backoff);
    }
  }
  throw BackendError("retries exhausted: " + last_error, cfg.max_attempts, last_status);
}

// ---- helpers ------------------------------------------------------------------------

std::string extract_code(std::string_view completion) {
  const auto open = completion.find("```");
  if (open == std::string_view::npos) return std::string(completion);
  const auto body = completion.find('\n', open);
  if (body == std::string_view::npos) return std::string(completion);
  const auto close = completion.find("```", body + 1);
  const auto end = close == std::string_view::npos ? completion.size() : close;
  return std::string(completion.substr(body + 1, end - body - 1));
}

std::shared_ptr<Backend> make_backend(std::string_view spec) {
  const auto colon = spec.find(':');
  const auto kind = spec.substr(0, colon);
  const auto arg = colon == std::string_view::npos ? std::string_view() : spec.substr(colon + 1);
  if (kind == "stub" && !arg.empty()) return std::make_shared<StubBackend>(StubBackend::from_file(fs::path(arg)));
  if (kind == "replay" && !arg.empty()) return std::make_shared<ReplayBackend>(fs::path(arg));
  if (kind == "http") return std::make_shared<HttpBackend>(HttpConfig::from_env());
  throw UsageError("unknown backend '" + std::string(spec) + "' (expected stub:<file>, replay:<file> or http)");
}

}  // namespace depbench
