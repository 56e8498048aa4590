#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

namespace depbench {

enum class DecodingMode { Sampling, Greedy };

struct GenerationParams {
  double temperature = 0.2;
  double top_p = 0.95;
  int num_samples = 10;
  int max_new_tokens = 512;
  DecodingMode mode = DecodingMode::Sampling;

  static GenerationParams greedy(int max_new_tokens = 512);
  /// Throws BackendError (attempts = 0) on an invalid combination.
  void validate() const;
};

std::string sha256_hex(std::string_view data);
/// Stable hash of a request: prompt plus the parameters that shape the output.
std::string request_hash(std::string_view prompt, const GenerationParams& params);

class Backend {
 public:
  virtual ~Backend() = default;
  /// Exactly params.num_samples completions, or BackendError.
  virtual std::vector<std::string> complete(const std::string& prompt, const GenerationParams& params) = 0;
  virtual std::string name() const = 0;
};

/// Deterministic: sha256(prompt) -> completions. A request for more samples
/// than stored cycles through the stored list.
class StubBackend : public Backend {
 public:
  StubBackend() = default;
  explicit StubBackend(std::map<std::string, std::vector<std::string>> by_prompt_hash);
  /// JSON object {"<sha256 of prompt>": ["completion", ...], "*": [...]} where
  /// "*" is the answer for any prompt without an entry.
  static StubBackend from_file(const std::filesystem::path& path);

  void add(std::string_view prompt, std::vector<std::string> completions);
  void set_default(std::vector<std::string> completions);
  std::vector<std::string> complete(const std::string& prompt, const GenerationParams& params) override;
  std::string name() const override { return "stub"; }

 private:
  std::map<std::string, std::vector<std::string>> by_hash_;
  std::vector<std::string> fallback_;
};

/// Completions computed by a callback; for tests and scripted runs.
class ScriptedBackend : public Backend {
 public:
  using Script = std::function<std::vector<std::string>(const std::string& prompt, const GenerationParams& params)>;
  explicit ScriptedBackend(Script script) : script_(std::move(script)) {}
  std::vector<std::string> complete(const std::string& prompt, const GenerationParams& params) override;
  std::string name() const override { return "scripted"; }

 private:
  Script script_;
};

/// One transcript line: {"request_hash", "prompt", "params", "completions"}.
struct TranscriptEntry {
  std::string request_hash;
  std::string prompt;
  GenerationParams params;
  std::vector<std::string> completions;
};
std::vector<TranscriptEntry> read_transcript(const std::filesystem::path& path);

/// Answers from a transcript recorded by RecordingBackend, keyed by request hash.
class ReplayBackend : public Backend {
 public:
  explicit ReplayBackend(const std::filesystem::path& transcript);
  std::vector<std::string> complete(const std::string& prompt, const GenerationParams& params) override;
  std::string name() const override { return "replay"; }

 private:
  std::map<std::string, std::vector<std::string>> by_hash_;
};

/// Forwards to `inner` and appends every request/response to a transcript.
class RecordingBackend : public Backend {
 public:
  RecordingBackend(std::shared_ptr<Backend> inner, std::filesystem::path transcript);
  std::vector<std::string> complete(const std::string& prompt, const GenerationParams& params) override;
  std::string name() const override { return "recording(" + inner_->name() + ")"; }

 private:
  std::shared_ptr<Backend> inner_;
  std::filesystem::path transcript_;
  std::mutex mu_;
};

struct HttpConfig {
  std::string endpoint;  // base URL, e.g. https://host:8000
  std::string api_key;
  std::string model;
  std::string path = "/v1/completions";
  int max_attempts = 4;
  std::chrono::milliseconds initial_backoff{500};
  std::chrono::milliseconds max_backoff{8000};
  std::chrono::seconds timeout{120};
  int max_in_flight = 8;

  /// DEPBENCH_ENDPOINT, DEPBENCH_API_KEY, DEPBENCH_MODEL.
  static HttpConfig from_env();
};

/// OpenAI-style completions endpoint. Retries connection errors, 429 and
/// 5xx with exponential backoff; other statuses and malformed bodies fail at once.
class HttpBackend : public Backend {
 public:
  explicit HttpBackend(HttpConfig config);
  ~HttpBackend() override;
  std::vector<std::string> complete(const std::string& prompt, const GenerationParams& params) override;
  std::string name() const override { return "http"; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// The first fenced code block of a chat-style answer, else the text unchanged.
std::string extract_code(std::string_view completion);

/// "stub:<file>", "replay:<file>" or "http". Throws UsageError otherwise.
std::shared_ptr<Backend> make_backend(std::string_view spec);

}  // namespace depbench
