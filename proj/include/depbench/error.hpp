#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace depbench {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A dataset record violates the persisted schema or a domain invariant.
class SchemaError : public Error {
 public:
  SchemaError(std::string sample_id, std::size_t line, const std::string& what)
      : Error(format(sample_id, line, what)), sample_id_(std::move(sample_id)), line_(line) {}

  const std::string& sample_id() const { return sample_id_; }
  /// 1-based line in the dataset file, 0 when not read from a file.
  std::size_t line() const { return line_; }

 private:
  static std::string format(const std::string& id, std::size_t line, const std::string& what) {
    std::string out;
    if (line > 0) out += "line " + std::to_string(line) + ": ";
    if (!id.empty()) out += "sample " + id + ": ";
    return out + what;
  }

  std::string sample_id_;
  std::size_t line_;
};

class DependencyError : public Error {
 public:
  using Error::Error;
};

class PromptError : public Error {
 public:
  using Error::Error;
};

/// Generation backend failure after all retries were spent.
class BackendError : public Error {
 public:
  BackendError(const std::string& what, int attempts, int http_status = 0)
      : Error(what), attempts_(attempts), http_status_(http_status) {}

  int attempts() const { return attempts_; }
  int http_status() const { return http_status_; }

 private:
  int attempts_;
  int http_status_;
};

/// Sandbox/runner infrastructure failure. Distinct from a test failing.
class HarnessError : public Error {
 public:
  using Error::Error;
};

/// A metric's input violates its domain (e.g. c > n for pass@k).
class MetricError : public Error {
 public:
  using Error::Error;
};

class UsageError : public Error {
 public:
  using Error::Error;
};

}  // namespace depbench
