#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace re2gec {

struct DecodingParams {
  bool sample = false;
  double temperature = 1.0;
  int beam_size = 8;
  std::optional<int> top_k;
  std::optional<double> top_p;
};

void validate(const DecodingParams& params);

// Exponential backoff: attempt n (1-based) waits base_delay * factor^(n-1)
// before attempt n+1.
struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds base_delay{1000};
  double factor = 2.0;
};

enum class BackendKind { http, mock };

std::string_view to_string(BackendKind kind);
std::optional<BackendKind> parse_backend_kind(std::string_view name);

struct BackendConfig {
  BackendKind kind = BackendKind::mock;
  std::string endpoint;     // http, e.g. "http://127.0.0.1:8000/v1"
  std::string model;        // http
  std::string script_path;  // mock
  std::chrono::milliseconds timeout{60'000};
  RetryPolicy retry;
  // Falls back to the RE2_API_KEY environment variable when unset.
  std::optional<std::string> api_key;
};

void validate(const BackendConfig& config);

class BackendError : public std::runtime_error {
 public:
  explicit BackendError(const std::string& what, int status = 0)
      : std::runtime_error(what), status_(status) {}
  int status() const { return status_; }

 private:
  int status_;
};

// Implementations must be safe to call from several threads at once.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual std::string complete(const std::string& prompt, const DecodingParams& params) = 0;
};

// Lowercase hex SHA-256 of the exact prompt bytes.
std::string prompt_hash(std::string_view prompt);

struct MockScript {
  enum class Fallback { echo_last_line, none };

  std::map<std::string, std::string> responses;  // prompt hash -> response
  Fallback fallback = Fallback::echo_last_line;

  static MockScript from_json(const nlohmann::json& j);
  static MockScript load(const std::string& path);
  nlohmann::ordered_json to_json() const;
  void add(std::string_view prompt, std::string response);
};

class MockBackend : public Backend {
 public:
  explicit MockBackend(MockScript script) : script_(std::move(script)) {}
  std::string complete(const std::string& prompt, const DecodingParams& params) override;

 private:
  MockScript script_;
};

// Sleeps between retries; replaceable so tests need not wait.
using SleepFn = std::function<void(std::chrono::milliseconds)>;

class HttpBackend : public Backend {
 public:
  explicit HttpBackend(BackendConfig config, SleepFn sleep = {});
  std::string complete(const std::string& prompt, const DecodingParams& params) override;

  nlohmann::ordered_json request_body(const std::string& prompt, const DecodingParams& params) const;

 private:
  BackendConfig config_;
  SleepFn sleep_;
};

std::unique_ptr<Backend> make_backend(const BackendConfig& config);

std::string complete(const std::string& prompt, const DecodingParams& params,
                     const BackendConfig& config);

// Dense text embeddings from an OpenAI-compatible /embeddings endpoint.
class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) = 0;
};

class HttpEmbedder : public Embedder {
 public:
  explicit HttpEmbedder(BackendConfig config, SleepFn sleep = {});
  std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) override;

 private:
  BackendConfig config_;
  SleepFn sleep_;
};

}  // namespace re2gec
