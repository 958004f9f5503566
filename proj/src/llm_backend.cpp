#include "re2gec/llm_backend.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include <openssl/evp.h>

#include <httplib.h>

namespace re2gec {

using json = nlohmann::json;

namespace {

constexpr std::size_t kBodyExcerpt = 200;

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string base;    // path prefix without trailing slash
};

Endpoint split_endpoint(const std::string& url) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos) throw BackendError("endpoint must include a scheme: " + url);
  const auto slash = url.find('/', scheme + 3);
  Endpoint e;
  e.origin = url.substr(0, slash);
  e.base = slash == std::string::npos ? "" : url.substr(slash);
  while (!e.base.empty() && e.base.back() == '/') e.base.pop_back();
  return e;
}

std::optional<std::string> api_key(const BackendConfig& config) {
  if (config.api_key) return config.api_key;
  if (const char* env = std::getenv("RE2_API_KEY"); env && *env) return std::string(env);
  return std::nullopt;
}

bool retryable_status(int status) { return status == 429 || status >= 500; }

json post_with_retry(const BackendConfig& config, const std::string& route, const std::string& body,
                     const SleepFn& sleep) {
  const Endpoint ep = split_endpoint(config.endpoint);
  const std::string path = ep.base + route;
  httplib::Headers headers;
  if (auto key = api_key(config)) headers.emplace("Authorization", "Bearer " + *key);

  const int attempts = std::max(1, config.retry.max_attempts);
  std::string last_error;
  for (int attempt = 1; attempt <= attempts; ++attempt) {
    httplib::Client client(ep.origin);
    const auto secs = std::chrono::duration_cast<std::chrono::microseconds>(config.timeout);
    client.set_connection_timeout(secs);
    client.set_read_timeout(secs);
    client.set_write_timeout(secs);

    auto res = client.Post(path, headers, body, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
    } else if (res->status >= 200 && res->status < 300) {
      try {
        return json::parse(res->body);
      } catch (const json::parse_error&) {
        throw BackendError("malformed JSON from " + config.endpoint + route, res->status);
      }
    } else {
      const std::string excerpt = res->body.substr(0, kBodyExcerpt);
      last_error = "HTTP " + std::to_string(res->status) + ": " + excerpt;
      if (!retryable_status(res->status)) throw BackendError(last_error, res->status);
    }
    if (attempt < attempts) {
      const auto delay = std::chrono::milliseconds(static_cast<long long>(
          static_cast<double>(config.retry.base_delay.count()) *
          std::pow(config.retry.factor, attempt - 1)));
      if (sleep) sleep(delay);
      else std::this_thread::sleep_for(delay);
    }
  }
  throw BackendError("request to " + config.endpoint + route + " failed after " +
                     std::to_string(attempts) + " attempts: " + last_error);
}

std::string last_line(const std::string& prompt) {
  std::size_t end = prompt.size();
  while (true) {
    while (end > 0 && (prompt[end - 1] == '\n' || prompt[end - 1] == '\r')) --end;
    const auto nl = end == 0 ? std::string::npos : prompt.rfind('\n', end - 1);
    const std::size_t begin = nl == std::string::npos ? 0 : nl + 1;
    std::string line = prompt.substr(begin, end - begin);
    if (line.find_first_not_of(" \t") != std::string::npos || begin == 0) return line;
    end = begin;
  }
}

}  // namespace

void validate(const DecodingParams& params) {
  if (params.beam_size < 1) throw BackendError("beam_size must be >= 1");
  if (!(params.temperature > 0.0)) throw BackendError("temperature must be > 0");
  if (params.top_p && !(*params.top_p > 0.0 && *params.top_p <= 1.0)) {
    throw BackendError("top_p must be in (0, 1]");
  }
  if (params.top_k && *params.top_k < 1) throw BackendError("top_k must be >= 1");
}

std::string_view to_string(BackendKind kind) {
  return kind == BackendKind::http ? "http" : "mock";
}

std::optional<BackendKind> parse_backend_kind(std::string_view name) {
  if (name == "http") return BackendKind::http;
  if (name == "mock") return BackendKind::mock;
  return std::nullopt;
}

void validate(const BackendConfig& config) {
  if (config.kind == BackendKind::http) {
    if (config.endpoint.empty()) throw BackendError("http backend requires an endpoint");
    if (config.model.empty()) throw BackendError("http backend requires a model");
    split_endpoint(config.endpoint);
  } else if (config.script_path.empty()) {
    throw BackendError("mock backend requires a script path");
  }
  if (config.retry.max_attempts < 1) throw BackendError("retry attempts must be >= 1");
}

std::string prompt_hash(std::string_view prompt) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(prompt.data(), prompt.size(), digest, &len, EVP_sha256(), nullptr);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xF]);
  }
  return out;
}

MockScript MockScript::from_json(const json& j) {
  if (!j.is_object()) throw BackendError("mock script must be a JSON object");
  MockScript script;
  for (const auto& [key, value] : j.items()) {
    if (!value.is_string()) throw BackendError("mock script value for " + key + " must be a string");
    if (key == "__fallback__") {
      const auto mode = value.get<std::string>();
      if (mode == "echo_last_line") script.fallback = Fallback::echo_last_line;
      else if (mode == "none") script.fallback = Fallback::none;
      else throw BackendError("unknown mock fallback " + mode);
    } else {
      script.responses[key] = value.get<std::string>();
    }
  }
  return script;
}

MockScript MockScript::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw BackendError("cannot open mock script " + path);
  try {
    return from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw BackendError("malformed mock script " + path + ": " + e.what());
  }
}

nlohmann::ordered_json MockScript::to_json() const {
  nlohmann::ordered_json j;
  j["__fallback__"] = fallback == Fallback::echo_last_line ? "echo_last_line" : "none";
  for (const auto& [hash, response] : responses) j[hash] = response;
  return j;
}

void MockScript::add(std::string_view prompt, std::string response) {
  responses[prompt_hash(prompt)] = std::move(response);
}

std::string MockBackend::complete(const std::string& prompt, const DecodingParams&) {
  const auto it = script_.responses.find(prompt_hash(prompt));
  if (it != script_.responses.end()) return it->second;
  if (script_.fallback == MockScript::Fallback::echo_last_line) return last_line(prompt);
  throw BackendError("mock script has no response for prompt " + prompt_hash(prompt));
}

HttpBackend::HttpBackend(BackendConfig config, SleepFn sleep)
    : config_(std::move(config)), sleep_(std::move(sleep)) {
  validate(config_);
}

nlohmann::ordered_json HttpBackend::request_body(const std::string& prompt,
                                                 const DecodingParams& params) const {
  nlohmann::ordered_json body;
  body["model"] = config_.model;
  body["messages"] = nlohmann::ordered_json::array({{{"role", "user"}, {"content", prompt}}});
  body["temperature"] = params.temperature;
  body["do_sample"] = params.sample;
  body["beam_size"] = params.beam_size;
  if (params.top_k) body["top_k"] = *params.top_k;
  if (params.top_p) body["top_p"] = *params.top_p;
  return body;
}

std::string HttpBackend::complete(const std::string& prompt, const DecodingParams& params) {
  validate(params);
  const json reply = post_with_retry(config_, "/chat/completions", request_body(prompt, params).dump(), sleep_);
  try {
    return reply.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception&) {
    throw BackendError("completion response lacks choices[0].message.content");
  }
}

std::unique_ptr<Backend> make_backend(const BackendConfig& config) {
  validate(config);
  if (config.kind == BackendKind::http) return std::make_unique<HttpBackend>(config);
  return std::make_unique<MockBackend>(MockScript::load(config.script_path));
}

std::string complete(const std::string& prompt, const DecodingParams& params,
                     const BackendConfig& config) {
  return make_backend(config)->complete(prompt, params);
}

HttpEmbedder::HttpEmbedder(BackendConfig config, SleepFn sleep)
    : config_(std::move(config)), sleep_(std::move(sleep)) {
  if (config_.kind != BackendKind::http) throw BackendError("embeddings require an http endpoint");
  validate(config_);
}

std::vector<std::vector<double>> HttpEmbedder::embed(const std::vector<std::string>& texts) {
  if (texts.empty()) return {};
  nlohmann::ordered_json body;
  body["model"] = config_.model;
  body["input"] = texts;
  const json reply = post_with_retry(config_, "/embeddings", body.dump(), sleep_);
  std::vector<std::vector<double>> out(texts.size());
  try {
    const auto& data = reply.at("data");
    if (data.size() != texts.size()) throw BackendError("embedding count mismatch");
    for (std::size_t i = 0; i < data.size(); ++i) {
      const std::size_t slot = data[i].contains("index") ? data[i]["index"].get<std::size_t>() : i;
      if (slot >= out.size()) throw BackendError("embedding index out of range");
      out[slot] = data[i].at("embedding").get<std::vector<double>>();
    }
  } catch (const json::exception&) {
    throw BackendError("embedding response lacks data[].embedding");
  }
  return out;
}

}  // namespace re2gec
