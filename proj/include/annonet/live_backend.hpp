#pragma once

// Live backend speaking the OpenAI-style chat-completion and embedding wire
// format:
//
//   POST {base}/chat/completions
//     {"model", "messages": [{"role": "user", "content"}], "temperature", "max_tokens"}
//     -> {"choices": [{"message": {"content"}}]}
//   POST {base}/embeddings
//     {"model", "input": [...]} -> {"data": [{"index", "embedding": [...]}]}
//
// The HTTP layer is behind HttpTransport so the request/response handling can
// be exercised without a network; http_transport.hpp provides the real one.

#include <cstdlib>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "annonet/error.hpp"
#include "annonet/gateway.hpp"

namespace annonet {

struct HttpResponse {
  int status = 0;
  std::string body;
};

using HttpHeaders = std::vector<std::pair<std::string, std::string>>;

class HttpTransport {
public:
  virtual ~HttpTransport() = default;
  /// Throws TransportError on connection failure or timeout.
  virtual HttpResponse post(const std::string& path, const std::string& body, const HttpHeaders& headers,
                            std::chrono::milliseconds timeout) = 0;
};

struct EndpointConfig {
  std::string base_url = "https://api.openai.com/v1";
  /// Name of the environment variable holding the API key. Keys are never
  /// taken from command-line flags.
  std::string api_key_env = "ANNONET_API_KEY";
};

/// Splits "https://host:port/prefix" into origin and path prefix.
inline std::pair<std::string, std::string> split_base_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw InvalidInput("endpoint URL needs a scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, ""};
  std::string prefix = url.substr(path_start);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {url.substr(0, path_start), prefix};
}

inline std::string build_chat_request(const std::string& prompt, const GenerationConfig& cfg) {
  nlohmann::ordered_json body;
  body["model"] = cfg.model_id;
  body["messages"] = nlohmann::ordered_json::array({{{"role", "user"}, {"content", prompt}}});
  body["temperature"] = cfg.temperature;
  body["max_tokens"] = cfg.max_length;
  return body.dump();
}

inline std::string parse_chat_response(const std::string& body) {
  try {
    const auto j = nlohmann::json::parse(body);
    const auto& content = j.at("choices").at(0).at("message").at("content");
    return content.is_null() ? std::string{} : content.get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw BackendError(200, std::string("malformed chat-completion response: ") + e.what());
  }
}

inline std::string build_embedding_request(const std::vector<std::string>& texts, const EmbeddingConfig& cfg) {
  nlohmann::ordered_json body;
  body["model"] = cfg.model_id;
  body["input"] = texts;
  return body.dump();
}

inline std::vector<std::vector<double>> parse_embedding_response(const std::string& body, std::size_t expected) {
  try {
    const auto j = nlohmann::json::parse(body);
    std::vector<std::vector<double>> out(expected);
    const auto& data = j.at("data");
    if (data.size() != expected) throw BackendError(200, "embedding response has the wrong number of vectors");
    for (std::size_t i = 0; i < data.size(); ++i) {
      const std::size_t idx = data[i].value("index", i);
      if (idx >= expected) throw BackendError(200, "embedding index out of range");
      out[idx] = data[i].at("embedding").get<std::vector<double>>();
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw BackendError(200, std::string("malformed embedding response: ") + e.what());
  }
}

class LiveBackend final : public Backend {
public:
  LiveBackend(EndpointConfig endpoint, std::unique_ptr<HttpTransport> transport, RetryPolicy retry = {},
              Sleeper sleep = real_sleeper())
      : endpoint_(std::move(endpoint)), transport_(std::move(transport)), retry_(retry), sleep_(std::move(sleep)) {
    prefix_ = split_base_url(endpoint_.base_url).second;
    if (const char* key = std::getenv(endpoint_.api_key_env.c_str()); key != nullptr && *key != '\0')
      api_key_ = key;
  }

  std::string complete(const std::string& prompt, const GenerationConfig& cfg) override {
    const auto body = build_chat_request(prompt, cfg);
    RetryPolicy policy = retry_;
    policy.max_retries = cfg.max_retries;
    const auto response = with_retries([&] { return post("/chat/completions", body, cfg.timeout); }, policy, sleep_);
    return parse_chat_response(response.body);
  }

  std::vector<std::vector<double>> embed(const std::vector<std::string>& texts, const EmbeddingConfig& cfg) override {
    if (texts.empty()) return {};
    const auto body = build_embedding_request(texts, cfg);
    const auto response = with_retries([&] { return post("/embeddings", body, std::chrono::milliseconds{60'000}); },
                                       retry_, sleep_);
    return parse_embedding_response(response.body, texts.size());
  }

  [[nodiscard]] bool has_api_key() const noexcept { return !api_key_.empty(); }

private:
  HttpResponse post(const std::string& path, const std::string& body, std::chrono::milliseconds timeout) {
    HttpHeaders headers{{"Content-Type", "application/json"}};
    if (!api_key_.empty()) headers.emplace_back("Authorization", "Bearer " + api_key_);
    auto response = transport_->post(prefix_ + path, body, headers, timeout);
    if (response.status < 200 || response.status >= 300) throw BackendError(response.status, response.body);
    return response;
  }

  EndpointConfig endpoint_;
  std::unique_ptr<HttpTransport> transport_;
  RetryPolicy retry_;
  Sleeper sleep_;
  std::string prefix_;
  std::string api_key_;
};

}  // namespace annonet
