#pragma once

// Minimal client for chat-completion style HTTP endpoints.

#include <chrono>
#include <cstdlib>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "comment_judge/error.hpp"
#include "comment_judge/hash.hpp"

namespace comment_judge {

inline constexpr const char* kApiKeyEnv = "COMMENT_JUDGE_API_KEY";
inline constexpr const char* kEndpointEnv = "COMMENT_JUDGE_ENDPOINT";

/// Where and how to reach the generative endpoint. The credential is read
/// from the environment and is never written anywhere.
struct GenerativeEndpointConfig {
  std::string base_url;
  std::string model = "default";
  double generation_temperature = 0.7;
  double labeling_temperature = 0.0;
  std::chrono::milliseconds timeout{30'000};
  int max_retries = 3;
  std::chrono::milliseconds backoff{250};
  std::size_t max_in_flight = 4;
  std::size_t pairs_per_request = 5;
  std::size_t few_shot = 4;

  void validate() const {
    if (base_url.empty()) {
      throw UsageError(std::string("no endpoint configured: pass --endpoint or set ") + kEndpointEnv);
    }
    if (max_in_flight < 1) throw UsageError("max in-flight requests must be at least 1");
    if (pairs_per_request < 1) throw UsageError("pairs per request must be at least 1");
    if (max_retries < 0) throw UsageError("max retries must be non-negative");
  }
};

/// Non-secret view of the configuration, safe to persist.
inline nlohmann::json to_json(const GenerativeEndpointConfig& c) {
  return {{"base_url", c.base_url},
          {"model", c.model},
          {"generation_temperature", c.generation_temperature},
          {"labeling_temperature", c.labeling_temperature},
          {"timeout_ms", c.timeout.count()},
          {"max_retries", c.max_retries},
          {"max_in_flight", c.max_in_flight},
          {"pairs_per_request", c.pairs_per_request},
          {"few_shot", c.few_shot}};
}

struct ChatMessage {
  std::string role;
  std::string content;
};

struct ChatRequest {
  std::vector<ChatMessage> messages;
  double temperature = 0.0;
};

/// Wire body for a request, without any credential.
inline nlohmann::json request_body(const std::string& model, const ChatRequest& r) {
  nlohmann::json msgs = nlohmann::json::array();
  for (const auto& m : r.messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
  return {{"model", model}, {"messages", msgs}, {"temperature", r.temperature}};
}

/// Text of the first choice of a chat-completion response body.
inline std::string first_choice_text(const std::string& body) {
  try {
    const auto j = nlohmann::json::parse(body);
    const auto& content = j.at("choices").at(0).at("message").at("content");
    if (content.is_null()) return {};
    return content.get<std::string>();
  } catch (const nlohmann::json::exception&) {
    throw EndpointError("endpoint returned a malformed chat-completion response");
  }
}

class ChatClient {
 public:
  virtual ~ChatClient() = default;
  /// Returns the completion text. Must be safe to call from several threads.
  virtual std::string complete(const ChatRequest& request) = 0;
};

namespace detail {

struct ParsedUrl {
  std::string scheme_host_port;
  std::string path_prefix;
};

inline ParsedUrl split_base_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw UsageError("endpoint URL must start with http:// or https://");
  const auto scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") throw UsageError("unsupported endpoint scheme \"" + scheme + "\"");
  const auto path_start = url.find('/', scheme_end + 3);
  ParsedUrl p;
  p.scheme_host_port = url.substr(0, path_start);
  if (path_start != std::string::npos) p.path_prefix = url.substr(path_start);
  while (!p.path_prefix.empty() && p.path_prefix.back() == '/') p.path_prefix.pop_back();
  return p;
}

}  // namespace detail

/// POSTs to `<base>/v1/chat/completions` with a bearer credential. Transport
/// failures, 429 and 5xx are retried with exponential backoff; 401/403 fail
/// immediately.
class HttpChatClient final : public ChatClient {
 public:
  HttpChatClient(GenerativeEndpointConfig config, std::optional<std::string> api_key)
      : config_(std::move(config)), api_key_(std::move(api_key)) {
    config_.validate();
    url_ = detail::split_base_url(config_.base_url);
  }

  /// Reads the credential from COMMENT_JUDGE_API_KEY when set.
  static std::optional<std::string> api_key_from_env() {
    const char* v = std::getenv(kApiKeyEnv);
    if (!v || !*v) return std::nullopt;
    return std::string(v);
  }

  std::string complete(const ChatRequest& request) override {
    const std::string body = request_body(config_.model, request).dump();
    const std::string path = url_.path_prefix + "/v1/chat/completions";
    std::string last_failure;
    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
      if (attempt > 0) std::this_thread::sleep_for(config_.backoff * (1 << (attempt - 1)));
      httplib::Client client(url_.scheme_host_port);
      const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
      const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout - secs);
      client.set_connection_timeout(secs.count(), usecs.count());
      client.set_read_timeout(secs.count(), usecs.count());
      client.set_write_timeout(secs.count(), usecs.count());
      httplib::Headers headers;
      if (api_key_) headers.emplace("Authorization", "Bearer " + *api_key_);
      auto res = client.Post(path, headers, body, "application/json");
      if (!res) {
        last_failure = "transport error: " + httplib::to_string(res.error());
        continue;
      }
      if (res->status == 401 || res->status == 403) {
        throw AuthenticationError("endpoint " + config_.base_url + " rejected the credential (HTTP " +
                                  std::to_string(res->status) + "); check " + kApiKeyEnv);
      }
      if (res->status == 429 || res->status >= 500) {
        last_failure = "HTTP " + std::to_string(res->status);
        continue;
      }
      if (res->status != 200) {
        throw EndpointError("endpoint " + config_.base_url + " answered HTTP " + std::to_string(res->status));
      }
      return first_choice_text(res->body);
    }
    throw EndpointError("endpoint " + config_.base_url + " unreachable after " +
                        std::to_string(config_.max_retries + 1) + " attempts (" + last_failure + ")");
  }

 private:
  GenerativeEndpointConfig config_;
  std::optional<std::string> api_key_;
  detail::ParsedUrl url_;
};

}  // namespace comment_judge
