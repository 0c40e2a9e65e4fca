#pragma once

// Deterministic stand-in for a chat-completion endpoint, driven by a JSON
// fixture. Generation requests are answered by the "Batch: <k>" index in the
// prompt; labeling requests by the first matching rule.

#include <atomic>
#include <charconv>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "comment_judge/augment.hpp"
#include "comment_judge/dataset_io.hpp"
#include "comment_judge/error.hpp"

namespace comment_judge {

/// Fixture schema:
///   generate:          list of completion texts, served by batch index
///   generate_default:  served when the index is past the end (default "")
///   label_rules:       [{"contains": str | [str...], "reply": str}], all
///                      substrings must occur in the user message; first match wins
///   label_default:     reply when no rule matches (default "Useful")
///   fail_first:        answer the first N requests with `fail_status` (default 503)
///   require_api_key:   when set, requests must carry "Bearer <value>"
struct MockFixture {
  struct Rule {
    std::vector<std::string> contains;
    std::string reply;
  };
  std::vector<std::string> generate;
  std::string generate_default;
  std::vector<Rule> label_rules;
  std::string label_default = "Useful";
  std::size_t fail_first = 0;
  int fail_status = 503;
  std::optional<std::string> require_api_key;
};

inline MockFixture parse_mock_fixture(const nlohmann::json& j) {
  try {
    MockFixture f;
    if (j.contains("generate")) f.generate = j.at("generate").get<std::vector<std::string>>();
    f.generate_default = j.value("generate_default", std::string());
    if (j.contains("label_rules")) {
      for (const auto& r : j.at("label_rules")) {
        MockFixture::Rule rule;
        const auto& c = r.at("contains");
        if (c.is_string()) rule.contains.push_back(c.get<std::string>());
        else rule.contains = c.get<std::vector<std::string>>();
        rule.reply = r.at("reply").get<std::string>();
        f.label_rules.push_back(std::move(rule));
      }
    }
    f.label_default = j.value("label_default", std::string("Useful"));
    f.fail_first = j.value("fail_first", std::size_t{0});
    f.fail_status = j.value("fail_status", 503);
    if (j.contains("require_api_key")) f.require_api_key = j.at("require_api_key").get<std::string>();
    return f;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed mock fixture: ") + e.what());
  }
}

inline MockFixture load_mock_fixture(const std::filesystem::path& path) {
  try {
    return parse_mock_fixture(nlohmann::json::parse(read_file(path)));
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError("malformed mock fixture " + path.string() + ": " + e.what());
  }
}

/// Completion text the mock returns for `request` (a chat-completion body).
inline std::string mock_reply(const MockFixture& f, const nlohmann::json& request) {
  std::string system, user;
  for (const auto& m : request.at("messages")) {
    const auto role = m.at("role").get<std::string>();
    if (role == "system") system += m.at("content").get<std::string>();
    else if (role == "user") user += m.at("content").get<std::string>();
  }
  if (system == kLabelSystemPrompt) {
    for (const auto& rule : f.label_rules) {
      bool all = true;
      for (const auto& c : rule.contains) all = all && user.find(c) != std::string::npos;
      if (all) return rule.reply;
    }
    return f.label_default;
  }
  constexpr std::string_view tag = "Batch: ";
  const auto at = user.find(tag);
  if (at != std::string::npos) {
    std::size_t k = 0;
    const char* p = user.c_str() + at + tag.size();
    if (std::from_chars(p, user.c_str() + user.size(), k).ec == std::errc{} && k < f.generate.size()) {
      return f.generate[k];
    }
  }
  return f.generate_default;
}

inline std::string chat_completion_body(const std::string& content) {
  return nlohmann::json{{"object", "chat.completion"},
                        {"choices",
                         {{{"index", 0},
                           {"message", {{"role", "assistant"}, {"content", content}}},
                           {"finish_reason", "stop"}}}}}
      .dump();
}

/// HTTP server on 127.0.0.1 answering POST /v1/chat/completions from a fixture.
class MockServer {
 public:
  explicit MockServer(MockFixture fixture, int port = 0) : fixture_(std::move(fixture)) {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      handle(req, res);
    });
    port_ = port == 0 ? server_.bind_to_any_port("127.0.0.1") : (server_.bind_to_port("127.0.0.1", port) ? port : -1);
    if (port_ <= 0) throw IoError("mock server could not bind a port");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  ~MockServer() { stop(); }
  MockServer(const MockServer&) = delete;
  MockServer& operator=(const MockServer&) = delete;

  void stop() {
    if (thread_.joinable()) {
      server_.stop();
      thread_.join();
    }
  }

  /// Asks the listener to exit without waiting for it; wait() returns afterwards.
  void shutdown() { server_.stop(); }

  /// Blocks until the listener exits.
  void wait() {
    if (thread_.joinable()) thread_.join();
  }

  [[nodiscard]] int port() const noexcept { return port_; }
  [[nodiscard]] std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }
  [[nodiscard]] std::size_t requests() const noexcept { return requests_.load(); }

  /// Authorization header values seen so far, in arrival order.
  [[nodiscard]] std::vector<std::string> authorizations() const {
    std::lock_guard lock(mu_);
    return authorizations_;
  }

 private:
  void handle(const httplib::Request& req, httplib::Response& res) {
    const std::size_t n = requests_++;
    const auto auth = req.get_header_value("Authorization");
    {
      std::lock_guard lock(mu_);
      authorizations_.push_back(auth);
    }
    if (fixture_.require_api_key && auth != "Bearer " + *fixture_.require_api_key) {
      res.status = 401;
      res.set_content(R"({"error":"unauthorized"})", "application/json");
      return;
    }
    if (n < fixture_.fail_first) {
      res.status = fixture_.fail_status;
      res.set_content(R"({"error":"unavailable"})", "application/json");
      return;
    }
    try {
      res.set_content(chat_completion_body(mock_reply(fixture_, nlohmann::json::parse(req.body))),
                      "application/json");
    } catch (const std::exception&) {
      res.status = 400;
      res.set_content(R"({"error":"bad request"})", "application/json");
    }
  }

  MockFixture fixture_;
  httplib::Server server_;
  std::thread thread_;
  int port_ = -1;
  std::atomic<std::size_t> requests_{0};
  mutable std::mutex mu_;
  std::vector<std::string> authorizations_;
};

}  // namespace comment_judge
