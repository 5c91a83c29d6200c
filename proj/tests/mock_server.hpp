#pragma once

// Scripted chat-completions endpoint on a loopback port.

#include <atomic>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

namespace testing_support {

using nlohmann::json;

// The handler maps the last user message
// to a reply; status codes other than 200 can be scripted per request.

class MockChatServer {
 public:
  struct Reply {
    int status = 200;
    std::string content;
  };
  using Script = std::function<Reply(const std::string& user_message, std::size_t hit)>;

  explicit MockChatServer(Script script) : script_(std::move(script)) {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      const std::size_t hit = hits_.fetch_add(1);
      std::string user;
      std::string auth = req.get_header_value("Authorization");
      {
        std::lock_guard lock(mutex_);
        auth_headers_.push_back(auth);
      }
      try {
        const json body = json::parse(req.body);
        for (const auto& m : body.at("messages")) {
          if (m.at("role") == "user") user = m.at("content").get<std::string>();
        }
      } catch (const std::exception&) {
        res.status = 400;
        return;
      }
      const Reply reply = script_(user, hit);
      res.status = reply.status;
      if (reply.status == 200) {
        json out{{"choices", json::array({{{"index", 0},
                                           {"message", {{"role", "assistant"},
                                                        {"content", reply.content}}}}})}};
        res.set_content(out.dump(), "application/json");
      } else {
        res.set_content(R"({"error":"scripted"})", "application/json");
      }
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~MockChatServer() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

  std::string url() const {
    return "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat/completions";
  }
  std::size_t hits() const { return hits_.load(); }
  std::vector<std::string> auth_headers() const {
    std::lock_guard lock(mutex_);
    return auth_headers_;
  }

 private:
  Script script_;
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
  std::atomic<std::size_t> hits_{0};
  mutable std::mutex mutex_;
  std::vector<std::string> auth_headers_;
};

/// Server script that answers like the oracle judge would on the few
/// markers the tests use: "YES" unless the query mentions "penguin", which
/// gets an unusable reply every time.
inline MockChatServer::Reply scripted_reply(const std::string& user, std::size_t) {
  const auto query = user.substr(user.rfind("Now the case to judge:") == std::string::npos
                                     ? 0
                                     : user.rfind("Now the case to judge:"));
  if (query.find("penguin") != std::string::npos) return {200, "I cannot tell."};
  if (query.find("filler") != std::string::npos) return {200, "Reasoning first.\nAnswer: no."};
  return {200, "YES"};
}

}  // namespace testing_support
