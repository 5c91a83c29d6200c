#pragma once

// Chat-completions client for binary judgments: few-shot prompt templates,
// YES/NO verdict parsing, retry with backoff, and a content-addressed disk
// cache that makes repeated evaluations free and reproducible.

#include <atomic>
#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "argue/errors.hpp"
#include "argue/judgment.hpp"

namespace argue::llm {

struct FewShotExample {
  Variables variables;
  Verdict verdict = Verdict::No;
};

struct PromptTemplate {
  std::string template_id;
  std::string version;
  JudgmentKind kind = JudgmentKind::CitationAttests;
  std::string system;
  std::vector<FewShotExample> few_shot_examples;
  std::string body;  // {name} placeholders
};

PromptTemplate template_from_json(const json& j);
PromptTemplate load_template(const std::filesystem::path& path);
/// Every *.json template in a directory, keyed by kind. Two templates for
/// one kind is a ConfigError.
std::map<JudgmentKind, PromptTemplate> load_templates(const std::filesystem::path& dir);

/// Placeholder names in order of first appearance.
std::vector<std::string> placeholders(std::string_view body);

class RenderError : public Error {
 public:
  using Error::Error;
};

/// Few-shot examples first, then the query instance. Throws RenderError
/// "unbound placeholder: <name>".
std::string render(const PromptTemplate& tmpl, const Variables& variables);

enum class ParsedVerdict { Yes, No, Unparseable };
std::string to_string(ParsedVerdict v);

/// First YES/NO word (case-insensitive, punctuation ignored) on the final
/// non-empty line; anything else is Unparseable.
ParsedVerdict parse_verdict(std::string_view raw_response);

struct JudgeRequest {
  std::string model;
  std::string template_id;
  std::string version;
  std::string system_prompt;
  std::string rendered_prompt;
  double temperature = 0.0;
  int max_tokens = 64;

  std::string fingerprint() const;
  json body() const;  // chat-completions request body
};

struct CacheEntry {
  std::string fingerprint;
  std::string raw_response;
  ParsedVerdict verdict = ParsedVerdict::Unparseable;
  std::string timestamp;
};

/// One JSON file per entry, named by fingerprint. Concurrent readers and
/// concurrent writers of the same fingerprint are safe.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir);

  std::optional<CacheEntry> get(const std::string& fingerprint) const;
  void put(const CacheEntry& entry);  // no-op when the entry already exists
  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
};

struct HttpResponse {
  bool transport_ok = false;  // false: connection failed, timeout, ...
  int status = 0;
  std::string body;
  std::string error;
};

class ChatTransport {
 public:
  virtual ~ChatTransport() = default;
  virtual HttpResponse post(const std::string& json_body) = 0;
};

/// POSTs to an http(s) URL with an optional bearer token.
class HttpTransport final : public ChatTransport {
 public:
  HttpTransport(std::string endpoint_url, std::optional<std::string> bearer_token,
                std::chrono::seconds timeout);
  HttpResponse post(const std::string& json_body) override;

 private:
  std::string scheme_host_port_;
  std::string path_;
  std::optional<std::string> bearer_token_;
  std::chrono::seconds timeout_;
};

struct RetryPolicy {
  int max_attempts = 5;
  std::chrono::milliseconds base_delay{500};
  std::chrono::milliseconds max_delay{16000};
  double jitter = 0.25;  // delay scaled by 1 +/- jitter
};

struct GatewayConfig {
  std::string endpoint;     // full URL of the chat-completions path
  std::string model;
  std::string api_key_env;  // name of the environment variable holding the key
  double temperature = 0.0;
  int max_tokens = 64;
  RetryPolicy retry;
  std::chrono::seconds timeout{120};
  std::filesystem::path cache_dir;
};

struct BinaryAnswer {
  Verdict verdict = Verdict::No;
  std::string raw;
  std::string fingerprint;
  bool defaulted = false;  // both attempts unparseable; verdict forced to NO
};

extern const char* const kStrictInstruction;

class LlmGateway {
 public:
  /// Without a transport, one is built from the config's endpoint on first
  /// cache miss; a warm cache never needs an endpoint.
  explicit LlmGateway(GatewayConfig config, std::unique_ptr<ChatTransport> transport = nullptr);

  BinaryAnswer ask_binary(const PromptTemplate& tmpl, const Variables& variables);

  std::size_t requests_sent() const { return requests_.load(); }
  const GatewayConfig& config() const { return config_; }

 private:
  CacheEntry complete(const JudgeRequest& request);
  std::string send_with_retries(const JudgeRequest& request);
  ChatTransport& transport();

  GatewayConfig config_;
  ResponseCache cache_;
  std::unique_ptr<ChatTransport> transport_;
  std::mutex transport_mutex_;
  std::atomic<std::size_t> requests_{0};
};

/// Judge backed by the gateway, one template per judge-resolved kind.
class LlmJudge final : public Judge {
 public:
  LlmJudge(LlmGateway& gateway, std::map<JudgmentKind, PromptTemplate> templates);
  JudgeAnswer ask(const JudgeQuery& query) override;

 private:
  LlmGateway& gateway_;
  std::map<JudgmentKind, PromptTemplate> templates_;
};

}  // namespace argue::llm
