#include "argue/llm_gateway.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <random>
#include <thread>

#include <httplib.h>

#include "argue/io_util.hpp"

namespace argue::llm {

const char* const kStrictInstruction =
    "Your previous reply could not be read. Reply with exactly one word on a single line: "
    "YES or NO.";

// ---------------------------------------------------------------------------
// Templates

PromptTemplate template_from_json(const json& j) {
  PromptTemplate t;
  t.template_id = j.at("template_id").get<std::string>();
  t.version = j.at("version").get<std::string>();
  auto kind = parse_judgment_kind(j.at("kind").get<std::string>());
  if (!kind) throw ConfigError("template " + t.template_id + " has unknown kind");
  t.kind = *kind;
  t.system = j.value("system", "");
  t.body = j.at("body").get<std::string>();
  for (const auto& ex : j.value("few_shot_examples", json::array())) {
    FewShotExample example;
    example.variables = ex.at("variables").get<Variables>();
    auto v = parse_verdict_label(ex.at("verdict").get<std::string>());
    if (!v) throw ConfigError("template " + t.template_id + " has a few-shot verdict not YES/NO");
    example.verdict = *v;
    t.few_shot_examples.push_back(std::move(example));
  }
  return t;
}

PromptTemplate load_template(const std::filesystem::path& path) {
  try {
    return template_from_json(json::parse(read_file(path)));
  } catch (const json::exception& e) {
    throw ConfigError("invalid prompt template " + path.string() + ": " + e.what());
  }
}

std::map<JudgmentKind, PromptTemplate> load_templates(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw IoError("prompt template directory not found: " + dir.string());
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::map<JudgmentKind, PromptTemplate> out;
  for (const auto& f : files) {
    auto t = load_template(f);
    const auto kind = t.kind;
    if (!out.emplace(kind, std::move(t)).second) {
      throw ConfigError("two prompt templates for " + to_string(kind) + " in " + dir.string());
    }
  }
  return out;
}

namespace {

bool is_name_char(char c) {
  return std::islower(static_cast<unsigned char>(c)) || c == '_';
}

// Calls on_text for literal spans and on_name for each {name}.
template <class Text, class Name>
void scan(std::string_view body, Text&& on_text, Name&& on_name) {
  std::size_t i = 0;
  std::size_t literal = 0;
  while (i < body.size()) {
    if (body[i] == '{') {
      std::size_t j = i + 1;
      while (j < body.size() && is_name_char(body[j])) ++j;
      if (j > i + 1 && j < body.size() && body[j] == '}') {
        on_text(body.substr(literal, i - literal));
        on_name(body.substr(i + 1, j - i - 1));
        i = j + 1;
        literal = i;
        continue;
      }
    }
    ++i;
  }
  on_text(body.substr(literal));
}

std::string fill(std::string_view body, const Variables& vars) {
  std::string out;
  scan(
      body, [&](std::string_view text) { out += text; },
      [&](std::string_view name) {
        auto it = vars.find(std::string(name));
        if (it == vars.end()) throw RenderError("unbound placeholder: " + std::string(name));
        out += it->second;
      });
  return out;
}

}  // namespace

std::vector<std::string> placeholders(std::string_view body) {
  std::vector<std::string> names;
  scan(
      body, [](std::string_view) {},
      [&](std::string_view name) {
        if (std::find(names.begin(), names.end(), name) == names.end()) names.emplace_back(name);
      });
  return names;
}

std::string render(const PromptTemplate& tmpl, const Variables& variables) {
  std::string out;
  for (std::size_t i = 0; i < tmpl.few_shot_examples.size(); ++i) {
    const auto& ex = tmpl.few_shot_examples[i];
    out += "Example " + std::to_string(i + 1) + ":\n";
    out += fill(tmpl.body, ex.variables);
    out += "\nAnswer: " + to_string(ex.verdict) + "\n\n";
  }
  if (!tmpl.few_shot_examples.empty()) out += "Now the case to judge:\n";
  out += fill(tmpl.body, variables);
  out += "\nAnswer:";
  return out;
}

// ---------------------------------------------------------------------------
// Verdicts

std::string to_string(ParsedVerdict v) {
  switch (v) {
    case ParsedVerdict::Yes: return "YES";
    case ParsedVerdict::No: return "NO";
    case ParsedVerdict::Unparseable: return "UNPARSEABLE";
  }
  return "UNPARSEABLE";
}

namespace {

std::optional<ParsedVerdict> parsed_from_label(std::string_view s) {
  if (s == "YES") return ParsedVerdict::Yes;
  if (s == "NO") return ParsedVerdict::No;
  if (s == "UNPARSEABLE") return ParsedVerdict::Unparseable;
  return std::nullopt;
}

}  // namespace

ParsedVerdict parse_verdict(std::string_view raw) {
  std::string_view last;
  std::size_t start = 0;
  while (start <= raw.size()) {
    std::size_t end = raw.find('\n', start);
    if (end == std::string_view::npos) end = raw.size();
    std::string_view line = raw.substr(start, end - start);
    if (std::any_of(line.begin(), line.end(),
                    [](unsigned char c) { return !std::isspace(c); })) {
      last = line;
    }
    start = end + 1;
  }

  std::string word;
  auto check = [&]() -> std::optional<ParsedVerdict> {
    if (word == "yes") return ParsedVerdict::Yes;
    if (word == "no") return ParsedVerdict::No;
    word.clear();
    return std::nullopt;
  };
  for (unsigned char c : last) {
    if (std::isalnum(c)) {
      word += static_cast<char>(std::tolower(c));
    } else if (!word.empty()) {
      if (auto v = check()) return *v;
    }
  }
  if (!word.empty()) {
    if (auto v = check()) return *v;
  }
  return ParsedVerdict::Unparseable;
}

// ---------------------------------------------------------------------------
// Requests and cache

std::string JudgeRequest::fingerprint() const {
  char temp[32];
  std::snprintf(temp, sizeof temp, "%.17g", temperature);
  json key = json::array({model, template_id, version, system_prompt, rendered_prompt, temp});
  return sha256_hex(key.dump());
}

json JudgeRequest::body() const {
  json messages = json::array();
  if (!system_prompt.empty()) {
    messages.push_back({{"role", "system"}, {"content", system_prompt}});
  }
  messages.push_back({{"role", "user"}, {"content", rendered_prompt}});
  return json{{"model", model},
              {"messages", std::move(messages)},
              {"temperature", temperature},
              {"max_tokens", max_tokens}};
}

ResponseCache::ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {}

std::optional<CacheEntry> ResponseCache::get(const std::string& fingerprint) const {
  if (dir_.empty()) return std::nullopt;
  const auto path = dir_ / fingerprint;
  std::error_code ec;
  if (!std::filesystem::exists(path, ec)) return std::nullopt;
  try {
    json j = json::parse(read_file(path));
    CacheEntry e;
    e.fingerprint = j.at("fingerprint").get<std::string>();
    e.raw_response = j.at("raw_response").get<std::string>();
    auto v = parsed_from_label(j.at("verdict").get<std::string>());
    if (!v || e.fingerprint != fingerprint) return std::nullopt;
    e.verdict = *v;
    e.timestamp = j.value("timestamp", "");
    return e;
  } catch (const std::exception&) {
    return std::nullopt;  // unreadable entries are treated as misses
  }
}

void ResponseCache::put(const CacheEntry& entry) {
  if (dir_.empty()) return;
  const auto path = dir_ / entry.fingerprint;
  std::error_code ec;
  if (std::filesystem::exists(path, ec)) return;
  json j{{"fingerprint", entry.fingerprint},
         {"raw_response", entry.raw_response},
         {"verdict", to_string(entry.verdict)},
         {"timestamp", entry.timestamp}};
  write_file_atomic(path, j.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Transport

HttpTransport::HttpTransport(std::string endpoint_url, std::optional<std::string> bearer_token,
                             std::chrono::seconds timeout)
    : bearer_token_(std::move(bearer_token)), timeout_(timeout) {
  const auto scheme_end = endpoint_url.find("://");
  if (scheme_end == std::string::npos) {
    throw ConfigError("endpoint must be an http:// or https:// URL: " + endpoint_url);
  }
  const auto path_start = endpoint_url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) {
    scheme_host_port_ = endpoint_url;
    path_ = "/";
  } else {
    scheme_host_port_ = endpoint_url.substr(0, path_start);
    path_ = endpoint_url.substr(path_start);
  }
}

HttpResponse HttpTransport::post(const std::string& json_body) {
  httplib::Client client(scheme_host_port_);
  client.set_connection_timeout(timeout_);
  client.set_read_timeout(timeout_);
  client.set_write_timeout(timeout_);
  httplib::Headers headers;
  if (bearer_token_) headers.emplace("Authorization", "Bearer " + *bearer_token_);

  HttpResponse out;
  auto res = client.Post(path_, headers, json_body, "application/json");
  if (!res) {
    out.error = httplib::to_string(res.error());
    return out;
  }
  out.transport_ok = true;
  out.status = res->status;
  out.body = res->body;
  return out;
}

// ---------------------------------------------------------------------------
// Gateway

namespace {

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

bool retryable(const HttpResponse& r) {
  return !r.transport_ok || r.status == 429 || r.status >= 500;
}

std::string extract_content(const std::string& body) {
  json j = json::parse(body);
  const json& content = j.at("choices").at(0).at("message").at("content");
  return content.is_string() ? content.get<std::string>() : std::string();
}

}  // namespace

LlmGateway::LlmGateway(GatewayConfig config, std::unique_ptr<ChatTransport> transport)
    : config_(std::move(config)), cache_(config_.cache_dir), transport_(std::move(transport)) {}

ChatTransport& LlmGateway::transport() {
  std::lock_guard lock(transport_mutex_);
  if (!transport_) {
    if (config_.endpoint.empty()) throw JudgeError("no LLM endpoint configured and cache miss");
    std::optional<std::string> token;
    if (!config_.api_key_env.empty()) {
      const char* value = std::getenv(config_.api_key_env.c_str());
      if (value == nullptr || *value == '\0') {
        throw JudgeError("environment variable " + config_.api_key_env + " is not set");
      }
      token = value;
    }
    transport_ = std::make_unique<HttpTransport>(config_.endpoint, std::move(token), config_.timeout);
  }
  return *transport_;
}

std::string LlmGateway::send_with_retries(const JudgeRequest& request) {
  const std::string body = request.body().dump();
  const std::string fp = request.fingerprint();
  thread_local std::mt19937 rng{std::random_device{}()};
  std::uniform_real_distribution<double> unit(-1.0, 1.0);

  std::string last_error;
  const int attempts = std::max(1, config_.retry.max_attempts);
  for (int attempt = 1; attempt <= attempts; ++attempt) {
    HttpResponse r = transport().post(body);
    ++requests_;
    if (r.transport_ok && r.status >= 200 && r.status < 300) {
      try {
        return extract_content(r.body);
      } catch (const std::exception& e) {
        throw JudgeError(std::string("malformed chat-completions response: ") + e.what(), fp);
      }
    }
    last_error = r.transport_ok ? "HTTP " + std::to_string(r.status) : "transport error: " + r.error;
    if (!retryable(r)) throw JudgeError("non-retryable endpoint failure: " + last_error, fp);
    if (attempt == attempts) break;

    const double base = static_cast<double>(config_.retry.base_delay.count()) *
                        static_cast<double>(1u << std::min(attempt - 1, 20));
    const double capped = std::min(base, static_cast<double>(config_.retry.max_delay.count()));
    const double delay = std::max(0.0, capped * (1.0 + config_.retry.jitter * unit(rng)));
    std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(delay));
  }
  throw JudgeError("retries exhausted after " + std::to_string(attempts) + " attempts (" +
                       last_error + ")",
                   fp);
}

CacheEntry LlmGateway::complete(const JudgeRequest& request) {
  const std::string fp = request.fingerprint();
  if (auto hit = cache_.get(fp)) return *hit;
  std::string raw = send_with_retries(request);
  CacheEntry entry{fp, raw, parse_verdict(raw), utc_timestamp()};
  cache_.put(entry);
  return entry;
}

BinaryAnswer LlmGateway::ask_binary(const PromptTemplate& tmpl, const Variables& variables) {
  JudgeRequest request{config_.model,      tmpl.template_id,      tmpl.version,
                       tmpl.system,        render(tmpl, variables), config_.temperature,
                       config_.max_tokens};
  CacheEntry first = complete(request);
  if (first.verdict != ParsedVerdict::Unparseable) {
    return {first.verdict == ParsedVerdict::Yes ? Verdict::Yes : Verdict::No, first.raw_response,
            first.fingerprint, false};
  }

  JudgeRequest strict = request;
  strict.rendered_prompt += "\n\n";
  strict.rendered_prompt += kStrictInstruction;
  CacheEntry second = complete(strict);
  if (second.verdict != ParsedVerdict::Unparseable) {
    return {second.verdict == ParsedVerdict::Yes ? Verdict::Yes : Verdict::No,
            second.raw_response, second.fingerprint, false};
  }
  return {Verdict::No, second.raw_response, second.fingerprint, true};
}

LlmJudge::LlmJudge(LlmGateway& gateway, std::map<JudgmentKind, PromptTemplate> templates)
    : gateway_(gateway), templates_(std::move(templates)) {}

JudgeAnswer LlmJudge::ask(const JudgeQuery& query) {
  auto it = templates_.find(query.key.kind);
  if (it == templates_.end()) {
    throw JudgeError("no prompt template for " + to_string(query.key.kind));
  }
  BinaryAnswer a;
  try {
    a = gateway_.ask_binary(it->second, query.variables);
  } catch (const RenderError& e) {
    throw JudgeError(std::string("prompt rendering failed: ") + e.what());
  }
  JudgeAnswer out;
  out.verdict = a.verdict;
  out.provenance = Provenance::Llm;
  out.raw_output = std::move(a.raw);
  out.prompt_fingerprint = std::move(a.fingerprint);
  if (a.defaulted) out.warning = "unparseable verdict after reprompt; defaulted to NO";
  return out;
}

}  // namespace argue::llm
