#include <doctest.h>

#include <cstdlib>

#include "argue/errors.hpp"
#include "argue/llm_gateway.hpp"
#include "mock_server.hpp"
#include "support.hpp"

using namespace argue;
using namespace argue::llm;
using testing_support::MockChatServer;
using testing_support::TempDir;

namespace {

PromptTemplate attests_template() {
  PromptTemplate t;
  t.template_id = "citation_attests";
  t.version = "1";
  t.kind = JudgmentKind::CitationAttests;
  t.system = "Judge support.";
  t.body = "Document: {document}\nSentence: {sentence}\nSupported?";
  return t;
}

GatewayConfig config_for(const MockChatServer& server, const std::filesystem::path& cache) {
  GatewayConfig c;
  c.endpoint = server.url();
  c.model = "mock-model";
  c.cache_dir = cache;
  c.retry.base_delay = std::chrono::milliseconds(1);
  c.retry.max_delay = std::chrono::milliseconds(4);
  c.timeout = std::chrono::seconds(5);
  return c;
}

const Variables kVars{{"document", "The dam opened in 1936."}, {"sentence", "It opened in 1936."}};

}  // namespace

TEST_CASE("render") {
  auto t = attests_template();
  SUBCASE("binds placeholders") {
    const auto p = render(t, kVars);
    CHECK(p.find("It opened in 1936.") != std::string::npos);
    CHECK(p == render(t, kVars));
  }
  SUBCASE("unbound placeholder is named") {
    t.body += " {answer}";
    try {
      render(t, kVars);
      FAIL("expected RenderError");
    } catch (const RenderError& e) {
      CHECK(std::string(e.what()) == "unbound placeholder: answer");
    }
  }
  SUBCASE("few-shot examples come first") {
    t.few_shot_examples.push_back({{{"document", "EXDOC"}, {"sentence", "EXSENT"}}, Verdict::Yes});
    const auto p = render(t, kVars);
    const auto ex = p.find("EXSENT");
    const auto query = p.find("It opened in 1936.");
    REQUIRE(ex != std::string::npos);
    REQUIRE(query != std::string::npos);
    CHECK(ex < query);
    CHECK(p.find("Answer: YES") < query);
  }
  SUBCASE("placeholders in order of first appearance") {
    CHECK(placeholders("{b} {a} {b} {c_d}") == std::vector<std::string>{"b", "a", "c_d"});
  }
}

TEST_CASE("parse_verdict") {
  CHECK(parse_verdict("YES") == ParsedVerdict::Yes);
  CHECK(parse_verdict("Answer: no.") == ParsedVerdict::No);
  CHECK(parse_verdict("It depends.") == ParsedVerdict::Unparseable);
  CHECK(parse_verdict("yes") == ParsedVerdict::Yes);
  CHECK(parse_verdict("Let me think. Yes, it says so.\n\nFinal: NO\n") == ParsedVerdict::No);
  CHECK(parse_verdict("no\n\n  \n") == ParsedVerdict::No);
  CHECK(parse_verdict("") == ParsedVerdict::Unparseable);
  CHECK(parse_verdict("nope") == ParsedVerdict::Unparseable);
  CHECK(parse_verdict("**Yes**") == ParsedVerdict::Yes);
}

TEST_CASE("fingerprint sensitivity") {
  JudgeRequest base{"m", "tid", "1", "sys", "prompt", 0.0, 64};
  const auto fp = base.fingerprint();
  CHECK(fp.size() == 64);
  CHECK(fp == JudgeRequest(base).fingerprint());
  auto changed = [&](auto mutate) {
    JudgeRequest r = base;
    mutate(r);
    return r.fingerprint() != fp;
  };
  CHECK(changed([](JudgeRequest& r) { r.model = "m2"; }));
  CHECK(changed([](JudgeRequest& r) { r.version = "2"; }));
  CHECK(changed([](JudgeRequest& r) { r.template_id = "other"; }));
  CHECK(changed([](JudgeRequest& r) { r.rendered_prompt += " "; }));
  CHECK(changed([](JudgeRequest& r) { r.temperature = 0.1; }));
  CHECK_FALSE(changed([](JudgeRequest& r) { r.max_tokens = 10; }));
}

TEST_CASE("request body shape") {
  JudgeRequest r{"m", "tid", "1", "sys", "prompt", 0.0, 32};
  const json b = r.body();
  CHECK(b.at("model") == "m");
  CHECK(b.at("messages").size() == 2);
  CHECK(b.at("messages")[0].at("role") == "system");
  CHECK(b.at("messages")[1].at("content") == "prompt");
  CHECK(b.at("temperature") == 0.0);
  CHECK(b.at("max_tokens") == 32);
}

TEST_CASE("cache") {
  TempDir dir;
  ResponseCache cache(dir.path() / "cache");
  CHECK_FALSE(cache.get("abc").has_value());
  cache.put({"abc", "YES", ParsedVerdict::Yes, "t"});
  cache.put({"abc", "NO", ParsedVerdict::No, "t2"});  // idempotent: first write stays
  auto e = cache.get("abc");
  REQUIRE(e.has_value());
  CHECK(e->raw_response == "YES");
  CHECK(std::filesystem::exists(dir.path() / "cache" / "abc"));
}

TEST_CASE("scripted YES creates a cache entry") {
  TempDir dir;
  MockChatServer server([](const std::string&, std::size_t) { return MockChatServer::Reply{200, "YES"}; });
  LlmGateway gw(config_for(server, dir / "cache"));
  auto a = gw.ask_binary(attests_template(), kVars);
  CHECK(a.verdict == Verdict::Yes);
  CHECK(a.raw == "YES");
  CHECK_FALSE(a.defaulted);
  CHECK(server.hits() == 1);
  CHECK(std::filesystem::exists(dir / "cache" / a.fingerprint));

  SUBCASE("warm cache needs no endpoint") {
    GatewayConfig offline;
    offline.model = "mock-model";
    offline.cache_dir = dir / "cache";
    LlmGateway cold(offline);
    auto b = cold.ask_binary(attests_template(), kVars);
    CHECK(b.verdict == Verdict::Yes);
    CHECK(b.fingerprint == a.fingerprint);
    CHECK(cold.requests_sent() == 0);
    CHECK(server.hits() == 1);
  }
}

TEST_CASE("unparseable reply triggers one reprompt") {
  TempDir dir;
  MockChatServer server([](const std::string& user, std::size_t) {
    const bool strict = user.find(kStrictInstruction) != std::string::npos;
    return MockChatServer::Reply{200, strict ? "NO" : "maybe"};
  });
  LlmGateway gw(config_for(server, dir / "cache"));
  auto a = gw.ask_binary(attests_template(), kVars);
  CHECK(a.verdict == Verdict::No);
  CHECK_FALSE(a.defaulted);
  CHECK(server.hits() == 2);
}

TEST_CASE("twice unparseable defaults to NO with a warning") {
  TempDir dir;
  MockChatServer server([](const std::string&, std::size_t) { return MockChatServer::Reply{200, "hmm"}; });
  LlmGateway gw(config_for(server, dir / "cache"));
  std::map<JudgmentKind, PromptTemplate> templates{{JudgmentKind::CitationAttests, attests_template()}};
  LlmJudge judge(gw, templates);
  JudgeQuery q{{JudgmentKind::CitationAttests, "r", "t", 0, Subject::doc("d1")}, kVars};
  auto a = judge.ask(q);
  CHECK(a.verdict == Verdict::No);
  CHECK(a.provenance == Provenance::Llm);
  REQUIRE(a.warning.has_value());
  CHECK(*a.warning == "unparseable verdict after reprompt; defaulted to NO");
  CHECK(a.raw_output == std::optional<std::string>("hmm"));
  CHECK(server.hits() == 2);
  // Both unparseable replies are cached, so asking again is free.
  judge.ask(q);
  CHECK(server.hits() == 2);
}

TEST_CASE("retries") {
  TempDir dir;
  SUBCASE("5xx and 429 are retried") {
    MockChatServer server([](const std::string&, std::size_t hit) {
      if (hit == 0) return MockChatServer::Reply{500, ""};
      if (hit == 1) return MockChatServer::Reply{429, ""};
      return MockChatServer::Reply{200, "YES"};
    });
    LlmGateway gw(config_for(server, dir / "cache"));
    CHECK(gw.ask_binary(attests_template(), kVars).verdict == Verdict::Yes);
    CHECK(server.hits() == 3);
    CHECK(gw.requests_sent() == 3);
  }
  SUBCASE("other 4xx fails at once") {
    MockChatServer server([](const std::string&, std::size_t) { return MockChatServer::Reply{400, ""}; });
    LlmGateway gw(config_for(server, dir / "cache"));
    CHECK_THROWS_AS(gw.ask_binary(attests_template(), kVars), JudgeError);
    CHECK(server.hits() == 1);
  }
  SUBCASE("retries exhausted carry the fingerprint") {
    MockChatServer server([](const std::string&, std::size_t) { return MockChatServer::Reply{503, ""}; });
    auto cfg = config_for(server, dir / "cache");
    cfg.retry.max_attempts = 3;
    LlmGateway gw(cfg);
    try {
      gw.ask_binary(attests_template(), kVars);
      FAIL("expected JudgeError");
    } catch (const JudgeError& e) {
      CHECK(e.fingerprint().size() == 64);
      CHECK(std::string(e.what()).find("3 attempts") != std::string::npos);
    }
    CHECK(server.hits() == 3);
  }
  SUBCASE("connection refused is a transport error") {
    GatewayConfig cfg;
    cfg.endpoint = "http://127.0.0.1:1/v1/chat/completions";
    cfg.model = "m";
    cfg.retry.max_attempts = 2;
    cfg.retry.base_delay = std::chrono::milliseconds(1);
    cfg.timeout = std::chrono::seconds(1);
    LlmGateway gw(cfg);
    CHECK_THROWS_AS(gw.ask_binary(attests_template(), kVars), JudgeError);
    CHECK(gw.requests_sent() == 2);
  }
}

TEST_CASE("bearer token from the environment") {
  TempDir dir;
  MockChatServer server([](const std::string&, std::size_t) { return MockChatServer::Reply{200, "NO"}; });
  ::setenv("ARGUE_TEST_KEY", "sk-test-secret", 1);
  auto cfg = config_for(server, dir / "cache");
  cfg.api_key_env = "ARGUE_TEST_KEY";
  LlmGateway gw(cfg);
  auto a = gw.ask_binary(attests_template(), kVars);
  CHECK(a.verdict == Verdict::No);
  REQUIRE(server.auth_headers().size() == 1);
  CHECK(server.auth_headers()[0] == "Bearer sk-test-secret");
  // The key is not part of the cached entry.
  const auto cached = testing_support::read_text(dir / "cache" / a.fingerprint);
  CHECK(cached.find("sk-test-secret") == std::string::npos);

  cfg.api_key_env = "ARGUE_TEST_KEY_UNSET";
  cfg.cache_dir = dir / "other";
  ::unsetenv("ARGUE_TEST_KEY_UNSET");
  LlmGateway missing(cfg);
  CHECK_THROWS_AS(missing.ask_binary(attests_template(), kVars), JudgeError);
}

TEST_CASE("template files") {
  TempDir dir;
  const auto defaults = load_templates(ARGUE_PROMPTS_DIR);
  for (auto kind : {JudgmentKind::DocRelevant, JudgmentKind::CitationAttests,
                    JudgmentKind::RequiresCitation, JudgmentKind::ClaimsUnanswerable,
                    JudgmentKind::AnswersQuestion, JudgmentKind::AnswerMatches}) {
    REQUIRE(defaults.contains(kind));
    const auto& t = defaults.at(kind);
    CHECK_FALSE(t.version.empty());
    CHECK_FALSE(t.few_shot_examples.empty());
    // Every example binds every placeholder of its body.
    for (const auto& ex : t.few_shot_examples) {
      for (const auto& name : placeholders(t.body)) CHECK(ex.variables.contains(name));
    }
  }
  CHECK_FALSE(defaults.contains(JudgmentKind::HasCitations));

  testing_support::write_text(dir / "a.json", testing_support::read_text(std::filesystem::path(ARGUE_PROMPTS_DIR) / "citation_attests.json"));
  testing_support::write_text(dir / "b.json", testing_support::read_text(std::filesystem::path(ARGUE_PROMPTS_DIR) / "citation_attests.json"));
  CHECK_THROWS_AS(load_templates(dir.path()), ConfigError);
  testing_support::write_text(dir.path() / "bad" / "x.json", "{\"template_id\":1}");
  CHECK_THROWS_AS(load_templates(dir.path() / "bad"), ConfigError);
  CHECK_THROWS_AS(load_templates(dir.path() / "absent"), IoError);
}
