#include <gtest/gtest.h>

#include <httplib.h>

#include <deque>
#include <thread>

#include "bioinvert/llm.hpp"
#include "bioinvert/text.hpp"
#include "support.hpp"

using namespace bioinvert;
using namespace std::chrono_literals;
using bioinvert::testing::fixture;

namespace {

// Replays a fixed list of outcomes: a reply text, or an error to throw.
class ScriptedBackend final : public LlmBackend {
 public:
  struct Step {
    std::optional<ErrorCode> error;
    std::string text;
    std::chrono::milliseconds retry_after{0};
  };
  explicit ScriptedBackend(std::vector<Step> steps) : steps_(steps.begin(), steps.end()) {}

  BackendReply send(const LlmTask&, const std::string&) const override {
    std::lock_guard lock(mutex_);
    ++calls;
    if (steps_.empty()) throw std::logic_error("script exhausted");
    const auto s = steps_.front();
    steps_.pop_front();
    if (s.error == ErrorCode::RateLimited) throw RateLimitedError("slow down", s.retry_after);
    if (s.error) throw Error(*s.error, "scripted failure");
    return {s.text, {}};
  }
  std::string_view name() const override { return "scripted"; }

  mutable int calls = 0;

 private:
  mutable std::mutex mutex_;
  mutable std::deque<Step> steps_;
};

struct SleepLog {
  std::vector<std::chrono::milliseconds> waits;
  Sleeper sleeper() {
    return [this](std::chrono::milliseconds d) { waits.push_back(d); };
  }
};

const std::string kLabels = R"({"labels":["Function"]})";

}  // namespace

TEST(Retry, BackoffSchedule) {
  RetryPolicy p;
  p.initial_backoff = 100ms;
  p.multiplier = 2.0;
  p.max_backoff = 350ms;
  EXPECT_EQ(p.backoff(0), 100ms);
  EXPECT_EQ(p.backoff(1), 200ms);
  EXPECT_EQ(p.backoff(2), 350ms);
}

TEST(Retry, TransportErrorsThenSuccess) {
  ScriptedBackend b({{ErrorCode::TransportError, ""}, {ErrorCode::TransportError, ""}, {std::nullopt, kLabels}});
  SleepLog log;
  RetryPolicy p;
  const auto r = complete(b, PromptRegistry::shipped(), make_task(TaskKind::Label, "x"), p, log.sleeper());
  EXPECT_EQ(r.attempt, 2);
  EXPECT_EQ(r.parsed["labels"][0], "Function");
  EXPECT_EQ(log.waits, (std::vector<std::chrono::milliseconds>{p.backoff(0), p.backoff(1)}));
}

TEST(Retry, InvalidReplyIsRetriedThenRejected) {
  ScriptedBackend b({{std::nullopt, "Sure! Function."}, {std::nullopt, R"({"labels":["Fins"]})"},
                     {std::nullopt, R"({"labels":[],"extra":1})"}});
  SleepLog log;
  EXPECT_BIO_ERROR(complete(b, PromptRegistry::shipped(), make_task(TaskKind::Label, "x"), {}, log.sleeper()),
                   ErrorCode::SchemaRejected);
  EXPECT_EQ(b.calls, 3);
  EXPECT_EQ(log.waits.size(), 2u);  // no sleep after the final attempt
}

TEST(Retry, AuthErrorNotRetried) {
  ScriptedBackend b({{ErrorCode::AuthError, ""}, {std::nullopt, kLabels}});
  SleepLog log;
  EXPECT_BIO_ERROR(complete(b, PromptRegistry::shipped(), make_task(TaskKind::Label, "x"), {}, log.sleeper()),
                   ErrorCode::AuthError);
  EXPECT_EQ(b.calls, 1);
  EXPECT_TRUE(log.waits.empty());
}

TEST(Retry, RateLimitHonoursRetryAfter) {
  ScriptedBackend b({{ErrorCode::RateLimited, "", 5000ms}, {std::nullopt, kLabels}});
  SleepLog log;
  const auto r = complete(b, PromptRegistry::shipped(), make_task(TaskKind::Label, "x"), {}, log.sleeper());
  EXPECT_EQ(r.attempt, 1);
  ASSERT_EQ(log.waits.size(), 1u);
  EXPECT_EQ(log.waits[0], 5000ms);
}

TEST(Replies, ShapesValidated) {
  EXPECT_NO_THROW(parse_reply("labels.v1", "```json\n{\"labels\":[]}\n```"));
  EXPECT_BIO_ERROR(parse_reply("labels.v1", R"({"labels":["Function","Function"]})"), ErrorCode::SchemaRejected);
  EXPECT_BIO_ERROR(parse_reply("paraphrase.v1", R"({"text":""})"), ErrorCode::SchemaRejected);
  EXPECT_BIO_ERROR(parse_reply("summary.v1", "[]"), ErrorCode::SchemaRejected);
  EXPECT_BIO_ERROR(parse_reply("correction.v1", R"({"replacements":[{"term":"a","replacement":"b"}]})"),
                   ErrorCode::SchemaRejected);
}

TEST(Prompts, ShippedTemplatesRender) {
  const auto& reg = PromptRegistry::shipped();
  for (auto kind : {TaskKind::Label, TaskKind::Paraphrase, TaskKind::Correct, TaskKind::Summarize}) {
    const auto task = make_task(kind, "PAYLOAD-MARKER");
    EXPECT_TRUE(reg.contains(task.prompt_template_id)) << task.prompt_template_id;
    const auto text = reg.render(task);
    EXPECT_NE(text.find("PAYLOAD-MARKER"), std::string::npos);
    EXPECT_EQ(text.find("{{payload}}"), std::string::npos);
  }
}

TEST(Mock, LabelExample) {
  const auto mock = MockBackend::shipped();
  const LlmBridge bridge(mock, {}, SleepLog{}.sleeper());
  const auto r = bridge.complete(make_task(TaskKind::Label, "The mantle stores elastic energy."));
  EXPECT_EQ(r.parsed, Json::parse(R"({"labels":["Characteristic","Function"]})"));
}

TEST(Mock, PureAndDeterministic) {
  const auto mock = MockBackend::shipped();
  const LlmBridge bridge(mock);
  const std::string s = "The fish bends its tail to push water backward.";
  EXPECT_EQ(bridge.paraphrase(s, 3), bridge.paraphrase(s, 3));
  EXPECT_EQ(bridge.label(s), bridge.label(s));
  EXPECT_EQ(bridge.summarize({s}), bridge.summarize({s}));
  EXPECT_EQ(MockBackend::shipped()->send(make_task(TaskKind::Label, s), "").text,
            mock->send(make_task(TaskKind::Label, s), "").text);
}

TEST(Mock, ParaphraseKeepsContentNouns) {
  const LlmBridge bridge(MockBackend::shipped());
  const std::string s = "The squid mantle contracts to expel water through the funnel.";
  for (std::uint64_t v = 0; v < 4; ++v) {
    const auto p = text::to_lower(bridge.paraphrase(s, v));
    for (const char* noun : {"squid", "mantle", "water", "funnel"}) EXPECT_NE(p.find(noun), std::string::npos) << p;
  }
}

TEST(Correct, MantleBecomesChamber) {
  const auto kb = make_kb({{"mantle", "elastic chamber", {}, false}}, {}, {});
  const LlmBridge bridge(MockBackend::shipped());
  StrategyFrame f;
  f.id = "x";
  f.behavior.summary = "Provide thrust";
  f.functions = {StateTransition{"mantle", "contracting"}};
  f.characteristics = {noun_phrase<Characteristic>("elastic chamber wall")};
  const auto c = correct_frame(f, kb, bridge);
  ASSERT_EQ(c.changes.size(), 1u);
  EXPECT_EQ(c.changes[0].path, "/functions/0/object");
  EXPECT_EQ(c.changes[0].before, "mantle");
  EXPECT_EQ(c.changes[0].after, "elastic chamber");
  EXPECT_FALSE(c.changes[0].justification.empty());
  EXPECT_EQ(render(c.frame.functions[0]), "contracting elastic chamber");
  // Idempotent under the mock, and revertible.
  EXPECT_TRUE(correct_frame(c.frame, kb, bridge).changes.empty());
  EXPECT_EQ(revert_changes(c.frame, c.changes), f);
}

TEST(Correct, FixedPointAndEmptyKb) {
  const auto kb = load_kb_file(fixture("kb-soft-robot.json"));
  const LlmBridge bridge(MockBackend::shipped());
  StrategyFrame f;
  f.id = "eng";
  f.behavior.summary = "Provide thrust";
  f.functions = {ActionDescription{"driving", "linear actuator"}};
  f.characteristics = {noun_phrase<Characteristic>("laminated skin")};
  EXPECT_TRUE(correct_frame(f, kb, bridge).changes.empty());
  EXPECT_BIO_ERROR(correct_frame(f, EngineeringKB{}, bridge), ErrorCode::KbEmpty);
}

TEST(Http, MissingKeyIsAuthError) {
  HttpBackend b(HttpConfig{});
  EXPECT_BIO_ERROR(b.send(make_task(TaskKind::Label, "x"), "x"), ErrorCode::AuthError);
}

// Local chat-completions stand-in: checks the bearer token, records status codes.
class FakeEndpoint {
 public:
  explicit FakeEndpoint(int status) {
    server_.Post("/v1/chat/completions", [this, status](const httplib::Request& req, httplib::Response& res) {
      auth = req.get_header_value("Authorization");
      res.status = status;
      if (status == 429) res.set_header("Retry-After", "7");
      const Json reply = {{"choices", {{{"message", {{"role", "assistant"}, {"content", kLabels}}}}}},
                          {"usage", {{"prompt_tokens", 12}, {"completion_tokens", 3}}}};
      res.set_content(reply.dump(), "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeEndpoint() {
    server_.stop();
    thread_.join();
  }
  std::string base() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }
  std::string auth;

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

TEST(Http, SendsBearerAndRedactsTrace) {
  FakeEndpoint ep(200);
  bioinvert::testing::TempDir dir;
  HttpConfig cfg;
  cfg.base_url = ep.base();
  cfg.api_key = "sk-test-SECRET-1234";
  cfg.trace_path = (dir / "trace.jsonl").string();
  const LlmBridge bridge(std::make_shared<HttpBackend>(cfg));
  const auto r = bridge.complete(make_task(TaskKind::Label, "The fin bends."));
  EXPECT_EQ(r.parsed["labels"][0], "Function");
  EXPECT_EQ(r.usage.prompt_tokens, 12u);
  EXPECT_EQ(ep.auth, "Bearer sk-test-SECRET-1234");
  const auto trace = bioinvert::testing::slurp(*cfg.trace_path);
  EXPECT_FALSE(trace.empty());
  EXPECT_EQ(trace.find("SECRET"), std::string::npos);
}

TEST(Http, StatusMapping) {
  {
    FakeEndpoint ep(401);
    HttpConfig cfg;
    cfg.base_url = ep.base();
    cfg.api_key = "k";
    EXPECT_BIO_ERROR(HttpBackend(cfg).send(make_task(TaskKind::Label, "x"), "x"), ErrorCode::AuthError);
  }
  {
    FakeEndpoint ep(429);
    HttpConfig cfg;
    cfg.base_url = ep.base();
    cfg.api_key = "k";
    try {
      HttpBackend(cfg).send(make_task(TaskKind::Label, "x"), "x");
      FAIL();
    } catch (const RateLimitedError& e) {
      EXPECT_EQ(e.retry_after(), 7000ms);
    }
  }
  {
    FakeEndpoint ep(503);
    HttpConfig cfg;
    cfg.base_url = ep.base();
    cfg.api_key = "k";
    EXPECT_BIO_ERROR(HttpBackend(cfg).send(make_task(TaskKind::Label, "x"), "x"), ErrorCode::TransportError);
  }
}

TEST(LlmClassifier, TransportFailureIsUnavailable) {
  auto b = std::make_shared<ScriptedBackend>(std::vector<ScriptedBackend::Step>{{ErrorCode::TransportError, ""}});
  RetryPolicy once;
  once.max_attempts = 1;
  const LlmBridge bridge(b, once, SleepLog{}.sleeper());
  LlmClassifier cls(bridge);
  EXPECT_BIO_ERROR(cls.score(SentenceRecord{"a", "d", "x", 0, 0}), ErrorCode::ClassifierUnavailable);
}
