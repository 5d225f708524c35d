#include "bioinvert/llm.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "bioinvert/paths.hpp"
#include "bioinvert/schema.hpp"
#include "bioinvert/text.hpp"
#include "httplib.h"

namespace bioinvert {

using schema::child;

std::string_view to_string(TaskKind k) {
  switch (k) {
    case TaskKind::Label: return "label";
    case TaskKind::Paraphrase: return "paraphrase";
    case TaskKind::Correct: return "correct";
    case TaskKind::Summarize: return "summarize";
  }
  return "";
}

LlmTask make_task(TaskKind kind, std::string payload) {
  static const std::map<TaskKind, std::string> ids = {{TaskKind::Label, "labels.v1"},
                                                      {TaskKind::Paraphrase, "paraphrase.v1"},
                                                      {TaskKind::Correct, "correction.v1"},
                                                      {TaskKind::Summarize, "summary.v1"}};
  const auto& id = ids.at(kind);
  return LlmTask{kind, id, std::move(payload), id};
}

// --- prompts -------------------------------------------------------------------

PromptRegistry PromptRegistry::load(const std::string& dir) {
  namespace fs = std::filesystem;
  PromptRegistry reg;
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw Error(ErrorCode::IoError, "prompt directory " + dir + " not found");
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() != ".txt") continue;
    std::ifstream in(entry.path());
    std::stringstream ss;
    ss << in.rdbuf();
    auto body = ss.str();
    if (body.find("{{payload}}") == std::string::npos)
      throw Error(ErrorCode::SchemaError, "prompt " + entry.path().string() + " has no {{payload}} slot");
    reg.templates_[entry.path().stem().string()] = std::move(body);
  }
  return reg;
}

const PromptRegistry& PromptRegistry::shipped() {
  static const PromptRegistry reg = load(data_path("prompts"));
  return reg;
}

const std::string& PromptRegistry::get(std::string_view id) const {
  auto it = templates_.find(std::string(id));
  if (it == templates_.end()) throw Error(ErrorCode::NotFound, "no prompt template '" + std::string(id) + "'");
  return it->second;
}

std::string PromptRegistry::render(const LlmTask& task) const {
  auto body = get(task.prompt_template_id);
  const std::string slot = "{{payload}}";
  for (auto pos = body.find(slot); pos != std::string::npos; pos = body.find(slot, pos + task.payload.size()))
    body.replace(pos, slot.size(), task.payload);
  return body;
}

// --- reply validation ------------------------------------------------------------

namespace {

[[noreturn]] void reject(const std::string& why) { throw Error(ErrorCode::SchemaRejected, "reply rejected: " + why); }

std::string strip_fences(std::string_view raw) {
  auto s = text::trim(raw);
  if (s.starts_with("```")) {
    auto first_nl = s.find('\n');
    auto last = s.rfind("```");
    if (first_nl != std::string::npos && last > first_nl) s = text::trim(s.substr(first_nl + 1, last - first_nl - 1));
  }
  return s;
}

const Json& nonempty_string(const Json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_string() || text::trim(it->get<std::string>()).empty())
    reject(std::string("'") + key + "' must be a non-empty string");
  return *it;
}

void only_keys(const Json& j, std::initializer_list<std::string_view> keys) {
  for (auto it = j.begin(); it != j.end(); ++it)
    if (std::find(keys.begin(), keys.end(), it.key()) == keys.end()) reject("unexpected field '" + it.key() + "'");
}

}  // namespace

Json parse_reply(std::string_view shape, std::string_view raw) {
  Json j;
  try {
    j = Json::parse(strip_fences(raw));
  } catch (const Json::parse_error&) {
    reject("not a JSON document");
  }
  if (!j.is_object()) reject("expected a JSON object");

  if (shape == "labels.v1") {
    only_keys(j, {"labels"});
    auto it = j.find("labels");
    if (it == j.end() || !it->is_array()) reject("'labels' must be an array");
    std::set<std::string> seen;
    for (const auto& l : *it) {
      if (!l.is_string()) reject("labels must be strings");
      try {
        dimension_from_string(l.get<std::string>());
      } catch (const Error&) {
        reject("unknown label '" + l.get<std::string>() + "'");
      }
      if (!seen.insert(l.get<std::string>()).second) reject("duplicate label");
    }
  } else if (shape == "paraphrase.v1") {
    only_keys(j, {"text"});
    nonempty_string(j, "text");
  } else if (shape == "summary.v1") {
    only_keys(j, {"summary"});
    nonempty_string(j, "summary");
  } else if (shape == "correction.v1") {
    only_keys(j, {"replacements"});
    auto it = j.find("replacements");
    if (it == j.end() || !it->is_array()) reject("'replacements' must be an array");
    for (const auto& r : *it) {
      if (!r.is_object()) reject("replacement must be an object");
      only_keys(r, {"term", "replacement", "justification"});
      nonempty_string(r, "term");
      nonempty_string(r, "replacement");
      nonempty_string(r, "justification");
    }
  } else {
    throw Error(ErrorCode::NotFound, "unknown response shape '" + std::string(shape) + "'");
  }
  return j;
}

// --- retries -----------------------------------------------------------------------

std::chrono::milliseconds RetryPolicy::backoff(int attempt) const {
  const double ms = static_cast<double>(initial_backoff.count()) * std::pow(multiplier, attempt);
  return std::chrono::milliseconds(static_cast<long long>(std::min(ms, static_cast<double>(max_backoff.count()))));
}

Sleeper thread_sleeper() {
  return [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

LlmResponse complete(const LlmBackend& backend, const PromptRegistry& prompts, const LlmTask& task,
                     const RetryPolicy& policy, const Sleeper& sleep) {
  if (policy.max_attempts < 1) throw Error(ErrorCode::InvalidArgument, "max_attempts must be at least 1");
  const auto prompt = prompts.render(task);
  std::exception_ptr last;
  for (int attempt = 0; attempt < policy.max_attempts; ++attempt) {
    std::chrono::milliseconds wait = policy.backoff(attempt);
    try {
      auto reply = backend.send(task, prompt);
      auto parsed = parse_reply(task.expected_shape, reply.text);
      return LlmResponse{std::move(reply.text), std::move(parsed), reply.usage, attempt};
    } catch (const RateLimitedError& e) {
      wait = std::max(wait, e.retry_after());
      last = std::current_exception();
    } catch (const Error& e) {
      if (e.code() != ErrorCode::TransportError && e.code() != ErrorCode::SchemaRejected) throw;
      last = std::current_exception();
    }
    if (attempt + 1 < policy.max_attempts) sleep(wait);
  }
  std::rethrow_exception(last);
}

// --- mock ---------------------------------------------------------------------------

MockBackend::MockBackend(Json table) {
  const std::string path;
  schema::allow_keys(table, path, {"label_keywords", "synonyms", "summaries", "corrections"});
  for (const auto& e : table.value("label_keywords", Json::array())) {
    std::vector<std::string> labels;
    for (const auto& l : e.at("labels")) labels.push_back(std::string(to_string(dimension_from_string(l.get<std::string>()))));
    label_keywords_.emplace_back(text::to_lower(e.at("keyword").get<std::string>()), std::move(labels));
  }
  for (const auto& g : table.value("synonyms", Json::array())) synonym_groups_.push_back(g.get<std::vector<std::string>>());
  for (const auto& e : table.value("summaries", Json::array()))
    summaries_.emplace_back(text::to_lower(e.at("keyword").get<std::string>()), e.at("summary").get<std::string>());
  for (const auto& e : table.value("corrections", Json::array()))
    corrections_.push_back({e.at("term").get<std::string>(), e.at("replacement").get<std::string>(),
                            e.at("justification").get<std::string>()});
}

std::shared_ptr<MockBackend> MockBackend::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open mock table " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return std::make_shared<MockBackend>(schema::parse(ss.str()));
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::SchemaError, std::string("bad mock table: ") + e.what());
  }
}

std::shared_ptr<MockBackend> MockBackend::shipped() {
  static const auto mock = from_file(data_path("fixtures/llm-mock.json"));
  return mock;
}

BackendReply MockBackend::send(const LlmTask& task, const std::string& prompt) const {
  std::string out;
  switch (task.kind) {
    case TaskKind::Label: out = label(task.payload); break;
    case TaskKind::Paraphrase: out = paraphrase(schema::parse(task.payload)); break;
    case TaskKind::Correct: out = correct(schema::parse(task.payload)); break;
    case TaskKind::Summarize: out = summarize(schema::parse(task.payload)); break;
  }
  return BackendReply{out, LlmUsage{text::split_words(prompt).size(), text::split_words(out).size()}};
}

std::string MockBackend::label(std::string_view sentence) const {
  std::vector<std::string> keys;
  for (const auto& [k, _] : label_keywords_) keys.push_back(k);
  std::set<std::string> labels;
  for (const auto& m : find_terms(sentence, keys, MatchMode::Stem))
    labels.insert(label_keywords_[m.entry].second.begin(), label_keywords_[m.entry].second.end());
  return Json{{"labels", std::vector<std::string>(labels.begin(), labels.end())}}.dump();
}

std::string MockBackend::paraphrase(const Json& payload) const {
  const auto input = payload.at("text").get<std::string>();
  const auto variant = payload.value("variant", std::uint64_t{0});
  std::string out;
  std::size_t pos = 0;
  bool changed = false;
  for (const auto& tok : text::tokenize(input)) {
    for (const auto& group : synonym_groups_) {
      auto it = std::find(group.begin(), group.end(), tok.word);
      if (it == group.end() || group.size() < 2) continue;
      const auto idx = static_cast<std::size_t>(it - group.begin());
      const auto shift = 1 + variant % (group.size() - 1);
      out.append(input, pos, tok.begin - pos);
      out += text::match_leading_case(input.substr(tok.begin, tok.end - tok.begin), group[(idx + shift) % group.size()]);
      pos = tok.end;
      changed = true;
      break;
    }
  }
  out.append(input, pos);
  if (!changed) {
    static const std::array<std::string_view, 3> lead = {"In short, ", "Put differently, ", "Notably, "};
    auto body = out;
    if (!body.empty() && body[0] >= 'A' && body[0] <= 'Z' && !(body.size() > 1 && body[1] >= 'A' && body[1] <= 'Z'))
      body[0] = static_cast<char>(body[0] - 'A' + 'a');
    out = std::string(lead[variant % lead.size()]) + body;
  }
  return Json{{"text", out}}.dump();
}

std::string MockBackend::correct(const Json& payload) const {
  std::vector<std::string> bio, eng, fix;
  for (const auto& m : payload.at("mappings")) {
    bio.push_back(m.at("bio_term").get<std::string>());
    eng.push_back(m.at("eng_term").get<std::string>());
  }
  for (const auto& c : corrections_) fix.push_back(c.term);

  Json reps = Json::array();
  std::set<std::string> seen;
  for (const auto& phrase : payload.at("phrases")) {
    const auto t = phrase.at("text").get<std::string>();
    for (const auto& m : find_terms(t, fix))
      if (seen.insert(text::phrase_key(fix[m.entry])).second)
        reps.push_back(Json{{"term", corrections_[m.entry].term},
                            {"replacement", corrections_[m.entry].replacement},
                            {"justification", corrections_[m.entry].justification}});
    for (const auto& m : find_terms(t, bio))
      if (seen.insert(text::phrase_key(bio[m.entry])).second)
        reps.push_back(Json{{"term", bio[m.entry]},
                            {"replacement", eng[m.entry]},
                            {"justification", "engineering counterpart listed in the knowledge base"}});
  }
  return Json{{"replacements", reps}}.dump();
}

std::string MockBackend::summarize(const Json& payload) const {
  const auto sentences = payload.at("sentences").get<std::vector<std::string>>();
  std::vector<std::string> keys;
  for (const auto& [k, _] : summaries_) keys.push_back(k);
  for (const auto& s : sentences) {
    // Table order decides between keywords, not sentence position.
    auto hits = find_terms(s, keys, MatchMode::Stem);
    if (hits.empty()) continue;
    auto best = std::min_element(hits.begin(), hits.end(),
                                 [](const TermMatch& a, const TermMatch& b) { return a.entry < b.entry; });
    return Json{{"summary", summaries_[best->entry].second}}.dump();
  }
  std::string fallback;
  if (!sentences.empty()) {
    auto words = text::split_words(sentences.front());
    words.resize(std::min<std::size_t>(words.size(), 5));
    fallback = text::join(words, " ");
    while (!fallback.empty() && std::string_view(".!?,;:").find(fallback.back()) != std::string_view::npos)
      fallback.pop_back();
  }
  return Json{{"summary", fallback.empty() ? "Unspecified behavior" : fallback}}.dump();
}

// --- HTTP --------------------------------------------------------------------------------

namespace {

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string path;    // .../chat/completions
};

Endpoint endpoint_for(const std::string& base_url) {
  auto scheme_end = base_url.find("://");
  if (scheme_end == std::string::npos) throw Error(ErrorCode::InvalidArgument, "base URL needs a scheme: " + base_url);
  auto path_start = base_url.find('/', scheme_end + 3);
  Endpoint e;
  e.origin = base_url.substr(0, path_start);
  std::string prefix = path_start == std::string::npos ? "" : base_url.substr(path_start);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  e.path = prefix + (prefix.ends_with("/v1") ? "/chat/completions" : "/v1/chat/completions");
  return e;
}

std::string redact(std::string s, const std::string& secret) {
  if (secret.empty()) return s;
  for (auto pos = s.find(secret); pos != std::string::npos; pos = s.find(secret, pos))
    s.replace(pos, secret.size(), "[REDACTED]");
  return s;
}

}  // namespace

HttpBackend::HttpBackend(HttpConfig config)
    : config_(std::move(config)), in_flight_(std::clamp(config_.max_in_flight, 1, 256)) {}

void HttpBackend::trace(const Json& entry) const {
  if (!config_.trace_path) return;
  std::lock_guard lock(trace_mutex_);
  std::ofstream out(*config_.trace_path, std::ios::app);
  out << redact(entry.dump(), config_.api_key) << '\n';
}

BackendReply HttpBackend::send(const LlmTask& task, const std::string& prompt) const {
  if (config_.api_key.empty()) throw Error(ErrorCode::AuthError, "BIOINVERT_LLM_KEY is not set");
  const auto ep = endpoint_for(config_.base_url);
  const Json body = {{"model", config_.model},
                     {"temperature", 0},
                     {"response_format", {{"type", "json_object"}}},
                     {"messages",
                      Json::array({Json{{"role", "system"}, {"content", "Answer with one JSON object and nothing else."}},
                                   Json{{"role", "user"}, {"content", prompt}}})}};

  in_flight_.acquire();
  struct Release {
    std::counting_semaphore<256>& s;
    ~Release() { s.release(); }
  } release{in_flight_};

  httplib::Client client(ep.origin);
  client.set_connection_timeout(config_.timeout_seconds, 0);
  client.set_read_timeout(config_.timeout_seconds, 0);
  client.set_write_timeout(config_.timeout_seconds, 0);
  httplib::Headers headers = {{"Authorization", "Bearer " + config_.api_key}};
  auto res = client.Post(ep.path, headers, body.dump(), "application/json");

  Json entry = {{"task", std::string(to_string(task.kind))}, {"template", task.prompt_template_id}, {"request", body}};
  if (!res) {
    entry["error"] = httplib::to_string(res.error());
    trace(entry);
    throw Error(ErrorCode::TransportError, "request failed: " + httplib::to_string(res.error()));
  }
  entry["status"] = res->status;
  entry["response"] = res->body;
  trace(entry);

  if (res->status == 401 || res->status == 403) throw Error(ErrorCode::AuthError, "credential rejected by the endpoint");
  if (res->status == 429) {
    long long seconds = 1;
    if (res->has_header("Retry-After")) {
      try {
        seconds = std::stoll(res->get_header_value("Retry-After"));
      } catch (const std::exception&) {
      }
    }
    throw RateLimitedError("rate limited by the endpoint", std::chrono::seconds(std::max(0LL, seconds)));
  }
  if (res->status != 200) throw Error(ErrorCode::TransportError, "endpoint returned HTTP " + std::to_string(res->status));

  BackendReply reply;
  try {
    const auto j = Json::parse(res->body);
    reply.text = j.at("choices").at(0).at("message").at("content").get<std::string>();
    if (j.contains("usage")) {
      reply.usage.prompt_tokens = j["usage"].value("prompt_tokens", std::size_t{0});
      reply.usage.completion_tokens = j["usage"].value("completion_tokens", std::size_t{0});
    }
  } catch (const Json::exception&) {
    throw Error(ErrorCode::SchemaRejected, "malformed chat-completion envelope");
  }
  return reply;
}

// --- bridge ---------------------------------------------------------------------------

LlmBridge::LlmBridge(std::shared_ptr<const LlmBackend> backend, RetryPolicy policy, Sleeper sleeper,
                     const PromptRegistry* prompts)
    : backend_(std::move(backend)), policy_(policy), sleeper_(std::move(sleeper)), prompts_(prompts) {
  if (!backend_) throw Error(ErrorCode::InvalidArgument, "LLM bridge needs a backend");
}

LlmResponse LlmBridge::complete(const LlmTask& task) const {
  return bioinvert::complete(*backend_, prompts_ ? *prompts_ : PromptRegistry::shipped(), task, policy_, sleeper_);
}

LabelSet LlmBridge::label(std::string_view sentence) const {
  const auto r = complete(make_task(TaskKind::Label, std::string(sentence)));
  LabelSet out;
  for (const auto& l : r.parsed["labels"]) out.insert(dimension_from_string(l.get<std::string>()));
  return out;
}

std::string LlmBridge::paraphrase(std::string_view input, std::uint64_t variant) const {
  const Json payload = {{"text", input}, {"variant", variant}};
  return complete(make_task(TaskKind::Paraphrase, payload.dump())).parsed["text"].get<std::string>();
}

std::string LlmBridge::summarize(const std::vector<std::string>& sentences) const {
  const Json payload = {{"sentences", sentences}};
  return text::trim(complete(make_task(TaskKind::Summarize, payload.dump())).parsed["summary"].get<std::string>());
}

std::vector<LlmBridge::TermReplacement> LlmBridge::correct(const std::vector<SlotText>& phrases,
                                                           const EngineeringKB& kb) const {
  Json items = Json::array();
  for (const auto& p : phrases) items.push_back(Json{{"path", p.path}, {"text", p.text}});
  Json mappings = Json::array();
  for (const auto& m : kb.mappings) mappings.push_back(Json{{"bio_term", m.bio_term}, {"eng_term", m.eng_term}});
  Json rules = Json::array();
  for (const auto& r : kb.rules)
    rules.push_back(Json{{"first", r.first},
                         {"second", r.second},
                         {"verdict", r.verdict == RuleVerdict::Allowed ? "Allowed" : "Disallowed"},
                         {"rationale", r.rationale}});
  const Json payload = {{"phrases", items}, {"mappings", mappings}, {"rules", rules}, {"vocabulary", kb.vocabulary}};
  const auto r = complete(make_task(TaskKind::Correct, payload.dump()));
  std::vector<TermReplacement> out;
  for (const auto& rep : r.parsed["replacements"])
    out.push_back({rep["term"].get<std::string>(), rep["replacement"].get<std::string>(),
                   rep["justification"].get<std::string>()});
  return out;
}

DimensionScores LlmClassifier::score(const SentenceRecord& sentence) const {
  try {
    return indicator_scores(bridge_.label(sentence.text));
  } catch (const Error& e) {
    switch (e.code()) {
      case ErrorCode::TransportError:
      case ErrorCode::AuthError:
      case ErrorCode::RateLimited:
      case ErrorCode::SchemaRejected:
        throw Error(ErrorCode::ClassifierUnavailable, std::string("LLM classifier unavailable: ") + e.what());
      default: throw;
    }
  }
}

// --- frame correction ---------------------------------------------------------------------

std::vector<SlotText> phrases_needing_correction(const StrategyFrame& frame, const EngineeringKB& kb) {
  std::vector<SlotText> out;
  for (const auto& slot : noun_slots(frame)) {
    bool flag = !unresolved_terms(slot.text, kb).empty();
    for (const auto& r : kb.rules) {
      if (flag) break;
      if (r.verdict != RuleVerdict::Disallowed) continue;
      flag = !find_terms(slot.text, {r.first}).empty() && !find_terms(slot.text, {r.second}).empty();
    }
    if (flag) out.push_back(slot);
  }
  return out;
}

CorrectedFrame correct_frame(const StrategyFrame& frame, const EngineeringKB& kb, const LlmBridge& bridge) {
  if (kb.empty()) throw Error(ErrorCode::KbEmpty, "knowledge base has no mappings");
  CorrectedFrame out{frame, {}};
  const auto flagged = phrases_needing_correction(frame, kb);
  if (flagged.empty()) return out;

  const auto reps = bridge.correct(flagged, kb);
  std::vector<std::pair<std::string, std::string>> table;
  for (const auto& r : reps) table.emplace_back(r.term, r.replacement);

  for (const auto& slot : flagged) {
    std::vector<Replacement> applied;
    const auto after = substitute(slot.text, table, &applied);
    if (applied.empty() || after == slot.text) continue;
    std::vector<std::string> why;
    for (const auto& a : applied) {
      for (const auto& r : reps) {
        if (text::phrase_key(r.term) == text::phrase_key(a.before) ||
            !find_terms(a.before, {r.term}).empty()) {
          if (std::find(why.begin(), why.end(), r.justification) == why.end()) why.push_back(r.justification);
          break;
        }
      }
    }
    set_noun_slot(out.frame, slot.path, after);
    out.changes.push_back({slot.path, slot.text, after, text::join(why, "; ")});
  }
  return out;
}

StrategyFrame revert_changes(const StrategyFrame& frame, const std::vector<FrameChange>& changes) {
  StrategyFrame out = frame;
  for (auto it = changes.rbegin(); it != changes.rend(); ++it) {
    for (const auto& slot : noun_slots(out)) {
      if (slot.path == it->path && text::phrase_key(slot.text) == text::phrase_key(it->after)) {
        set_noun_slot(out, it->path, it->before);
        break;
      }
    }
  }
  return out;
}

Json to_json(const FrameChange& c) {
  return Json{{"path", c.path}, {"before", c.before}, {"after", c.after}, {"justification", c.justification}};
}

FrameChange frame_change_from_json(const Json& j, const std::string& path) {
  schema::allow_keys(j, path, {"path", "before", "after", "justification"});
  return FrameChange{schema::get_string(j, "path", path), schema::get_string(j, "before", path),
                     schema::get_string(j, "after", path), schema::get_string(j, "justification", path)};
}

}  // namespace bioinvert
