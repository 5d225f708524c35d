#include "bioinvert/workbench.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "bioinvert/paths.hpp"
#include "bioinvert/random.hpp"
#include "bioinvert/schema.hpp"
#include "bioinvert/text.hpp"

namespace fs = std::filesystem;

namespace bioinvert {

namespace {

constexpr std::array<std::string_view, kStageCount> kStageNames = {
    "Ingested", "Classified", "Reviewed", "Framed", "Inverted", "Screened", "Ranked", "Clustered"};

constexpr const char* kStateFile = "state.json";
constexpr const char* kEventsFile = "events.jsonl";
constexpr const char* kConfigFile = "bioinvert.json";
constexpr const char* kLockFile = ".lock";

}  // namespace

std::string_view to_string(Stage s) { return kStageNames[static_cast<std::size_t>(s)]; }

Stage stage_from_string(std::string_view s) {
  const auto lower = text::to_lower(s);
  for (std::size_t i = 0; i < kStageCount; ++i)
    if (text::to_lower(kStageNames[i]) == lower) return static_cast<Stage>(i);
  throw Error(ErrorCode::InvalidArgument, "unknown stage '" + std::string(s) + "'", "/stage");
}

// --- config ----------------------------------------------------------------------

Json to_json(const ProjectConfig& c) {
  Json llm = {{"base_url", c.llm_base_url},
              {"model", c.llm_model},
              {"max_in_flight", c.llm_max_in_flight},
              {"timeout_seconds", c.llm_timeout_seconds}};
  if (c.llm_trace_path) llm["trace_path"] = *c.llm_trace_path;
  return Json{{"port", c.port},
              {"llm", llm},
              {"thresholds", {{"label", c.label_threshold}, {"cluster", c.cluster_threshold}}},
              {"ratio_default", c.ratio_default},
              {"strategy_weight", c.strategy_weight},
              {"review_max_rounds", c.review_max_rounds}};
}

ProjectConfig config_from_json(const Json& j, const std::string& path) {
  using namespace schema;
  allow_keys(j, path, {"port", "llm", "thresholds", "ratio_default", "strategy_weight", "review_max_rounds"});
  ProjectConfig c;
  if (j.contains("port")) c.port = static_cast<int>(as_uint(j["port"], child(path, "port")));
  if (j.contains("llm")) {
    const auto lp = child(path, "llm");
    const auto& l = j["llm"];
    allow_keys(l, lp, {"base_url", "model", "max_in_flight", "timeout_seconds", "trace_path", "api_key"});
    if (l.contains("api_key")) fail(child(lp, "api_key"), "credentials are read from BIOINVERT_LLM_KEY only");
    if (l.contains("base_url")) c.llm_base_url = get_string(l, "base_url", lp);
    if (l.contains("model")) c.llm_model = get_string(l, "model", lp);
    if (l.contains("max_in_flight")) c.llm_max_in_flight = static_cast<int>(as_uint(l["max_in_flight"], child(lp, "max_in_flight")));
    if (l.contains("timeout_seconds"))
      c.llm_timeout_seconds = static_cast<int>(as_uint(l["timeout_seconds"], child(lp, "timeout_seconds")));
    if (l.contains("trace_path")) c.llm_trace_path = get_string(l, "trace_path", lp);
  }
  if (j.contains("thresholds")) {
    const auto tp = child(path, "thresholds");
    const auto& t = j["thresholds"];
    allow_keys(t, tp, {"label", "cluster"});
    if (t.contains("label")) c.label_threshold = as_number(t["label"], child(tp, "label"));
    if (t.contains("cluster")) c.cluster_threshold = as_number(t["cluster"], child(tp, "cluster"));
  }
  if (j.contains("ratio_default")) c.ratio_default = as_number(j["ratio_default"], child(path, "ratio_default"));
  if (j.contains("strategy_weight")) c.strategy_weight = as_number(j["strategy_weight"], child(path, "strategy_weight"));
  if (j.contains("review_max_rounds"))
    c.review_max_rounds = as_uint(j["review_max_rounds"], child(path, "review_max_rounds"));
  return c;
}

// --- events ----------------------------------------------------------------------

Json to_json(const Event& e) { return Json{{"seq", e.seq}, {"type", e.type}, {"params", e.params}}; }

Event event_from_json(const Json& j, const std::string& path) {
  using namespace schema;
  allow_keys(j, path, {"seq", "type", "params"});
  Event e;
  e.seq = as_uint(require(j, "seq", path), child(path, "seq"));
  e.type = get_string(j, "type", path);
  e.params = require(j, "params", path);
  expect_object(e.params, child(path, "params"));
  return e;
}

// --- state -----------------------------------------------------------------------

std::optional<Stage> ProjectState::current_stage() const {
  std::optional<Stage> out;
  for (std::size_t i = 0; i < kStageCount; ++i) {
    if (!stages[i].complete || stages[i].stale) break;
    out = static_cast<Stage>(i);
  }
  return out;
}

const InversionResult* ProjectState::find_inversion(const std::string& id) const {
  for (const auto& r : inversions)
    if (r.id() == id) return &r;
  return nullptr;
}

namespace {

Json to_json(const Document& d) { return Json{{"doc_id", d.doc_id}, {"text", d.text}}; }

Document document_from_json(const Json& j, const std::string& path) {
  schema::allow_keys(j, path, {"doc_id", "text"});
  return Document{schema::get_string(j, "doc_id", path), schema::get_string(j, "text", path)};
}

Json to_json(const ScreenVerdict& v) { return Json{{"keep", v.keep}, {"reason", v.reason}}; }

ScreenVerdict screen_verdict_from_json(const Json& j, const std::string& path) {
  using namespace schema;
  allow_keys(j, path, {"keep", "reason"});
  ScreenVerdict v;
  v.keep = as_bool(require(j, "keep", path), child(path, "keep"));
  if (j.contains("reason")) v.reason = get_string(j, "reason", path);
  return v;
}

ManualScores manual_scores_from_json(const Json& j, const std::string& path) {
  using namespace schema;
  expect_object(j, path);
  ManualScores out;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const auto ap = child(path, it.key());
    expect_object(it.value(), ap);
    for (auto c = it.value().begin(); c != it.value().end(); ++c) {
      const double x = as_number(c.value(), child(ap, c.key()));
      if (!std::isfinite(x)) fail(child(ap, c.key()), "score must be finite");
      out[it.key()][c.key()] = x;
    }
  }
  return out;
}

template <typename T, typename F>
Json array_json(const std::vector<T>& xs, F f) {
  Json a = Json::array();
  for (const auto& x : xs) a.push_back(f(x));
  return a;
}

template <typename T, typename F>
std::vector<T> array_from(const Json& j, std::string_view key, const std::string& path, F f) {
  const auto p = schema::child(path, key);
  const auto& a = schema::require(j, key, path);
  schema::expect_array(a, p);
  std::vector<T> out;
  for (std::size_t i = 0; i < a.size(); ++i) out.push_back(f(a[i], schema::child(p, i)));
  return out;
}

}  // namespace

Json to_json(const ProjectState& s) {
  Json stages = Json::object();
  for (std::size_t i = 0; i < kStageCount; ++i)
    stages[std::string(kStageNames[i])] = {{"complete", s.stages[i].complete}, {"stale", s.stages[i].stale}};
  Json screening = Json::object();
  for (const auto& [id, v] : s.screening) screening[id] = to_json(v);
  Json manual = Json::object();
  for (const auto& [alt, row] : s.manual_scores)
    for (const auto& [c, x] : row) manual[alt][c] = x;
  Json reports = Json::object();
  for (const auto& [k, r] : s.stage_reports) reports[k] = r;
  const auto cur = s.current_stage();

  return Json{
      {"schema_version", kProjectFormatVersion},
      {"id", s.id},
      {"name", s.name},
      {"head", s.head},
      {"stage", cur ? Json(std::string(to_string(*cur))) : Json(nullptr)},
      {"stages", stages},
      {"kb", to_json(s.kb)},
      {"documents", array_json(s.documents, [](const Document& d) { return to_json(d); })},
      {"label_backend", s.label_backend},
      {"label_threshold", s.label_threshold},
      {"labeled", array_json(s.labeled, [](const LabeledSentence& l) { return to_json(l); })},
      {"review_seed", s.review_seed},
      {"batches", array_json(s.batches, [](const ReviewBatch& b) { return to_json(b); })},
      {"samples", s.samples ? *s.samples : Json(nullptr)},
      {"elementary", array_json(s.elementary, [](const ElementaryStrategy& e) { return to_json(e); })},
      {"frames", array_json(s.frames, [](const StrategyFrame& f) { return to_json(f); })},
      {"inversions", array_json(s.inversions, [](const InversionResult& r) { return to_json(r); })},
      {"screening", screening},
      {"kept", s.kept},
      {"problem", s.problem ? to_json(*s.problem) : Json(nullptr)},
      {"target_environment", s.target_environment ? to_json(*s.target_environment) : Json(nullptr)},
      {"criteria", to_json(s.criteria)},
      {"judgment", to_json(s.judgment)},
      {"manual_scores", manual},
      {"decision", s.decision ? to_json(*s.decision) : Json(nullptr)},
      {"clusters", s.clusters ? to_json(*s.clusters) : Json(nullptr)},
      {"cluster_assessments", s.cluster_assessments},
      {"stage_reports", reports},
  };
}

ProjectState project_from_json(const Json& j, const std::string& path) {
  using namespace schema;
  expect_object(j, path);
  if (!j.contains("schema_version") || !j["schema_version"].is_number_integer() ||
      j["schema_version"].get<long long>() != kProjectFormatVersion)
    throw Error(ErrorCode::VersionMismatch,
                "project schema_version " + (j.contains("schema_version") ? j["schema_version"].dump() : "<missing>") +
                    ", expected " + std::to_string(kProjectFormatVersion),
                child(path, "schema_version"));
  allow_keys(j, path,
             {"schema_version", "id", "name", "head", "stage", "stages", "kb", "documents", "label_backend",
              "label_threshold", "labeled", "review_seed", "batches", "samples", "elementary", "frames", "inversions",
              "screening", "kept", "problem", "target_environment", "criteria", "judgment", "manual_scores",
              "decision", "clusters", "cluster_assessments", "stage_reports"});
  ProjectState s;
  s.id = get_string(j, "id", path);
  s.name = get_string(j, "name", path);
  s.head = as_uint(require(j, "head", path), child(path, "head"));
  const auto sp = child(path, "stages");
  const auto& stages = require(j, "stages", path);
  expect_object(stages, sp);
  for (std::size_t i = 0; i < kStageCount; ++i) {
    const auto name = std::string(kStageNames[i]);
    const auto& st = require(stages, name, sp);
    s.stages[i].complete = as_bool(require(st, "complete", child(sp, name)), child(child(sp, name), "complete"));
    s.stages[i].stale = as_bool(require(st, "stale", child(sp, name)), child(child(sp, name), "stale"));
  }
  s.kb = kb_from_json(require(j, "kb", path), child(path, "kb"));
  s.documents = array_from<Document>(j, "documents", path, document_from_json);
  s.label_backend = get_string(j, "label_backend", path);
  s.label_threshold = as_number(require(j, "label_threshold", path), child(path, "label_threshold"));
  s.labeled = array_from<LabeledSentence>(j, "labeled", path, [](const Json& x, const std::string& p) { return labeled_from_json(x, p); });
  s.review_seed = as_uint(require(j, "review_seed", path), child(path, "review_seed"));
  s.batches = array_from<ReviewBatch>(j, "batches", path, [](const Json& x, const std::string& p) { return batch_from_json(x, p); });
  if (const auto& smp = require(j, "samples", path); !smp.is_null()) s.samples = smp;
  s.elementary = array_from<ElementaryStrategy>(j, "elementary", path, elementary_from_json);
  s.frames = array_from<StrategyFrame>(j, "frames", path, [](const Json& x, const std::string& p) { return frame_from_json(x, p); });
  s.inversions = array_from<InversionResult>(j, "inversions", path, [](const Json& x, const std::string& p) { return inversion_from_json(x, p); });
  const auto scp = child(path, "screening");
  const auto& screening = require(j, "screening", path);
  expect_object(screening, scp);
  for (auto it = screening.begin(); it != screening.end(); ++it)
    s.screening[it.key()] = screen_verdict_from_json(it.value(), child(scp, it.key()));
  s.kept = get_string_array(j, "kept", path);
  if (const auto& pr = require(j, "problem", path); !pr.is_null()) s.problem = problem_from_json(pr, child(path, "problem"));
  if (const auto& te = require(j, "target_environment", path); !te.is_null())
    s.target_environment = environment_from_json(te, child(path, "target_environment"));
  s.criteria = criteria_from_json(require(j, "criteria", path), child(path, "criteria"));
  s.judgment = judgment_from_json(require(j, "judgment", path), child(path, "judgment"));
  s.manual_scores = manual_scores_from_json(require(j, "manual_scores", path), child(path, "manual_scores"));
  if (const auto& d = require(j, "decision", path); !d.is_null()) s.decision = decision_run_from_json(d, child(path, "decision"));
  if (const auto& c = require(j, "clusters", path); !c.is_null()) s.clusters = cluster_report_from_json(c, child(path, "clusters"));
  const auto ap = child(path, "cluster_assessments");
  const auto& assess = require(j, "cluster_assessments", path);
  expect_object(assess, ap);
  for (auto it = assess.begin(); it != assess.end(); ++it) s.cluster_assessments[it.key()] = as_string(it.value(), child(ap, it.key()));
  const auto rp = child(path, "stage_reports");
  const auto& reports = require(j, "stage_reports", path);
  expect_object(reports, rp);
  for (auto it = reports.begin(); it != reports.end(); ++it) s.stage_reports[it.key()] = it.value();
  return s;
}

std::string serialize_state(const ProjectState& s) { return to_json(s).dump(2) + "\n"; }

// --- services --------------------------------------------------------------------

Services default_services(const ProjectConfig& config) {
  Services s;
  s.backend = [config](std::string_view name) -> std::shared_ptr<const LlmBackend> {
    if (name == "mock") return MockBackend::shipped();
    if (name == "llm") {
      const char* key = std::getenv("BIOINVERT_LLM_KEY");
      if (!key || !*key) throw Error(ErrorCode::AuthError, "BIOINVERT_LLM_KEY is not set");
      HttpConfig h;
      h.base_url = config.llm_base_url;
      h.model = config.llm_model;
      h.api_key = key;
      h.max_in_flight = config.llm_max_in_flight;
      h.timeout_seconds = config.llm_timeout_seconds;
      h.trace_path = config.llm_trace_path;
      return std::make_shared<HttpBackend>(h);
    }
    return nullptr;
  };
  return s;
}

// --- event application -----------------------------------------------------------

namespace {

void check_cancel(const CancelFlag* cancel) {
  if (cancel && cancel->load()) throw Error(ErrorCode::Cancelled, "cancelled");
}

// Marks every completed stage after `s` stale.
void touch(ProjectState& st, Stage s) {
  for (std::size_t i = static_cast<std::size_t>(s) + 1; i < kStageCount; ++i)
    if (st.stages[i].complete) st.stages[i].stale = true;
}

void complete(ProjectState& st, Stage s) {
  st.status(s) = StageStatus{true, false};
  touch(st, s);
}

void require_prior(const ProjectState& st, Stage s) {
  if (s == Stage::Ingested) return;
  const auto prev = static_cast<Stage>(static_cast<std::size_t>(s) - 1);
  const auto& ps = st.status(prev);
  if (!ps.complete || ps.stale)
    throw Error(ErrorCode::StageOrderViolation,
                std::string(to_string(s)) + " requires " + std::string(to_string(prev)) + " to be complete" +
                    (ps.stale ? " (it is stale)" : ""),
                "/stage");
}

std::string param_string(const Json& p, std::string_view key, std::string fallback) {
  if (!p.contains(key)) return fallback;
  return schema::as_string(p[std::string(key)], "/" + std::string(key));
}

double param_number(const Json& p, std::string_view key, double fallback) {
  if (!p.contains(key)) return fallback;
  return schema::as_number(p[std::string(key)], "/" + std::string(key));
}

std::uint64_t param_uint(const Json& p, std::string_view key, std::uint64_t fallback) {
  if (!p.contains(key)) return fallback;
  return schema::as_uint(p[std::string(key)], "/" + std::string(key));
}

struct Backends {
  std::shared_ptr<const LlmBackend> backend;
  std::unique_ptr<LlmBridge> bridge;
};

Backends make_bridge(const Services& services, const std::string& name) {
  Backends b;
  if (services.backend) b.backend = services.backend(name);
  if (!b.backend) throw Error(ErrorCode::InvalidArgument, "unknown backend '" + name + "'", "/backend");
  b.bridge = std::make_unique<LlmBridge>(b.backend, services.retry, services.sleeper);
  return b;
}

// Classifier for a backend name; keeps the bridge alive alongside.
struct ClassifierHandle {
  Backends llm;
  std::unique_ptr<Classifier> classifier;
};

ClassifierHandle make_classifier(const Services& services, const std::string& name) {
  ClassifierHandle h;
  if (name == "lexicon") {
    h.classifier = std::make_unique<LexiconClassifier>();
  } else {
    h.llm = make_bridge(services, name);
    h.classifier = std::make_unique<LlmClassifier>(*h.llm.bridge);
  }
  return h;
}

void sync_labeled_from_batches(ProjectState& st) {
  if (st.batches.empty()) return;
  st.labeled.clear();
  for (const auto& b : st.batches) st.labeled.insert(st.labeled.end(), b.items.begin(), b.items.end());
}

bool all_clean(const std::vector<ReviewBatch>& batches) {
  return std::all_of(batches.begin(), batches.end(), [](const ReviewBatch& b) { return b.status == BatchStatus::Clean; });
}

Json batch_summary(const std::vector<ReviewBatch>& batches) {
  Json out = Json::array();
  for (const auto& b : batches)
    out.push_back({{"batch_no", b.batch_no},
                   {"items", b.items.size()},
                   {"audit", b.audit_sample.size()},
                   {"status", std::string(to_string(b.status))},
                   {"round", b.round}});
  return out;
}

// After a review mutation: Reviewed is complete exactly when every batch is
// Clean; a change to an already-complete review invalidates downstream work.
void settle_review(ProjectState& st) {
  sync_labeled_from_batches(st);
  auto& rs = st.status(Stage::Reviewed);
  if (all_clean(st.batches)) {
    complete(st, Stage::Reviewed);
  } else {
    rs.complete = false;
    touch(st, Stage::Reviewed);
  }
}

ReviewBatch& find_batch(ProjectState& st, std::uint64_t batch_no) {
  for (auto& b : st.batches)
    if (b.batch_no == batch_no) return b;
  throw Error(ErrorCode::NotFound, "no review batch " + std::to_string(batch_no), "/batch_no");
}

// Paragraph (blank-line separated) index of every byte offset's block.
std::size_t paragraph_of(const std::string& text, std::size_t offset) {
  std::size_t para = 0;
  bool line_blank = true, saw_text = false;
  for (std::size_t i = 0; i < offset && i < text.size(); ++i) {
    const char c = text[i];
    if (c == '\n') {
      if (line_blank && saw_text) {
        ++para;
        saw_text = false;
      }
      line_blank = true;
    } else if (!std::isspace(static_cast<unsigned char>(c))) {
      line_blank = false;
      saw_text = true;
    }
  }
  return para;
}

std::unique_ptr<Summarizer> make_summarizer(const Services& services, const std::string& name, Backends& keep) {
  if (name == "rule") return std::make_unique<RuleSummarizer>();
  keep = make_bridge(services, name);
  return std::make_unique<LlmSummarizer>(*keep.bridge);
}

Json run_ingest(ProjectState& st, const Json& p) {
  const auto docs = array_from<Document>(p, "documents", "", document_from_json);
  if (docs.empty()) throw Error(ErrorCode::InvalidArgument, "no documents to ingest", "/documents");
  std::size_t sentences = 0;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    const auto& d = docs[i];
    if (d.doc_id.empty() || d.doc_id.find(':') != std::string::npos)
      throw Error(ErrorCode::InvalidArgument, "document id must be non-empty and contain no ':'", "/documents/" + std::to_string(i));
    sentences += segment(d.text, d.doc_id).size();  // EmptyDocument surfaces here
    auto it = std::find_if(st.documents.begin(), st.documents.end(), [&](const Document& x) { return x.doc_id == d.doc_id; });
    if (it != st.documents.end()) *it = d;
    else st.documents.push_back(d);
  }
  complete(st, Stage::Ingested);
  return Json{{"documents", st.documents.size()}, {"ingested", docs.size()}, {"sentences", sentences}};
}

Json run_classify(ProjectState& st, const Json& p, const Services& services, const CancelFlag* cancel) {
  const auto backend = param_string(p, "backend", "lexicon");
  const double threshold = param_number(p, "threshold", kDefaultThreshold);
  if (!(threshold > 0.0 && threshold < 1.0)) throw Error(ErrorCode::InvalidArgument, "threshold must lie in (0, 1)", "/threshold");
  auto h = make_classifier(services, backend);
  std::vector<LabeledSentence> labeled;
  for (const auto& d : st.documents) {
    check_cancel(cancel);
    auto part = classify_all(segment(d.text, d.doc_id), *h.classifier, threshold);
    labeled.insert(labeled.end(), part.begin(), part.end());
  }
  st.labeled = std::move(labeled);
  st.label_backend = backend;
  st.label_threshold = threshold;
  st.batches.clear();
  complete(st, Stage::Classified);

  Json counts = Json::object();
  for (auto d : {Dimension::Function, Dimension::Behavior, Dimension::Characteristic, Dimension::Environment}) {
    std::size_t n = 0;
    for (const auto& s : st.labeled) n += s.labels.contains(d);
    counts[std::string(to_string(d))] = n;
  }
  return Json{{"sentences", st.labeled.size()}, {"backend", backend}, {"label_counts", counts}};
}

Json run_review(ProjectState& st, const Json& p, const Services& services) {
  const auto seed = param_uint(p, "seed", 0);
  const auto batch_size = param_uint(p, "batch_size", kBatchSize);
  if (batch_size == 0) throw Error(ErrorCode::InvalidArgument, "batch_size must be positive", "/batch_size");
  st.review_seed = seed;
  st.batches = build_review_batches(st.labeled, seed, batch_size);
  Json report = {{"seed", seed}, {"batches", st.batches.size()}};

  const auto auto_audit = param_string(p, "auto_audit", "");
  if (!auto_audit.empty()) {
    if (auto_audit != "pass") throw Error(ErrorCode::InvalidArgument, "auto_audit must be 'pass'", "/auto_audit");
    auto h = make_classifier(services, st.label_backend);
    const auto loop = run_review_loop(st.batches, *h.classifier, [](const LabeledSentence&) { return Verdict::Pass; }, seed,
                                      param_uint(p, "max_rounds", kDefaultMaxRounds), st.label_threshold);
    report["rounds"] = loop.rounds;
    if (loop.failure) throw Error(*loop.failure, "review did not converge", "/batches");
  }
  st.status(Stage::Reviewed) = StageStatus{};
  settle_review(st);
  report["status"] = batch_summary(st.batches);
  report["complete"] = st.status(Stage::Reviewed).complete;
  return report;
}

Json run_frame(ProjectState& st, const Json& p, const Services& services, const CancelFlag* cancel) {
  const auto summarizer_name = param_string(p, "summarizer", st.label_backend == "lexicon" ? "rule" : st.label_backend);
  Backends keep;
  const auto summarizer = make_summarizer(services, summarizer_name, keep);

  std::vector<ElementaryStrategy> elementary;
  std::vector<StrategyFrame> frames;
  Json skipped = Json::array(), warnings = Json::array();
  int k = 1;
  for (const auto& doc : st.documents) {
    check_cancel(cancel);
    std::map<std::size_t, std::vector<LabeledSentence>> paragraphs;
    std::vector<std::string> texts;
    for (const auto& s : st.labeled)
      if (s.sentence.doc_id == doc.doc_id) {
        paragraphs[paragraph_of(doc.text, s.sentence.begin)].push_back(s);
        texts.push_back(s.sentence.text);
      }
    if (texts.empty()) continue;

    std::vector<ElementaryStrategy> parts;
    for (const auto& [para, sents] : paragraphs) {
      ElementaryStrategy e;
      e.k = k++;
      for (const auto& s : sents) e.sentences.push_back(s.sentence.id);
      e.fragment = build_fragment(sents, nullptr);
      parts.push_back(std::move(e));
    }

    // Conflicting environments within one text: the first mention wins.
    std::string notes;
    std::optional<EnvironmentDesc> env;
    auto parts_for_compose = parts;
    for (auto& part : parts_for_compose) {
      auto& fe = part.fragment.environment;
      if (!fe) continue;
      if (!env) {
        env = fe;
      } else if (text::phrase_key(render(*env)) != text::phrase_key(render(*fe))) {
        const auto msg = "environment '" + render(*fe) + "' in " + part.label() + " conflicts with '" + render(*env) +
                         "'; kept the first";
        warnings.push_back({{"doc_id", doc.doc_id}, {"code", "CONFLICTING_ENVIRONMENT"}, {"message", msg}});
        notes += (notes.empty() ? "" : "; ") + msg;
        fe.reset();
      }
    }
    elementary.insert(elementary.end(), parts.begin(), parts.end());

    auto frame = compose(parts_for_compose, "S_" + doc.doc_id);
    frame.behavior.summary = summarizer->summarize(texts);
    frame.provenance.source_doc = doc.doc_id;
    frame.provenance.notes = notes;

    std::vector<std::string> missing;
    if (frame.functions.empty()) missing.push_back("Function");
    if (frame.characteristics.empty()) missing.push_back("Characteristic");
    if (!missing.empty()) {
      skipped.push_back({{"doc_id", doc.doc_id},
                         {"code", std::string(to_string(ErrorCode::MissingDimension))},
                         {"message", "missing dimension: " + text::join(missing, ", ")}});
      continue;
    }
    if (const auto v = validate_frame(frame); !v.empty()) {
      Json issues = Json::array();
      for (const auto& x : v) issues.push_back(to_json(x));
      skipped.push_back({{"doc_id", doc.doc_id}, {"code", "SCHEMA_ERROR"}, {"violations", issues}});
      continue;
    }
    frames.push_back(std::move(frame));
  }

  st.elementary = std::move(elementary);
  st.frames = std::move(frames);
  complete(st, Stage::Framed);
  Json ids = Json::array();
  for (const auto& f : st.frames) ids.push_back(f.id);
  return Json{{"summarizer", summarizer_name},
              {"elementary", st.elementary.size()},
              {"frames", ids},
              {"skipped", skipped},
              {"warnings", warnings}};
}

Json run_invert(ProjectState& st, const Json& p, const Services& services, const CancelFlag* cancel) {
  const auto corrector_name = param_string(p, "corrector", st.label_backend == "lexicon" ? "none" : st.label_backend);
  Backends keep;
  if (corrector_name != "none") keep = make_bridge(services, corrector_name);

  std::vector<InversionResult> results;
  Json summary = Json::array();
  for (const auto& f : st.frames) {
    check_cancel(cancel);
    InversionResult r;
    try {
      r = invert(f, st.kb, keep.bridge.get());
    } catch (const Error& e) {
      throw Error(e.code(), "inverting " + f.id + ": " + e.what(), "/frames/" + f.id + e.path());
    }
    if (const auto* prev = st.find_inversion(r.id())) r.waived_terms = prev->waived_terms;
    summary.push_back({{"id", r.id()},
                       {"substitutions", r.substitutions.size()},
                       {"corrections", r.corrections.size()},
                       {"unresolved", r.unresolved_term_names()},
                       {"engineering_ready", r.engineering_ready()}});
    results.push_back(std::move(r));
  }
  st.inversions = std::move(results);
  complete(st, Stage::Inverted);
  return Json{{"corrector", corrector_name}, {"results", summary}};
}

void merge_screen_verdicts(ProjectState& st, const Json& verdicts, const std::string& path) {
  schema::expect_object(verdicts, path);
  for (auto it = verdicts.begin(); it != verdicts.end(); ++it) {
    if (!st.find_inversion(it.key()))
      throw Error(ErrorCode::NotFound, "no inversion result '" + it.key() + "'", schema::child(path, it.key()));
    st.screening[it.key()] = screen_verdict_from_json(it.value(), schema::child(path, it.key()));
  }
}

Json run_screen(ProjectState& st, const Json& p) {
  if (p.contains("verdicts")) merge_screen_verdicts(st, p["verdicts"], "/verdicts");
  if (p.contains("default_keep")) {
    const bool keep = schema::as_bool(p["default_keep"], "/default_keep");
    for (const auto& r : st.inversions)
      if (!st.screening.contains(r.id())) st.screening[r.id()] = ScreenVerdict{keep, "default"};
  }
  const auto outcome = screen(st.inversions, st.screening);
  st.kept.clear();
  for (const auto& r : outcome.kept) st.kept.push_back(r.id());
  complete(st, Stage::Screened);
  Json dropped = Json::array();
  for (const auto& [id, reason] : outcome.dropped) dropped.push_back({{"id", id}, {"reason", reason}});
  return Json{{"kept", st.kept}, {"dropped", dropped}};
}

void set_problem(ProjectState& st, const Json& p) {
  if (p.contains("problem")) st.problem = problem_from_json(p["problem"], "/problem");
  if (p.contains("target_environment")) {
    const auto& te = p["target_environment"];
    if (te.is_null()) st.target_environment.reset();
    else st.target_environment = environment_from_json(te, "/target_environment");
  }
}

std::vector<InversionResult> kept_results(const ProjectState& st) {
  std::vector<InversionResult> kept;
  for (const auto& id : st.kept)
    if (const auto* r = st.find_inversion(id)) kept.push_back(*r);
  return kept;
}

Json run_rank(ProjectState& st, const Json& p) {
  if (p.contains("criteria")) st.criteria = criteria_from_json(p["criteria"], "/criteria");
  if (p.contains("judgment")) st.judgment = judgment_from_json(p["judgment"], "/judgment");
  if (p.contains("manual_scores"))
    for (const auto& [alt, row] : manual_scores_from_json(p["manual_scores"], "/manual_scores"))
      for (const auto& [c, x] : row) st.manual_scores[alt][c] = x;
  set_problem(st, p);
  const double v = param_number(p, "v", kDefaultStrategyWeight);
  st.decision = rank_strategies(kept_results(st), st.problem.value_or(DesignProblem{}), st.target_environment, st.judgment, st.manual_scores, v,
                                st.criteria);
  st.clusters.reset();
  complete(st, Stage::Ranked);
  return to_json(st.decision->result);
}

Json run_cluster(ProjectState& st, const Json& p) {
  if (!st.decision) throw Error(ErrorCode::StageOrderViolation, "no decision result to cluster", "/stage");
  const auto n = st.decision->result.ranking.size();
  const auto k = param_uint(p, "k", n);
  const double threshold = param_number(p, "threshold", 0.5);
  std::map<std::string, StrategyFrame> frames;
  for (const auto& id : st.decision->result.alternatives)
    if (const auto* r = st.find_inversion(id)) frames[id] = r->engineering_frame;
  st.clusters = cluster_top(st.decision->result, frames, k, threshold);
  st.cluster_assessments.clear();
  complete(st, Stage::Clustered);
  return to_json(*st.clusters);
}

Json run_stage(ProjectState& st, const Json& p, const Services& services, const CancelFlag* cancel) {
  const auto stage = stage_from_string(schema::get_string(p, "stage", ""));
  require_prior(st, stage);
  Json report;
  switch (stage) {
    case Stage::Ingested: report = run_ingest(st, p); break;
    case Stage::Classified: report = run_classify(st, p, services, cancel); break;
    case Stage::Reviewed: report = run_review(st, p, services); break;
    case Stage::Framed: report = run_frame(st, p, services, cancel); break;
    case Stage::Inverted: report = run_invert(st, p, services, cancel); break;
    case Stage::Screened: report = run_screen(st, p); break;
    case Stage::Ranked: report = run_rank(st, p); break;
    case Stage::Clustered: report = run_cluster(st, p); break;
  }
  st.stage_reports[std::string(to_string(stage))] = report;
  return report;
}

}  // namespace

Json apply_event(ProjectState& st, const Event& e, const Services& services, const CancelFlag* cancel) {
  const auto& p = e.params;
  schema::expect_object(p, "/params");
  Json report = Json::object();

  if (e.type == "project.create") {
    if (!st.id.empty()) throw Error(ErrorCode::Conflict, "project already exists", "/id");
    st = ProjectState{};
    st.id = schema::get_string(p, "id", "");
    st.name = schema::get_string(p, "name", "");
    st.kb = kb_from_json(schema::require(p, "kb", ""), "/kb");
    report = {{"id", st.id}};
  } else if (st.id.empty()) {
    throw Error(ErrorCode::StageOrderViolation, "first event must be project.create", "/type");
  } else if (e.type == "project.rename") {
    st.name = schema::get_string(p, "name", "");
    report = {{"name", st.name}};
  } else if (e.type == "kb.set") {
    st.kb = kb_from_json(schema::require(p, "kb", ""), "/kb");
    touch(st, Stage::Framed);
    report = {{"mappings", st.kb.mappings.size()}};
  } else if (e.type == "stage.run") {
    report = run_stage(st, p, services, cancel);
  } else if (e.type == "review.verdicts") {
    if (st.batches.empty()) throw Error(ErrorCode::StageOrderViolation, "no review batches; run Reviewed first", "/stage");
    auto& batch = find_batch(st, schema::as_uint(schema::require(p, "batch_no", ""), "/batch_no"));
    const auto& verdicts = schema::require(p, "verdicts", "");
    schema::expect_object(verdicts, "/verdicts");
    for (auto it = verdicts.begin(); it != verdicts.end(); ++it) {
      Verdict v;
      try {
        v = verdict_from_string(schema::as_string(it.value(), "/verdicts/" + it.key()));
      } catch (const Error& err) {
        throw Error(ErrorCode::SchemaError, err.what(), "/verdicts/" + it.key());
      }
      record_verdict(batch, it.key(), v);
    }
    batch.status = batch_status(batch);
    report = to_json(batch);
    settle_review(st);
  } else if (e.type == "review.relabel") {
    if (st.batches.empty()) throw Error(ErrorCode::StageOrderViolation, "no review batches; run Reviewed first", "/stage");
    auto h = make_classifier(services, st.label_backend);
    const auto step = review_loop_step(st.batches, *h.classifier, Auditor{}, st.review_seed, st.label_threshold);
    settle_review(st);
    report = {{"relabeled_batches", step.relabeled_batches}, {"status", batch_summary(st.batches)}};
  } else if (e.type == "samples.generate") {
    require_prior(st, Stage::Framed);  // needs a complete review
    Backends b = make_bridge(services, param_string(p, "backend", "mock"));
    LlmParaphraser para(*b.bridge);
    const auto set = generate_samples(st.labeled, param_uint(p, "target", 0), param_number(p, "ratio_real", 0.8),
                                      param_uint(p, "seed", 0), para);
    st.samples = to_json(set);
    report = {{"real", set.real.size()}, {"augmented", set.augmented.size()}};
  } else if (e.type == "frame.put") {
    if (!st.status(Stage::Framed).complete) throw Error(ErrorCode::StageOrderViolation, "no frames yet; run Framed first", "/stage");
    auto frame = frame_from_json(schema::require(p, "frame", ""), "/frame");
    if (const auto v = validate_frame(frame); !v.empty())
      throw Error(ErrorCode::SchemaError, v.front().code + ": " + v.front().message, "/frame" + v.front().path);
    auto it = std::find_if(st.frames.begin(), st.frames.end(), [&](const StrategyFrame& f) { return f.id == frame.id; });
    if (it != st.frames.end()) *it = frame;
    else st.frames.push_back(frame);
    touch(st, Stage::Framed);
    report = to_json(frame);
  } else if (e.type == "inversion.waive") {
    const auto id = schema::get_string(p, "id", "");
    auto it = std::find_if(st.inversions.begin(), st.inversions.end(), [&](const InversionResult& r) { return r.id() == id; });
    if (it == st.inversions.end()) throw Error(ErrorCode::NotFound, "no inversion result '" + id + "'", "/id");
    for (const auto& t : schema::get_string_array(p, "terms", ""))
      if (std::find(it->waived_terms.begin(), it->waived_terms.end(), t) == it->waived_terms.end()) it->waived_terms.push_back(t);
    touch(st, Stage::Inverted);
    report = {{"id", id}, {"waived_terms", it->waived_terms}, {"engineering_ready", it->engineering_ready()}};
  } else if (e.type == "screen.verdicts") {
    if (!st.status(Stage::Inverted).complete)
      throw Error(ErrorCode::StageOrderViolation, "nothing to screen; run Inverted first", "/stage");
    merge_screen_verdicts(st, schema::require(p, "verdicts", ""), "/verdicts");
    touch(st, Stage::Inverted);
    Json all = Json::object();
    for (const auto& [id, v] : st.screening) all[id] = to_json(v);
    report = all;
  } else if (e.type == "decision.judgment") {
    const auto j = judgment_from_json(p, "");
    const auto w = g1_weights(j, st.criteria);
    st.judgment = j;
    touch(st, Stage::Screened);
    report = {{"judgment", to_json(j)}, {"weights", w}};
  } else if (e.type == "decision.manual_scores") {
    for (const auto& [alt, row] : manual_scores_from_json(schema::require(p, "scores", ""), "/scores"))
      for (const auto& [c, x] : row) st.manual_scores[alt][c] = x;
    touch(st, Stage::Screened);
    Json all = Json::object();
    for (const auto& [alt, row] : st.manual_scores)
      for (const auto& [c, x] : row) all[alt][c] = x;
    report = all;
  } else if (e.type == "decision.problem") {
    set_problem(st, p);
    touch(st, Stage::Screened);
    report = {{"problem", st.problem ? to_json(*st.problem) : Json(nullptr)}};
  } else if (e.type == "cluster.assessment") {
    if (!st.clusters) throw Error(ErrorCode::StageOrderViolation, "no clusters yet", "/stage");
    const auto idx = schema::as_uint(schema::require(p, "cluster", ""), "/cluster");
    if (idx >= st.clusters->clusters.size()) throw Error(ErrorCode::NotFound, "no cluster " + std::to_string(idx), "/cluster");
    st.cluster_assessments[std::to_string(idx)] = schema::get_string(p, "text", "");
    report = {{"cluster", idx}, {"text", st.cluster_assessments[std::to_string(idx)]}};
  } else {
    throw Error(ErrorCode::InvalidArgument, "unknown event type '" + e.type + "'", "/type");
  }
  st.head = e.seq;
  return report;
}

ProjectState replay(const std::vector<Event>& events, const Services& services) {
  ProjectState st;
  for (const auto& e : events) apply_event(st, e, services);
  return st;
}

// --- disk ------------------------------------------------------------------------

void write_file_atomic(const fs::path& path, const std::string& content) {
  const auto tmp = path.parent_path() / (path.filename().string() + ".tmp");
  {
    const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
    if (fd < 0) throw Error(ErrorCode::IoError, "cannot write " + tmp.string(), path.string());
    std::size_t done = 0;
    while (done < content.size()) {
      const auto n = ::write(fd, content.data() + done, content.size() - done);
      if (n <= 0) {
        ::close(fd);
        throw Error(ErrorCode::IoError, "short write to " + tmp.string(), path.string());
      }
      done += static_cast<std::size_t>(n);
    }
    ::fsync(fd);
    ::close(fd);
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot replace " + path.string() + ": " + ec.message(), path.string());
}

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string(), path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class FileLock {
 public:
  FileLock(const fs::path& path, int op) {
    fd_ = ::open(path.c_str(), O_RDWR | O_CREAT, 0644);
    if (fd_ < 0) throw Error(ErrorCode::IoError, "cannot open lock " + path.string(), path.string());
    if (::flock(fd_, op) != 0) {
      ::close(fd_);
      throw Error(ErrorCode::IoError, "cannot lock " + path.string(), path.string());
    }
  }
  ~FileLock() {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
  FileLock(const FileLock&) = delete;
  FileLock& operator=(const FileLock&) = delete;

 private:
  int fd_ = -1;
};

void append_line(const fs::path& path, const std::string& line) {
  const int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
  if (fd < 0) throw Error(ErrorCode::IoError, "cannot append to " + path.string(), path.string());
  const std::string data = line + "\n";
  const auto n = ::write(fd, data.data(), data.size());
  ::fsync(fd);
  ::close(fd);
  if (n != static_cast<ssize_t>(data.size())) throw Error(ErrorCode::IoError, "short write to " + path.string(), path.string());
}

std::vector<Event> read_events(const fs::path& path) {
  std::vector<Event> out;
  if (!fs::exists(path)) return out;
  std::istringstream in(read_file(path));
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (text::trim(line).empty()) continue;
    const auto where = "/events/" + std::to_string(n);
    out.push_back(event_from_json(schema::parse(line, where), where));
  }
  return out;
}

ProjectConfig read_config(const fs::path& dir) {
  const auto path = dir / kConfigFile;
  if (!fs::exists(path)) return {};
  return config_from_json(schema::parse(read_file(path), "/" + std::string(kConfigFile)), "");
}

ProjectState read_state(const fs::path& dir) {
  const auto path = dir / kStateFile;
  if (!fs::exists(path)) throw Error(ErrorCode::NotFound, "no project at " + dir.string(), dir.string());
  return project_from_json(schema::parse(read_file(path), "/"));
}

// Values a stage would otherwise take from the config are pinned into the
// event so replay does not depend on the config file.
Json with_defaults(const std::string& type, Json params, const ProjectConfig& c) {
  if (type != "stage.run" || !params.contains("stage") || !params["stage"].is_string()) return params;
  const auto stage = stage_from_string(params["stage"].get<std::string>());
  params["stage"] = std::string(to_string(stage));
  const auto fill = [&](const char* key, const Json& value) {
    if (!params.contains(key)) params[key] = value;
  };
  switch (stage) {
    case Stage::Classified: fill("threshold", c.label_threshold); break;
    case Stage::Reviewed: fill("max_rounds", c.review_max_rounds); break;
    case Stage::Ranked: fill("v", c.strategy_weight); break;
    case Stage::Clustered: fill("threshold", c.cluster_threshold); break;
    default: break;
  }
  return params;
}

}  // namespace

bool Project::exists(const fs::path& dir) { return fs::exists(dir / kStateFile); }

Project Project::create(const fs::path& dir, const std::string& name, const std::optional<EngineeringKB>& kb,
                        const ProjectConfig& config) {
  if (exists(dir)) throw Error(ErrorCode::Conflict, "project already exists at " + dir.string(), dir.string());
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir.string() + ": " + ec.message(), dir.string());
  FileLock lock(dir / kLockFile, LOCK_EX);

  const auto id = fs::absolute(dir).lexically_normal().filename().string();
  const auto kb_doc = kb ? *kb : load_kb_file(data_path("fixtures/kb-soft-robot.json"));
  Event e{1, "project.create", Json{{"id", id}, {"name", name.empty() ? id : name}, {"kb", to_json(kb_doc)}}};
  ProjectState st;
  apply_event(st, e, Services{});

  write_file_atomic(dir / kConfigFile, to_json(config).dump(2) + "\n");
  write_file_atomic(dir / kEventsFile, to_json(e).dump() + "\n");
  write_file_atomic(dir / kStateFile, serialize_state(st));
  return Project(dir, config, std::move(st));
}

Project Project::open(const fs::path& dir) {
  FileLock lock(dir / kLockFile, LOCK_SH);
  auto config = read_config(dir);
  auto state = read_state(dir);
  return Project(dir, std::move(config), std::move(state));
}

std::vector<Event> Project::events() const {
  FileLock lock(dir_ / kLockFile, LOCK_SH);
  return read_events(dir_ / kEventsFile);
}

Json Project::submit(const std::string& type, Json params, const Services& services,
                     std::optional<std::uint64_t> expected_head, const CancelFlag* cancel) {
  FileLock lock(dir_ / kLockFile, LOCK_EX);
  config_ = read_config(dir_);
  state_ = read_state(dir_);
  // A crash between the log append and the state rename leaves the log ahead;
  // the log is authoritative, so rebuild before going further.
  if (auto log = read_events(dir_ / kEventsFile); !log.empty() && log.back().seq > state_.head) {
    state_ = replay(log, services);
    write_file_atomic(dir_ / kStateFile, serialize_state(state_));
  }
  if (expected_head && *expected_head != state_.head)
    throw Error(ErrorCode::Conflict,
                "project head is " + std::to_string(state_.head) + ", request expected " + std::to_string(*expected_head),
                "/head");
  if (!params.is_object()) throw Error(ErrorCode::SchemaError, "event params must be an object", "/params");

  Event e{state_.head + 1, type, with_defaults(type, std::move(params), config_)};
  ProjectState next = state_;
  const auto report = apply_event(next, e, services, cancel);
  check_cancel(cancel);

  append_line(dir_ / kEventsFile, to_json(e).dump());
  write_file_atomic(dir_ / kStateFile, serialize_state(next));
  state_ = std::move(next);
  return Json{{"event", to_json(e)}, {"report", report}};
}

Json Project::export_bundle() const {
  Json events = Json::array();
  for (const auto& e : this->events()) events.push_back(to_json(e));
  return Json{{"format", "bioinvert.export"},
              {"schema_version", kProjectFormatVersion},
              {"config", to_json(config_)},
              {"state", to_json(state_)},
              {"events", events}};
}

// --- jobs ------------------------------------------------------------------------

std::string_view to_string(JobManager::Status s) {
  switch (s) {
    case JobManager::Status::Running: return "running";
    case JobManager::Status::Succeeded: return "succeeded";
    case JobManager::Status::Failed: return "failed";
    case JobManager::Status::Cancelled: return "cancelled";
  }
  return "unknown";
}

Json to_json(const JobManager::Info& info) {
  return Json{{"id", info.id},
              {"project", info.project},
              {"description", info.description},
              {"status", std::string(to_string(info.status))},
              {"result", info.result}};
}

Json error_envelope(const Error& e) {
  return Json{{"code", std::string(to_string(e.code()))}, {"message", e.what()}, {"path", e.path()}};
}

JobManager::~JobManager() {
  std::map<std::string, std::unique_ptr<Job>> jobs;
  {
    std::lock_guard lock(mutex_);
    for (auto& [id, job] : jobs_) job->cancel = true;
    jobs = std::move(jobs_);
  }
  jobs.clear();  // joins each worker
}

std::string JobManager::start(std::string project, std::string description, Task task) {
  std::lock_guard lock(mutex_);
  const auto id = "job-" + std::to_string(next_++);
  auto job = std::make_unique<Job>();
  job->info = Info{id, std::move(project), std::move(description), Status::Running, nullptr};
  Job* raw = job.get();
  jobs_[id] = std::move(job);
  raw->thread = std::jthread([this, raw, task = std::move(task)] {
    Status status = Status::Succeeded;
    Json result;
    try {
      result = task(raw->cancel);
    } catch (const Error& e) {
      status = e.code() == ErrorCode::Cancelled ? Status::Cancelled : Status::Failed;
      result = error_envelope(e);
    } catch (const std::exception& e) {
      status = Status::Failed;
      result = Json{{"code", "INTERNAL"}, {"message", e.what()}, {"path", ""}};
    }
    std::lock_guard inner(mutex_);
    raw->info.status = status;
    raw->info.result = std::move(result);
  });
  return id;
}

std::optional<JobManager::Info> JobManager::get(const std::string& id) const {
  std::lock_guard lock(mutex_);
  auto it = jobs_.find(id);
  if (it == jobs_.end()) return std::nullopt;
  return it->second->info;
}

std::vector<JobManager::Info> JobManager::list() const {
  std::lock_guard lock(mutex_);
  std::vector<Info> out;
  for (const auto& [id, job] : jobs_) out.push_back(job->info);
  return out;
}

bool JobManager::cancel(const std::string& id) {
  std::lock_guard lock(mutex_);
  auto it = jobs_.find(id);
  if (it == jobs_.end() || it->second->info.status != Status::Running) return false;
  it->second->cancel = true;
  return true;
}

void JobManager::wait(const std::string& id) {
  std::jthread* t = nullptr;
  {
    std::lock_guard lock(mutex_);
    auto it = jobs_.find(id);
    if (it == jobs_.end()) return;
    t = &it->second->thread;
  }
  if (t->joinable()) t->join();
}

}  // namespace bioinvert
