#include "bioinvert/knowledge.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "bioinvert/error.hpp"
#include "bioinvert/lexicon.hpp"
#include "bioinvert/schema.hpp"
#include "bioinvert/text.hpp"

namespace bioinvert {

using schema::child;

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "INVALID_ARGUMENT";
    case ErrorCode::NotFound: return "NOT_FOUND";
    case ErrorCode::Conflict: return "CONFLICT";
    case ErrorCode::SchemaError: return "SCHEMA_ERROR";
    case ErrorCode::ConflictingEnvironment: return "CONFLICTING_ENVIRONMENT";
    case ErrorCode::EmptyDocument: return "EMPTY_DOCUMENT";
    case ErrorCode::ClassifierUnavailable: return "CLASSIFIER_UNAVAILABLE";
    case ErrorCode::InsufficientCorpus: return "INSUFFICIENT_CORPUS";
    case ErrorCode::MaxRoundsExceeded: return "MAX_ROUNDS_EXCEEDED";
    case ErrorCode::AuthError: return "AUTH_ERROR";
    case ErrorCode::RateLimited: return "RATE_LIMITED";
    case ErrorCode::SchemaRejected: return "SCHEMA_REJECTED";
    case ErrorCode::TransportError: return "TRANSPORT_ERROR";
    case ErrorCode::KbEmpty: return "KB_EMPTY";
    case ErrorCode::MissingDimension: return "MISSING_DIMENSION";
    case ErrorCode::NotAVerb: return "NOT_A_VERB";
    case ErrorCode::MissingVerdict: return "MISSING_VERDICT";
    case ErrorCode::BadRatio: return "BAD_RATIO";
    case ErrorCode::LengthMismatch: return "LENGTH_MISMATCH";
    case ErrorCode::NoDiscrimination: return "NO_DISCRIMINATION";
    case ErrorCode::NoAlternatives: return "NO_ALTERNATIVES";
    case ErrorCode::MissingManualScore: return "MISSING_MANUAL_SCORE";
    case ErrorCode::KOutOfRange: return "K_OUT_OF_RANGE";
    case ErrorCode::StageOrderViolation: return "STAGE_ORDER_VIOLATION";
    case ErrorCode::IoError: return "IO_ERROR";
    case ErrorCode::VersionMismatch: return "VERSION_MISMATCH";
    case ErrorCode::BindError: return "BIND_ERROR";
    case ErrorCode::Cancelled: return "CANCELLED";
  }
  return "UNKNOWN";
}

std::string_view to_string(Dimension d) {
  switch (d) {
    case Dimension::Function: return "Function";
    case Dimension::Behavior: return "Behavior";
    case Dimension::Characteristic: return "Characteristic";
    case Dimension::Environment: return "Environment";
  }
  return "";
}

Dimension dimension_from_string(std::string_view name) {
  for (auto d : kDimensions)
    if (to_string(d) == name) return d;
  throw Error(ErrorCode::SchemaError, "unknown dimension '" + std::string(name) + "'");
}

std::string_view to_string(FlowKind k) {
  switch (k) {
    case FlowKind::Energy: return "energy";
    case FlowKind::Material: return "material";
    case FlowKind::Signal: return "signal";
  }
  return "";
}

std::string_view to_string(DesignLevel l) {
  switch (l) {
    case DesignLevel::System: return "system";
    case DesignLevel::Subsystem: return "subsystem";
    case DesignLevel::Component: return "component";
  }
  return "";
}

std::string render(const FunctionExpr& f) {
  struct Visitor {
    std::string operator()(const ActionDescription& a) const { return text::trim(a.verb + " " + a.object); }
    std::string operator()(const FlowTransformation& t) const {
      return "transforming " + t.input_object + " into " + t.output_object;
    }
    std::string operator()(const StateTransition& s) const { return text::trim(s.change_verb + " " + s.object); }
  };
  return std::visit(Visitor{}, f);
}

// --- noun phrases ------------------------------------------------------------

namespace {

const std::set<std::string, std::less<>>& postposition_markers() {
  static const std::set<std::string, std::less<>> words = {
      "based", "with",  "of",     "in",    "on",    "for",   "from", "under", "at",
      "by",    "to",    "that",   "which", "within", "without", "made", "containing", "using"};
  return words;
}

std::string first_word_lower(std::string_view s) {
  auto words = text::split_words(s);
  return words.empty() ? std::string{} : text::to_lower(words.front());
}

}  // namespace

bool is_postposed_modifier(std::string_view attributive) {
  return postposition_markers().contains(first_word_lower(attributive));
}

std::string render_noun_phrase(const std::string& head, const std::vector<std::string>& attributives) {
  std::vector<std::string> pre, post;
  for (const auto& a : attributives) (is_postposed_modifier(a) ? post : pre).push_back(a);
  std::vector<std::string> parts = pre;
  parts.push_back(head);
  parts.insert(parts.end(), post.begin(), post.end());
  std::vector<std::string> nonempty;
  for (auto& p : parts)
    if (!text::trim(p).empty()) nonempty.push_back(text::trim(p));
  return text::join(nonempty, " ");
}

void parse_noun_phrase(std::string_view phrase, std::string& head, std::vector<std::string>& attributives) {
  auto words = text::split_words(phrase);
  head.clear();
  attributives.clear();
  if (words.empty()) return;
  std::size_t marker = words.size();
  for (std::size_t i = 1; i < words.size(); ++i) {
    if (postposition_markers().contains(text::to_lower(words[i]))) {
      marker = i;
      break;
    }
  }
  head = words[marker - 1];
  for (std::size_t i = 0; i + 1 < marker; ++i) attributives.push_back(words[i]);
  if (marker < words.size())
    attributives.push_back(text::join(std::vector<std::string>(words.begin() + static_cast<long>(marker), words.end()), " "));
}

// --- elementary strategies ---------------------------------------------------

int parse_elementary_label(std::string_view label) {
  constexpr std::string_view prefix = "S_e^";
  if (label.substr(0, prefix.size()) != prefix || label.size() == prefix.size())
    throw Error(ErrorCode::SchemaError, "bad elementary strategy label '" + std::string(label) + "'");
  int k = 0;
  for (char c : label.substr(prefix.size())) {
    if (c < '0' || c > '9' || k > 100000000)
      throw Error(ErrorCode::SchemaError, "bad elementary strategy label '" + std::string(label) + "'");
    k = k * 10 + (c - '0');
  }
  if (k <= 0) throw Error(ErrorCode::SchemaError, "elementary strategy index must be positive");
  return k;
}

ElementaryStrategy as_elementary(const StrategyFrame& frame, int k) {
  ElementaryStrategy e;
  e.k = k;
  e.sentences = frame.provenance.sentence_ids;
  e.fragment.summary = frame.behavior.summary;
  e.fragment.steps = frame.behavior.steps;
  e.fragment.causal_links = frame.behavior.causal_links;
  e.fragment.functions = frame.functions;
  e.fragment.characteristics = frame.characteristics;
  e.fragment.environment = frame.environment;
  e.fragment.composed_from = frame.provenance.elementary_ids;
  return e;
}

// --- validation --------------------------------------------------------------

namespace {

void check_verb(std::string_view verb, const std::string& path, ValidationReport& out) {
  if (text::trim(verb).empty()) {
    out.push_back({"FIELD_EMPTY", path, "verb is empty"});
    return;
  }
  if (text::split_words(verb).size() > 3) out.push_back({"VERB_TOO_LONG", path, "verb phrase longer than three tokens"});
  try {
    const auto normalized = gerundize(verb);
    if (normalized != text::trim(verb))
      out.push_back({"NOT_GERUND", path, "'" + std::string(verb) + "' should read '" + normalized + "'"});
  } catch (const Error&) {
    // Leading token is not a lexicon verb (nominal function phrase): nothing to normalize.
  }
}

void check_nonempty(const std::string& value, const std::string& path, ValidationReport& out) {
  if (text::trim(value).empty()) out.push_back({"FIELD_EMPTY", path, "field is empty"});
}

void check_function(const FunctionExpr& f, const std::string& path, ValidationReport& out) {
  if (auto a = std::get_if<ActionDescription>(&f)) {
    check_verb(a->verb, child(path, "verb"), out);
    check_nonempty(a->object, child(path, "object"), out);
  } else if (auto t = std::get_if<FlowTransformation>(&f)) {
    check_nonempty(t->input_object, child(path, "input_object"), out);
    check_nonempty(t->output_object, child(path, "output_object"), out);
  } else if (auto s = std::get_if<StateTransition>(&f)) {
    check_nonempty(s->object, child(path, "object"), out);
    check_verb(s->change_verb, child(path, "change_verb"), out);
  }
}

template <typename Phrase>
void check_noun_phrase(const Phrase& p, const std::string& path, ValidationReport& out) {
  if (text::trim(p.head).empty()) out.push_back({"HEAD_EMPTY", child(path, "head"), "head noun is empty"});
  for (std::size_t i = 0; i < p.attributives.size(); ++i)
    if (text::trim(p.attributives[i]).empty())
      out.push_back({"FIELD_EMPTY", child(child(path, "attributives"), i), "attributive is empty"});
}

}  // namespace

ValidationReport validate_frame(const StrategyFrame& frame) {
  ValidationReport out;
  if (text::trim(frame.id).empty()) out.push_back({"ID_EMPTY", "/id", "frame id is empty"});
  if (text::trim(frame.behavior.summary).empty())
    out.push_back({"BEHAVIOR_SUMMARY_EMPTY", "/behavior/summary", "behavior summary is empty"});

  const auto& steps = frame.behavior.steps;
  for (std::size_t i = 0; i < steps.size(); ++i) check_function(steps[i], child("/behavior/steps", i), out);
  if (steps.empty() && !frame.behavior.causal_links.empty())
    out.push_back({"CAUSAL_WITHOUT_STEPS", "/behavior/causal_links", "causal links need temporal steps"});
  for (std::size_t i = 0; i < frame.behavior.causal_links.size(); ++i) {
    const auto& link = frame.behavior.causal_links[i];
    const auto path = child("/behavior/causal_links", i);
    if (!steps.empty() && (link.cause.begin >= link.cause.end || link.cause.end > steps.size()))
      out.push_back({"CAUSE_OUT_OF_RANGE", child(path, "cause"), "cause range outside the temporal steps"});
    if (text::trim(link.conjunction).empty())
      out.push_back({"CONJUNCTION_EMPTY", child(path, "conjunction"), "conjunction is empty"});
    check_function(link.effect, child(path, "effect"), out);
  }

  if (frame.functions.empty()) out.push_back({"FUNCTIONS_EMPTY", "/functions", "at least one function required"});
  std::set<std::string> seen;
  for (std::size_t i = 0; i < frame.functions.size(); ++i) {
    const auto path = child("/functions", i);
    check_function(frame.functions[i], path, out);
    if (!seen.insert(text::phrase_key(render(frame.functions[i]))).second)
      out.push_back({"DUPLICATE_PHRASE", path, "duplicate function '" + render(frame.functions[i]) + "'"});
  }

  if (frame.characteristics.empty())
    out.push_back({"CHARACTERISTICS_EMPTY", "/characteristics", "at least one characteristic required"});
  seen.clear();
  for (std::size_t i = 0; i < frame.characteristics.size(); ++i) {
    const auto path = child("/characteristics", i);
    check_noun_phrase(frame.characteristics[i], path, out);
    if (!seen.insert(text::phrase_key(render(frame.characteristics[i]))).second)
      out.push_back({"DUPLICATE_PHRASE", path, "duplicate characteristic '" + render(frame.characteristics[i]) + "'"});
  }

  if (frame.environment) check_noun_phrase(*frame.environment, "/environment", out);
  return out;
}

// --- composition ---------------------------------------------------------------

namespace {

template <typename T, typename Render>
void append_unique(std::vector<T>& into, const std::vector<T>& from, Render render_fn) {
  for (const auto& item : from) {
    const auto key = text::phrase_key(render_fn(item));
    bool dup = false;
    for (const auto& existing : into) dup = dup || text::phrase_key(render_fn(existing)) == key;
    if (!dup) into.push_back(item);
  }
}

void append_unique_ids(std::vector<std::string>& into, const std::vector<std::string>& from) {
  for (const auto& id : from)
    if (std::find(into.begin(), into.end(), id) == into.end()) into.push_back(id);
}

}  // namespace

StrategyFrame compose(const std::vector<ElementaryStrategy>& parts, std::string id) {
  if (parts.empty()) throw Error(ErrorCode::InvalidArgument, "compose needs at least one part");
  StrategyFrame out;
  const auto render_fn = [](const FunctionExpr& f) { return render(f); };
  const auto render_np = [](const Characteristic& c) { return render(c); };
  std::set<int> labels;
  for (const auto& part : parts) {
    const bool elementary = part.fragment.composed_from.empty();
    if (elementary && !labels.insert(part.k).second)
      throw Error(ErrorCode::InvalidArgument, "duplicate elementary strategy " + part.label());
    const auto& frag = part.fragment;
    if (out.behavior.summary.empty()) out.behavior.summary = frag.summary;

    const std::size_t offset = out.behavior.steps.size();
    out.behavior.steps.insert(out.behavior.steps.end(), frag.steps.begin(), frag.steps.end());
    for (auto link : frag.causal_links) {
      link.cause.begin += offset;
      link.cause.end += offset;
      out.behavior.causal_links.push_back(std::move(link));
    }

    append_unique(out.functions, frag.functions, render_fn);
    append_unique(out.characteristics, frag.characteristics, render_np);

    if (frag.environment) {
      if (!out.environment) {
        out.environment = frag.environment;
      } else if (text::phrase_key(render(*out.environment)) != text::phrase_key(render(*frag.environment))) {
        throw Error(ErrorCode::ConflictingEnvironment,
                    "environments '" + render(*out.environment) + "' and '" + render(*frag.environment) +
                        "' differ; resolve manually",
                    "/environment");
      }
    }

    append_unique_ids(out.provenance.sentence_ids, part.sentences);
    append_unique_ids(out.provenance.elementary_ids,
                      frag.composed_from.empty() ? std::vector<std::string>{part.label()} : frag.composed_from);
  }
  out.id = id.empty() ? "composite:" + text::join(out.provenance.elementary_ids, "+") : std::move(id);
  return out;
}

// --- serialization ---------------------------------------------------------------

Json to_json(const FunctionExpr& f) {
  if (auto a = std::get_if<ActionDescription>(&f)) return Json{{"kind", "action"}, {"verb", a->verb}, {"object", a->object}};
  if (auto t = std::get_if<FlowTransformation>(&f))
    return Json{{"kind", "flow"},
                {"flow_kind", std::string(to_string(t->flow_kind))},
                {"input_object", t->input_object},
                {"output_object", t->output_object}};
  const auto& s = std::get<StateTransition>(f);
  return Json{{"kind", "state"}, {"object", s.object}, {"change_verb", s.change_verb}};
}

namespace {

Json steps_json(const std::vector<FunctionExpr>& steps) {
  Json arr = Json::array();
  for (const auto& s : steps) arr.push_back(to_json(s));
  return arr;
}

Json links_json(const std::vector<CausalRelation>& links) {
  Json arr = Json::array();
  for (const auto& l : links)
    arr.push_back(Json{{"cause", {{"begin", l.cause.begin}, {"end", l.cause.end}}},
                       {"effect", to_json(l.effect)},
                       {"conjunction", l.conjunction}});
  return arr;
}

template <typename Phrase>
Json np_json(const Phrase& p) {
  return Json{{"head", p.head}, {"attributives", p.attributives}};
}

template <typename Phrase>
Phrase np_from_json(const Json& j, const std::string& path) {
  schema::allow_keys(j, path, {"head", "attributives"});
  Phrase p;
  p.head = schema::get_string(j, "head", path);
  p.attributives = schema::get_string_array(j, "attributives", path);
  return p;
}

std::vector<FunctionExpr> functions_from_json(const Json& j, const std::string& path) {
  schema::expect_array(j, path);
  std::vector<FunctionExpr> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(function_from_json(j[i], child(path, i)));
  return out;
}

std::vector<CausalRelation> links_from_json(const Json& j, const std::string& path) {
  schema::expect_array(j, path);
  std::vector<CausalRelation> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto p = child(path, i);
    schema::allow_keys(j[i], p, {"cause", "effect", "conjunction"});
    const auto& cause = schema::require(j[i], "cause", p);
    const auto cp = child(p, "cause");
    schema::allow_keys(cause, cp, {"begin", "end"});
    CausalRelation rel{StepRange{schema::as_uint(schema::require(cause, "begin", cp), child(cp, "begin")),
                                 schema::as_uint(schema::require(cause, "end", cp), child(cp, "end"))},
                       function_from_json(schema::require(j[i], "effect", p), child(p, "effect")),
                       schema::get_string(j[i], "conjunction", p)};
    out.push_back(std::move(rel));
  }
  return out;
}

std::vector<Characteristic> characteristics_from_json(const Json& j, const std::string& path) {
  schema::expect_array(j, path);
  std::vector<Characteristic> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(characteristic_from_json(j[i], child(path, i)));
  return out;
}

}  // namespace

Json to_json(const BehaviorExpr& b) {
  return Json{{"summary", b.summary}, {"steps", steps_json(b.steps)}, {"causal_links", links_json(b.causal_links)}};
}

Json to_json(const Characteristic& c) { return np_json(c); }
Json to_json(const EnvironmentDesc& e) { return np_json(e); }

Json to_json(const Provenance& p) {
  return Json{{"source_doc", p.source_doc},
              {"sentence_ids", p.sentence_ids},
              {"elementary_ids", p.elementary_ids},
              {"notes", p.notes}};
}

Json to_json(const StrategyFrame& f) {
  Json chars = Json::array();
  for (const auto& c : f.characteristics) chars.push_back(to_json(c));
  return Json{{"fbce_version", kFbceVersion},
              {"id", f.id},
              {"behavior", to_json(f.behavior)},
              {"functions", steps_json(f.functions)},
              {"characteristics", chars},
              {"environment", f.environment ? to_json(*f.environment) : Json(nullptr)},
              {"provenance", to_json(f.provenance)}};
}

Json to_json(const FrameFragment& f) {
  Json chars = Json::array();
  for (const auto& c : f.characteristics) chars.push_back(to_json(c));
  return Json{{"summary", f.summary},
              {"steps", steps_json(f.steps)},
              {"causal_links", links_json(f.causal_links)},
              {"functions", steps_json(f.functions)},
              {"characteristics", chars},
              {"environment", f.environment ? to_json(*f.environment) : Json(nullptr)},
              {"composed_from", f.composed_from}};
}

Json to_json(const ElementaryStrategy& e) {
  return Json{{"id", e.label()}, {"sentences", e.sentences}, {"frame_fragment", to_json(e.fragment)}};
}

Json to_json(const DesignProblem& p) {
  return Json{{"level", std::string(to_string(p.level))},
              {"requirement_elements", p.requirement_elements},
              {"processing_elements", p.processing_elements},
              {"description", p.description}};
}

Json to_json(const Violation& v) { return Json{{"code", v.code}, {"path", v.path}, {"message", v.message}}; }

FunctionExpr function_from_json(const Json& j, const std::string& path) {
  const auto kind = schema::get_string(j, "kind", path);
  if (kind == "action") {
    schema::allow_keys(j, path, {"kind", "verb", "object"});
    return ActionDescription{schema::get_string(j, "verb", path), schema::get_string(j, "object", path)};
  }
  if (kind == "flow") {
    schema::allow_keys(j, path, {"kind", "flow_kind", "input_object", "output_object"});
    const auto fk = schema::get_string(j, "flow_kind", path);
    FlowKind k;
    if (fk == "energy") k = FlowKind::Energy;
    else if (fk == "material") k = FlowKind::Material;
    else if (fk == "signal") k = FlowKind::Signal;
    else schema::fail(child(path, "flow_kind"), "flow_kind must be energy, material or signal");
    return FlowTransformation{k, schema::get_string(j, "input_object", path), schema::get_string(j, "output_object", path)};
  }
  if (kind == "state") {
    schema::allow_keys(j, path, {"kind", "object", "change_verb"});
    return StateTransition{schema::get_string(j, "object", path), schema::get_string(j, "change_verb", path)};
  }
  schema::fail(child(path, "kind"), "kind must be action, flow or state");
}

Characteristic characteristic_from_json(const Json& j, const std::string& path) {
  return np_from_json<Characteristic>(j, path);
}

EnvironmentDesc environment_from_json(const Json& j, const std::string& path) {
  return np_from_json<EnvironmentDesc>(j, path);
}

StrategyFrame frame_from_json(const Json& j, const std::string& path) {
  schema::allow_keys(j, path, {"fbce_version", "id", "behavior", "functions", "characteristics", "environment", "provenance"});
  const auto& version = schema::require(j, "fbce_version", path);
  if (!version.is_number_integer() || version.get<int>() != kFbceVersion)
    throw Error(ErrorCode::SchemaError, "unsupported fbce_version", child(path, "fbce_version"));

  StrategyFrame f;
  f.id = schema::get_string(j, "id", path);

  const auto bp = child(path, "behavior");
  const auto& b = schema::require(j, "behavior", path);
  schema::allow_keys(b, bp, {"summary", "steps", "causal_links"});
  f.behavior.summary = schema::get_string(b, "summary", bp);
  f.behavior.steps = functions_from_json(schema::require(b, "steps", bp), child(bp, "steps"));
  f.behavior.causal_links = links_from_json(schema::require(b, "causal_links", bp), child(bp, "causal_links"));

  f.functions = functions_from_json(schema::require(j, "functions", path), child(path, "functions"));
  f.characteristics = characteristics_from_json(schema::require(j, "characteristics", path), child(path, "characteristics"));

  const auto& env = schema::require(j, "environment", path);
  if (!env.is_null()) f.environment = environment_from_json(env, child(path, "environment"));

  const auto pp = child(path, "provenance");
  const auto& p = schema::require(j, "provenance", path);
  schema::allow_keys(p, pp, {"source_doc", "sentence_ids", "elementary_ids", "notes"});
  f.provenance.source_doc = schema::get_string(p, "source_doc", pp);
  f.provenance.sentence_ids = schema::get_string_array(p, "sentence_ids", pp);
  f.provenance.elementary_ids = schema::get_string_array(p, "elementary_ids", pp);
  f.provenance.notes = schema::get_string(p, "notes", pp);
  for (std::size_t i = 0; i < f.provenance.elementary_ids.size(); ++i) {
    try {
      parse_elementary_label(f.provenance.elementary_ids[i]);
    } catch (const Error& e) {
      throw Error(ErrorCode::SchemaError, e.what(), child(child(pp, "elementary_ids"), i));
    }
  }
  return f;
}

FrameFragment fragment_from_json(const Json& j, const std::string& path) {
  schema::allow_keys(j, path, {"summary", "steps", "causal_links", "functions", "characteristics", "environment", "composed_from"});
  FrameFragment f;
  f.summary = schema::get_string(j, "summary", path);
  f.steps = functions_from_json(schema::require(j, "steps", path), child(path, "steps"));
  f.causal_links = links_from_json(schema::require(j, "causal_links", path), child(path, "causal_links"));
  f.functions = functions_from_json(schema::require(j, "functions", path), child(path, "functions"));
  f.characteristics = characteristics_from_json(schema::require(j, "characteristics", path), child(path, "characteristics"));
  const auto& env = schema::require(j, "environment", path);
  if (!env.is_null()) f.environment = environment_from_json(env, child(path, "environment"));
  f.composed_from = schema::get_string_array(j, "composed_from", path);
  return f;
}

ElementaryStrategy elementary_from_json(const Json& j, const std::string& path) {
  schema::allow_keys(j, path, {"id", "sentences", "frame_fragment"});
  ElementaryStrategy e;
  try {
    e.k = parse_elementary_label(schema::get_string(j, "id", path));
  } catch (const Error& err) {
    if (err.code() != ErrorCode::SchemaError || !err.path().empty()) throw;
    throw Error(ErrorCode::SchemaError, err.what(), child(path, "id"));
  }
  e.sentences = schema::get_string_array(j, "sentences", path);
  e.fragment = fragment_from_json(schema::require(j, "frame_fragment", path), child(path, "frame_fragment"));
  return e;
}

DesignProblem problem_from_json(const Json& j, const std::string& path) {
  schema::allow_keys(j, path, {"level", "requirement_elements", "processing_elements", "description"});
  DesignProblem p;
  const auto level = schema::get_string(j, "level", path);
  if (level == "system") p.level = DesignLevel::System;
  else if (level == "subsystem") p.level = DesignLevel::Subsystem;
  else if (level == "component") p.level = DesignLevel::Component;
  else schema::fail(child(path, "level"), "level must be system, subsystem or component");
  p.requirement_elements = schema::get_string_array(j, "requirement_elements", path);
  if (p.requirement_elements.empty()) schema::fail(child(path, "requirement_elements"), "at least one requirement element");
  if (j.contains("processing_elements")) p.processing_elements = schema::get_string_array(j, "processing_elements", path);
  if (j.contains("description")) p.description = schema::get_string(j, "description", path);
  return p;
}

std::string serialize_frame(const StrategyFrame& frame) { return to_json(frame).dump(2); }

StrategyFrame parse_frame(std::string_view document) { return frame_from_json(schema::parse(document), ""); }

std::vector<StrategyFrame> parse_frame_collection(std::string_view document) {
  const auto j = schema::parse(document);
  schema::expect_array(j, "");
  std::vector<StrategyFrame> out;
  std::set<std::string> ids;
  for (std::size_t i = 0; i < j.size(); ++i) {
    auto f = frame_from_json(j[i], child("", i));
    if (!ids.insert(f.id).second)
      throw Error(ErrorCode::SchemaError, "duplicate-id: frame id '" + f.id + "' appears twice", child(child("", i), "id"));
    out.push_back(std::move(f));
  }
  return out;
}

StrategyFrame load_frame_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_frame(ss.str());
}

}  // namespace bioinvert
