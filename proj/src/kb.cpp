#include "bioinvert/kb.hpp"

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

bool EngineeringKB::in_vocabulary(std::string_view term) const {
  return std::binary_search(vocabulary.begin(), vocabulary.end(), text::phrase_key(term));
}

EngineeringKB make_kb(std::vector<TermMapping> mappings, std::vector<CompatibilityRule> rules,
                      std::vector<std::string> vocabulary) {
  EngineeringKB kb;
  std::set<std::string> vocab;
  for (auto& v : vocabulary) vocab.insert(text::phrase_key(v));
  std::set<std::string> bio_seen;
  for (std::size_t i = 0; i < mappings.size(); ++i) {
    auto& m = mappings[i];
    const auto path = child("/mappings", i);
    m.bio_term = text::collapse_whitespace(m.bio_term);
    m.eng_term = text::collapse_whitespace(m.eng_term);
    if (m.bio_term.empty()) schema::fail(child(path, "bio_term"), "bio_term is empty");
    if (m.eng_term.empty()) schema::fail(child(path, "eng_term"), "eng_term is empty");
    if (text::phrase_key(m.bio_term) == text::phrase_key(m.eng_term))
      schema::fail(path, "bio_term and eng_term must differ");
    if (!bio_seen.insert(text::phrase_key(m.bio_term)).second)
      schema::fail(child(path, "bio_term"), "bio_term '" + m.bio_term + "' mapped twice");
    vocab.insert(text::phrase_key(m.eng_term));
  }
  for (std::size_t i = 0; i < rules.size(); ++i) {
    const auto path = child("/rules", i);
    if (!vocab.contains(text::phrase_key(rules[i].first)))
      schema::fail(child(path, "first"), "rule term '" + rules[i].first + "' is not in the vocabulary");
    if (!vocab.contains(text::phrase_key(rules[i].second)))
      schema::fail(child(path, "second"), "rule term '" + rules[i].second + "' is not in the vocabulary");
  }
  kb.mappings = std::move(mappings);
  kb.rules = std::move(rules);
  kb.vocabulary.assign(vocab.begin(), vocab.end());
  return kb;
}

EngineeringKB kb_from_json(const Json& j, const std::string& path) {
  schema::allow_keys(j, path, {"name", "description", "mappings", "vocabulary", "rules"});
  std::vector<TermMapping> mappings;
  const auto mp = child(path, "mappings");
  const auto& ms = schema::require(j, "mappings", path);
  schema::expect_array(ms, mp);
  for (std::size_t i = 0; i < ms.size(); ++i) {
    const auto p = child(mp, i);
    schema::allow_keys(ms[i], p, {"bio_term", "eng_term", "domain_tags", "bidirectional"});
    TermMapping m;
    m.bio_term = schema::get_string(ms[i], "bio_term", p);
    m.eng_term = schema::get_string(ms[i], "eng_term", p);
    if (ms[i].contains("domain_tags")) m.domain_tags = schema::get_string_array(ms[i], "domain_tags", p);
    if (ms[i].contains("bidirectional"))
      m.bidirectional = schema::as_bool(ms[i]["bidirectional"], child(p, "bidirectional"));
    mappings.push_back(std::move(m));
  }
  std::vector<std::string> vocabulary;
  if (j.contains("vocabulary")) vocabulary = schema::get_string_array(j, "vocabulary", path);
  std::vector<CompatibilityRule> rules;
  if (j.contains("rules")) {
    const auto rp = child(path, "rules");
    const auto& rs = j["rules"];
    schema::expect_array(rs, rp);
    for (std::size_t i = 0; i < rs.size(); ++i) {
      const auto p = child(rp, i);
      schema::allow_keys(rs[i], p, {"first", "second", "verdict", "rationale"});
      CompatibilityRule r;
      r.first = schema::get_string(rs[i], "first", p);
      r.second = schema::get_string(rs[i], "second", p);
      const auto verdict = schema::get_string(rs[i], "verdict", p);
      if (verdict == "Allowed") r.verdict = RuleVerdict::Allowed;
      else if (verdict == "Disallowed") r.verdict = RuleVerdict::Disallowed;
      else schema::fail(child(p, "verdict"), "verdict must be Allowed or Disallowed");
      if (rs[i].contains("rationale")) r.rationale = schema::get_string(rs[i], "rationale", p);
      rules.push_back(std::move(r));
    }
  }
  try {
    return make_kb(std::move(mappings), std::move(rules), std::move(vocabulary));
  } catch (const Error& e) {
    throw Error(e.code(), e.what(), path + e.path());
  }
}

Json to_json(const EngineeringKB& kb) {
  Json mappings = Json::array();
  for (const auto& m : kb.mappings)
    mappings.push_back(Json{{"bio_term", m.bio_term},
                            {"eng_term", m.eng_term},
                            {"domain_tags", m.domain_tags},
                            {"bidirectional", m.bidirectional}});
  Json rules = Json::array();
  for (const auto& r : kb.rules)
    rules.push_back(Json{{"first", r.first},
                         {"second", r.second},
                         {"verdict", r.verdict == RuleVerdict::Allowed ? "Allowed" : "Disallowed"},
                         {"rationale", r.rationale}});
  return Json{{"mappings", mappings}, {"vocabulary", kb.vocabulary}, {"rules", rules}};
}

EngineeringKB load_kb_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open knowledge base " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return kb_from_json(schema::parse(ss.str()), "");
}

// --- term matching -------------------------------------------------------------

namespace {

bool is_consonant(char c) { return std::string_view("aeiou").find(c) == std::string_view::npos; }

std::string pluralize(std::string w) {
  if (w.empty()) return w;
  const auto ends = [&](std::string_view s) { return w.size() >= s.size() && w.compare(w.size() - s.size(), s.size(), s) == 0; };
  if (ends("s") || ends("x") || ends("z") || ends("ch") || ends("sh")) return w + "es";
  if (w.size() > 1 && w.back() == 'y' && is_consonant(w[w.size() - 2])) return w.substr(0, w.size() - 1) + "ies";
  return w + "s";
}

bool plain_gap(std::string_view text, std::size_t from, std::size_t to) {
  for (auto i = from; i < to; ++i)
    if (text[i] != ' ' && text[i] != '\t') return false;
  return true;
}

struct Candidate {
  TermMatch match;
  std::size_t tokens;
};

}  // namespace

std::vector<TermMatch> find_terms(std::string_view text, const std::vector<std::string>& terms, MatchMode mode) {
  const auto toks = text::tokenize(text);
  std::vector<std::string> tok_stems;
  if (mode == MatchMode::Stem)
    for (const auto& t : toks) tok_stems.push_back(text::stem(t.word));

  std::vector<Candidate> candidates;
  for (std::size_t e = 0; e < terms.size(); ++e) {
    auto words = text::tokenize(terms[e]);
    if (words.empty()) continue;
    std::vector<std::string> keys;
    for (const auto& w : words) keys.push_back(mode == MatchMode::Stem ? text::stem(w.word) : w.word);
    const auto last_plural = pluralize(keys.back());
    for (std::size_t i = 0; i + keys.size() <= toks.size(); ++i) {
      bool ok = true;
      bool plural = false;
      for (std::size_t k = 0; k < keys.size() && ok; ++k) {
        const auto& t = toks[i + k];
        if (k > 0 && !plain_gap(text, toks[i + k - 1].end, t.begin)) ok = false;
        else if (mode == MatchMode::Stem) ok = tok_stems[i + k] == keys[k];
        else if (t.word == keys[k]) ok = true;
        else if (k + 1 == keys.size() && t.word == last_plural) plural = true;
        else ok = false;
      }
      if (ok)
        candidates.push_back({TermMatch{toks[i].begin, toks[i + keys.size() - 1].end, e, plural}, keys.size()});
    }
  }
  std::stable_sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    if (a.tokens != b.tokens) return a.tokens > b.tokens;
    if (a.match.begin != b.match.begin) return a.match.begin < b.match.begin;
    return a.match.entry < b.match.entry;
  });
  std::vector<TermMatch> accepted;
  for (const auto& c : candidates) {
    bool overlaps = false;
    for (const auto& a : accepted) overlaps = overlaps || (c.match.begin < a.end && a.begin < c.match.end);
    if (!overlaps) accepted.push_back(c.match);
  }
  std::sort(accepted.begin(), accepted.end(), [](const TermMatch& a, const TermMatch& b) { return a.begin < b.begin; });
  return accepted;
}

std::string replacement_surface(std::string_view matched, std::string_view replacement, bool plural) {
  std::string out(replacement);
  if (plural) {
    const auto space = out.rfind(' ');
    const auto head = space == std::string::npos ? std::string{} : out.substr(0, space + 1);
    out = head + pluralize(out.substr(head.size()));
  }
  return text::match_leading_case(matched, out);
}

std::string substitute(std::string_view input, const std::vector<std::pair<std::string, std::string>>& table,
                       std::vector<Replacement>* applied) {
  std::vector<std::string> terms;
  for (const auto& [from, to] : table) terms.push_back(from);
  std::string out;
  std::size_t pos = 0;
  for (const auto& m : find_terms(input, terms)) {
    const auto matched = input.substr(m.begin, m.end - m.begin);
    const auto after = replacement_surface(matched, table[m.entry].second, m.plural);
    out.append(input.substr(pos, m.begin - pos));
    out += after;
    pos = m.end;
    if (applied) applied->push_back({m.begin, std::string(matched), after});
  }
  out.append(input.substr(pos));
  return out;
}

std::string apply_replacements(std::string_view input, std::vector<Replacement> replacements) {
  std::sort(replacements.begin(), replacements.end(),
            [](const Replacement& a, const Replacement& b) { return a.offset > b.offset; });
  std::string out(input);
  for (const auto& r : replacements) {
    if (out.compare(r.offset, r.before.size(), r.before) != 0)
      throw Error(ErrorCode::InvalidArgument, "replacement '" + r.before + "' does not match the text");
    out.replace(r.offset, r.before.size(), r.after);
  }
  return out;
}

std::vector<TermHit> unresolved_terms(std::string_view input, const EngineeringKB& kb) {
  std::vector<std::string> bio;
  std::set<std::string> seen;
  const auto add = [&](const std::string& t) {
    auto key = text::phrase_key(t);
    if (seen.insert(key).second) bio.push_back(std::move(key));
  };
  for (const auto& t : lexicon::biological_terms()) add(t);
  for (const auto& m : kb.mappings) add(m.bio_term);

  const auto covered = find_terms(input, kb.vocabulary, MatchMode::Stem);
  std::vector<TermHit> out;
  for (const auto& m : find_terms(input, bio, MatchMode::Stem)) {
    bool inside = false;
    for (const auto& c : covered) inside = inside || (m.begin < c.end && c.begin < m.end);
    if (!inside) out.push_back({bio[m.entry], m.begin, m.end});
  }
  return out;
}

// --- slots ---------------------------------------------------------------------

namespace {

void function_slots(const FunctionExpr& f, const std::string& path, std::vector<SlotText>& out) {
  if (auto a = std::get_if<ActionDescription>(&f)) {
    out.push_back({child(path, "object"), a->object});
  } else if (auto t = std::get_if<FlowTransformation>(&f)) {
    out.push_back({child(path, "input_object"), t->input_object});
    out.push_back({child(path, "output_object"), t->output_object});
  } else {
    out.push_back({child(path, "object"), std::get<StateTransition>(f).object});
  }
}

std::string* function_field(FunctionExpr& f, std::string_view field) {
  if (auto a = std::get_if<ActionDescription>(&f)) return field == "object" ? &a->object : nullptr;
  if (auto t = std::get_if<FlowTransformation>(&f)) {
    if (field == "input_object") return &t->input_object;
    if (field == "output_object") return &t->output_object;
    return nullptr;
  }
  return field == "object" ? &std::get<StateTransition>(f).object : nullptr;
}

std::size_t parse_index(std::string_view s, std::size_t size, const std::string& path) {
  std::size_t i = 0;
  if (s.empty()) throw Error(ErrorCode::NotFound, "no slot at " + path, path);
  for (char c : s) {
    if (c < '0' || c > '9') throw Error(ErrorCode::NotFound, "no slot at " + path, path);
    i = i * 10 + static_cast<std::size_t>(c - '0');
  }
  if (i >= size) throw Error(ErrorCode::NotFound, "no slot at " + path, path);
  return i;
}

}  // namespace

std::vector<SlotText> noun_slots(const StrategyFrame& frame) {
  std::vector<SlotText> out;
  out.push_back({"/behavior/summary", frame.behavior.summary});
  for (std::size_t i = 0; i < frame.behavior.steps.size(); ++i)
    function_slots(frame.behavior.steps[i], child("/behavior/steps", i), out);
  for (std::size_t i = 0; i < frame.behavior.causal_links.size(); ++i)
    function_slots(frame.behavior.causal_links[i].effect, child(child("/behavior/causal_links", i), "effect"), out);
  for (std::size_t i = 0; i < frame.functions.size(); ++i) function_slots(frame.functions[i], child("/functions", i), out);
  for (std::size_t i = 0; i < frame.characteristics.size(); ++i)
    out.push_back({child("/characteristics", i), render(frame.characteristics[i])});
  if (frame.environment) out.push_back({"/environment", render(*frame.environment)});
  return out;
}

void set_noun_slot(StrategyFrame& frame, const std::string& path, const std::string& value) {
  std::vector<std::string> parts;
  for (std::size_t start = 1; start <= path.size();) {
    auto slash = path.find('/', start);
    if (slash == std::string::npos) slash = path.size();
    parts.push_back(path.substr(start, slash - start));
    start = slash + 1;
  }
  const auto missing = [&] { return Error(ErrorCode::NotFound, "no noun slot at " + path, path); };
  if (parts.empty()) throw missing();

  if (parts[0] == "behavior") {
    if (parts.size() == 2 && parts[1] == "summary") {
      frame.behavior.summary = value;
      return;
    }
    if (parts.size() == 4 && parts[1] == "steps") {
      auto& f = frame.behavior.steps[parse_index(parts[2], frame.behavior.steps.size(), path)];
      if (auto* field = function_field(f, parts[3])) {
        *field = value;
        return;
      }
    }
    if (parts.size() == 5 && parts[1] == "causal_links" && parts[3] == "effect") {
      auto& link = frame.behavior.causal_links[parse_index(parts[2], frame.behavior.causal_links.size(), path)];
      if (auto* field = function_field(link.effect, parts[4])) {
        *field = value;
        return;
      }
    }
    throw missing();
  }
  if (parts[0] == "functions" && parts.size() == 3) {
    auto& f = frame.functions[parse_index(parts[1], frame.functions.size(), path)];
    if (auto* field = function_field(f, parts[2])) {
      *field = value;
      return;
    }
    throw missing();
  }
  if (parts[0] == "characteristics" && parts.size() == 2) {
    frame.characteristics[parse_index(parts[1], frame.characteristics.size(), path)] =
        noun_phrase<Characteristic>(value);
    return;
  }
  if (parts[0] == "environment" && parts.size() == 1 && frame.environment) {
    frame.environment = noun_phrase<EnvironmentDesc>(value);
    return;
  }
  throw missing();
}

}  // namespace bioinvert
