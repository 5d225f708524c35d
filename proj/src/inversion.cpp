#include "bioinvert/inversion.hpp"

#include <algorithm>
#include <set>

#include "bioinvert/lexicon.hpp"
#include "bioinvert/schema.hpp"
#include "bioinvert/text.hpp"

namespace bioinvert {

using schema::child;

// --- extraction ----------------------------------------------------------------

namespace {

struct Tok {
  std::string word;  // lowercase
  std::string surface;
  std::size_t clause = 0;
};

std::vector<Tok> toks_of(std::string_view s) {
  std::vector<Tok> out;
  for (auto& t : text::tokenize(s)) out.push_back({t.word, std::string(s.substr(t.begin, t.end - t.begin)), t.clause});
  return out;
}

bool is_determiner(std::string_view w) {
  static const std::set<std::string, std::less<>> words = {"the", "a", "an", "its", "their", "his", "her",
                                                           "this", "that", "these", "those", "each", "both"};
  return words.contains(w);
}

bool is_auxiliary(std::string_view w) {
  static const std::set<std::string, std::less<>> words = {"is",  "are",  "was",  "were", "be",  "been", "being",
                                                           "am",  "can",  "will", "may",  "must", "does", "do",
                                                           "did", "has",  "have", "had",  "could", "would", "should"};
  return words.contains(w);
}

bool is_adverb(std::string_view w) { return w.size() > 4 && w.ends_with("ly"); }

bool is_boundary(std::string_view w) {
  static const std::set<std::string, std::less<>> words = {
      "across", "along",   "around", "against", "toward", "towards", "during",    "when",    "while",
      "because", "so",     "after",  "before",  "until",  "between", "behind",    "above",   "below",
      "inside", "outside", "about",  "without", "forward", "backward", "upward", "downward", "again",
      "also",   "together", "therefore", "thus", "thereby", "who",   "like",      "unlike",  "once"};
  return text::is_stopword(w) || words.contains(w) || is_adverb(w);
}

// Lemmas that can head an extracted function.
std::optional<std::string> function_lemma(std::string_view word) {
  static const std::map<std::string, std::string, std::less<>> by_stem = [] {
    std::map<std::string, std::string, std::less<>> m;
    for (const auto& cue : lexicon::function_cues())
      if (cue.stemmed) m.emplace(text::stem(cue.words.front()), cue.words.front());
    return m;
  }();
  if (auto it = by_stem.find(text::stem(word)); it != by_stem.end()) return it->second;
  if (auto lemma = lexicon::lemma_of(word); lemma && (lexicon::is_state_verb(*lemma) || lexicon::is_transform_verb(*lemma)))
    return lemma;
  return std::nullopt;
}

std::string join_surface(const std::vector<Tok>& toks, std::size_t from, std::size_t to) {
  std::vector<std::string> parts;
  for (auto i = from; i < to; ++i) parts.push_back(toks[i].surface);
  return text::join(parts, " ");
}

// Noun group starting at `from` (after determiners), at most three words.
std::string noun_after(const std::vector<Tok>& toks, std::size_t from, std::size_t limit) {
  auto i = from;
  while (i < limit && (is_determiner(toks[i].word) || is_adverb(toks[i].word))) ++i;
  if (i >= limit) return {};
  const auto clause = toks[i].clause;
  auto j = i;
  while (j < limit && j - i < 3 && toks[j].clause == clause && !is_boundary(toks[j].word) &&
         !is_auxiliary(toks[j].word) && !(j > i && function_lemma(toks[j].word)))
    ++j;
  return join_surface(toks, i, j);
}

// Noun group ending just before `verb` (auxiliaries and adverbs skipped).
std::string subject_before(const std::vector<Tok>& toks, std::size_t verb, std::size_t floor) {
  auto end = verb;
  while (end > floor && (is_auxiliary(toks[end - 1].word) || is_adverb(toks[end - 1].word))) --end;
  if (end == floor) return {};
  const auto clause = toks[end - 1].clause;
  auto begin = end;
  while (begin > floor && end - begin < 3 && toks[begin - 1].clause == clause && !is_boundary(toks[begin - 1].word) &&
         !is_determiner(toks[begin - 1].word) && !is_auxiliary(toks[begin - 1].word))
    --begin;
  return join_surface(toks, begin, end);
}

std::optional<FunctionExpr> extract_in(const std::vector<Tok>& toks, std::size_t from, std::size_t to) {
  for (auto i = from; i < to; ++i) {
    if (i > from && is_determiner(toks[i - 1].word)) continue;  // nominal use ("the release")
    if (i + 1 < to && is_auxiliary(toks[i + 1].word)) continue;    // subject noun ("the grip is")
    const auto lemma = function_lemma(toks[i].word);
    if (!lemma) continue;
    const bool passive = i > from && is_auxiliary(toks[i - 1].word) && toks[i].word.ends_with("ed");

    if (lexicon::is_transform_verb(*lemma)) {
      std::size_t into = to;
      for (auto k = i + 1; k < to && toks[k].clause == toks[i].clause; ++k)
        if (toks[k].word == "into") {
          into = k;
          break;
        }
      if (into < to) {
        auto output = noun_after(toks, into + 1, to);
        auto input = noun_after(toks, i + 1, into);
        if (input.empty()) input = subject_before(toks, i, from);
        if (!input.empty() && !output.empty())
          return FlowTransformation{lexicon::flow_kind_for(input + " " + output), input, output};
      }
    }
    // "bends the tail" is an action on the tail; "the tail bends" is a state change.
    const bool transitive = i + 1 < to && toks[i + 1].clause == toks[i].clause && is_determiner(toks[i + 1].word);
    if (lexicon::is_state_verb(*lemma) && !transitive) {
      auto subject = subject_before(toks, i, from);
      if (subject.empty()) subject = noun_after(toks, i + 1, to);
      if (!subject.empty()) return StateTransition{subject, lexicon::gerund_of(*lemma)};
      continue;
    }
    auto object = passive ? subject_before(toks, i, from) : noun_after(toks, i + 1, to);
    if (object.empty()) object = passive ? noun_after(toks, i + 1, to) : subject_before(toks, i, from);
    if (!object.empty()) return ActionDescription{lexicon::gerund_of(*lemma), object};
  }
  return std::nullopt;
}

struct Conjunction {
  std::size_t begin;
  std::size_t end;
  std::string text;
};

std::optional<Conjunction> find_conjunction(const std::vector<Tok>& toks) {
  for (std::size_t i = 0; i < toks.size(); ++i) {
    for (const auto& c : lexicon::causal_conjunctions()) {
      const auto words = text::split_words(c);
      if (i + words.size() > toks.size()) continue;
      bool hit = true;
      for (std::size_t k = 0; k < words.size() && hit; ++k) hit = toks[i + k].word == words[k];
      if (hit) return Conjunction{i, i + words.size(), c};
    }
  }
  return std::nullopt;
}

template <typename T, typename Key>
void push_unique(std::vector<T>& into, T item, Key key) {
  const auto k = text::phrase_key(key(item));
  for (const auto& e : into)
    if (text::phrase_key(key(e)) == k) return;
  into.push_back(std::move(item));
}

}  // namespace

std::optional<FunctionExpr> extract_function(std::string_view sentence) {
  const auto toks = toks_of(sentence);
  return extract_in(toks, 0, toks.size());
}

std::vector<Characteristic> extract_characteristics(std::string_view sentence) {
  const auto toks = toks_of(sentence);
  std::vector<Characteristic> out;
  const auto key = [](const Characteristic& c) { return render(c); };
  for (std::size_t i = 0; i < toks.size(); ++i) {
    if (!lexicon::is_structure_noun(toks[i].word)) continue;
    if (i + 1 < toks.size() && toks[i + 1].clause == toks[i].clause && lexicon::is_structure_noun(toks[i + 1].word))
      continue;  // compound noun: the last word is the head
    std::optional<std::size_t> start;
    for (std::size_t k = 1; k <= lexicon::kModifierWindow && k <= i; ++k) {
      const auto& t = toks[i - k];
      if (t.clause != toks[i].clause || is_boundary(t.word) || is_determiner(t.word)) break;
      if (lexicon::is_property_modifier(t.word)) start = i - k;
      else if (lexicon::lemma_of(t.word)) break;
    }
    if (start) push_unique(out, noun_phrase<Characteristic>(join_surface(toks, *start, i + 1)), key);
  }
  if (out.empty()) {
    for (std::size_t i = 0; i < toks.size(); ++i) {
      if (!lexicon::is_structure_noun(toks[i].word)) continue;
      auto begin = i;
      if (i > 0 && toks[i - 1].clause == toks[i].clause && !is_boundary(toks[i - 1].word) &&
          !is_determiner(toks[i - 1].word) && !is_auxiliary(toks[i - 1].word))
        begin = i - 1;
      out.push_back(noun_phrase<Characteristic>(join_surface(toks, begin, i + 1)));
      break;
    }
  }
  return out;
}

std::optional<EnvironmentDesc> extract_environment(std::string_view sentence) {
  static const std::set<std::string> habitat = [] {
    std::set<std::string> s;
    for (const auto& cue : lexicon::environment_cues()) s.insert(text::stem(cue.words.front()));
    return s;
  }();
  const auto toks = toks_of(sentence);
  for (std::size_t i = 0; i < toks.size(); ++i) {
    if (!habitat.contains(text::stem(toks[i].word))) continue;
    auto end = i + 1;
    while (end < toks.size() && toks[end].clause == toks[i].clause && habitat.contains(text::stem(toks[end].word))) ++end;
    auto begin = i;
    while (begin > 0 && i - begin < 2) {
      const auto& t = toks[begin - 1];
      if (t.clause != toks[i].clause || is_boundary(t.word) || is_determiner(t.word) || is_auxiliary(t.word)) break;
      if (lexicon::lemma_of(t.word) && !lexicon::is_property_modifier(t.word)) break;
      --begin;
    }
    return noun_phrase<EnvironmentDesc>(join_surface(toks, begin, end));
  }
  return std::nullopt;
}

std::string RuleSummarizer::summarize(const std::vector<std::string>& sentences) const {
  for (const auto& s : sentences) {
    auto f = extract_function(s);
    if (!f) continue;
    std::string phrase;
    if (auto a = std::get_if<ActionDescription>(&*f)) {
      auto lemma = lexicon::lemma_of(text::to_lower(a->verb)).value_or(a->verb);
      phrase = lemma + " " + a->object;
    } else if (auto t = std::get_if<FlowTransformation>(&*f)) {
      phrase = "convert " + t->input_object + " into " + t->output_object;
    } else {
      const auto& st = std::get<StateTransition>(*f);
      phrase = lexicon::lemma_of(st.change_verb).value_or(st.change_verb) + " " + st.object;
    }
    phrase = text::collapse_whitespace(phrase);
    if (!phrase.empty() && phrase[0] >= 'a' && phrase[0] <= 'z') phrase[0] = static_cast<char>(phrase[0] - 'a' + 'A');
    return phrase;
  }
  return "Unspecified behavior";
}

FrameFragment build_fragment(const std::vector<LabeledSentence>& sentences, const Summarizer* summarizer) {
  FrameFragment frag;
  const auto fkey = [](const FunctionExpr& f) { return render(f); };
  const auto ckey = [](const Characteristic& c) { return render(c); };
  for (const auto& s : sentences) {
    const auto& body = s.sentence.text;
    if (s.labels.contains(Dimension::Function))
      if (auto f = extract_function(body)) push_unique(frag.functions, *f, fkey);

    if (s.labels.contains(Dimension::Behavior)) {
      const auto toks = toks_of(body);
      if (const auto conj = find_conjunction(toks)) {
        // "A because B": B causes A. "A, thereby B" / "A so that B": A causes B.
        const bool reversed = conj->text == "because" || conj->text == "due to" || conj->text == "in response to";
        auto before = extract_in(toks, 0, conj->begin);
        auto after = extract_in(toks, conj->end, toks.size());
        auto& cause = reversed ? after : before;
        auto& effect = reversed ? before : after;
        if (cause && effect && !(*cause == *effect)) {
          frag.steps.push_back(*cause);
          const auto idx = frag.steps.size() - 1;
          frag.causal_links.push_back(CausalRelation{StepRange{idx, idx + 1}, *effect, conj->text});
        } else if (!reversed && !before && after && !frag.steps.empty()) {
          // Sentence-initial result adverb: the previous step is the cause.
          const auto prev = frag.steps.size() - 1;
          frag.causal_links.push_back(CausalRelation{StepRange{prev, prev + 1}, *after, conj->text});
          frag.steps.push_back(*after);
        } else if (auto step = extract_in(toks, 0, toks.size())) {
          frag.steps.push_back(*step);
        }
      } else if (auto step = extract_in(toks, 0, toks.size())) {
        frag.steps.push_back(*step);
      }
    }

    if (s.labels.contains(Dimension::Characteristic))
      for (auto& c : extract_characteristics(body)) push_unique(frag.characteristics, std::move(c), ckey);

    if (s.labels.contains(Dimension::Environment) && !frag.environment) frag.environment = extract_environment(body);
  }
  if (summarizer) {
    std::vector<std::string> texts;
    for (const auto& s : sentences) texts.push_back(s.sentence.text);
    if (!texts.empty()) frag.summary = summarizer->summarize(texts);
  }
  return frag;
}

StrategyFrame build_frame(const std::vector<LabeledSentence>& sentences, const Summarizer& summarizer, std::string id) {
  bool has_f = false, has_c = false;
  for (const auto& s : sentences) {
    has_f = has_f || s.labels.contains(Dimension::Function);
    has_c = has_c || s.labels.contains(Dimension::Characteristic);
  }
  auto frag = build_fragment(sentences, &summarizer);
  has_f = has_f && !frag.functions.empty();
  has_c = has_c && !frag.characteristics.empty();
  if (!has_f || !has_c) {
    std::vector<std::string> missing;
    if (!has_f) missing.push_back("Function");
    if (!has_c) missing.push_back("Characteristic");
    throw Error(ErrorCode::MissingDimension, "missing dimension: " + text::join(missing, ", "));
  }
  StrategyFrame f;
  f.id = std::move(id);
  f.behavior = BehaviorExpr{frag.summary, frag.steps, frag.causal_links};
  f.functions = frag.functions;
  f.characteristics = frag.characteristics;
  f.environment = frag.environment;
  f.provenance.source_doc = sentences.front().sentence.doc_id;
  for (const auto& s : sentences) f.provenance.sentence_ids.push_back(s.sentence.id);
  return f;
}

// --- inversion --------------------------------------------------------------------

std::vector<std::string> InversionResult::unresolved_term_names() const {
  std::vector<std::string> out;
  for (const auto& u : unresolved)
    if (std::find(out.begin(), out.end(), u.term) == out.end()) out.push_back(u.term);
  return out;
}

bool InversionResult::engineering_ready() const {
  for (const auto& t : unresolved_term_names())
    if (std::find(waived_terms.begin(), waived_terms.end(), t) == waived_terms.end()) return false;
  return true;
}

std::vector<UnresolvedTerm> find_unresolved(const StrategyFrame& frame, const EngineeringKB& kb) {
  std::vector<UnresolvedTerm> out;
  for (const auto& slot : noun_slots(frame))
    for (const auto& hit : unresolved_terms(slot.text, kb)) out.push_back({slot.path, hit.term});
  return out;
}

StrategyFrame apply_substitutions(const StrategyFrame& source, const std::vector<Substitution>& subs) {
  StrategyFrame out = source;
  std::map<std::string, std::vector<Replacement>> by_slot;
  for (const auto& s : subs) by_slot[s.path].push_back({s.offset, s.bio_term, s.eng_term});
  for (const auto& slot : noun_slots(source)) {
    auto it = by_slot.find(slot.path);
    if (it != by_slot.end()) set_noun_slot(out, slot.path, apply_replacements(slot.text, it->second));
  }
  return out;
}

namespace {

// Mapping can turn two distinct phrases into the same one; keep the first.
StrategyFrame drop_duplicates(StrategyFrame f, std::vector<std::string>& dropped) {
  std::set<std::string> seen;
  std::vector<FunctionExpr> functions;
  for (std::size_t i = 0; i < f.functions.size(); ++i) {
    if (seen.insert(text::phrase_key(render(f.functions[i]))).second) functions.push_back(f.functions[i]);
    else dropped.push_back(child("/functions", i));
  }
  seen.clear();
  std::vector<Characteristic> chars;
  for (std::size_t i = 0; i < f.characteristics.size(); ++i) {
    if (seen.insert(text::phrase_key(render(f.characteristics[i]))).second) chars.push_back(f.characteristics[i]);
    else dropped.push_back(child("/characteristics", i));
  }
  f.functions = std::move(functions);
  f.characteristics = std::move(chars);
  return f;
}

}  // namespace

InversionResult invert(const StrategyFrame& frame, const EngineeringKB& kb, const LlmBridge* corrector) {
  if (kb.empty()) throw Error(ErrorCode::KbEmpty, "knowledge base has no mappings");
  if (auto report = validate_frame(frame); !report.empty())
    throw Error(ErrorCode::SchemaError, "frame '" + frame.id + "' does not validate: " + report.front().code,
                report.front().path);

  InversionResult r;
  r.source_frame = frame;
  std::vector<std::pair<std::string, std::string>> table;
  for (const auto& m : kb.mappings) table.emplace_back(m.bio_term, m.eng_term);

  r.pass1_frame = frame;
  for (const auto& slot : noun_slots(frame)) {
    std::vector<Replacement> applied;
    const auto replaced = substitute(slot.text, table, &applied);
    if (applied.empty()) continue;
    set_noun_slot(r.pass1_frame, slot.path, replaced);
    for (auto& a : applied) r.substitutions.push_back({slot.path, std::move(a.before), std::move(a.after), a.offset});
  }
  r.engineering_frame = r.pass1_frame;
  r.engineering_frame.id = "eng:" + frame.id;

  if (corrector) {
    try {
      auto corrected = correct_frame(r.engineering_frame, kb, *corrector);
      r.engineering_frame = std::move(corrected.frame);
      r.corrections = std::move(corrected.changes);
    } catch (const Error& e) {
      r.engineering_frame = drop_duplicates(r.engineering_frame, r.merged_duplicates);
      r.unresolved = find_unresolved(r.engineering_frame, kb);
      throw InversionError(e, std::move(r));
    }
  }
  r.engineering_frame = drop_duplicates(r.engineering_frame, r.merged_duplicates);
  r.unresolved = find_unresolved(r.engineering_frame, kb);
  return r;
}

ScreeningOutcome screen(const std::vector<InversionResult>& results, const std::map<std::string, ScreenVerdict>& verdicts) {
  ScreeningOutcome out;
  for (const auto& r : results) {
    auto it = verdicts.find(r.id());
    if (it == verdicts.end()) throw Error(ErrorCode::MissingVerdict, "no screening verdict for '" + r.id() + "'");
    if (it->second.keep) {
      out.kept.push_back(r);
    } else {
      out.dropped.emplace_back(r.id(), it->second.reason);
    }
  }
  return out;
}

// --- serialization -------------------------------------------------------------------

Json to_json(const InversionResult& r) {
  Json subs = Json::array();
  for (const auto& s : r.substitutions)
    subs.push_back(Json{{"path", s.path}, {"bio_term", s.bio_term}, {"eng_term", s.eng_term}, {"offset", s.offset}});
  Json corrections = Json::array();
  for (const auto& c : r.corrections) corrections.push_back(to_json(c));
  Json unresolved = Json::array();
  for (const auto& u : r.unresolved) unresolved.push_back(Json{{"path", u.path}, {"term", u.term}});
  return Json{{"id", r.id()},
              {"source_frame", to_json(r.source_frame)},
              {"pass1_frame", to_json(r.pass1_frame)},
              {"engineering_frame", to_json(r.engineering_frame)},
              {"substitutions", subs},
              {"corrections", corrections},
              {"unresolved", unresolved},
              {"merged_duplicates", r.merged_duplicates},
              {"waived_terms", r.waived_terms},
              {"engineering_ready", r.engineering_ready()}};
}

InversionResult inversion_from_json(const Json& j, const std::string& path) {
  schema::allow_keys(j, path,
                     {"id", "source_frame", "pass1_frame", "engineering_frame", "substitutions", "corrections",
                      "unresolved", "merged_duplicates", "waived_terms", "engineering_ready"});
  InversionResult r;
  r.source_frame = frame_from_json(schema::require(j, "source_frame", path), child(path, "source_frame"));
  r.pass1_frame = frame_from_json(schema::require(j, "pass1_frame", path), child(path, "pass1_frame"));
  r.engineering_frame = frame_from_json(schema::require(j, "engineering_frame", path), child(path, "engineering_frame"));

  const auto sp = child(path, "substitutions");
  const auto& subs = schema::require(j, "substitutions", path);
  schema::expect_array(subs, sp);
  for (std::size_t i = 0; i < subs.size(); ++i) {
    const auto p = child(sp, i);
    schema::allow_keys(subs[i], p, {"path", "bio_term", "eng_term", "offset"});
    r.substitutions.push_back({schema::get_string(subs[i], "path", p), schema::get_string(subs[i], "bio_term", p),
                               schema::get_string(subs[i], "eng_term", p),
                               schema::as_uint(schema::require(subs[i], "offset", p), child(p, "offset"))});
  }
  const auto cp = child(path, "corrections");
  const auto& corrections = schema::require(j, "corrections", path);
  schema::expect_array(corrections, cp);
  for (std::size_t i = 0; i < corrections.size(); ++i)
    r.corrections.push_back(frame_change_from_json(corrections[i], child(cp, i)));
  const auto up = child(path, "unresolved");
  const auto& unresolved = schema::require(j, "unresolved", path);
  schema::expect_array(unresolved, up);
  for (std::size_t i = 0; i < unresolved.size(); ++i) {
    const auto p = child(up, i);
    schema::allow_keys(unresolved[i], p, {"path", "term"});
    r.unresolved.push_back({schema::get_string(unresolved[i], "path", p), schema::get_string(unresolved[i], "term", p)});
  }
  r.merged_duplicates = schema::get_string_array(j, "merged_duplicates", path);
  r.waived_terms = schema::get_string_array(j, "waived_terms", path);
  if (r.id() != schema::get_string(j, "id", path)) schema::fail(child(path, "id"), "id does not match engineering_frame");
  return r;
}

}  // namespace bioinvert
