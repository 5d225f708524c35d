#include "bioinvert/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "bioinvert/lexicon.hpp"
#include "bioinvert/random.hpp"
#include "bioinvert/schema.hpp"
#include "bioinvert/text.hpp"

namespace bioinvert {

using schema::child;

// --- segmentation ------------------------------------------------------------

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

// Length of the multi-byte punctuation mark at `i`, if it is one of `marks`.
template <std::size_t N>
std::size_t match_any(std::string_view s, std::size_t i, const std::array<std::string_view, N>& marks) {
  for (auto m : marks)
    if (s.substr(i, m.size()) == m) return m.size();
  return 0;
}

constexpr std::array<std::string_view, 5> kOpeners = {"(", "[", "{", "\xEF\xBC\x88", "\xE3\x80\x90"};
constexpr std::array<std::string_view, 5> kClosers = {")", "]", "}", "\xEF\xBC\x89", "\xE3\x80\x91"};
constexpr std::array<std::string_view, 3> kCjkTerminators = {"\xE3\x80\x82", "\xEF\xBC\x81",
                                                                     "\xEF\xBC\x9F"};

bool ascii_terminator(char c) { return c == '.' || c == '!' || c == '?'; }

}  // namespace

std::vector<SentenceRecord> segment(std::string_view doc, const std::string& doc_id) {
  std::vector<SentenceRecord> out;
  std::size_t depth = 0;
  std::size_t start = std::string_view::npos;

  auto emit = [&](std::size_t end) {
    if (start == std::string_view::npos) return;
    auto stop = end;
    while (stop > start && is_space(doc[stop - 1])) --stop;
    SentenceRecord r;
    r.doc_id = doc_id;
    r.id = doc_id + ":" + std::to_string(out.size() + 1);
    r.text = std::string(doc.substr(start, stop - start));
    r.begin = start;
    r.end = stop;
    out.push_back(std::move(r));
    start = std::string_view::npos;
  };

  std::size_t i = 0;
  while (i < doc.size()) {
    if (start == std::string_view::npos) {
      if (is_space(doc[i])) {
        ++i;
        continue;
      }
      start = i;
      depth = 0;
    }
    if (auto n = match_any(doc, i, kOpeners)) {
      ++depth;
      i += n;
      continue;
    }
    if (auto n = match_any(doc, i, kClosers)) {
      if (depth > 0) --depth;
      i += n;
      continue;
    }
    if (depth == 0) {
      if (auto n = match_any(doc, i, kCjkTerminators)) {
        i += n;
        while (auto m = match_any(doc, i, kCjkTerminators)) i += m;
        emit(i);
        continue;
      }
      if (ascii_terminator(doc[i])) {
        auto j = i;
        while (j < doc.size() && ascii_terminator(doc[j])) ++j;
        if (j == doc.size() || is_space(doc[j])) {
          i = j;
          emit(i);
          continue;
        }
        i = j;
        continue;
      }
    }
    ++i;
  }
  emit(doc.size());

  if (out.empty()) throw Error(ErrorCode::EmptyDocument, "document '" + doc_id + "' has no text");
  return out;
}

std::vector<Document> read_document_records(std::istream& in) {
  std::vector<Document> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    const auto path = "/" + std::to_string(line_no);
    const auto j = schema::parse(line, path);
    schema::allow_keys(j, path, {"doc_id", "text"});
    out.push_back({schema::get_string(j, "doc_id", path), schema::get_string(j, "text", path)});
  }
  return out;
}

// --- classification ------------------------------------------------------------

std::string_view to_string(LabelSource s) {
  switch (s) {
    case LabelSource::Lexicon: return "lexicon";
    case LabelSource::Llm: return "llm";
    case LabelSource::Human: return "human";
  }
  return "";
}

LabelSource label_source_from_string(std::string_view s) {
  if (s == "lexicon") return LabelSource::Lexicon;
  if (s == "llm") return LabelSource::Llm;
  if (s == "human") return LabelSource::Human;
  throw Error(ErrorCode::SchemaError, "unknown label source '" + std::string(s) + "'");
}

LabelSet threshold_labels(const DimensionScores& scores, double threshold) {
  LabelSet out;
  for (auto d : kDimensions)
    if (scores[static_cast<std::size_t>(d)] >= threshold) out.insert(d);
  return out;
}

DimensionScores indicator_scores(LabelSet labels) {
  DimensionScores s{};
  for (auto d : kDimensions) s[static_cast<std::size_t>(d)] = labels.contains(d) ? 1.0 : 0.0;
  return s;
}

namespace {

struct CompiledCue {
  std::vector<std::string> words;  // stemmed when the cue is
  bool stemmed;
  double weight;
};

std::vector<CompiledCue> compile(const std::vector<lexicon::Cue>& cues) {
  std::vector<CompiledCue> out;
  for (const auto& c : cues) {
    CompiledCue cc{c.words, c.stemmed, c.weight};
    if (c.stemmed)
      for (auto& w : cc.words) w = text::stem(w);
    out.push_back(std::move(cc));
  }
  return out;
}

struct TokenView {
  std::string word;
  std::string stem;
  std::size_t clause;
};

double noisy_or(double score, double weight) { return 1.0 - (1.0 - score) * (1.0 - weight); }

double score_cues(const std::vector<TokenView>& toks, const std::vector<CompiledCue>& cues) {
  double score = 0.0;
  for (const auto& cue : cues) {
    const auto len = cue.words.size();
    for (std::size_t i = 0; i + len <= toks.size(); ++i) {
      bool hit = true;
      for (std::size_t k = 0; k < len && hit; ++k) {
        const auto& t = toks[i + k];
        hit = t.clause == toks[i].clause && (cue.stemmed ? t.stem : t.word) == cue.words[k];
      }
      if (hit) score = noisy_or(score, cue.weight);
    }
  }
  return score;
}

}  // namespace

DimensionScores LexiconClassifier::score(const SentenceRecord& sentence) const { return score_text(sentence.text); }

DimensionScores LexiconClassifier::score_text(std::string_view input) const {
  static const auto function = compile(lexicon::function_cues());
  static const auto behavior = compile(lexicon::behavior_cues());
  static const auto environment = compile(lexicon::environment_cues());
  static const auto characteristic_weak = compile(lexicon::characteristic_weak_cues());

  std::vector<TokenView> toks;
  for (auto& t : text::tokenize(input)) {
    auto s = text::stem(t.word);
    toks.push_back({std::move(t.word), std::move(s), t.clause});
  }

  DimensionScores out{};
  out[static_cast<std::size_t>(Dimension::Function)] = score_cues(toks, function);
  out[static_cast<std::size_t>(Dimension::Behavior)] = score_cues(toks, behavior);
  out[static_cast<std::size_t>(Dimension::Environment)] = score_cues(toks, environment);

  double c = score_cues(toks, characteristic_weak);
  for (std::size_t i = 0; i < toks.size(); ++i) {
    if (!lexicon::is_structure_noun(toks[i].word)) continue;
    const auto from = i >= lexicon::kModifierWindow ? i - lexicon::kModifierWindow : 0;
    for (auto j = from; j < i; ++j) {
      if (toks[j].clause == toks[i].clause && lexicon::is_property_modifier(toks[j].word)) {
        c = noisy_or(c, lexicon::kStrongCue);
        break;
      }
    }
  }
  out[static_cast<std::size_t>(Dimension::Characteristic)] = c;
  return out;
}

DimensionScores HumanLabels::score(const SentenceRecord& sentence) const {
  if (auto it = labels_.find(sentence.id); it != labels_.end()) return indicator_scores(it->second);
  if (fallback_) return fallback_->score(sentence);
  return DimensionScores{};
}

LabeledSentence classify(const SentenceRecord& sentence, const Classifier& classifier, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0))
    throw Error(ErrorCode::InvalidArgument, "threshold must lie in (0, 1)");
  LabeledSentence out;
  out.sentence = sentence;
  out.scores = classifier.score(sentence);
  for (auto& s : out.scores) s = std::clamp(s, 0.0, 1.0);
  out.labels = threshold_labels(out.scores, threshold);
  out.source = classifier.source();
  return out;
}

std::vector<LabeledSentence> classify_all(const std::vector<SentenceRecord>& sentences, const Classifier& classifier,
                                          double threshold) {
  std::vector<LabeledSentence> out;
  out.reserve(sentences.size());
  for (const auto& s : sentences) out.push_back(classify(s, classifier, threshold));
  return out;
}

namespace {

Json labels_json(LabelSet labels) {
  Json arr = Json::array();
  for (auto d : labels.to_vector()) arr.push_back(std::string(to_string(d)));
  return arr;
}

LabelSet labels_from_json(const Json& j, const std::string& path) {
  LabelSet out;
  const auto names = schema::as_string_array(j, path);
  for (std::size_t i = 0; i < names.size(); ++i) {
    try {
      out.insert(dimension_from_string(names[i]));
    } catch (const Error& e) {
      throw Error(ErrorCode::SchemaError, e.what(), child(path, i));
    }
  }
  return out;
}

}  // namespace

Json to_json(const LabeledSentence& s) {
  Json scores = Json::object();
  for (auto d : kDimensions) scores[std::string(to_string(d))] = s.scores[static_cast<std::size_t>(d)];
  return Json{{"id", s.sentence.id},
              {"doc_id", s.sentence.doc_id},
              {"span", {s.sentence.begin, s.sentence.end}},
              {"text", s.sentence.text},
              {"labels", labels_json(s.labels)},
              {"scores", scores},
              {"source", std::string(to_string(s.source))}};
}

LabeledSentence labeled_from_json(const Json& j, const std::string& path) {
  schema::allow_keys(j, path, {"id", "doc_id", "span", "text", "labels", "scores", "source"});
  LabeledSentence out;
  out.sentence.id = schema::get_string(j, "id", path);
  out.sentence.text = schema::get_string(j, "text", path);
  if (j.contains("doc_id")) {
    out.sentence.doc_id = schema::get_string(j, "doc_id", path);
  } else {
    const auto colon = out.sentence.id.rfind(':');
    out.sentence.doc_id = colon == std::string::npos ? std::string{} : out.sentence.id.substr(0, colon);
  }
  if (j.contains("span")) {
    const auto& span = j["span"];
    const auto sp = child(path, "span");
    schema::expect_array(span, sp);
    if (span.size() != 2) schema::fail(sp, "span must be [begin, end]");
    out.sentence.begin = schema::as_uint(span[0], child(sp, std::size_t{0}));
    out.sentence.end = schema::as_uint(span[1], child(sp, std::size_t{1}));
  }
  out.labels = labels_from_json(schema::require(j, "labels", path), child(path, "labels"));
  const auto sp = child(path, "scores");
  const auto& scores = schema::require(j, "scores", path);
  schema::allow_keys(scores, sp, {"Function", "Behavior", "Characteristic", "Environment"});
  for (auto d : kDimensions) {
    const auto key = std::string(to_string(d));
    const double v = schema::as_number(schema::require(scores, key, sp), child(sp, key));
    if (!(v >= 0.0 && v <= 1.0)) schema::fail(child(sp, key), "score outside [0, 1]");
    out.scores[static_cast<std::size_t>(d)] = v;
  }
  try {
    out.source = label_source_from_string(schema::get_string(j, "source", path));
  } catch (const Error& e) {
    throw Error(ErrorCode::SchemaError, e.what(), child(path, "source"));
  }
  return out;
}

// --- samples -------------------------------------------------------------------

std::size_t real_sample_count(std::size_t target_size, double ratio_real) {
  return static_cast<std::size_t>(std::llround(static_cast<double>(target_size) * ratio_real));
}

SampleSet generate_samples(const std::vector<LabeledSentence>& reviewed, std::size_t target_size, double ratio_real,
                           std::uint64_t seed, const Paraphraser& paraphraser) {
  if (!(ratio_real >= 0.0 && ratio_real <= 1.0))
    throw Error(ErrorCode::InvalidArgument, "ratio_real must lie in [0, 1]");
  const auto n_real = real_sample_count(target_size, ratio_real);
  const auto n_aug = target_size - n_real;
  if (reviewed.size() < n_real || (n_aug > 0 && reviewed.empty()))
    throw Error(ErrorCode::InsufficientCorpus, "need " + std::to_string(n_real) + " reviewed sentences, have " +
                                                   std::to_string(reviewed.size()));

  SampleSet out;
  out.target_size = target_size;
  out.ratio_real = ratio_real;
  out.seed = seed;

  SeededRng real_rng(mix_seed(seed, 0));
  for (auto idx : real_rng.sample_indices(reviewed.size(), n_real)) out.real.push_back(reviewed[idx]);

  SeededRng aug_rng(mix_seed(seed, 1));
  out.augmented.reserve(n_aug);
  for (std::size_t i = 0; i < n_aug; ++i) {
    const auto& origin = reviewed[aug_rng.below(reviewed.size())];
    AugmentedSample a;
    a.id = "aug-" + std::to_string(i + 1);
    a.origin_id = origin.sentence.id;
    a.paraphrase = paraphraser.paraphrase(origin.sentence.text, mix_seed(seed, 2 + i));
    a.labels = origin.labels;
    out.augmented.push_back(std::move(a));
  }
  return out;
}

Json to_json(const SampleSet& s) {
  Json real = Json::array();
  for (const auto& r : s.real) real.push_back(r.sentence.id);
  Json aug = Json::array();
  for (const auto& a : s.augmented)
    aug.push_back(Json{{"id", a.id}, {"origin_id", a.origin_id}, {"paraphrase", a.paraphrase}, {"labels", labels_json(a.labels)}});
  return Json{{"target_size", s.target_size}, {"ratio_real", s.ratio_real}, {"seed", s.seed}, {"real", real}, {"augmented", aug}};
}

// --- review ----------------------------------------------------------------------

std::string_view to_string(Verdict v) { return v == Verdict::Pass ? "Pass" : "Fail"; }

std::string_view to_string(BatchStatus s) {
  switch (s) {
    case BatchStatus::Open: return "Open";
    case BatchStatus::Clean: return "Clean";
    case BatchStatus::Dirty: return "Dirty";
  }
  return "";
}

Verdict verdict_from_string(std::string_view s) {
  if (s == "Pass") return Verdict::Pass;
  if (s == "Fail") return Verdict::Fail;
  throw Error(ErrorCode::InvalidArgument, "verdict must be Pass or Fail");
}

std::size_t audit_size(std::size_t items) { return std::max<std::size_t>(1, (3 * items + 50) / 100); }

BatchStatus batch_status(const ReviewBatch& batch) {
  bool any_fail = false;
  for (const auto& id : batch.audit_sample) {
    auto it = batch.verdicts.find(id);
    if (it == batch.verdicts.end()) return BatchStatus::Open;
    any_fail = any_fail || it->second == Verdict::Fail;
  }
  return any_fail ? BatchStatus::Dirty : BatchStatus::Clean;
}

namespace {

std::vector<std::string> draw_audit(const ReviewBatch& batch, SeededRng& rng) {
  auto idx = rng.sample_indices(batch.items.size(), audit_size(batch.items.size()));
  std::sort(idx.begin(), idx.end());
  std::vector<std::string> ids;
  for (auto i : idx) ids.push_back(batch.items[i].sentence.id);
  return ids;
}

std::uint64_t audit_seed(std::uint64_t seed, const ReviewBatch& batch) {
  return mix_seed(mix_seed(seed, batch.batch_no), batch.round);
}

void reaudit(ReviewBatch& batch, std::uint64_t seed) {
  ++batch.round;
  SeededRng rng(audit_seed(seed, batch));
  auto sample = draw_audit(batch, rng);
  // A fresh draw may coincide with the previous one; redraw while the batch
  // has room for a different sample.
  for (int tries = 0; sample == batch.audit_sample && audit_size(batch.items.size()) < batch.items.size() && tries < 64;
       ++tries)
    sample = draw_audit(batch, rng);
  batch.audit_sample = std::move(sample);
  batch.verdicts.clear();
}

}  // namespace

std::vector<ReviewBatch> build_review_batches(const std::vector<LabeledSentence>& labeled, std::uint64_t seed,
                                              std::size_t batch_size) {
  if (labeled.empty()) throw Error(ErrorCode::InvalidArgument, "no labeled sentences to review");
  if (batch_size == 0) throw Error(ErrorCode::InvalidArgument, "batch size must be positive");
  std::vector<ReviewBatch> out;
  for (std::size_t first = 0; first < labeled.size(); first += batch_size) {
    ReviewBatch b;
    b.batch_no = out.size() + 1;
    const auto last = std::min(labeled.size(), first + batch_size);
    b.items.assign(labeled.begin() + static_cast<long>(first), labeled.begin() + static_cast<long>(last));
    SeededRng rng(audit_seed(seed, b));
    b.audit_sample = draw_audit(b, rng);
    b.status = BatchStatus::Open;
    out.push_back(std::move(b));
  }
  return out;
}

void record_verdict(ReviewBatch& batch, const std::string& sentence_id, Verdict verdict) {
  if (std::find(batch.audit_sample.begin(), batch.audit_sample.end(), sentence_id) == batch.audit_sample.end())
    throw Error(ErrorCode::NotFound,
                "sentence '" + sentence_id + "' is not audited in batch " + std::to_string(batch.batch_no));
  batch.verdicts[sentence_id] = verdict;
  batch.status = batch_status(batch);
}

ReviewStepResult review_loop_step(std::vector<ReviewBatch>& batches, const Classifier& relabeler,
                                  const Auditor& auditor, std::uint64_t seed, double threshold) {
  ReviewStepResult result;
  for (auto& batch : batches) {
    batch.status = batch_status(batch);
    if (batch.status == BatchStatus::Clean) continue;
    if (batch.status == BatchStatus::Dirty) {
      for (auto& item : batch.items) item = classify(item.sentence, relabeler, threshold);
      reaudit(batch, seed);
      ++result.relabeled_batches;
    }
    if (auditor) {
      for (const auto& id : batch.audit_sample) {
        if (batch.verdicts.contains(id)) continue;
        auto it = std::find_if(batch.items.begin(), batch.items.end(),
                               [&](const LabeledSentence& s) { return s.sentence.id == id; });
        batch.verdicts[id] = auditor(*it);
      }
    }
    batch.status = batch_status(batch);
  }
  result.terminated = std::all_of(batches.begin(), batches.end(),
                                  [](const ReviewBatch& b) { return b.status == BatchStatus::Clean; });
  return result;
}

ReviewLoopReport run_review_loop(std::vector<ReviewBatch>& batches, const Classifier& relabeler,
                                 const Auditor& auditor, std::uint64_t seed, std::size_t max_rounds,
                                 double threshold) {
  ReviewLoopReport report;
  while (report.rounds < max_rounds) {
    ++report.rounds;
    if (review_loop_step(batches, relabeler, auditor, seed, threshold).terminated) {
      report.terminated = true;
      return report;
    }
  }
  report.failure = ErrorCode::MaxRoundsExceeded;
  return report;
}

Json to_json(const ReviewBatch& b) {
  Json items = Json::array();
  for (const auto& s : b.items) items.push_back(to_json(s));
  Json verdicts = Json::object();
  for (const auto& [id, v] : b.verdicts) verdicts[id] = std::string(to_string(v));
  return Json{{"batch_no", b.batch_no},
              {"round", b.round},
              {"status", std::string(to_string(b.status))},
              {"audit_sample", b.audit_sample},
              {"verdicts", verdicts},
              {"items", items}};
}

ReviewBatch batch_from_json(const Json& j, const std::string& path) {
  schema::allow_keys(j, path, {"batch_no", "round", "status", "audit_sample", "verdicts", "items"});
  ReviewBatch b;
  b.batch_no = schema::as_uint(schema::require(j, "batch_no", path), child(path, "batch_no"));
  b.round = schema::as_uint(schema::require(j, "round", path), child(path, "round"));
  b.audit_sample = schema::get_string_array(j, "audit_sample", path);
  const auto vp = child(path, "verdicts");
  const auto& verdicts = schema::require(j, "verdicts", path);
  schema::expect_object(verdicts, vp);
  for (auto it = verdicts.begin(); it != verdicts.end(); ++it) {
    try {
      b.verdicts[it.key()] = verdict_from_string(schema::as_string(it.value(), child(vp, it.key())));
    } catch (const Error& e) {
      throw Error(ErrorCode::SchemaError, e.what(), child(vp, it.key()));
    }
  }
  const auto ip = child(path, "items");
  const auto& items = schema::require(j, "items", path);
  schema::expect_array(items, ip);
  for (std::size_t i = 0; i < items.size(); ++i) b.items.push_back(labeled_from_json(items[i], child(ip, i)));
  b.status = batch_status(b);
  return b;
}

}  // namespace bioinvert
