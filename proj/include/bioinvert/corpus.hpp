#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bioinvert/error.hpp"
#include "bioinvert/knowledge.hpp"

namespace bioinvert {

struct SentenceRecord {
  std::string id;  // "<doc_id>:<index>", index from 1
  std::string doc_id;
  std::string text;
  std::size_t begin = 0;  // byte span in the source document
  std::size_t end = 0;
  friend bool operator==(const SentenceRecord&, const SentenceRecord&) = default;
};

// Splits on . ! ? (and 。！？) outside brackets. A terminator only ends a
// sentence when followed by whitespace or the end of input, so decimals and
// "e.g." inside a word stay put. Throws EmptyDocument on blank input.
std::vector<SentenceRecord> segment(std::string_view document, const std::string& doc_id);

struct Document {
  std::string doc_id;
  std::string text;
};

// Line-delimited {"doc_id","text"} records; blank lines skipped.
std::vector<Document> read_document_records(std::istream& in);

// ---------------------------------------------------------------------------
// classification

enum class LabelSource { Lexicon, Llm, Human };
std::string_view to_string(LabelSource s);
LabelSource label_source_from_string(std::string_view s);

using DimensionScores = std::array<double, 4>;  // indexed by Dimension

inline constexpr double kDefaultThreshold = 0.5;

LabelSet threshold_labels(const DimensionScores& scores, double threshold);

struct LabeledSentence {
  SentenceRecord sentence;
  DimensionScores scores{};
  LabelSet labels;
  LabelSource source = LabelSource::Lexicon;
  friend bool operator==(const LabeledSentence&, const LabeledSentence&) = default;
};

// Implementations must be safe to call concurrently.
class Classifier {
 public:
  virtual ~Classifier() = default;
  virtual DimensionScores score(const SentenceRecord& sentence) const = 0;
  virtual LabelSource source() const = 0;
};

// Deterministic cue-table baseline; see docs/lexicon-rulebook.md.
class LexiconClassifier final : public Classifier {
 public:
  DimensionScores score(const SentenceRecord& sentence) const override;
  LabelSource source() const override { return LabelSource::Lexicon; }

  DimensionScores score_text(std::string_view text) const;
};

// Designer-supplied labels keyed by sentence id; unknown ids keep the labels
// given by `fallback` (or score zero when there is none).
class HumanLabels final : public Classifier {
 public:
  explicit HumanLabels(std::map<std::string, LabelSet> labels, const Classifier* fallback = nullptr)
      : labels_(std::move(labels)), fallback_(fallback) {}

  DimensionScores score(const SentenceRecord& sentence) const override;
  LabelSource source() const override { return LabelSource::Human; }

 private:
  std::map<std::string, LabelSet> labels_;
  const Classifier* fallback_;
};

// Scores of 1/0 for a fixed label set.
DimensionScores indicator_scores(LabelSet labels);

LabeledSentence classify(const SentenceRecord& sentence, const Classifier& classifier,
                         double threshold = kDefaultThreshold);

std::vector<LabeledSentence> classify_all(const std::vector<SentenceRecord>& sentences,
                                          const Classifier& classifier, double threshold = kDefaultThreshold);

Json to_json(const LabeledSentence& s);
LabeledSentence labeled_from_json(const Json& j, const std::string& path = "");

// ---------------------------------------------------------------------------
// training samples

class Paraphraser {
 public:
  virtual ~Paraphraser() = default;
  // `variant` lets a deterministic paraphraser vary its output per draw.
  virtual std::string paraphrase(std::string_view text, std::uint64_t variant) const = 0;
};

struct AugmentedSample {
  std::string id;
  std::string origin_id;
  std::string paraphrase;
  LabelSet labels;
  friend bool operator==(const AugmentedSample&, const AugmentedSample&) = default;
};

struct SampleSet {
  std::vector<LabeledSentence> real;
  std::vector<AugmentedSample> augmented;
  std::size_t target_size = 0;
  double ratio_real = 0.8;
  std::uint64_t seed = 0;
};

// round(target * ratio_real), half away from zero.
std::size_t real_sample_count(std::size_t target_size, double ratio_real);

SampleSet generate_samples(const std::vector<LabeledSentence>& reviewed, std::size_t target_size, double ratio_real,
                           std::uint64_t seed, const Paraphraser& paraphraser);

Json to_json(const SampleSet& s);

// ---------------------------------------------------------------------------
// review batches

enum class Verdict { Pass, Fail };
enum class BatchStatus { Open, Clean, Dirty };
std::string_view to_string(Verdict v);
std::string_view to_string(BatchStatus s);
Verdict verdict_from_string(std::string_view s);

inline constexpr std::size_t kBatchSize = 100;
inline constexpr std::size_t kDefaultMaxRounds = 10;

// max(1, round(0.03 * n)), computed in integers.
std::size_t audit_size(std::size_t items);

struct ReviewBatch {
  std::size_t batch_no = 1;
  std::vector<LabeledSentence> items;
  std::vector<std::string> audit_sample;
  std::map<std::string, Verdict> verdicts;
  BatchStatus status = BatchStatus::Open;
  std::size_t round = 0;  // re-audit counter
};

// Open while any audited item lacks a verdict, then Dirty on any Fail.
BatchStatus batch_status(const ReviewBatch& batch);

std::vector<ReviewBatch> build_review_batches(const std::vector<LabeledSentence>& labeled, std::uint64_t seed,
                                              std::size_t batch_size = kBatchSize);

// Throws NotFound if `sentence_id` is not in the batch's audit sample.
void record_verdict(ReviewBatch& batch, const std::string& sentence_id, Verdict verdict);

// Supplies verdicts for freshly drawn audit samples; may be empty, in which
// case re-audited batches stay Open until a designer records verdicts.
using Auditor = std::function<Verdict(const LabeledSentence&)>;

struct ReviewStepResult {
  bool terminated = false;
  std::size_t relabeled_batches = 0;
};

ReviewStepResult review_loop_step(std::vector<ReviewBatch>& batches, const Classifier& relabeler,
                                  const Auditor& auditor, std::uint64_t seed,
                                  double threshold = kDefaultThreshold);

struct ReviewLoopReport {
  std::size_t rounds = 0;
  bool terminated = false;
  std::optional<ErrorCode> failure;  // MaxRoundsExceeded
};

ReviewLoopReport run_review_loop(std::vector<ReviewBatch>& batches, const Classifier& relabeler,
                                 const Auditor& auditor, std::uint64_t seed,
                                 std::size_t max_rounds = kDefaultMaxRounds, double threshold = kDefaultThreshold);

Json to_json(const ReviewBatch& b);
ReviewBatch batch_from_json(const Json& j, const std::string& path = "");

}  // namespace bioinvert
