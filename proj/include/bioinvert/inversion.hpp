#pragma once

#include <map>
#include <string>
#include <vector>

#include "bioinvert/corpus.hpp"
#include "bioinvert/error.hpp"
#include "bioinvert/kb.hpp"
#include "bioinvert/knowledge.hpp"
#include "bioinvert/llm.hpp"

namespace bioinvert {

// Names the overall behavior of a group of sentences.
class Summarizer {
 public:
  virtual ~Summarizer() = default;
  virtual std::string summarize(const std::vector<std::string>& sentences) const = 0;
};

// "<Verb> <object>" from the first sentence with an extractable function.
class RuleSummarizer final : public Summarizer {
 public:
  std::string summarize(const std::vector<std::string>& sentences) const override;
};

class LlmSummarizer final : public Summarizer {
 public:
  explicit LlmSummarizer(const LlmBridge& bridge) : bridge_(bridge) {}
  std::string summarize(const std::vector<std::string>& sentences) const override {
    return bridge_.summarize(sentences);
  }

 private:
  const LlmBridge& bridge_;
};

// Pattern extraction of one function phrase from a sentence: transform verbs
// give a flow, state-change verbs a state transition, other function verbs an
// action. Empty when the sentence has no usable verb.
std::optional<FunctionExpr> extract_function(std::string_view sentence);
std::vector<Characteristic> extract_characteristics(std::string_view sentence);
std::optional<EnvironmentDesc> extract_environment(std::string_view sentence);

// Slots filled from whatever the labels support; no dimension is required.
// The summary is left empty unless a summarizer is given.
FrameFragment build_fragment(const std::vector<LabeledSentence>& sentences, const Summarizer* summarizer = nullptr);

// Throws MissingDimension when Function or Characteristic evidence is absent.
StrategyFrame build_frame(const std::vector<LabeledSentence>& sentences, const Summarizer& summarizer,
                          std::string id);

struct Substitution {
  std::string path;
  std::string bio_term;  // surface text replaced
  std::string eng_term;  // surface text inserted
  std::size_t offset = 0;
  friend bool operator==(const Substitution&, const Substitution&) = default;
};

struct UnresolvedTerm {
  std::string path;
  std::string term;
  friend bool operator==(const UnresolvedTerm&, const UnresolvedTerm&) = default;
};

struct InversionResult {
  StrategyFrame source_frame;
  StrategyFrame pass1_frame;
  StrategyFrame engineering_frame;
  std::vector<Substitution> substitutions;
  std::vector<FrameChange> corrections;
  std::vector<UnresolvedTerm> unresolved;
  std::vector<std::string> merged_duplicates;  // slots dropped after mapping made them identical
  std::vector<std::string> waived_terms;

  const std::string& id() const { return engineering_frame.id; }
  std::vector<std::string> unresolved_term_names() const;
  // True when every unresolved term has been waived by the designer.
  bool engineering_ready() const;
};

// Thrown when correction fails after substitution succeeded.
class InversionError : public Error {
 public:
  InversionError(const Error& cause, InversionResult partial)
      : Error(cause.code(), std::string("correction failed: ") + cause.what(), cause.path()),
        partial_(std::move(partial)) {}
  const InversionResult& partial() const { return partial_; }

 private:
  InversionResult partial_;
};

// Recomputes the pass-1 frame from the source and the recorded substitutions.
StrategyFrame apply_substitutions(const StrategyFrame& source, const std::vector<Substitution>& subs);

// Pass 1: longest-first whole-word mapping substitution over every noun slot.
// Pass 2 (when `corrector` is set): correct_frame against the KB rules.
InversionResult invert(const StrategyFrame& frame, const EngineeringKB& kb, const LlmBridge* corrector);

std::vector<UnresolvedTerm> find_unresolved(const StrategyFrame& frame, const EngineeringKB& kb);

struct ScreenVerdict {
  bool keep = true;
  std::string reason;
};

struct ScreeningOutcome {
  std::vector<InversionResult> kept;
  std::vector<std::pair<std::string, std::string>> dropped;  // id, reason
};

// Throws MissingVerdict naming the first result without a verdict.
ScreeningOutcome screen(const std::vector<InversionResult>& results, const std::map<std::string, ScreenVerdict>& verdicts);

Json to_json(const InversionResult& r);
InversionResult inversion_from_json(const Json& j, const std::string& path = "");

}  // namespace bioinvert
