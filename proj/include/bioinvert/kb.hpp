#pragma once

// Engineering knowledge base plus the term-matching and slot-addressing
// helpers shared by substitution (inversion) and correction (llm bridge).

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "bioinvert/knowledge.hpp"

namespace bioinvert {

struct TermMapping {
  std::string bio_term;
  std::string eng_term;
  std::vector<std::string> domain_tags;
  bool bidirectional = false;
  friend bool operator==(const TermMapping&, const TermMapping&) = default;
};

enum class RuleVerdict { Allowed, Disallowed };

struct CompatibilityRule {
  std::string first;
  std::string second;
  RuleVerdict verdict = RuleVerdict::Allowed;
  std::string rationale;
  friend bool operator==(const CompatibilityRule&, const CompatibilityRule&) = default;
};

struct EngineeringKB {
  std::vector<TermMapping> mappings;
  std::vector<CompatibilityRule> rules;
  std::vector<std::string> vocabulary;  // sorted, includes every eng_term

  bool empty() const { return mappings.empty(); }
  bool in_vocabulary(std::string_view term) const;
  friend bool operator==(const EngineeringKB&, const EngineeringKB&) = default;
};

// Checks invariants (bio != eng, unique bio terms, rules over vocabulary) and
// folds every eng_term into the vocabulary. Throws SchemaError.
EngineeringKB make_kb(std::vector<TermMapping> mappings, std::vector<CompatibilityRule> rules,
                      std::vector<std::string> vocabulary);

EngineeringKB kb_from_json(const Json& j, const std::string& path = "");
Json to_json(const EngineeringKB& kb);
EngineeringKB load_kb_file(const std::string& path);

// --- term matching -----------------------------------------------------------

struct TermMatch {
  std::size_t begin = 0;  // byte span in the searched text
  std::size_t end = 0;
  std::size_t entry = 0;  // index into the term table
  bool plural = false;    // last token matched with a plural suffix
};

enum class MatchMode {
  Surface,  // case-insensitive whole words; last word may carry a plural suffix
  Stem,     // stemmed whole words
};

// Non-overlapping occurrences of `terms` in `text`, longest term first (ties
// by position), returned in text order. Multi-word terms only match across
// plain whitespace.
std::vector<TermMatch> find_terms(std::string_view text, const std::vector<std::string>& terms,
                                  MatchMode mode = MatchMode::Surface);

// Replacement text for a match: plural carried over to the last word, leading
// capital preserved.
std::string replacement_surface(std::string_view matched, std::string_view replacement, bool plural);

struct Replacement {
  std::size_t offset = 0;
  std::string before;  // exact matched surface text
  std::string after;   // exact inserted text
};

// Applies longest-first substitutions of table[i].first -> table[i].second.
std::string substitute(std::string_view text, const std::vector<std::pair<std::string, std::string>>& table,
                       std::vector<Replacement>* applied = nullptr);

// Re-applies recorded replacements (offsets refer to the original text).
std::string apply_replacements(std::string_view text, std::vector<Replacement> replacements);

struct TermHit {
  std::string term;  // canonical (lowercase) biological term
  std::size_t begin = 0;
  std::size_t end = 0;
};

// Biological terms (shipped lexicon plus the KB's bio terms, stem-matched)
// left in `text` that are not part of an approved vocabulary term.
std::vector<TermHit> unresolved_terms(std::string_view text, const EngineeringKB& kb);

// --- noun-bearing slots -------------------------------------------------------

struct SlotText {
  std::string path;
  std::string text;
};

// Every slot whose text may hold nouns: function objects, step and effect
// objects, characteristics and environment (rendered) and the summary.
std::vector<SlotText> noun_slots(const StrategyFrame& frame);

// Writes a slot listed by noun_slots; noun phrases are re-parsed.
void set_noun_slot(StrategyFrame& frame, const std::string& path, const std::string& value);

}  // namespace bioinvert
