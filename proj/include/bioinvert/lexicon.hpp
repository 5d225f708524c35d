#pragma once

// Closed word lists shipped with the library: the verb lexicon behind the
// gerund normalizer, function-variant triggers, the classifier cue tables and
// the biological noun list used to flag unresolved terms.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bioinvert/knowledge.hpp"

namespace bioinvert {

// Converts the leading verb of a phrase to its "-ing" form; the rest of the
// phrase is unchanged. Idempotent. Throws NotAVerb when the leading token is
// neither a lexicon verb nor already a gerund.
std::string gerundize(std::string_view phrase);

namespace lexicon {

bool is_base_verb(std::string_view lower_word);

// "-ing" form of a lexicon verb (consonant doubling list, silent-e drop,
// -ie -> -ying, irregulars). Precondition: is_base_verb(word).
std::string gerund_of(std::string_view lower_base);

// Base verb for an inflected token ("stores" -> "store"), if any.
std::optional<std::string> lemma_of(std::string_view lower_token);

bool is_transform_verb(std::string_view lemma);
bool is_state_verb(std::string_view lemma);

// Flow kind hinted by the input/output nouns of a transform phrase.
FlowKind flow_kind_for(std::string_view phrase);

struct Cue {
  std::vector<std::string> words;  // lowercase
  double weight = 0.0;
  bool stemmed = false;  // single word compared by stem rather than exactly
};

const std::vector<Cue>& function_cues();
const std::vector<Cue>& behavior_cues();
const std::vector<Cue>& environment_cues();
const std::vector<Cue>& characteristic_weak_cues();
bool is_structure_noun(std::string_view lower_token);
bool is_property_modifier(std::string_view lower_token);

inline constexpr double kStrongCue = 0.6;
inline constexpr double kWeakCue = 0.3;
inline constexpr std::size_t kModifierWindow = 3;

// Causal conjunctions recognised when building behavior links.
const std::vector<std::string>& causal_conjunctions();

// Biological nouns (single and multi-word, lowercase) that must not survive
// into an engineering frame without a mapping or a designer waiver.
const std::vector<std::string>& biological_terms();

}  // namespace lexicon
}  // namespace bioinvert
