#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "json.hpp"

namespace bioinvert {

using Json = nlohmann::json;

inline constexpr int kFbceVersion = 1;

enum class Dimension : std::uint8_t { Function = 0, Behavior = 1, Characteristic = 2, Environment = 3 };

inline constexpr std::array<Dimension, 4> kDimensions = {
    Dimension::Function, Dimension::Behavior, Dimension::Characteristic, Dimension::Environment};

std::string_view to_string(Dimension d);
Dimension dimension_from_string(std::string_view name);

// Small value-type set over the four dimensions.
class LabelSet {
 public:
  LabelSet() = default;
  LabelSet(std::initializer_list<Dimension> dims) {
    for (auto d : dims) insert(d);
  }

  void insert(Dimension d) { bits_ |= bit(d); }
  void erase(Dimension d) { bits_ &= static_cast<std::uint8_t>(~bit(d)); }
  bool contains(Dimension d) const { return (bits_ & bit(d)) != 0; }
  bool empty() const { return bits_ == 0; }
  std::size_t size() const { return static_cast<std::size_t>(__builtin_popcount(bits_)); }
  bool is_subset_of(LabelSet other) const { return (bits_ & ~other.bits_) == 0; }
  std::uint8_t bits() const { return bits_; }

  std::vector<Dimension> to_vector() const {
    std::vector<Dimension> out;
    for (auto d : kDimensions)
      if (contains(d)) out.push_back(d);
    return out;
  }

  friend bool operator==(LabelSet, LabelSet) = default;

 private:
  static std::uint8_t bit(Dimension d) { return static_cast<std::uint8_t>(1u << static_cast<unsigned>(d)); }
  std::uint8_t bits_ = 0;
};

enum class FlowKind { Energy, Material, Signal };
std::string_view to_string(FlowKind k);

struct ActionDescription {
  std::string verb;
  std::string object;
  friend bool operator==(const ActionDescription&, const ActionDescription&) = default;
};

struct FlowTransformation {
  FlowKind flow_kind = FlowKind::Energy;
  std::string input_object;
  std::string output_object;
  friend bool operator==(const FlowTransformation&, const FlowTransformation&) = default;
};

struct StateTransition {
  std::string object;
  std::string change_verb;
  friend bool operator==(const StateTransition&, const StateTransition&) = default;
};

using FunctionExpr = std::variant<ActionDescription, FlowTransformation, StateTransition>;

// Surface phrase, verb first: "driving flexible structure",
// "transforming hydraulic energy into axial thrust", "contracting mantle".
std::string render(const FunctionExpr& f);

// [begin, end) over BehaviorExpr::steps.
struct StepRange {
  std::size_t begin = 0;
  std::size_t end = 0;
  friend bool operator==(const StepRange&, const StepRange&) = default;
};

struct CausalRelation {
  StepRange cause;
  FunctionExpr effect;
  std::string conjunction;
  friend bool operator==(const CausalRelation&, const CausalRelation&) = default;
};

struct BehaviorExpr {
  std::string summary;
  std::vector<FunctionExpr> steps;
  std::vector<CausalRelation> causal_links;
  friend bool operator==(const BehaviorExpr&, const BehaviorExpr&) = default;
};

// Head noun plus attributive modifiers. Modifiers that open with a
// preposition or participle ("based on rigid support") follow the head.
template <typename Tag>
struct NounPhrase {
  std::string head;
  std::vector<std::string> attributives;
  friend bool operator==(const NounPhrase&, const NounPhrase&) = default;
};

using Characteristic = NounPhrase<struct CharacteristicTag>;
using EnvironmentDesc = NounPhrase<struct EnvironmentTag>;

bool is_postposed_modifier(std::string_view attributive);
std::string render_noun_phrase(const std::string& head, const std::vector<std::string>& attributives);
void parse_noun_phrase(std::string_view text, std::string& head, std::vector<std::string>& attributives);

template <typename Tag>
std::string render(const NounPhrase<Tag>& np) {
  return render_noun_phrase(np.head, np.attributives);
}

template <typename Phrase>
Phrase noun_phrase(std::string_view text) {
  Phrase p;
  parse_noun_phrase(text, p.head, p.attributives);
  return p;
}

struct Provenance {
  std::string source_doc;
  std::vector<std::string> sentence_ids;
  std::vector<std::string> elementary_ids;
  std::string notes;
  friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct StrategyFrame {
  std::string id;
  BehaviorExpr behavior;
  std::vector<FunctionExpr> functions;
  std::vector<Characteristic> characteristics;
  std::optional<EnvironmentDesc> environment;
  Provenance provenance;
  friend bool operator==(const StrategyFrame&, const StrategyFrame&) = default;
};

// Partial frame: any subset of slots. An empty summary means "not set".
struct FrameFragment {
  std::string summary;
  std::vector<FunctionExpr> steps;
  std::vector<CausalRelation> causal_links;
  std::vector<FunctionExpr> functions;
  std::vector<Characteristic> characteristics;
  std::optional<EnvironmentDesc> environment;
  // Elementary ids this fragment was itself composed from, if any.
  std::vector<std::string> composed_from;
  friend bool operator==(const FrameFragment&, const FrameFragment&) = default;
};

struct ElementaryStrategy {
  int k = 1;  // label S_e^k
  std::vector<std::string> sentences;
  FrameFragment fragment;

  std::string label() const { return "S_e^" + std::to_string(k); }
  friend bool operator==(const ElementaryStrategy&, const ElementaryStrategy&) = default;
};

// Parses "S_e^k"; throws SchemaError on anything else.
int parse_elementary_label(std::string_view label);

ElementaryStrategy as_elementary(const StrategyFrame& frame, int k);

enum class DesignLevel { System, Subsystem, Component };
std::string_view to_string(DesignLevel l);

struct DesignProblem {
  DesignLevel level = DesignLevel::System;
  std::vector<std::string> requirement_elements;
  std::vector<std::string> processing_elements;
  std::string description;
  friend bool operator==(const DesignProblem&, const DesignProblem&) = default;
};

struct Violation {
  std::string code;
  std::string path;
  std::string message;
  friend bool operator==(const Violation&, const Violation&) = default;
};

using ValidationReport = std::vector<Violation>;

// Every invariant violation of a candidate frame. Empty means valid.
ValidationReport validate_frame(const StrategyFrame& frame);

// Slot-wise union (the ⊕ operator). Throws ConflictingEnvironment when two
// parts carry different environments. An empty id is derived from the
// elementary ids.
StrategyFrame compose(const std::vector<ElementaryStrategy>& parts, std::string id = {});

// --- serialization ---------------------------------------------------------

Json to_json(const FunctionExpr& f);
Json to_json(const BehaviorExpr& b);
Json to_json(const Characteristic& c);
Json to_json(const EnvironmentDesc& e);
Json to_json(const Provenance& p);
Json to_json(const StrategyFrame& f);
Json to_json(const FrameFragment& f);
Json to_json(const ElementaryStrategy& e);
Json to_json(const DesignProblem& p);
Json to_json(const Violation& v);

FunctionExpr function_from_json(const Json& j, const std::string& path);
Characteristic characteristic_from_json(const Json& j, const std::string& path);
EnvironmentDesc environment_from_json(const Json& j, const std::string& path);
StrategyFrame frame_from_json(const Json& j, const std::string& path = "");
FrameFragment fragment_from_json(const Json& j, const std::string& path);
ElementaryStrategy elementary_from_json(const Json& j, const std::string& path);
DesignProblem problem_from_json(const Json& j, const std::string& path = "");

std::string serialize_frame(const StrategyFrame& frame);
StrategyFrame parse_frame(std::string_view document);

// A JSON array of frame documents; frame ids must be unique.
std::vector<StrategyFrame> parse_frame_collection(std::string_view document);

StrategyFrame load_frame_file(const std::string& path);

}  // namespace bioinvert
