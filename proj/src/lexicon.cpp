#include "bioinvert/lexicon.hpp"

#include <cctype>
#include <map>
#include <set>

#include "bioinvert/error.hpp"
#include "bioinvert/text.hpp"

namespace bioinvert {
namespace lexicon {
namespace {

using WordSet = std::set<std::string, std::less<>>;

const WordSet& base_verbs() {
  static const WordSet verbs = {
      "absorb",    "accelerate", "achieve",   "act",       "actuate",   "adapt",     "adjust",
      "admit",     "agree",      "allow",     "amplify",   "anchor",    "apply",     "attach",
      "be",        "begin",      "bend",      "brake",     "bring",     "burrow",    "carry",
      "cause",     "change",     "chop",      "clamp",     "climb",     "clip",      "close",
      "collect",   "commit",     "compel",    "compress",  "connect",   "contain",   "contract",
      "control",   "convert",    "coordinate", "crawl",    "create",    "cruise",    "cut",
      "decrease",  "deflate",    "deform",    "deliver",   "detect",    "die",       "dip",
      "direct",    "dissipate",  "distribute", "dive",     "drag",      "drive",     "drop",
      "dye",       "eject",      "emit",      "enable",    "enhance",   "equip",     "expand",
      "expel",     "extend",     "fill",      "fit",       "flap",      "flee",      "flex",
      "flip",      "float",      "flow",      "fold",      "form",      "free",      "generate",
      "get",       "glide",      "grab",      "grasp",     "grip",      "guide",     "hit",
      "hold",      "hop",        "increase",  "inflate",   "inject",    "keep",      "lengthen",
      "lie",       "lift",       "limit",     "lock",      "maintain",  "make",      "modulate",
      "move",      "occur",      "open",      "oscillate", "patrol",    "permit",    "pivot",
      "plan",      "prefer",     "press",     "pressurize", "prevent",  "produce",   "propagate",
      "propel",    "protect",    "provide",   "pull",      "pump",      "push",      "put",
      "rebound",   "recover",    "reduce",    "refer",     "refill",    "regulate",  "relax",
      "release",   "repel",      "resist",    "rotate",    "rub",       "run",       "seal",
      "see",       "sense",      "set",       "shape",     "ship",      "shorten",   "shrink",
      "sit",       "skip",       "slide",     "slip",      "snap",      "soften",    "spin",
      "squeeze",   "stabilize",  "steer",     "step",      "stiffen",   "stop",      "store",
      "stretch",   "strip",      "submit",    "suck",      "supply",    "support",   "swell",
      "swim",      "swing",      "tap",       "tie",       "transfer",  "transform", "transmit",
      "transport", "trap",       "trim",      "turn",      "twist",     "undulate",  "use",
      "vary",      "wrap"};
  return verbs;
}

const WordSet& doubling_verbs() {
  static const WordSet verbs = {
      "admit", "begin", "chop", "clip",  "commit", "compel", "control", "cut",    "dip",
      "drag",  "drop",  "emit", "equip", "expel",  "fit",    "flap",    "flip",   "get",
      "grab",  "grip",  "hit",  "hop",   "occur",  "patrol", "permit",  "plan",   "prefer",
      "propel", "put",  "refer", "repel", "rub",   "run",    "set",     "ship",   "sit",
      "skip",  "slip",  "snap", "spin",  "step",   "stop",   "strip",   "submit", "swim",
      "tap",   "transfer", "transmit", "trap", "trim", "wrap"};
  return verbs;
}

const std::map<std::string, std::string, std::less<>>& irregular_gerunds() {
  static const std::map<std::string, std::string, std::less<>> table = {
      {"be", "being"},     {"see", "seeing"}, {"flee", "fleeing"}, {"agree", "agreeing"},
      {"free", "freeing"}, {"die", "dying"},  {"lie", "lying"},    {"tie", "tying"},
      {"dye", "dyeing"}};
  return table;
}

const WordSet& transform_verbs() {
  static const WordSet verbs = {"convert", "transform", "turn"};
  return verbs;
}

const WordSet& state_verbs() {
  static const WordSet verbs = {"bend",    "close",   "compress", "contract", "deflate",
                                "deform",  "expand",  "extend",   "fold",     "inflate",
                                "lengthen", "open",   "relax",    "shorten",  "shrink",
                                "soften",  "stiffen", "stretch",  "swell",    "twist"};
  return verbs;
}

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

bool is_vowel(char c) { return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u'; }

std::vector<Cue> single_words(std::initializer_list<const char*> words, double weight) {
  std::vector<Cue> out;
  for (auto w : words) out.push_back(Cue{{w}, weight, true});
  return out;
}

std::vector<Cue> phrases(std::initializer_list<std::initializer_list<const char*>> items, double weight) {
  std::vector<Cue> out;
  for (auto item : items) {
    Cue c;
    c.weight = weight;
    for (auto w : item) c.words.emplace_back(w);
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace

bool is_base_verb(std::string_view lower_word) { return base_verbs().contains(lower_word); }

std::string gerund_of(std::string_view base) {
  if (auto it = irregular_gerunds().find(base); it != irregular_gerunds().end()) return it->second;
  std::string w(base);
  if (doubling_verbs().contains(base)) return w + w.back() + "ing";
  if (ends_with(w, "ie")) return w.substr(0, w.size() - 2) + "ying";
  if (ends_with(w, "ee") || ends_with(w, "oe") || ends_with(w, "ye")) return w + "ing";
  if (w.size() > 2 && w.back() == 'e' && !is_vowel(w[w.size() - 2])) return w.substr(0, w.size() - 1) + "ing";
  if (ends_with(w, "ue")) return w.substr(0, w.size() - 1) + "ing";
  return w + "ing";
}

std::optional<std::string> lemma_of(std::string_view token) {
  static const auto index = [] {
    std::map<std::string, std::string, std::less<>> m;
    for (const auto& v : base_verbs()) {
      m.emplace(text::stem(v), v);
      m.emplace(gerund_of(v), v);
    }
    return m;
  }();
  if (is_base_verb(token)) return std::string(token);
  if (auto it = index.find(token); it != index.end()) return it->second;
  if (auto it = index.find(text::stem(token)); it != index.end()) return it->second;
  return std::nullopt;
}

bool is_transform_verb(std::string_view lemma) { return transform_verbs().contains(lemma); }
bool is_state_verb(std::string_view lemma) { return state_verbs().contains(lemma); }

FlowKind flow_kind_for(std::string_view phrase) {
  static const WordSet signal = {"signal", "information", "stimulus", "impulse", "command"};
  static const WordSet material = {"fluid", "water", "material", "mass", "liquid", "gas", "air", "seawater"};
  bool has_material = false;
  for (const auto& tok : text::tokenize(phrase)) {
    const auto s = text::stem(tok.word);
    if (signal.contains(tok.word) || signal.contains(s)) return FlowKind::Signal;
    has_material = has_material || material.contains(tok.word) || material.contains(s);
  }
  return has_material ? FlowKind::Material : FlowKind::Energy;
}

const std::vector<Cue>& function_cues() {
  static const std::vector<Cue> cues = [] {
    auto v = single_words({"absorb",    "achieve",  "anchor",   "control",   "convert",  "crawl",
                           "create",    "deliver",  "detect",   "direct",    "dissipate", "drive",
                           "eject",     "enable",   "expel",    "generate",  "grip",     "increase",
                           "maintain",  "move",     "produce",  "propagate", "propel",   "protect",
                           "provide",   "pull",     "pump",     "push",      "recover",  "reduce",
                           "regulate",  "release",  "resist",   "sense",     "stabilize", "steer",
                           "store",     "support",  "swim",     "transfer",  "transform", "transmit"},
                          kStrongCue);
    auto weak = phrases({{"in", "order", "to"},
                         {"so", "as", "to"},
                         {"serves", "to"},
                         {"used", "to"},
                         {"responsible", "for"},
                         {"function"},
                         {"functions"},
                         {"purpose"},
                         {"role"}},
                        kWeakCue);
    v.insert(v.end(), weak.begin(), weak.end());
    return v;
  }();
  return cues;
}

const std::vector<Cue>& behavior_cues() {
  static const std::vector<Cue> cues = [] {
    auto v = phrases({{"because"},
                      {"so", "that"},
                      {"thereby"},
                      {"therefore"},
                      {"thus"},
                      {"causing"},
                      {"which", "causes"},
                      {"resulting", "in"},
                      {"results", "in"},
                      {"leads", "to"},
                      {"leading", "to"},
                      {"as", "a", "result"},
                      {"in", "response", "to"},
                      {"due", "to"}},
                     kStrongCue);
    auto weak = phrases({{"after"},
                         {"before"},
                         {"during"},
                         {"finally"},
                         {"first"},
                         {"followed", "by"},
                         {"once"},
                         {"periodically"},
                         {"subsequently"},
                         {"then"},
                         {"until"},
                         {"when"},
                         {"while"}},
                        kWeakCue);
    v.insert(v.end(), weak.begin(), weak.end());
    return v;
  }();
  return cues;
}

const std::vector<Cue>& environment_cues() {
  static const std::vector<Cue> cues =
      single_words({"air",     "aquatic", "current", "deep-sea", "environment", "freshwater",
                    "habitat", "intertidal", "marine", "mud",    "muddy",       "ocean",
                    "reef",    "river",   "riverbed", "sand",    "sandy",       "sea",
                    "seabed",  "seafloor", "seawater", "soil",   "substrate",   "terrain",
                    "underwater", "water"},
                   kStrongCue);
  return cues;
}

const std::vector<Cue>& characteristic_weak_cues() {
  static const std::vector<Cue> cues =
      single_words({"composition", "density", "elasticity", "flexibility", "hardness", "modulus",
                    "morphology", "shape", "stiffness", "strength", "thickness"},
                   kWeakCue);
  return cues;
}

bool is_structure_noun(std::string_view lower_token) {
  static const WordSet stems = [] {
    WordSet s;
    for (auto w : {"array",  "appendage", "bladder", "body",     "cavity", "chamber",  "cilia",
                   "cuticle", "epidermis", "fiber",  "fibre",    "fin",    "funnel",   "layer",
                   "mantle", "membrane",  "muscle", "network",  "nozzle", "pseudopod", "sac",
                   "scale",  "segment",   "shell",  "skeleton", "skin",   "structure", "surface",
                   "tail",   "tissue",    "vessel"})
      s.insert(text::stem(w));
    return s;
  }();
  return stems.contains(text::stem(lower_token));
}

bool is_property_modifier(std::string_view lower_token) {
  static const WordSet words = {
      "annular",   "anisotropic", "asymmetric", "circular",   "collagen",  "compliant",
      "conical",   "diamond-shaped", "elastic", "elongated",  "flexible",  "funnel-shaped",
      "gradient",  "hard",        "helical",    "hollow",     "hydrodynamic", "hydrostatic",
      "inner",     "layered",     "longitudinal", "muscular", "orthogonal", "outer",
      "porous",    "pre-stressed", "radial",    "rigid",      "segmented", "smooth",
      "soft",      "stiff",       "streamlined", "symmetric", "thick",     "thin",
      "tubular"};
  return words.contains(lower_token);
}

const std::vector<std::string>& causal_conjunctions() {
  static const std::vector<std::string> words = {"because",     "so that",   "thereby",     "therefore",
                                                 "thus",        "causing",   "which causes", "resulting in",
                                                 "results in",  "leads to",  "leading to",  "as a result",
                                                 "in response to", "due to"};
  return words;
}

const std::vector<std::string>& biological_terms() {
  static const std::vector<std::string> terms = {
      "hydrostatic skeleton", "red muscle", "tail fin",  "cartilage", "cephalopod", "cilia",
      "collagen",             "cuticle",    "epidermis", "fin",       "fish",       "funnel",
      "inchworm",             "jellyfish",  "mantle",    "mitochondria", "mollusk", "muscle",
      "pseudopod",            "siphon",     "skeleton",  "spine",     "squid",      "tail",
      "tendon",               "tentacle",   "tissue",    "vertebra",  "whale"};
  return terms;
}

}  // namespace lexicon

std::string gerundize(std::string_view phrase) {
  const std::string trimmed = text::trim(phrase);
  std::size_t end = 0;
  while (end < trimmed.size() && !std::isspace(static_cast<unsigned char>(trimmed[end]))) ++end;
  const std::string first = trimmed.substr(0, end);
  const std::string lower = text::to_lower(first);
  if (first.empty()) throw Error(ErrorCode::NotAVerb, "empty phrase");
  if (lexicon::is_base_verb(lower))
    return text::match_leading_case(first, lexicon::gerund_of(lower)) + trimmed.substr(end);
  if (lower.size() >= 5 && lower.ends_with("ing")) return trimmed;
  throw Error(ErrorCode::NotAVerb, "leading token '" + first + "' is not a verb");
}

}  // namespace bioinvert
