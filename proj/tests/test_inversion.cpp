#include <gtest/gtest.h>

#include <fstream>

#include "bioinvert/inversion.hpp"
#include "bioinvert/lexicon.hpp"
#include "bioinvert/text.hpp"
#include "support.hpp"

using namespace bioinvert;
using bioinvert::testing::fixture;

namespace {

LabeledSentence labeled(std::string id, std::string text, LabelSet labels) {
  LabeledSentence s;
  s.sentence = {std::move(id), "d", std::move(text), 0, 0};
  s.labels = labels;
  s.scores = indicator_scores(labels);
  s.source = LabelSource::Human;
  return s;
}

// Brute-force oracle: every single-word biological noun left in a slot, by
// token comparison against the lexicon list (multi-word entries by substring).
std::multiset<std::string> bio_nouns_left(const StrategyFrame& f) {
  std::multiset<std::string> out;
  for (const auto& slot : noun_slots(f)) {
    std::string lower = text::to_lower(slot.text);
    for (const auto& term : lexicon::biological_terms()) {
      if (term.find(' ') == std::string::npos) continue;
      for (auto pos = lower.find(term); pos != std::string::npos; pos = lower.find(term, pos + 1)) {
        out.insert(term);
        lower.replace(pos, term.size(), std::string(term.size(), '#'));
      }
    }
    for (const auto& w : text::split_words(lower)) {
      std::string word = w;
      if (word.size() > 3 && word.back() == 's') word.pop_back();
      for (const auto& term : lexicon::biological_terms())
        if (term == word) out.insert(term);
    }
  }
  return out;
}

}  // namespace

TEST(Gerund, GoldenTable) {
  std::ifstream in(fixture("golden/gerund-50.tsv"));
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    const auto base = line.substr(0, tab), expected = line.substr(tab + 1);
    EXPECT_EQ(gerundize(base), expected) << base;
    EXPECT_EQ(gerundize(expected), expected) << "idempotence: " << expected;
    ++n;
  }
  EXPECT_EQ(n, 50u);
}

TEST(Gerund, Examples) {
  EXPECT_EQ(gerundize("generate directional flow"), "generating directional flow");
  EXPECT_EQ(gerundize("driving flexible structure"), "driving flexible structure");
  EXPECT_EQ(gerundize("Store elastic energy"), "Storing elastic energy");
  EXPECT_BIO_ERROR(gerundize("flexible structure"), ErrorCode::NotAVerb);
}

TEST(Extract, FunctionVariants) {
  const auto flow = extract_function("The muscles convert chemical energy into mechanical work.");
  ASSERT_TRUE(flow);
  ASSERT_TRUE(std::holds_alternative<FlowTransformation>(*flow));
  EXPECT_EQ(std::get<FlowTransformation>(*flow).flow_kind, FlowKind::Energy);

  const auto state = extract_function("The mantle contracts rapidly.");
  ASSERT_TRUE(state);
  EXPECT_TRUE(std::holds_alternative<StateTransition>(*state));
  EXPECT_EQ(render(*state).substr(0, 11), "contracting");

  const auto action = extract_function("The fish steers the jet with its fins.");
  ASSERT_TRUE(action);
  ASSERT_TRUE(std::holds_alternative<ActionDescription>(*action));
  EXPECT_EQ(std::get<ActionDescription>(*action).verb, "steering");

  EXPECT_FALSE(extract_function("Sandy and quiet."));
}

TEST(Extract, PassiveTakesParticiple) {
  const auto f = extract_function("The rear grip is released.");
  ASSERT_TRUE(f);
  EXPECT_EQ(render(*f).substr(0, 9), "releasing");
}

TEST(Extract, CharacteristicsAndEnvironment) {
  const auto c = extract_characteristics("Its elastic mantle cavity fills with seawater.");
  ASSERT_FALSE(c.empty());
  EXPECT_EQ(text::to_lower(render(c[0])), "elastic mantle cavity");
  const auto e = extract_environment("The worm lives on the sandy seafloor.");
  ASSERT_TRUE(e);
  EXPECT_EQ(e->head, "seafloor");
}

TEST(BuildFrame, MissingDimensions) {
  try {
    build_frame({labeled("a", "It lives in open water.", {Dimension::Environment})}, RuleSummarizer{}, "x");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingDimension);
    const std::string msg = e.what();
    EXPECT_NE(msg.find("Function"), std::string::npos);
    EXPECT_NE(msg.find("Characteristic"), std::string::npos);
  }
}

TEST(BuildFrame, BehaviorOrderPreserved) {
  const auto f = build_frame({labeled("1", "The fish bends its tail.", {Dimension::Function, Dimension::Behavior}),
                              labeled("2", "Then the tail pushes the water backward.", {Dimension::Behavior}),
                              labeled("3", "The fin has flexible rays.", {Dimension::Characteristic})},
                             RuleSummarizer{}, "S_fish");
  ASSERT_EQ(f.behavior.steps.size(), 2u);
  EXPECT_EQ(render(f.behavior.steps[0]), "bending tail");
  EXPECT_EQ(render(f.behavior.steps[1]), "pushing water");
  EXPECT_TRUE(validate_frame(f).empty());
  EXPECT_EQ(f.provenance.sentence_ids, (std::vector<std::string>{"1", "2", "3"}));
}

TEST(BuildFrame, CausalConjunction) {
  const auto frag = build_fragment(
      {labeled("1", "The cavity shrinks because the circular muscles contract.", {Dimension::Behavior})});
  ASSERT_EQ(frag.steps.size(), 1u);
  ASSERT_EQ(frag.causal_links.size(), 1u);
  // "A because B": B is the cause.
  EXPECT_EQ(render(frag.steps[0]), "contracting circular muscles");
  EXPECT_EQ(frag.causal_links[0].conjunction, "because");
  EXPECT_EQ(frag.causal_links[0].cause, (StepRange{0, 1}));
  EXPECT_TRUE(std::holds_alternative<StateTransition>(frag.causal_links[0].effect));
}

TEST(BuildFrame, SquidParagraph) {
  const auto mock = MockBackend::shipped();
  const LlmBridge bridge(mock);
  LlmClassifier cls(bridge);
  const auto doc = bioinvert::testing::slurp(fixture("demo-corpus/squid-jet.txt"));
  const auto sentences = classify_all(segment(doc, "squid-jet"), cls);
  const auto f = build_frame(sentences, LlmSummarizer(bridge), "S_squid-jet");
  EXPECT_EQ(f.behavior.summary, "Provide underwater thrust");
  EXPECT_TRUE(std::any_of(f.characteristics.begin(), f.characteristics.end(), [](const Characteristic& c) {
    const auto r = text::to_lower(render(c));
    return r.find("elastic") != std::string::npos && r.find("cavity") != std::string::npos;
  }));
  EXPECT_TRUE(validate_frame(f).empty());
}

TEST(Invert, CrawlSourceHandOracle) {
  const auto source = load_frame_file(fixture("frames/crawl-source.json"));
  const auto kb = make_kb({{"longitudinal muscle", "linear actuator", {}, false}, {"epidermis", "laminated skin", {}, false}},
                          {}, {});
  const auto r = invert(source, kb, nullptr);
  // Worked by hand on the source fixture.
  const std::vector<Substitution> expected = {{"/characteristics/0", "Longitudinal muscle", "Linear actuator", 0},
                                              {"/characteristics/2", "epidermis", "laminated skin", 8}};
  EXPECT_EQ(r.substitutions, expected);
  EXPECT_EQ(render(r.engineering_frame.characteristics[0]), "Linear actuator fiber");
  EXPECT_EQ(render(r.engineering_frame.characteristics[2]), "Layered laminated skin");
  const std::vector<UnresolvedTerm> unresolved = {{"/functions/0/object", "muscle"},
                                                  {"/functions/1/object", "pseudopod"},
                                                  {"/functions/2/object", "pseudopod"},
                                                  {"/characteristics/1", "muscle"},
                                                  {"/characteristics/3", "hydrostatic skeleton"}};
  EXPECT_EQ(r.unresolved, unresolved);
  std::multiset<std::string> names;
  for (const auto& u : r.unresolved) names.insert(u.term);
  EXPECT_EQ(names, bio_nouns_left(r.engineering_frame));
  EXPECT_EQ(r.engineering_frame.functions.size(), source.functions.size());
  EXPECT_TRUE(validate_frame(r.engineering_frame).empty());
  EXPECT_EQ(apply_substitutions(source, r.substitutions), r.pass1_frame);
  EXPECT_FALSE(r.engineering_ready());
  EXPECT_EQ(r.id(), "eng:bio-crawl");
}

TEST(Invert, FixedPoint) {
  StrategyFrame f;
  f.id = "e";
  f.behavior.summary = "Provide thrust";
  f.functions = {ActionDescription{"driving", "linear actuator"}};
  f.characteristics = {noun_phrase<Characteristic>("laminated skin")};
  const auto kb = load_kb_file(fixture("kb-soft-robot.json"));
  const auto r = invert(f, kb, nullptr);
  EXPECT_TRUE(r.substitutions.empty());
  EXPECT_TRUE(r.unresolved.empty());
  EXPECT_TRUE(r.engineering_ready());
  auto same = r.engineering_frame;
  same.id = f.id;
  EXPECT_EQ(same, f);
}

TEST(Invert, LongestTermSingleSubstitution) {
  StrategyFrame f;
  f.id = "m";
  f.behavior.summary = "Provide thrust";
  f.functions = {ActionDescription{"contracting", "fibers"}};
  f.characteristics = {noun_phrase<Characteristic>("circular muscle fiber")};
  const auto kb = make_kb({{"muscle fiber", "actuator strand", {}, false},
                           {"circular muscle fiber", "ring actuator", {}, false}},
                          {}, {});
  const auto r = invert(f, kb, nullptr);
  ASSERT_EQ(r.substitutions.size(), 1u);
  EXPECT_EQ(r.substitutions[0].bio_term, "circular muscle fiber");
  EXPECT_EQ(render(r.engineering_frame.characteristics[0]), "ring actuator");
}

TEST(Invert, EmptyKb) {
  EXPECT_BIO_ERROR(invert(load_frame_file(fixture("frames/crawl.json")), EngineeringKB{}, nullptr),
                   ErrorCode::KbEmpty);
}

TEST(Invert, FrameFixturesKeepFunctionCounts) {
  const auto kb = load_kb_file(fixture("kb-soft-robot.json"));
  const LlmBridge bridge(MockBackend::shipped());
  for (const char* name : {"swim.json", "jet.json", "crawl.json", "crawl-source.json"}) {
    const auto f = load_frame_file(fixture(std::string("frames/") + name));
    const auto r = invert(f, kb, &bridge);
    EXPECT_EQ(r.engineering_frame.functions.size(), f.functions.size()) << name;
    EXPECT_TRUE(validate_frame(r.engineering_frame).empty()) << name;
    const auto back = inversion_from_json(to_json(r));
    EXPECT_EQ(to_json(back), to_json(r)) << name;
  }
}

TEST(Invert, CorrectorFailureKeepsPassOne) {
  struct Down : LlmBackend {
    BackendReply send(const LlmTask&, const std::string&) const override {
      throw Error(ErrorCode::TransportError, "offline");
    }
    std::string_view name() const override { return "down"; }
  };
  RetryPolicy once;
  once.max_attempts = 1;
  const LlmBridge bridge(std::make_shared<Down>(), once);
  const auto kb = load_kb_file(fixture("kb-soft-robot.json"));
  const auto src = load_frame_file(fixture("frames/crawl-source.json"));
  try {
    invert(src, kb, &bridge);
    FAIL();
  } catch (const InversionError& e) {
    EXPECT_EQ(e.code(), ErrorCode::TransportError);
    EXPECT_FALSE(e.partial().substitutions.empty());
    EXPECT_EQ(e.partial().pass1_frame, apply_substitutions(src, e.partial().substitutions));
  }
}

TEST(Screen, Examples) {
  const auto kb = load_kb_file(fixture("kb-soft-robot.json"));
  std::vector<InversionResult> results;
  for (const char* name : {"swim.json", "jet.json", "crawl.json"})
    results.push_back(invert(load_frame_file(fixture(std::string("frames/") + name)), kb, nullptr));
  std::map<std::string, ScreenVerdict> v = {{results[0].id(), {true, ""}},
                                            {results[1].id(), {false, "needs a rigid pump"}},
                                            {results[2].id(), {true, ""}}};
  const auto out = screen(results, v);
  ASSERT_EQ(out.kept.size(), 2u);
  ASSERT_EQ(out.dropped.size(), 1u);
  EXPECT_EQ(out.dropped[0].second, "needs a rigid pump");
  EXPECT_BIO_ERROR(screen(results, {}), ErrorCode::MissingVerdict);
  for (auto& [_, verdict] : v) verdict.keep = false;
  EXPECT_TRUE(screen(results, v).kept.empty());
}
