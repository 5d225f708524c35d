#include <gtest/gtest.h>

#include "bioinvert/knowledge.hpp"
#include "support.hpp"

using namespace bioinvert;
using bioinvert::testing::fixture;

namespace {

bool has_code(const ValidationReport& r, const std::string& code) {
  return std::any_of(r.begin(), r.end(), [&](const Violation& v) { return v.code == code; });
}

ElementaryStrategy part(int k, std::vector<FunctionExpr> fns, std::vector<Characteristic> chars,
                        std::optional<EnvironmentDesc> env = std::nullopt, std::string summary = {}) {
  ElementaryStrategy e;
  e.k = k;
  e.fragment.summary = std::move(summary);
  e.fragment.functions = std::move(fns);
  e.fragment.characteristics = std::move(chars);
  e.fragment.environment = std::move(env);
  return e;
}

FunctionExpr act(std::string verb, std::string object) { return ActionDescription{std::move(verb), std::move(object)}; }

}  // namespace

class FrameFixture : public ::testing::TestWithParam<const char*> {};

TEST_P(FrameFixture, ValidatesAndRoundtrips) {
  const auto f = load_frame_file(fixture(std::string("frames/") + GetParam()));
  EXPECT_TRUE(validate_frame(f).empty());
  EXPECT_EQ(parse_frame(serialize_frame(f)), f);
  // Serialization is canonical.
  EXPECT_EQ(serialize_frame(parse_frame(serialize_frame(f))), serialize_frame(f));
}

INSTANTIATE_TEST_SUITE_P(Frames, FrameFixture,
                         ::testing::Values("swim.json", "jet.json", "crawl.json", "crawl-source.json"));

TEST(Knowledge, SwimFixtureShape) {
  const auto f = load_frame_file(fixture("frames/swim.json"));
  EXPECT_EQ(f.behavior.summary, "Trust Vector Control");
  EXPECT_EQ(f.functions.size(), 5u);
  EXPECT_EQ(f.characteristics.size(), 3u);
}

TEST(Knowledge, FixtureSummaries) {
  EXPECT_EQ(load_frame_file(fixture("frames/jet.json")).behavior.summary, "Provide underwater thrust");
  EXPECT_EQ(load_frame_file(fixture("frames/crawl.json")).behavior.summary, "Achieve crawling");
}

TEST(Knowledge, EmptyFunctionsViolation) {
  auto f = load_frame_file(fixture("frames/swim.json"));
  f.functions.clear();
  const auto r = validate_frame(f);
  ASSERT_EQ(r.size(), 1u);
  EXPECT_EQ(r[0].code, "FUNCTIONS_EMPTY");
}

TEST(Knowledge, NonGerundFunctionNamesSlot) {
  auto f = load_frame_file(fixture("frames/swim.json"));
  f.functions[1] = act("drive", "flexible structure");
  const auto r = validate_frame(f);
  ASSERT_EQ(r.size(), 1u);
  EXPECT_EQ(r[0].code, "NOT_GERUND");
  EXPECT_EQ(r[0].path, "/functions/1/verb");
}

TEST(Knowledge, DuplicatePhraseIsCaseAndSpaceInsensitive) {
  auto f = load_frame_file(fixture("frames/swim.json"));
  const auto first = render(f.functions[0]);
  auto dup = std::get<ActionDescription>(f.functions[0]);
  dup.object = "  " + dup.object;
  for (auto& c : dup.verb) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  f.functions.push_back(dup);
  EXPECT_TRUE(has_code(validate_frame(f), "DUPLICATE_PHRASE")) << first;
}

TEST(Knowledge, EmptySummaryAndCharacteristics) {
  auto f = load_frame_file(fixture("frames/crawl.json"));
  f.behavior.summary = " ";
  f.characteristics.clear();
  const auto r = validate_frame(f);
  EXPECT_TRUE(has_code(r, "BEHAVIOR_SUMMARY_EMPTY"));
  EXPECT_TRUE(has_code(r, "CHARACTERISTICS_EMPTY"));
}

TEST(Knowledge, CausalLinkOutOfRange) {
  auto f = load_frame_file(fixture("frames/crawl.json"));
  f.behavior.steps = {act("contracting", "rear segment")};
  f.behavior.causal_links = {CausalRelation{{0, 2}, act("extending", "front segment"), "so that"}};
  EXPECT_TRUE(has_code(validate_frame(f), "CAUSE_OUT_OF_RANGE"));
}

TEST(Compose, DisjointUnion) {
  const Characteristic c = noun_phrase<Characteristic>("soft body");
  const auto f = compose({part(1, {act("bending", "fin")}, {c}), part(2, {act("pushing", "water")}, {c})});
  ASSERT_EQ(f.functions.size(), 2u);
  EXPECT_EQ(render(f.functions[0]), "bending fin");
  EXPECT_EQ(render(f.functions[1]), "pushing water");
  EXPECT_EQ(f.characteristics.size(), 1u);  // duplicate removed
  EXPECT_EQ(f.id, "composite:S_e^1+S_e^2");
  EXPECT_EQ(f.provenance.elementary_ids, (std::vector<std::string>{"S_e^1", "S_e^2"}));
}

TEST(Compose, JetFromTwoHalves) {
  const auto jet = load_frame_file(fixture("frames/jet.json"));
  const auto a = part(2, {jet.functions[0], jet.functions[1]}, {jet.characteristics[0], jet.characteristics[1]},
                      std::nullopt, jet.behavior.summary);
  const auto b = part(3, {jet.functions[2], jet.functions[3]}, {jet.characteristics[2], jet.characteristics[3]});
  auto f = compose({a, b}, jet.id);
  f.provenance.source_doc = jet.provenance.source_doc;
  f.provenance.notes = jet.provenance.notes;
  EXPECT_EQ(f, jet);
  EXPECT_TRUE(validate_frame(f).empty());
}

TEST(Compose, ConflictingEnvironment) {
  const auto c = noun_phrase<Characteristic>("soft body");
  EXPECT_BIO_ERROR(compose({part(1, {act("crawling", "forward")}, {c}, noun_phrase<EnvironmentDesc>("seafloor")),
                            part(2, {act("swimming", "upward")}, {c}, noun_phrase<EnvironmentDesc>("open water"))}),
                   ErrorCode::ConflictingEnvironment);
  // Identical environments (modulo case) are fine.
  const auto ok = compose({part(1, {act("crawling", "forward")}, {c}, noun_phrase<EnvironmentDesc>("Seafloor")),
                           part(2, {act("swimming", "upward")}, {c}, noun_phrase<EnvironmentDesc>("seafloor"))});
  ASSERT_TRUE(ok.environment);
  EXPECT_EQ(ok.environment->head, "Seafloor");
}

TEST(Compose, StepOffsetsShiftCausalLinks) {
  auto a = part(1, {act("bending", "fin")}, {noun_phrase<Characteristic>("fin ray")}, std::nullopt, "Swim");
  a.fragment.steps = {act("bending", "fin"), act("pushing", "water")};
  a.fragment.causal_links = {CausalRelation{{0, 1}, act("pushing", "water"), "so"}};
  auto b = part(2, {act("gliding", "forward")}, {noun_phrase<Characteristic>("tail")});
  b.fragment.steps = {act("relaxing", "muscle"), act("gliding", "forward")};
  b.fragment.causal_links = {CausalRelation{{0, 1}, act("gliding", "forward"), "then"}};
  const auto f = compose({a, b});
  ASSERT_EQ(f.behavior.steps.size(), 4u);
  ASSERT_EQ(f.behavior.causal_links.size(), 2u);
  EXPECT_EQ(f.behavior.causal_links[1].cause, (StepRange{2, 3}));
  EXPECT_TRUE(validate_frame(f).empty());
}

TEST(Compose, AssociativeWhenRewrapped) {
  const auto a = part(1, {act("bending", "fin")}, {noun_phrase<Characteristic>("fin ray")}, std::nullopt, "Swim");
  const auto b = part(2, {act("pushing", "water"), act("bending", "fin")}, {noun_phrase<Characteristic>("tail")});
  const auto c = part(3, {act("gliding", "forward")}, {noun_phrase<Characteristic>("Fin ray")});
  const auto flat = compose({a, b, c});
  const auto ab = compose({a, b});
  ElementaryStrategy wrapped = as_elementary(ab, 99);
  wrapped.fragment.composed_from = ab.provenance.elementary_ids;
  const auto nested = compose({wrapped, c});
  EXPECT_EQ(nested.functions, flat.functions);
  EXPECT_EQ(nested.characteristics, flat.characteristics);
  EXPECT_EQ(nested.provenance.elementary_ids, flat.provenance.elementary_ids);
  EXPECT_EQ(nested.id, flat.id);
  // Idempotent duplicate removal.
  EXPECT_EQ(compose({as_elementary(flat, 1)}).functions, flat.functions);
  EXPECT_FALSE(has_code(validate_frame(flat), "DUPLICATE_PHRASE"));
}

TEST(Serialize, MissingBehavior) {
  auto j = Json::parse(serialize_frame(load_frame_file(fixture("frames/crawl.json"))));
  j.erase("behavior");
  try {
    parse_frame(j.dump());
    FAIL() << "expected SchemaError";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SchemaError);
    EXPECT_EQ(e.path(), "/behavior");
  }
}

TEST(Serialize, UnknownFieldRejected) {
  auto j = Json::parse(serialize_frame(load_frame_file(fixture("frames/crawl.json"))));
  j["colour"] = "blue";
  EXPECT_BIO_ERROR(parse_frame(j.dump()), ErrorCode::SchemaError);
}

TEST(Serialize, DuplicateIdInCollection) {
  const auto doc = serialize_frame(load_frame_file(fixture("frames/crawl.json")));
  EXPECT_BIO_ERROR(parse_frame_collection("[" + doc + "," + doc + "]"), ErrorCode::SchemaError);
  EXPECT_EQ(parse_frame_collection("[" + doc + "]").size(), 1u);
}

TEST(Serialize, AllFunctionVariantsRoundtrip) {
  auto f = load_frame_file(fixture("frames/crawl.json"));
  f.functions.push_back(FlowTransformation{FlowKind::Material, "sea water", "jet"});
  f.functions.push_back(StateTransition{"mantle", "contracting"});
  f.environment = noun_phrase<EnvironmentDesc>("shallow sandy seafloor");
  f.behavior.steps = {act("anchoring", "tail")};
  f.behavior.causal_links = {CausalRelation{{0, 1}, StateTransition{"body", "extending"}, "so that"}};
  EXPECT_EQ(parse_frame(serialize_frame(f)), f);
}

TEST(Knowledge, ElementaryLabels) {
  EXPECT_EQ(parse_elementary_label("S_e^12"), 12);
  EXPECT_BIO_ERROR(parse_elementary_label("S_x^1"), ErrorCode::SchemaError);
}

TEST(Knowledge, NounPhrasePostposedModifier) {
  const auto np = noun_phrase<Characteristic>("Nozzle based on rigid support");
  EXPECT_EQ(np.head, "Nozzle");
  EXPECT_EQ(render(np), "Nozzle based on rigid support");
  EXPECT_EQ(render(noun_phrase<Characteristic>("Elastic cavity")), "Elastic cavity");
}
