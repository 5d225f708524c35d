#include <gtest/gtest.h>

#include <random>
#include <set>

#include "bioinvert/decision.hpp"
#include "support.hpp"
#include "vikor_oracle.hpp"

using namespace bioinvert;
using bioinvert::testing::fixture;

namespace {

CriteriaSet benefit_criteria(std::size_t m) {
  CriteriaSet c;
  for (std::size_t j = 0; j < m; ++j) c.push_back({"c" + std::to_string(j + 1), "", Direction::Benefit, Scoring::Auto});
  return c;
}

DecisionMatrix matrix(std::vector<std::string> alts, const Eigen::MatrixXd& scores) {
  return {std::move(alts), benefit_criteria(static_cast<std::size_t>(scores.cols())), scores};
}

Weights equal_weights(std::size_t m) {
  Weights w;
  for (std::size_t j = 0; j < m; ++j) w["c" + std::to_string(j + 1)] = 1.0 / static_cast<double>(m);
  return w;
}

bool has_warning(const VikorResult& r, const std::string& code) {
  return std::any_of(r.warnings.begin(), r.warnings.end(), [&](const VikorWarning& w) { return w.code == code; });
}

InversionResult as_result(const StrategyFrame& f) {
  InversionResult r;
  r.source_frame = r.pass1_frame = r.engineering_frame = f;
  r.engineering_frame.id = "eng:" + f.id;
  return r;
}

std::vector<InversionResult> fixture_results() {
  std::vector<InversionResult> out;
  for (const char* n : {"swim.json", "jet.json", "crawl.json"})
    out.push_back(as_result(load_frame_file(fixture(std::string("frames/") + n))));
  return out;
}

ManualScores manual_for(const std::vector<InversionResult>& rs) {
  ManualScores m;
  double x = 0.4;
  for (const auto& r : rs) {
    m[r.id()] = {{criteria::kReliability, x}, {criteria::kEconomic, 1.0 - x}};
    x += 0.2;
  }
  return m;
}

}  // namespace

// --- G1 -----------------------------------------------------------------------

TEST(G1, EqualImportance) {
  const auto w = g1_weights({{"a", "b", "c"}, {1.0, 1.0}});
  for (const auto& [_, x] : w) EXPECT_NEAR(x, 1.0 / 3.0, 1e-15);
}

TEST(G1, ThreeCriteriaAgainstLinearSolve) {
  // Oracle: w1 - 1.2 w2 = 0, w2 - 1.4 w3 = 0, w1 + w2 + w3 = 1.
  Eigen::Matrix3d A;
  A << 1, -1.2, 0, 0, 1, -1.4, 1, 1, 1;
  const Eigen::Vector3d oracle = A.fullPivLu().solve(Eigen::Vector3d(0, 0, 1));
  const auto w = g1_weights({{"a", "b", "c"}, {1.2, 1.4}});
  EXPECT_NEAR(w.at("a"), oracle(0), 1e-12);
  EXPECT_NEAR(w.at("b"), oracle(1), 1e-12);
  EXPECT_NEAR(w.at("c"), oracle(2), 1e-12);
  EXPECT_NEAR(w.at("a"), 0.4118, 5e-5);
  EXPECT_NEAR(w.at("b"), 0.3431, 5e-5);
  EXPECT_NEAR(w.at("c"), 0.2451, 5e-5);
}

TEST(G1, TwoCriteriaClosedForm) {
  const auto w = g1_weights({{"x", "y"}, {1.8}});
  EXPECT_NEAR(w.at("x"), 1.8 / 2.8, 1e-15);
  EXPECT_NEAR(w.at("y"), 1.0 / 2.8, 1e-15);
}

TEST(G1, FixedSizeRecurrenceMatchesDynamic) {
  const Eigen::Vector3d r(1.2, 1.0, 1.6);
  const Eigen::Vector4d fixed = g1_recurrence(r);
  const Eigen::VectorXd dyn = g1_recurrence(Eigen::VectorXd(r));
  EXPECT_EQ(dyn.size(), 4);
  for (int i = 0; i < 4; ++i) EXPECT_EQ(fixed(i), dyn(i));
}

TEST(G1, RandomJudgmentProperties) {
  std::mt19937_64 gen(2024);
  std::uniform_int_distribution<int> msize(2, 8);
  std::uniform_real_distribution<double> ratio(1.0, 1.8);
  for (int t = 0; t < 200; ++t) {
    const int m = msize(gen);
    G1Judgment j;
    for (int k = 0; k < m; ++k) j.order.push_back("k" + std::to_string(k));
    for (int k = 1; k < m; ++k) j.ratios.push_back(ratio(gen));
    const auto w = g1_weights(j);
    double sum = 0;
    for (int k = 0; k < m; ++k) {
      sum += w.at(j.order[k]);
      EXPECT_GT(w.at(j.order[k]), 0.0);
      if (k > 0) {
        EXPECT_NEAR(w.at(j.order[k - 1]) / w.at(j.order[k]), j.ratios[k - 1], 1e-12);
        EXPECT_GE(w.at(j.order[k - 1]), w.at(j.order[k]));
      }
    }
    EXPECT_NEAR(sum, 1.0, 1e-9);
  }
}

TEST(G1, Errors) {
  EXPECT_BIO_ERROR(g1_weights({{"a", "b", "c"}, {1.2}}), ErrorCode::LengthMismatch);
  EXPECT_BIO_ERROR(g1_weights({{"a", "b"}, {0.9}}), ErrorCode::BadRatio);
  EXPECT_BIO_ERROR(g1_weights({{"a", "b"}, {1.81}}), ErrorCode::BadRatio);
  EXPECT_BIO_ERROR(g1_weights({{"a", "b"}, {std::nan("")}}), ErrorCode::BadRatio);
  EXPECT_BIO_ERROR(g1_weights({{"a", "a"}, {1.0}}), ErrorCode::InvalidArgument);
  EXPECT_BIO_ERROR(g1_weights({{"a", "b"}, {1.0}}, default_criteria()), ErrorCode::LengthMismatch);
  const auto d = g1_weights(default_judgment(), default_criteria());
  EXPECT_EQ(d.size(), 6u);
}

// --- VIKOR --------------------------------------------------------------------

TEST(Vikor, WorkedExample) {
  // Hand computation: f* = (1,1), f- = (0,0), w = (.5,.5).
  //   S = (0, .5, 1), R = (0, .25, .5)
  //   Q = .5 (S - 0)/1 + .5 (R - 0)/.5 = (0, .5, 1)
  //   DQ = 1/(3-1) = .5; Q2 - Q1 = .5 >= .5; A1 has min S and min R.
  Eigen::MatrixXd f(3, 2);
  f << 1, 1, 0.5, 0.5, 0, 0;
  const auto r = vikor(matrix({"A1", "A2", "A3"}, f), equal_weights(2), 0.5);
  EXPECT_NEAR(r.S(0), 0.0, 1e-15);
  EXPECT_NEAR(r.S(1), 0.5, 1e-15);
  EXPECT_NEAR(r.S(2), 1.0, 1e-15);
  EXPECT_NEAR(r.R(1), 0.25, 1e-15);
  EXPECT_NEAR(r.R(2), 0.5, 1e-15);
  EXPECT_NEAR(r.Q(0), 0.0, 1e-15);
  EXPECT_NEAR(r.Q(1), 0.5, 1e-15);
  EXPECT_NEAR(r.Q(2), 1.0, 1e-15);
  EXPECT_DOUBLE_EQ(r.dq, 0.5);
  EXPECT_TRUE(r.conditions_checked);
  EXPECT_TRUE(r.acceptable_advantage);
  EXPECT_TRUE(r.acceptable_stability);
  EXPECT_EQ(r.compromise_set, std::vector<std::string>{"A1"});
  EXPECT_EQ(r.ranked_ids(), (std::vector<std::string>{"A1", "A2", "A3"}));
  EXPECT_TRUE(r.warnings.empty());
}

TEST(Vikor, FixedSizeCoreAgreesWithWrapper) {
  Eigen::Matrix<double, 3, 2> f;
  f << 1, 1, 0.5, 0.5, 0, 0;
  const Eigen::Vector2d w(0.5, 0.5);
  const Eigen::Array<bool, 2, 1> benefit(true, true);
  const auto idx = vikor_indices(f, w, benefit, 0.5);
  static_assert(decltype(idx.Q)::RowsAtCompileTime == 3);
  EXPECT_NEAR(idx.Q(1), 0.5, 1e-15);
  EXPECT_FALSE(idx.s_degenerate);
}

TEST(Vikor, DominantAlternative) {
  Eigen::MatrixXd f(3, 3);
  f << 0.2, 0.4, 0.1, 0.9, 0.8, 0.7, 0.5, 0.1, 0.6;
  const auto r = vikor(matrix({"a", "b", "c"}, f), equal_weights(3));
  EXPECT_EQ(r.S(1), 0.0);
  EXPECT_EQ(r.R(1), 0.0);
  EXPECT_EQ(r.Q(1), 0.0);
  EXPECT_EQ(r.ranked_ids().front(), "b");
}

TEST(Vikor, SymmetricTie) {
  Eigen::MatrixXd f(2, 2);
  f << 1, 0, 0, 1;
  const auto r = vikor(matrix({"beta", "alpha"}, f), equal_weights(2));
  EXPECT_EQ(r.S(0), r.S(1));
  EXPECT_EQ(r.R(0), r.R(1));
  EXPECT_EQ(r.Q(0), 0.0);
  EXPECT_EQ(r.Q(1), 0.0);
  EXPECT_EQ(r.ranked_ids(), (std::vector<std::string>{"alpha", "beta"}));
  EXPECT_TRUE(has_warning(r, "DEGENERATE_INDEX"));
  EXPECT_FALSE(r.acceptable_advantage);
  EXPECT_EQ(r.compromise_set.size(), 2u);
}

TEST(Vikor, DegenerateCriterionWarnsAndContributesZero) {
  Eigen::MatrixXd f(3, 2);
  f << 0.5, 1, 0.5, 0, 0.5, 0.25;
  const auto r = vikor(matrix({"a", "b", "c"}, f), equal_weights(2));
  EXPECT_TRUE(has_warning(r, "DEGENERATE_CRITERION"));
  EXPECT_NEAR(r.S(1), 0.5, 1e-15);  // only c2 counts
  EXPECT_NEAR(r.S(2), 0.375, 1e-15);
}

TEST(Vikor, AllDegenerateIsNoDiscrimination) {
  Eigen::MatrixXd f = Eigen::MatrixXd::Constant(3, 2, 0.25);
  EXPECT_BIO_ERROR(vikor(matrix({"a", "b", "c"}, f), equal_weights(2)), ErrorCode::NoDiscrimination);
}

TEST(Vikor, SingleAlternative) {
  Eigen::MatrixXd f(1, 2);
  f << 0.3, 0.9;
  const auto r = vikor(matrix({"only"}, f), equal_weights(2));
  EXPECT_EQ(r.Q(0), 0.0);
  EXPECT_FALSE(r.conditions_checked);
  EXPECT_TRUE(has_warning(r, "SINGLE_ALTERNATIVE"));
  EXPECT_EQ(r.compromise_set, std::vector<std::string>{"only"});
}

TEST(Vikor, CostCriterionFlipsIdeal) {
  DecisionMatrix m;
  m.alternatives = {"cheap", "dear"};
  m.criteria = {{"price", "", Direction::Cost, Scoring::Manual}, {"speed", "", Direction::Benefit, Scoring::Manual}};
  m.scores.resize(2, 2);
  m.scores << 1, 0.5, 9, 0.5;
  const auto r = vikor(m, {{"price", 0.5}, {"speed", 0.5}});
  EXPECT_EQ(r.best(0), 1.0);
  EXPECT_EQ(r.worst(0), 9.0);
  EXPECT_EQ(r.ranked_ids().front(), "cheap");
}

TEST(Vikor, CompromiseRulesAgainstOracle) {
  std::set<std::pair<bool, bool>> branches;
  const auto check = [&](const std::vector<std::vector<double>>& rows, double v) {
    const int n = static_cast<int>(rows.size()), m = static_cast<int>(rows[0].size());
    Eigen::MatrixXd f(n, m);
    std::vector<std::string> ids;
    for (int i = 0; i < n; ++i) {
      ids.push_back("a" + std::to_string(i));
      for (int j = 0; j < m; ++j) f(i, j) = rows[i][j];
    }
    const auto o = oracle::vikor(rows, std::vector<double>(m, 1.0 / m), std::vector<bool>(m, true), v, ids);
    if (o.no_discrimination) return;
    const auto r = vikor(matrix(ids, f), equal_weights(static_cast<std::size_t>(m)), v);
    std::vector<std::string> expect;
    for (auto i : o.compromise) expect.push_back(ids[i]);
    ASSERT_EQ(r.compromise_set, expect);
    ASSERT_EQ(r.acceptable_advantage, o.advantage);
    ASSERT_EQ(r.acceptable_stability, o.stability);
    branches.insert({o.advantage, o.stability});
  };

  // Random 3..8 x 2..4 matrices on a coarse grid.
  std::mt19937_64 gen(17);
  for (int t = 0; t < 3000; ++t) {
    const int n = 3 + static_cast<int>(gen() % 6), m = 2 + static_cast<int>(gen() % 3);
    std::vector<std::vector<double>> rows(n, std::vector<double>(m));
    for (auto& row : rows)
      for (auto& x : row) x = static_cast<double>(gen() % 5) / 4.0;
    check(rows, static_cast<double>(gen() % 3) / 2.0);
  }
  // Clear advantage, but the leader is best on neither S nor R.
  check({{0.75, 0.0, 1.0}, {1.0, 0.75, 0.0}, {0.0, 0.75, 1.0}, {0.75, 0.25, 0.5}, {0.25, 0.5, 1.0}}, 0.5);

  EXPECT_TRUE(branches.contains({true, true}));
  EXPECT_TRUE(branches.contains({true, false}));
  EXPECT_TRUE(branches.contains({false, true}));
}

TEST(Vikor, InvalidInputs) {
  Eigen::MatrixXd f(2, 2);
  f << 1, 0, 0, 1;
  EXPECT_BIO_ERROR(vikor(matrix({"a", "b"}, f), equal_weights(2), 1.5), ErrorCode::InvalidArgument);
  EXPECT_BIO_ERROR(vikor(matrix({"a", "b"}, f), {{"c1", 1.0}}), ErrorCode::InvalidArgument);
  EXPECT_BIO_ERROR(vikor(matrix({"a"}, f), equal_weights(2)), ErrorCode::InvalidArgument);
}

// --- auto criteria and ranking ---------------------------------------------------

TEST(AutoCriteria, IdentityCompliance) {
  const auto f = load_frame_file(fixture("frames/crawl.json"));
  DesignProblem p;
  for (const auto& fn : f.functions) p.requirement_elements.push_back(render(fn));
  const auto s = score_auto_criteria(as_result(f), p, std::nullopt);
  EXPECT_DOUBLE_EQ(s.at(criteria::kFunctional), 1.0);
  EXPECT_DOUBLE_EQ(s.at(criteria::kEnvironmental), 1.0);
  for (const auto& [_, v] : s) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(AutoCriteria, AllUnresolvedCharacteristics) {
  auto r = as_result(load_frame_file(fixture("frames/crawl-source.json")));
  r.engineering_frame.characteristics = {noun_phrase<Characteristic>("Circular muscle fiber"),
                                         noun_phrase<Characteristic>("Layered epidermis")};
  r.unresolved = {{"/characteristics/0", "muscle"}, {"/characteristics/1", "epidermis"}};
  DesignProblem p;
  p.requirement_elements = {"crawl on sand"};
  EXPECT_DOUBLE_EQ(score_auto_criteria(r, p, std::nullopt).at(criteria::kCharacteristic), 0.0);
  r.waived_terms = {"muscle"};
  EXPECT_DOUBLE_EQ(score_auto_criteria(r, p, std::nullopt).at(criteria::kCharacteristic), 0.5);
}

TEST(AutoCriteria, JetComplianceGolden) {
  // Requirement stems {provid, underwater, thrust, fluid, ejection}; the four
  // function phrases give 14 stems sharing only "fluid": 1 / 18.
  DesignProblem p;
  p.requirement_elements = {"provide underwater thrust by fluid ejection"};
  const auto s = score_auto_criteria(as_result(load_frame_file(fixture("frames/jet.json"))), p, std::nullopt);
  EXPECT_NEAR(s.at(criteria::kFunctional), 1.0 / 18.0, 1e-15);
}

TEST(AutoCriteria, EnvironmentMigration) {
  auto r = as_result(load_frame_file(fixture("frames/crawl-source.json")));
  DesignProblem p;
  p.requirement_elements = {"crawl"};
  EXPECT_DOUBLE_EQ(score_auto_criteria(r, p, noun_phrase<EnvironmentDesc>("sandy seafloor")).at(criteria::kEnvironmental),
                   1.0);
  EXPECT_DOUBLE_EQ(score_auto_criteria(r, p, noun_phrase<EnvironmentDesc>("open water")).at(criteria::kEnvironmental),
                   0.0);
  r.engineering_frame.environment.reset();
  EXPECT_DOUBLE_EQ(score_auto_criteria(r, p, noun_phrase<EnvironmentDesc>("open water")).at(criteria::kEnvironmental),
                   1.0);
}

TEST(Rank, FixtureFramesDeterministic) {
  const auto kept = fixture_results();
  DesignProblem p;
  p.requirement_elements = {"provide underwater thrust", "control swimming direction"};
  const auto a = rank_strategies(kept, p, std::nullopt, default_judgment(), manual_for(kept));
  const auto b = rank_strategies(kept, p, std::nullopt, default_judgment(), manual_for(kept));
  EXPECT_EQ(to_json(a).dump(), to_json(b).dump());
  EXPECT_EQ(a.matrix.scores.rows(), 3);
  EXPECT_EQ(a.matrix.scores.cols(), 6);
  double sum = 0;
  for (const auto& [_, w] : a.weights) sum += w;
  EXPECT_NEAR(sum, 1.0, 1e-12);
  const auto back = decision_run_from_json(to_json(a));
  EXPECT_EQ(to_json(back).dump(), to_json(a).dump());
}

TEST(Rank, Errors) {
  const auto kept = fixture_results();
  EXPECT_BIO_ERROR(rank_strategies({}, {}, std::nullopt, default_judgment(), {}), ErrorCode::NoAlternatives);
  auto manual = manual_for(kept);
  manual[kept[1].id()].erase(criteria::kReliability);
  try {
    rank_strategies(kept, {}, std::nullopt, default_judgment(), manual);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingManualScore);
    EXPECT_EQ(e.path(), "/manual_scores/" + kept[1].id() + "/" + criteria::kReliability);
  }
}

// --- similarity and clustering ------------------------------------------------------

TEST(Similarity, Basics) {
  const auto swim = load_frame_file(fixture("frames/swim.json"));
  const auto jet = load_frame_file(fixture("frames/jet.json"));
  EXPECT_DOUBLE_EQ(frame_similarity(swim, swim), 1.0);
  EXPECT_DOUBLE_EQ(frame_similarity(swim, jet), frame_similarity(jet, swim));
  EXPECT_LT(frame_similarity(swim, jet), 0.5);
  EXPECT_GE(frame_similarity(swim, jet), 0.0);
}

TEST(Cluster, SwimAndJetStaySeparate) {
  std::map<std::string, StrategyFrame> frames;
  std::vector<InversionResult> kept;
  for (const char* n : {"swim.json", "jet.json"}) {
    auto f = load_frame_file(fixture(std::string("frames/") + n));
    frames[f.id] = f;
    kept.push_back(as_result(f));
    kept.back().engineering_frame.id = f.id;
  }
  const auto run = rank_strategies(kept, {}, std::nullopt, default_judgment(), manual_for(kept));
  const auto rep = cluster_top(run.result, frames, 2, 0.5);
  EXPECT_EQ(rep.clusters.size(), 2u);
  EXPECT_TRUE(rep.composites.empty());
  EXPECT_EQ(rep.similarity(0, 0), 1.0);
  EXPECT_EQ(rep.similarity(0, 1), rep.similarity(1, 0));
}

TEST(Cluster, NearDuplicatesMergeIntoComposite) {
  auto a = load_frame_file(fixture("frames/crawl.json"));
  auto b = a;
  a.id = "a";
  b.id = "b";
  b.functions.pop_back();
  std::map<std::string, StrategyFrame> frames = {{"a", a}, {"b", b}, {"s", load_frame_file(fixture("frames/swim.json"))}};
  frames["s"].id = "s";
  Eigen::MatrixXd f(3, 2);
  f << 1, 1, 0.5, 0.5, 0, 0;
  const auto r = vikor(matrix({"a", "b", "s"}, f), equal_weights(2));
  const auto rep = cluster_top(r, frames, 3, 0.5);
  ASSERT_EQ(rep.clusters.size(), 2u);
  EXPECT_EQ(rep.clusters[0], (std::vector<std::string>{"a", "b"}));
  ASSERT_EQ(rep.composites.size(), 1u);
  ASSERT_TRUE(rep.composites[0].frame);
  EXPECT_EQ(rep.composites[0].frame->id, "composite:a+b");
  EXPECT_EQ(rep.composites[0].frame->functions.size(), a.functions.size());
  // Raising the threshold to 1 keeps every frame alone.
  EXPECT_EQ(cluster_top(r, frames, 3, 1.0).clusters.size(), 3u);
  // k = 1 clusters only the leader.
  EXPECT_EQ(cluster_top(r, frames, 1, 0.5).ids, std::vector<std::string>{"a"});
}

TEST(Cluster, Errors) {
  Eigen::MatrixXd f(2, 2);
  f << 1, 0, 0, 1;
  const auto r = vikor(matrix({"a", "b"}, f), equal_weights(2));
  const auto fr = load_frame_file(fixture("frames/swim.json"));
  std::map<std::string, StrategyFrame> frames = {{"a", fr}, {"b", fr}};
  EXPECT_BIO_ERROR(cluster_top(r, frames, 3, 0.5), ErrorCode::KOutOfRange);
  EXPECT_BIO_ERROR(cluster_top(r, frames, 0, 0.5), ErrorCode::KOutOfRange);
  EXPECT_BIO_ERROR(cluster_top(r, frames, 2, 0.0), ErrorCode::InvalidArgument);
  EXPECT_BIO_ERROR(cluster_top(r, frames, 2, 1.1), ErrorCode::InvalidArgument);
}

TEST(Cluster, ReportRoundtrip) {
  const auto fr = load_frame_file(fixture("frames/swim.json"));
  Eigen::MatrixXd f(2, 2);
  f << 1, 0.2, 0, 1;
  const auto r = vikor(matrix({"a", "b"}, f), equal_weights(2));
  const auto rep = cluster_top(r, {{"a", fr}, {"b", fr}}, 2, 0.5);
  EXPECT_EQ(to_json(cluster_report_from_json(to_json(rep))).dump(), to_json(rep).dump());
}

// --- interchange ------------------------------------------------------------------

TEST(Csv, ExactRoundtrip) {
  DecisionMatrix m;
  m.alternatives = {"eng:S_squid-jet", "alt,with comma", "plain"};
  m.criteria = default_criteria();
  m.scores.resize(3, 6);
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u(0, 1);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 6; ++j) m.scores(i, j) = u(gen);
  const auto csv = matrix_to_csv(m);
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "alternative,functional_compliance,behavioral_alignment,characteristic_consistency,"
            "environmental_migration,reliability,economic_tolerance");
  const auto back = matrix_from_csv(csv);
  EXPECT_EQ(back.alternatives, m.alternatives);
  EXPECT_EQ(back.scores, m.scores);  // bit-exact
}

TEST(Csv, Malformed) {
  EXPECT_ANY_THROW(matrix_from_csv("alternative,nope\na,1\n"));
  EXPECT_ANY_THROW(matrix_from_csv("alternative,reliability\na,x\n"));
}

TEST(Json, CriteriaAndJudgmentRoundtrip) {
  EXPECT_EQ(criteria_from_json(to_json(default_criteria())), default_criteria());
  EXPECT_EQ(judgment_from_json(to_json(default_judgment())), default_judgment());
  Eigen::MatrixXd f(3, 2);
  f << 1, 1, 0.5, 0.5, 0, 0;
  const auto r = vikor(matrix({"A1", "A2", "A3"}, f), equal_weights(2));
  const auto j = to_json(r);
  EXPECT_EQ(j["ranking"][0]["id"], "A1");
  EXPECT_EQ(to_json(vikor_result_from_json(j)).dump(), j.dump());
}
