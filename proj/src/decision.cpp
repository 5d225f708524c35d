#include "bioinvert/decision.hpp"

#include <charconv>
#include <cstdio>
#include <numeric>
#include <set>
#include <sstream>

#include "bioinvert/lexicon.hpp"
#include "bioinvert/schema.hpp"
#include "bioinvert/text.hpp"

namespace bioinvert {

using namespace text;

std::string_view to_string(Direction d) { return d == Direction::Benefit ? "benefit" : "cost"; }
std::string_view to_string(Scoring s) { return s == Scoring::Auto ? "auto" : "manual"; }

const CriteriaSet& default_criteria() {
  static const CriteriaSet set = {
      {criteria::kFunctional, "Functional compliance", Direction::Benefit, Scoring::Auto},
      {criteria::kBehavioral, "Behavioral alignment", Direction::Benefit, Scoring::Auto},
      {criteria::kCharacteristic, "Characteristic consistency", Direction::Benefit, Scoring::Auto},
      {criteria::kEnvironmental, "Environmental migration potential", Direction::Benefit, Scoring::Auto},
      {criteria::kReliability, "Reliability", Direction::Benefit, Scoring::Manual},
      {criteria::kEconomic, "Economic tolerance", Direction::Benefit, Scoring::Manual},
  };
  return set;
}

void check_criteria(const CriteriaSet& criteria) {
  if (criteria.empty()) throw Error(ErrorCode::InvalidArgument, "criteria set is empty", "/criteria");
  std::set<std::string> seen;
  for (std::size_t j = 0; j < criteria.size(); ++j) {
    const auto path = "/criteria/" + std::to_string(j);
    if (criteria[j].id.empty()) throw Error(ErrorCode::InvalidArgument, "criterion id is empty", path);
    if (!seen.insert(criteria[j].id).second)
      throw Error(ErrorCode::InvalidArgument, "duplicate criterion id '" + criteria[j].id + "'", path);
  }
}

G1Judgment default_judgment() {
  G1Judgment j;
  for (const auto& c : default_criteria()) j.order.push_back(c.id);
  j.ratios.assign(j.order.size() - 1, 1.2);
  return j;
}

Weights g1_weights(const G1Judgment& judgment, const CriteriaSet& criteria) {
  check_criteria(criteria);
  if (judgment.order.size() != criteria.size())
    throw Error(ErrorCode::LengthMismatch,
                "order names " + std::to_string(judgment.order.size()) + " criteria, expected " +
                    std::to_string(criteria.size()),
                "/order");
  if (judgment.ratios.size() + 1 != judgment.order.size())
    throw Error(ErrorCode::LengthMismatch,
                "expected " + std::to_string(judgment.order.size() - 1) + " ratios, got " +
                    std::to_string(judgment.ratios.size()),
                "/ratios");
  std::set<std::string> ids;
  for (const auto& c : criteria) ids.insert(c.id);
  std::set<std::string> seen;
  for (std::size_t k = 0; k < judgment.order.size(); ++k) {
    const auto& id = judgment.order[k];
    if (!ids.contains(id) || !seen.insert(id).second)
      throw Error(ErrorCode::InvalidArgument, "order is not a permutation of the criteria ids ('" + id + "')",
                  "/order/" + std::to_string(k));
  }
  for (std::size_t k = 0; k < judgment.ratios.size(); ++k) {
    const double r = judgment.ratios[k];
    if (!std::isfinite(r) || r < kMinRatio || r > kMaxRatio)
      throw Error(ErrorCode::BadRatio, "ratio " + std::to_string(r) + " outside [1.0, 1.8]",
                  "/ratios/" + std::to_string(k));
  }

  const Eigen::Map<const Eigen::VectorXd> r(judgment.ratios.data(), static_cast<Eigen::Index>(judgment.ratios.size()));
  const Eigen::VectorXd w = g1_recurrence(r);
  Weights out;
  for (std::size_t k = 0; k < judgment.order.size(); ++k) out[judgment.order[k]] = w(static_cast<Eigen::Index>(k));
  return out;
}

Weights g1_weights(const G1Judgment& judgment) {
  CriteriaSet c;
  for (const auto& id : judgment.order) c.push_back({id, id, Direction::Benefit, Scoring::Auto});
  return g1_weights(judgment, c);
}

// ---------------------------------------------------------------------------
// VIKOR

std::vector<std::string> VikorResult::ranked_ids() const {
  std::vector<std::string> out;
  for (auto i : ranking) out.push_back(alternatives[i]);
  return out;
}

namespace {

bool tied(double a, double b) { return std::abs(a - b) <= kTieTolerance; }

void check_matrix(const DecisionMatrix& m) {
  check_criteria(m.criteria);
  if (m.alternatives.empty()) throw Error(ErrorCode::NoAlternatives, "decision matrix has no alternatives", "/alternatives");
  if (m.scores.rows() != static_cast<Eigen::Index>(m.alternatives.size()) ||
      m.scores.cols() != static_cast<Eigen::Index>(m.criteria.size()))
    throw Error(ErrorCode::InvalidArgument, "score matrix shape does not match alternatives x criteria", "/scores");
  std::set<std::string> seen;
  for (std::size_t i = 0; i < m.alternatives.size(); ++i)
    if (!seen.insert(m.alternatives[i]).second)
      throw Error(ErrorCode::InvalidArgument, "duplicate alternative '" + m.alternatives[i] + "'",
                  "/alternatives/" + std::to_string(i));
  if (!m.scores.allFinite()) throw Error(ErrorCode::InvalidArgument, "scores must be finite", "/scores");
}

}  // namespace

VikorResult vikor(const DecisionMatrix& matrix, const Weights& weights, double v) {
  check_matrix(matrix);
  if (!(v >= 0.0 && v <= 1.0)) throw Error(ErrorCode::InvalidArgument, "strategy weight v must lie in [0, 1]", "/v");
  const auto m = static_cast<Eigen::Index>(matrix.criteria.size());
  Eigen::VectorXd w(m);
  Eigen::Array<bool, Eigen::Dynamic, 1> benefit(m);
  for (Eigen::Index j = 0; j < m; ++j) {
    const auto& c = matrix.criteria[static_cast<std::size_t>(j)];
    auto it = weights.find(c.id);
    if (it == weights.end()) throw Error(ErrorCode::InvalidArgument, "no weight for criterion '" + c.id + "'", "/weights/" + c.id);
    if (!std::isfinite(it->second) || it->second < 0.0)
      throw Error(ErrorCode::InvalidArgument, "weight for '" + c.id + "' must be finite and non-negative", "/weights/" + c.id);
    w(j) = it->second;
    benefit(j) = c.direction == Direction::Benefit;
  }

  VikorResult res;
  res.alternatives = matrix.alternatives;
  res.v = v;
  const auto n = matrix.alternatives.size();

  if (n == 1) {
    res.S = res.R = res.Q = Eigen::VectorXd::Zero(1);
    res.best = res.worst = matrix.scores.row(0).transpose();
    res.ranking = {0};
    res.compromise_set = {matrix.alternatives[0]};
    res.warnings.push_back({"SINGLE_ALTERNATIVE", matrix.alternatives[0], "one alternative; conditions skipped"});
    return res;
  }

  const auto idx = vikor_indices(matrix.scores, w, benefit, v);
  if (idx.degenerate.all())
    throw Error(ErrorCode::NoDiscrimination, "every criterion has identical scores across all alternatives", "/scores");
  for (Eigen::Index j = 0; j < m; ++j)
    if (idx.degenerate(j)) {
      const auto& id = matrix.criteria[static_cast<std::size_t>(j)].id;
      res.warnings.push_back({"DEGENERATE_CRITERION", id, "criterion '" + id + "' does not discriminate; its term is 0"});
    }
  if (idx.s_degenerate) res.warnings.push_back({"DEGENERATE_INDEX", "S", "all S values equal; S part of Q is 0"});
  if (idx.r_degenerate) res.warnings.push_back({"DEGENERATE_INDEX", "R", "all R values equal; R part of Q is 0"});

  res.S = idx.S;
  res.R = idx.R;
  res.Q = idx.Q;
  res.best = idx.best;
  res.worst = idx.worst;

  res.ranking.resize(n);
  std::iota(res.ranking.begin(), res.ranking.end(), std::size_t{0});
  std::sort(res.ranking.begin(), res.ranking.end(), [&](std::size_t a, std::size_t b) {
    const auto ia = static_cast<Eigen::Index>(a), ib = static_cast<Eigen::Index>(b);
    if (!tied(res.Q(ia), res.Q(ib))) return res.Q(ia) < res.Q(ib);
    if (!tied(res.S(ia), res.S(ib))) return res.S(ia) < res.S(ib);
    if (!tied(res.R(ia), res.R(ib))) return res.R(ia) < res.R(ib);
    return res.alternatives[a] < res.alternatives[b];
  });

  res.dq = 1.0 / static_cast<double>(n - 1);
  res.conditions_checked = true;
  const auto first = static_cast<Eigen::Index>(res.ranking[0]);
  const auto second = static_cast<Eigen::Index>(res.ranking[1]);
  res.acceptable_advantage = res.Q(second) - res.Q(first) >= res.dq - kTieTolerance;
  res.acceptable_stability =
      res.S(first) <= res.S.minCoeff() + kTieTolerance || res.R(first) <= res.R.minCoeff() + kTieTolerance;

  if (!res.acceptable_advantage) {
    for (auto i : res.ranking)
      if (res.Q(static_cast<Eigen::Index>(i)) - res.Q(first) < res.dq - kTieTolerance)
        res.compromise_set.push_back(res.alternatives[i]);
  } else if (!res.acceptable_stability) {
    res.compromise_set = {res.alternatives[res.ranking[0]], res.alternatives[res.ranking[1]]};
  } else {
    res.compromise_set = {res.alternatives[res.ranking[0]]};
  }
  return res;
}

// ---------------------------------------------------------------------------
// Auto criteria

namespace {

std::string frame_functions_text(const std::vector<FunctionExpr>& fs) {
  std::string out;
  for (const auto& f : fs) out += render(f) + " ";
  return out;
}

std::optional<std::string> verb_lemma(const std::string& word) {
  const auto w = to_lower(word);
  if (lexicon::is_base_verb(w)) return w;
  return lexicon::lemma_of(w);
}

void add_verb(std::set<std::string>& out, const FunctionExpr& f) {
  std::string verb;
  if (const auto* a = std::get_if<ActionDescription>(&f)) verb = a->verb;
  else if (const auto* s = std::get_if<StateTransition>(&f)) verb = s->change_verb;
  else verb = "transform";
  const auto words = split_words(verb);
  if (words.empty()) return;
  if (auto l = verb_lemma(words.front())) out.insert(*l);
}

}  // namespace

std::map<std::string, double> score_auto_criteria(const InversionResult& result, const DesignProblem& problem,
                                                  const std::optional<EnvironmentDesc>& target_env) {
  const auto& frame = result.engineering_frame;
  std::map<std::string, double> out;

  out[criteria::kFunctional] =
      jaccard(content_stems(join(problem.requirement_elements, " ")), content_stems(frame_functions_text(frame.functions)));

  std::set<std::string> req_verbs, beh_verbs;
  for (const auto& r : problem.requirement_elements)
    for (const auto& w : split_words(r))
      if (auto l = verb_lemma(w)) req_verbs.insert(*l);
  if (const auto words = split_words(frame.behavior.summary); !words.empty())
    if (auto l = verb_lemma(words.front())) beh_verbs.insert(*l);
  for (const auto& s : frame.behavior.steps) add_verb(beh_verbs, s);
  for (const auto& c : frame.behavior.causal_links) add_verb(beh_verbs, c.effect);
  out[criteria::kBehavioral] = jaccard(req_verbs, beh_verbs);

  const std::set<std::string> waived(result.waived_terms.begin(), result.waived_terms.end());
  std::set<std::size_t> dirty;
  for (const auto& u : result.unresolved) {
    if (waived.contains(u.term)) continue;
    constexpr std::string_view prefix = "/characteristics/";
    if (u.path.starts_with(prefix)) dirty.insert(std::stoul(u.path.substr(prefix.size())));
  }
  const auto nc = frame.characteristics.size();
  out[criteria::kCharacteristic] = nc == 0 ? 0.0 : static_cast<double>(nc - dirty.size()) / static_cast<double>(nc);

  out[criteria::kEnvironmental] = !frame.environment || !target_env
                                      ? 1.0
                                      : jaccard(content_stems(render(*frame.environment)), content_stems(render(*target_env)));
  return out;
}

DecisionRun rank_strategies(const std::vector<InversionResult>& kept, const DesignProblem& problem,
                            const std::optional<EnvironmentDesc>& target_env, const G1Judgment& judgment,
                            const ManualScores& manual, double v, const CriteriaSet& criteria) {
  if (kept.empty()) throw Error(ErrorCode::NoAlternatives, "no kept strategies to rank", "/kept");
  check_criteria(criteria);

  DecisionRun run;
  run.judgment = judgment;
  run.matrix.criteria = criteria;
  run.matrix.scores.resize(static_cast<Eigen::Index>(kept.size()), static_cast<Eigen::Index>(criteria.size()));
  for (std::size_t i = 0; i < kept.size(); ++i) {
    const auto& id = kept[i].id();
    run.matrix.alternatives.push_back(id);
    const auto autos = score_auto_criteria(kept[i], problem, target_env);
    const auto row = manual.find(id);
    for (std::size_t j = 0; j < criteria.size(); ++j) {
      const auto& c = criteria[j];
      double value = 0.0;
      if (c.scoring == Scoring::Auto) {
        auto it = autos.find(c.id);
        if (it == autos.end())
          throw Error(ErrorCode::InvalidArgument, "no automatic scoring for criterion '" + c.id + "'", "/criteria/" + c.id);
        value = it->second;
      } else {
        const auto missing = [&] {
          return Error(ErrorCode::MissingManualScore, "missing " + c.id + " score for alternative '" + id + "'",
                       "/manual_scores/" + id + "/" + c.id);
        };
        if (row == manual.end()) throw missing();
        auto it = row->second.find(c.id);
        if (it == row->second.end()) throw missing();
        value = it->second;
      }
      run.matrix.scores(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = value;
    }
  }
  run.weights = g1_weights(judgment, criteria);
  run.result = vikor(run.matrix, run.weights, v);
  return run;
}

// ---------------------------------------------------------------------------
// Clustering

namespace {

struct SlotTokens {
  std::set<std::string> functions, behavior, characteristics;
};

SlotTokens slot_tokens(const StrategyFrame& f) {
  SlotTokens t;
  t.functions = content_stems(frame_functions_text(f.functions));
  std::string beh = f.behavior.summary + " " + frame_functions_text(f.behavior.steps);
  for (const auto& c : f.behavior.causal_links) beh += render(c.effect) + " ";
  t.behavior = content_stems(beh);
  std::string chars;
  for (const auto& c : f.characteristics) chars += render(c) + " ";
  t.characteristics = content_stems(chars);
  return t;
}

double overlap(const std::set<std::string>& a, const std::set<std::string>& b) {
  return a.empty() && b.empty() ? 1.0 : jaccard(a, b);
}

double similarity(const SlotTokens& a, const SlotTokens& b) {
  return kFunctionSimilarityWeight * overlap(a.functions, b.functions) +
         kBehaviorSimilarityWeight * overlap(a.behavior, b.behavior) +
         kCharacteristicSimilarityWeight * overlap(a.characteristics, b.characteristics);
}

}  // namespace

double frame_similarity(const StrategyFrame& a, const StrategyFrame& b) {
  return similarity(slot_tokens(a), slot_tokens(b));
}

ClusterReport cluster_top(const VikorResult& result, const std::map<std::string, StrategyFrame>& frames, std::size_t k,
                          double threshold) {
  if (k < 1 || k > result.ranking.size())
    throw Error(ErrorCode::KOutOfRange,
                "k = " + std::to_string(k) + " outside 1.." + std::to_string(result.ranking.size()), "/k");
  if (!(threshold > 0.0 && threshold <= 1.0))
    throw Error(ErrorCode::InvalidArgument, "threshold must lie in (0, 1]", "/threshold");

  ClusterReport rep;
  rep.threshold = threshold;
  std::vector<SlotTokens> toks;
  for (std::size_t r = 0; r < k; ++r) {
    const auto& id = result.alternatives[result.ranking[r]];
    auto it = frames.find(id);
    if (it == frames.end()) throw Error(ErrorCode::NotFound, "no frame for ranked alternative '" + id + "'", "/frames/" + id);
    rep.ids.push_back(id);
    toks.push_back(slot_tokens(it->second));
  }

  const auto n = static_cast<Eigen::Index>(k);
  rep.similarity = Eigen::MatrixXd::Identity(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j)
      rep.similarity(i, j) = rep.similarity(j, i) =
          similarity(toks[static_cast<std::size_t>(i)], toks[static_cast<std::size_t>(j)]);

  // Members are rank positions; clusters stay ordered by their best member.
  std::vector<std::vector<Eigen::Index>> groups;
  for (Eigen::Index i = 0; i < n; ++i) groups.push_back({i});
  const auto linkage = [&](const auto& a, const auto& b) {
    double sum = 0.0;
    for (auto x : a)
      for (auto y : b) sum += rep.similarity(x, y);
    return sum / static_cast<double>(a.size() * b.size());
  };
  while (groups.size() > 1) {
    std::size_t ba = 0, bb = 0;
    double best = -1.0;
    for (std::size_t a = 0; a < groups.size(); ++a)
      for (std::size_t b = a + 1; b < groups.size(); ++b) {
        const double s = linkage(groups[a], groups[b]);
        if (s > best) best = s, ba = a, bb = b;
      }
    if (best < threshold) break;
    groups[ba].insert(groups[ba].end(), groups[bb].begin(), groups[bb].end());
    std::sort(groups[ba].begin(), groups[ba].end());
    groups.erase(groups.begin() + static_cast<std::ptrdiff_t>(bb));
  }

  for (const auto& g : groups) {
    std::vector<std::string> ids;
    for (auto i : g) ids.push_back(rep.ids[static_cast<std::size_t>(i)]);
    rep.clusters.push_back(ids);
    if (ids.size() < 2) continue;

    Composite c;
    c.members = ids;
    std::vector<ElementaryStrategy> parts;
    for (std::size_t p = 0; p < ids.size(); ++p) parts.push_back(as_elementary(frames.at(ids[p]), static_cast<int>(p + 1)));
    try {
      c.frame = compose(parts, "composite:" + join(ids, "+"));
    } catch (const Error& e) {
      c.note = std::string(to_string(e.code())) + ": " + e.what();
    }
    rep.composites.push_back(std::move(c));
  }
  return rep;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false, any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"' && i + 1 < text.size() && text[i + 1] == '"') field += '"', ++i;
      else if (c == '"') quoted = false;
      else field += c;
    } else if (c == '"') {
      quoted = true;
      any = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
      any = true;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      if (any || !field.empty()) row.push_back(std::move(field)), rows.push_back(std::move(row));
      row.clear();
      field.clear();
      any = false;
    } else {
      field += c;
      any = true;
    }
  }
  if (quoted) throw Error(ErrorCode::SchemaError, "unterminated quoted field", "/csv");
  if (any || !field.empty()) row.push_back(std::move(field)), rows.push_back(std::move(row));
  return rows;
}

std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace

std::string matrix_to_csv(const DecisionMatrix& matrix) {
  std::ostringstream os;
  os << "alternative";
  for (const auto& c : matrix.criteria) os << ',' << csv_field(c.id);
  os << '\n';
  for (std::size_t i = 0; i < matrix.alternatives.size(); ++i) {
    os << csv_field(matrix.alternatives[i]);
    for (Eigen::Index j = 0; j < matrix.scores.cols(); ++j)
      os << ',' << format_double(matrix.scores(static_cast<Eigen::Index>(i), j));
    os << '\n';
  }
  return os.str();
}

DecisionMatrix matrix_from_csv(std::string_view text, const CriteriaSet& criteria) {
  const auto rows = parse_csv(text);
  if (rows.empty()) throw Error(ErrorCode::SchemaError, "empty table", "/csv");
  const auto& header = rows[0];
  if (header.size() < 2) throw Error(ErrorCode::SchemaError, "header needs at least one criterion column", "/csv/0");

  DecisionMatrix m;
  for (std::size_t j = 1; j < header.size(); ++j) {
    auto it = std::find_if(criteria.begin(), criteria.end(), [&](const Criterion& c) { return c.id == header[j]; });
    if (it == criteria.end())
      throw Error(ErrorCode::SchemaError, "unknown criterion '" + header[j] + "'", "/csv/0/" + std::to_string(j));
    m.criteria.push_back(*it);
  }
  check_criteria(m.criteria);
  m.scores.resize(static_cast<Eigen::Index>(rows.size() - 1), static_cast<Eigen::Index>(header.size() - 1));
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& row = rows[i];
    const auto path = "/csv/" + std::to_string(i);
    if (row.size() != header.size())
      throw Error(ErrorCode::SchemaError, "row has " + std::to_string(row.size()) + " fields, expected " +
                                              std::to_string(header.size()),
                  path);
    m.alternatives.push_back(row[0]);
    for (std::size_t j = 1; j < row.size(); ++j) {
      const auto f = trim(row[j]);
      double x = 0.0;
      const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), x);
      if (ec != std::errc{} || ptr != f.data() + f.size() || !std::isfinite(x))
        throw Error(ErrorCode::SchemaError, "not a number: '" + row[j] + "'", path + "/" + std::to_string(j));
      m.scores(static_cast<Eigen::Index>(i - 1), static_cast<Eigen::Index>(j - 1)) = x;
    }
  }
  if (m.alternatives.empty()) throw Error(ErrorCode::NoAlternatives, "table has no alternative rows", "/csv");
  return m;
}

// ---------------------------------------------------------------------------
// JSON

namespace {

Json vec_json(const Eigen::VectorXd& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

}  // namespace

Json to_json(const Criterion& c) {
  return Json{{"id", c.id},
              {"name", c.name},
              {"direction", std::string(to_string(c.direction))},
              {"scoring", std::string(to_string(c.scoring))}};
}

Json to_json(const CriteriaSet& cs) {
  Json a = Json::array();
  for (const auto& c : cs) a.push_back(to_json(c));
  return a;
}

Criterion criterion_from_json(const Json& j, const std::string& path) {
  using namespace schema;
  allow_keys(j, path, {"id", "name", "direction", "scoring"});
  Criterion c;
  c.id = get_string(j, "id", path);
  c.name = j.contains("name") ? get_string(j, "name", path) : c.id;
  if (j.contains("direction")) {
    const auto d = get_string(j, "direction", path);
    if (d == "benefit") c.direction = Direction::Benefit;
    else if (d == "cost") c.direction = Direction::Cost;
    else fail(child(path, "direction"), "direction must be 'benefit' or 'cost'");
  }
  if (j.contains("scoring")) {
    const auto s = get_string(j, "scoring", path);
    if (s == "auto") c.scoring = Scoring::Auto;
    else if (s == "manual") c.scoring = Scoring::Manual;
    else fail(child(path, "scoring"), "scoring must be 'auto' or 'manual'");
  }
  return c;
}

CriteriaSet criteria_from_json(const Json& j, const std::string& path) {
  schema::expect_array(j, path);
  CriteriaSet out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(criterion_from_json(j[i], schema::child(path, i)));
  check_criteria(out);
  return out;
}

Json to_json(const G1Judgment& j) { return Json{{"order", j.order}, {"ratios", j.ratios}}; }

G1Judgment judgment_from_json(const Json& j, const std::string& path) {
  using namespace schema;
  allow_keys(j, path, {"order", "ratios"});
  G1Judgment g;
  g.order = get_string_array(j, "order", path);
  const auto& r = require(j, "ratios", path);
  expect_array(r, child(path, "ratios"));
  for (std::size_t i = 0; i < r.size(); ++i) g.ratios.push_back(as_number(r[i], child(child(path, "ratios"), i)));
  return g;
}

Json to_json(const DecisionMatrix& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.scores.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.scores.cols(); ++j) row.push_back(m.scores(i, j));
    rows.push_back(row);
  }
  return Json{{"alternatives", m.alternatives}, {"criteria", to_json(m.criteria)}, {"scores", rows}};
}

Json to_json(const VikorResult& r) {
  Json warnings = Json::array();
  for (const auto& w : r.warnings) warnings.push_back({{"code", w.code}, {"subject", w.subject}, {"message", w.message}});
  Json ranking = Json::array();
  for (std::size_t pos = 0; pos < r.ranking.size(); ++pos) {
    const auto i = static_cast<Eigen::Index>(r.ranking[pos]);
    ranking.push_back({{"rank", pos + 1}, {"id", r.alternatives[r.ranking[pos]]}, {"S", r.S(i)}, {"R", r.R(i)}, {"Q", r.Q(i)}});
  }
  Json conditions = nullptr;
  if (r.conditions_checked)
    conditions = {{"acceptable_advantage", r.acceptable_advantage}, {"acceptable_stability", r.acceptable_stability}};
  return Json{{"alternatives", r.alternatives},
              {"S", vec_json(r.S)},
              {"R", vec_json(r.R)},
              {"Q", vec_json(r.Q)},
              {"best", vec_json(r.best)},
              {"worst", vec_json(r.worst)},
              {"v", r.v},
              {"dq", r.dq},
              {"ranking", ranking},
              {"compromise_set", r.compromise_set},
              {"conditions", conditions},
              {"warnings", warnings}};
}

Json to_json(const DecisionRun& run) {
  Json weights = Json::object();
  for (const auto& [k, w] : run.weights) weights[k] = w;
  return Json{{"matrix", to_json(run.matrix)},
              {"judgment", to_json(run.judgment)},
              {"weights", weights},
              {"result", to_json(run.result)}};
}

Json to_json(const ClusterReport& r) {
  Json sim = Json::array();
  for (Eigen::Index i = 0; i < r.similarity.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < r.similarity.cols(); ++j) row.push_back(r.similarity(i, j));
    sim.push_back(row);
  }
  Json comps = Json::array();
  for (const auto& c : r.composites) {
    Json cj = {{"members", c.members}, {"note", c.note}};
    cj["frame"] = c.frame ? to_json(*c.frame) : Json(nullptr);
    comps.push_back(cj);
  }
  return Json{{"ids", r.ids},
              {"threshold", r.threshold},
              {"similarity", sim},
              {"clusters", r.clusters},
              {"composites", comps}};
}

namespace {

Eigen::VectorXd vec_from_json(const Json& j, const std::string& path) {
  schema::expect_array(j, path);
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = schema::as_number(j[i], schema::child(path, i));
  return v;
}

Eigen::MatrixXd rows_from_json(const Json& j, const std::string& path, Eigen::Index cols) {
  schema::expect_array(j, path);
  Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()), cols);
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto rp = schema::child(path, i);
    const auto row = vec_from_json(j[i], rp);
    if (row.size() != cols) schema::fail(rp, "expected " + std::to_string(cols) + " values");
    m.row(static_cast<Eigen::Index>(i)) = row.transpose();
  }
  return m;
}

}  // namespace

DecisionMatrix matrix_from_json(const Json& j, const std::string& path) {
  using namespace schema;
  allow_keys(j, path, {"alternatives", "criteria", "scores"});
  DecisionMatrix m;
  m.alternatives = get_string_array(j, "alternatives", path);
  m.criteria = criteria_from_json(require(j, "criteria", path), child(path, "criteria"));
  m.scores = rows_from_json(require(j, "scores", path), child(path, "scores"), static_cast<Eigen::Index>(m.criteria.size()));
  if (m.scores.rows() != static_cast<Eigen::Index>(m.alternatives.size()))
    fail(child(path, "scores"), "expected one row per alternative");
  return m;
}

VikorResult vikor_result_from_json(const Json& j, const std::string& path) {
  using namespace schema;
  allow_keys(j, path, {"alternatives", "S", "R", "Q", "best", "worst", "v", "dq", "ranking", "compromise_set", "conditions", "warnings"});
  VikorResult r;
  r.alternatives = get_string_array(j, "alternatives", path);
  r.S = vec_from_json(require(j, "S", path), child(path, "S"));
  r.R = vec_from_json(require(j, "R", path), child(path, "R"));
  r.Q = vec_from_json(require(j, "Q", path), child(path, "Q"));
  r.best = vec_from_json(require(j, "best", path), child(path, "best"));
  r.worst = vec_from_json(require(j, "worst", path), child(path, "worst"));
  r.v = as_number(require(j, "v", path), child(path, "v"));
  r.dq = as_number(require(j, "dq", path), child(path, "dq"));
  const auto rp = child(path, "ranking");
  const auto& ranking = require(j, "ranking", path);
  expect_array(ranking, rp);
  for (std::size_t k = 0; k < ranking.size(); ++k) {
    const auto ep = child(rp, k);
    const auto id = get_string(ranking[k], "id", ep);
    auto it = std::find(r.alternatives.begin(), r.alternatives.end(), id);
    if (it == r.alternatives.end()) fail(child(ep, "id"), "unknown alternative '" + id + "'");
    r.ranking.push_back(static_cast<std::size_t>(it - r.alternatives.begin()));
  }
  r.compromise_set = get_string_array(j, "compromise_set", path);
  const auto& cond = require(j, "conditions", path);
  if (!cond.is_null()) {
    const auto cp = child(path, "conditions");
    allow_keys(cond, cp, {"acceptable_advantage", "acceptable_stability"});
    r.conditions_checked = true;
    r.acceptable_advantage = as_bool(require(cond, "acceptable_advantage", cp), child(cp, "acceptable_advantage"));
    r.acceptable_stability = as_bool(require(cond, "acceptable_stability", cp), child(cp, "acceptable_stability"));
  }
  const auto wp = child(path, "warnings");
  const auto& warnings = require(j, "warnings", path);
  expect_array(warnings, wp);
  for (std::size_t k = 0; k < warnings.size(); ++k) {
    const auto ep = child(wp, k);
    allow_keys(warnings[k], ep, {"code", "subject", "message"});
    r.warnings.push_back({get_string(warnings[k], "code", ep), get_string(warnings[k], "subject", ep),
                          get_string(warnings[k], "message", ep)});
  }
  return r;
}

DecisionRun decision_run_from_json(const Json& j, const std::string& path) {
  using namespace schema;
  allow_keys(j, path, {"matrix", "judgment", "weights", "result"});
  DecisionRun run;
  run.matrix = matrix_from_json(require(j, "matrix", path), child(path, "matrix"));
  run.judgment = judgment_from_json(require(j, "judgment", path), child(path, "judgment"));
  const auto wp = child(path, "weights");
  const auto& w = require(j, "weights", path);
  expect_object(w, wp);
  for (auto it = w.begin(); it != w.end(); ++it) run.weights[it.key()] = as_number(it.value(), child(wp, it.key()));
  run.result = vikor_result_from_json(require(j, "result", path), child(path, "result"));
  return run;
}

ClusterReport cluster_report_from_json(const Json& j, const std::string& path) {
  using namespace schema;
  allow_keys(j, path, {"ids", "threshold", "similarity", "clusters", "composites"});
  ClusterReport r;
  r.ids = get_string_array(j, "ids", path);
  r.threshold = as_number(require(j, "threshold", path), child(path, "threshold"));
  r.similarity = rows_from_json(require(j, "similarity", path), child(path, "similarity"), static_cast<Eigen::Index>(r.ids.size()));
  const auto cp = child(path, "clusters");
  const auto& clusters = require(j, "clusters", path);
  expect_array(clusters, cp);
  for (std::size_t k = 0; k < clusters.size(); ++k) r.clusters.push_back(as_string_array(clusters[k], child(cp, k)));
  const auto mp = child(path, "composites");
  const auto& comps = require(j, "composites", path);
  expect_array(comps, mp);
  for (std::size_t k = 0; k < comps.size(); ++k) {
    const auto ep = child(mp, k);
    allow_keys(comps[k], ep, {"members", "note", "frame"});
    Composite c;
    c.members = get_string_array(comps[k], "members", ep);
    c.note = get_string(comps[k], "note", ep);
    const auto& f = require(comps[k], "frame", ep);
    if (!f.is_null()) c.frame = frame_from_json(f, child(ep, "frame"));
    r.composites.push_back(std::move(c));
  }
  return r;
}

}  // namespace bioinvert
