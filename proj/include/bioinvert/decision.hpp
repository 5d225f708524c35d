#pragma once

// G1 weighting, VIKOR ranking and similarity clustering of screened strategies.
//
// The numeric cores (g1_recurrence, vikor_indices) are templated over Eigen
// dense expressions so fixed-size callers run without heap allocation; the
// id-keyed wrappers below them work on dynamic matrices.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bioinvert/error.hpp"
#include "bioinvert/inversion.hpp"
#include "bioinvert/knowledge.hpp"

namespace bioinvert {

enum class Direction { Benefit, Cost };
enum class Scoring { Auto, Manual };

std::string_view to_string(Direction d);
std::string_view to_string(Scoring s);

struct Criterion {
  std::string id;
  std::string name;
  Direction direction = Direction::Benefit;
  Scoring scoring = Scoring::Auto;
  friend bool operator==(const Criterion&, const Criterion&) = default;
};

using CriteriaSet = std::vector<Criterion>;

namespace criteria {
inline constexpr const char* kFunctional = "functional_compliance";
inline constexpr const char* kBehavioral = "behavioral_alignment";
inline constexpr const char* kCharacteristic = "characteristic_consistency";
inline constexpr const char* kEnvironmental = "environmental_migration";
inline constexpr const char* kReliability = "reliability";
inline constexpr const char* kEconomic = "economic_tolerance";
}  // namespace criteria

// The six indicators; four Auto, two Manual, all Benefit.
const CriteriaSet& default_criteria();

// Throws InvalidArgument on empty or duplicate ids.
void check_criteria(const CriteriaSet& criteria);

inline constexpr double kMinRatio = 1.0;
inline constexpr double kMaxRatio = 1.8;

struct G1Judgment {
  std::vector<std::string> order;  // most -> least important
  std::vector<double> ratios;      // r_k = w_{k-1} / w_k, k = 2..m
  friend bool operator==(const G1Judgment&, const G1Judgment&) = default;
};

// Default criteria order with every ratio 1.2.
G1Judgment default_judgment();

using Weights = std::map<std::string, double>;

// w_m = 1 / (1 + sum_{k=2..m} prod_{j=k..m} r_j),  w_{k-1} = r_k * w_k.
// `ratios` holds r_2..r_m; the result has one more entry. No validation.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar,
              Derived::SizeAtCompileTime == Eigen::Dynamic ? Eigen::Dynamic : Derived::SizeAtCompileTime + 1, 1>
g1_recurrence(const Eigen::MatrixBase<Derived>& ratios) {
  using Scalar = typename Derived::Scalar;
  constexpr int N = Derived::SizeAtCompileTime == Eigen::Dynamic ? Eigen::Dynamic : Derived::SizeAtCompileTime + 1;
  const Eigen::Index m = ratios.size() + 1;
  Eigen::Matrix<Scalar, N, 1> w(m);
  Scalar tail = Scalar(1);  // prod_{j=k..m} r_j, built from the back
  Scalar denom = Scalar(1);
  for (Eigen::Index k = m - 1; k >= 1; --k) {
    tail *= ratios(k - 1);
    denom += tail;
  }
  w(m - 1) = Scalar(1) / denom;
  for (Eigen::Index k = m - 1; k >= 1; --k) w(k - 1) = ratios(k - 1) * w(k);
  return w;
}

// Validates the judgment (LengthMismatch, BadRatio; InvalidArgument when the
// order is not a permutation of `criteria` ids) and applies the recurrence.
Weights g1_weights(const G1Judgment& judgment, const CriteriaSet& criteria);
Weights g1_weights(const G1Judgment& judgment);  // order taken as the criteria set

struct DecisionMatrix {
  std::vector<std::string> alternatives;
  CriteriaSet criteria;
  Eigen::MatrixXd scores;  // alternatives x criteria
};

// Per-alternative S/R/Q plus what went into them. Entries with f* == f- are
// flagged degenerate and contribute 0; a zero S or R spread makes that half
// of Q zero as well.
template <typename Scalar, int Rows, int Cols>
struct VikorIndices {
  Eigen::Matrix<Scalar, Rows, 1> S, R, Q;
  Eigen::Matrix<Scalar, Cols, 1> best, worst;
  Eigen::Array<bool, Cols, 1> degenerate;
  bool s_degenerate = false;
  bool r_degenerate = false;
};

// f: alternatives x criteria; w: criteria weights; benefit(j) true for
// larger-is-better columns. Requires at least one row.
template <typename DerivedF, typename DerivedW, typename DerivedB>
VikorIndices<typename DerivedF::Scalar, DerivedF::RowsAtCompileTime, DerivedF::ColsAtCompileTime> vikor_indices(
    const Eigen::MatrixBase<DerivedF>& f, const Eigen::MatrixBase<DerivedW>& w, const Eigen::ArrayBase<DerivedB>& benefit,
    typename DerivedF::Scalar v) {
  using Scalar = typename DerivedF::Scalar;
  VikorIndices<Scalar, DerivedF::RowsAtCompileTime, DerivedF::ColsAtCompileTime> out;
  const Eigen::Index n = f.rows(), m = f.cols();
  out.best.resize(m);
  out.worst.resize(m);
  out.degenerate.resize(m);
  out.S.setZero(n);
  out.R.setZero(n);
  out.Q.setZero(n);

  for (Eigen::Index j = 0; j < m; ++j) {
    const Scalar hi = f.col(j).maxCoeff(), lo = f.col(j).minCoeff();
    out.best(j) = benefit(j) ? hi : lo;
    out.worst(j) = benefit(j) ? lo : hi;
    out.degenerate(j) = hi == lo;
    if (out.degenerate(j)) continue;
    const Scalar span = out.best(j) - out.worst(j);
    for (Eigen::Index i = 0; i < n; ++i) {
      const Scalar term = w(j) * (out.best(j) - f(i, j)) / span;
      out.S(i) += term;
      out.R(i) = std::max(out.R(i), term);
    }
  }

  const Scalar s_star = out.S.minCoeff(), s_minus = out.S.maxCoeff();
  const Scalar r_star = out.R.minCoeff(), r_minus = out.R.maxCoeff();
  out.s_degenerate = s_minus == s_star;
  out.r_degenerate = r_minus == r_star;
  for (Eigen::Index i = 0; i < n; ++i) {
    Scalar q = Scalar(0);
    if (!out.s_degenerate) q += v * (out.S(i) - s_star) / (s_minus - s_star);
    if (!out.r_degenerate) q += (Scalar(1) - v) * (out.R(i) - r_star) / (r_minus - r_star);
    out.Q(i) = q;
  }
  return out;
}

inline constexpr double kDefaultStrategyWeight = 0.5;
// Index values closer than this are treated as tied when ranking.
inline constexpr double kTieTolerance = 1e-12;

struct VikorWarning {
  std::string code;  // DEGENERATE_CRITERION | DEGENERATE_INDEX | SINGLE_ALTERNATIVE
  std::string subject;  // criterion id, "S"/"R", or alternative id
  std::string message;
  friend bool operator==(const VikorWarning&, const VikorWarning&) = default;
};

struct VikorResult {
  std::vector<std::string> alternatives;  // matrix order
  Eigen::VectorXd S, R, Q;
  Eigen::VectorXd best, worst;  // f*_j, f-_j
  double v = kDefaultStrategyWeight;
  std::vector<std::size_t> ranking;  // indices into alternatives, best first
  std::vector<std::string> compromise_set;
  double dq = 0.0;
  bool conditions_checked = false;
  bool acceptable_advantage = false;
  bool acceptable_stability = false;
  std::vector<VikorWarning> warnings;

  std::vector<std::string> ranked_ids() const;
};

// Throws NoDiscrimination when every criterion is degenerate across two or
// more alternatives, InvalidArgument on shape/weight/v problems.
VikorResult vikor(const DecisionMatrix& matrix, const Weights& weights, double v = kDefaultStrategyWeight);

// Auto criteria for one kept result; target_env absent means no constraint.
std::map<std::string, double> score_auto_criteria(const InversionResult& result, const DesignProblem& problem,
                                                  const std::optional<EnvironmentDesc>& target_env);

// alternative id -> criterion id -> score, for every Manual criterion.
using ManualScores = std::map<std::string, std::map<std::string, double>>;

struct DecisionRun {
  DecisionMatrix matrix;
  G1Judgment judgment;
  Weights weights;
  VikorResult result;
};

// Builds the matrix from auto + manual scores, weights it and ranks it.
// Throws NoAlternatives, MissingManualScore (path names alternative/criterion).
DecisionRun rank_strategies(const std::vector<InversionResult>& kept, const DesignProblem& problem,
                            const std::optional<EnvironmentDesc>& target_env, const G1Judgment& judgment,
                            const ManualScores& manual, double v = kDefaultStrategyWeight,
                            const CriteriaSet& criteria = default_criteria());

inline constexpr double kFunctionSimilarityWeight = 0.4;
inline constexpr double kBehaviorSimilarityWeight = 0.3;
inline constexpr double kCharacteristicSimilarityWeight = 0.3;

// Weighted token-set overlap of the function, behavior and characteristic slots.
double frame_similarity(const StrategyFrame& a, const StrategyFrame& b);

struct Composite {
  std::vector<std::string> members;
  std::optional<StrategyFrame> frame;  // absent when composition failed
  std::string note;
};

struct ClusterReport {
  std::vector<std::string> ids;  // top-k in ranking order
  Eigen::MatrixXd similarity;
  double threshold = 0.5;
  std::vector<std::vector<std::string>> clusters;
  std::vector<Composite> composites;  // one per cluster with >= 2 members
};

// Average-linkage agglomeration over the top-k ranked frames. `frames` must
// contain every ranked id. Throws KOutOfRange, InvalidArgument on threshold.
ClusterReport cluster_top(const VikorResult& result, const std::map<std::string, StrategyFrame>& frames, std::size_t k,
                          double threshold);

// Delimited tables: header "alternative,<criterion ids>", one row per alternative.
std::string matrix_to_csv(const DecisionMatrix& matrix);
// Criterion ids in the header are resolved against `criteria`.
DecisionMatrix matrix_from_csv(std::string_view text, const CriteriaSet& criteria = default_criteria());

Json to_json(const Criterion& c);
Json to_json(const CriteriaSet& c);
Criterion criterion_from_json(const Json& j, const std::string& path);
CriteriaSet criteria_from_json(const Json& j, const std::string& path = "");
Json to_json(const G1Judgment& j);
G1Judgment judgment_from_json(const Json& j, const std::string& path = "");
Json to_json(const DecisionMatrix& m);
Json to_json(const VikorResult& r);
Json to_json(const DecisionRun& run);
Json to_json(const ClusterReport& r);
DecisionMatrix matrix_from_json(const Json& j, const std::string& path = "");
VikorResult vikor_result_from_json(const Json& j, const std::string& path = "");
DecisionRun decision_run_from_json(const Json& j, const std::string& path = "");
ClusterReport cluster_report_from_json(const Json& j, const std::string& path = "");

}  // namespace bioinvert
