#pragma once

#include <optional>
#include <string>

#include "causalscore/dataset.hpp"
#include "causalscore/estimators.hpp"

namespace causalscore {

enum class ScoreDirection { higher_better, lower_better };

ScoreDirection direction_of(const std::string& score_name);

// One score on one split. n_effective counts the rows that actually
// contributed (policy-matched rows for ERUPT, post-subsample rows for the
// energy scores). raw_value carries the unstandardized energy score.
struct ScoreValue {
    std::string name;
    double value = 0.0;
    ScoreDirection direction = ScoreDirection::higher_better;
    std::string split;
    long n_effective = 0;
    bool subsampled = false;
    std::uint64_t subsample_seed = 0;
    bool degenerate_policy = false;
    std::optional<double> raw_value;
};

// Binary treatment assignment over the scored rows.
struct Policy {
    Vector assignment;  // 0/1, one entry per scored row
};

// Caps the exact O(n*m) energy computation; larger inputs are scored on a
// seeded uniform subsample of at most sqrt(budget) rows per side.
inline constexpr double kEnergyPairBudget = 2e7;

// Inverse-propensity-weighted policy value over idx:
//   (1/|idx|) * sum_j Y_j * [policy_j = T_j] / P(T = T_j | x_j)
// with P = p if T=1 else 1-p, propensities clipped to [0.01, 0.99].
// policy.assignment is aligned with idx. Throws NoMatchedRows when the
// policy never coincides with the observed assignment.
ScoreValue erupt(const Policy& policy, const CausalFrame& frame,
                 const Vector& propensity, const IndexList& idx);

// ERUPT of the policy "treat iff i_j > mean(i)". A constant policy is still
// scored but flagged degenerate_policy.
ScoreValue normalized_erupt(const EffectEstimate& estimate, const CausalFrame& frame,
                            const Vector& propensity, const IndexList& idx);

// Discrete Qini: rows ranked by impact descending (stable ties), cumulative
// uplift at each prefix compared against the random-targeting diagonal.
ScoreValue qini(const EffectEstimate& estimate, const CausalFrame& frame,
                const IndexList& idx);

// Exact two-sample energy distance between row sets A and B:
//   2/(nm) sum|a-b| - 1/n^2 sum|a-a'| - 1/m^2 sum|b-b'|   (Euclidean norm)
double energy_distance(const Matrix& a, const Matrix& b);

// Energy score for IV estimates: compares [standardized X | standardized
// corrected outcome] between the two instrument arms of valid_idx.
// Standardization statistics come from the Z=0 arm. raw_value holds the
// same comparison without standardization.
ScoreValue energy_score_iv(const EffectEstimate& estimate, const CausalFrame& frame,
                           const IndexList& valid_idx,
                           double pair_budget = kEnergyPairBudget,
                           std::uint64_t subsample_seed = 0);

// Same construction with arms defined by treatment; statistics from the
// T=0 arm. When a propensity vector (one entry per frame row) is supplied,
// control rows enter the energy statistic weighted by the odds p/(1-p) so
// the comparison is taken under the treated covariate distribution; with a
// constant propensity (randomized assignment) this reduces exactly to the
// unweighted statistic. Without confounding the weights change nothing;
// with confounding they stop the score from rewarding corrections that
// absorb the baseline imbalance between arms.
ScoreValue energy_score_cate(const EffectEstimate& estimate, const CausalFrame& frame,
                             const IndexList& valid_idx,
                             double pair_budget = kEnergyPairBudget,
                             std::uint64_t subsample_seed = 0,
                             const Vector& propensity = Vector());

// Mean squared error of the impact estimate against ground truth tau
// (full-length vector; synthetic data only).
ScoreValue mse_tau(const EffectEstimate& estimate, const Vector& tau,
                   const IndexList& idx);

// Mean impact over the scored rows, recorded for audits.
ScoreValue ate_score(const EffectEstimate& estimate);

// Spearman rank correlation with average ranks on ties; NaN when either
// input is constant.
double spearman(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace causalscore
