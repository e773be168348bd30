#pragma once

#include <memory>

#include "causalscore/dataset.hpp"
#include "causalscore/learners.hpp"

namespace causalscore {

enum class EstimatorFamily {
    s_learner,
    t_learner,
    x_learner,
    transformed_outcome,
    naive_pw,
    wald,
    linear_iv,
};

EstimatorFamily family_from_string(const std::string& name);
std::string to_string(EstimatorFamily family);
bool family_needs_instrument(EstimatorFamily family);

// Estimator description with a flat hyperparameter map. Recognized keys by
// family (all optional, defaults in parentheses):
//   CATE learners   outcome_learner: "ridge"|"boosted_stumps" ("boosted_stumps")
//                   effect_learner  (x_learner, transformed_outcome; same choices)
//                   ridge_l2 (1.0), bs_rounds (100), bs_lr (0.1), bs_depth (2)
//   propensity      propensity_learner: "prior"|"logistic" ("prior"),
//                   logistic_l2 (1e-6)
//   naive_pw        seed (0) for the 1% multiplicative noise draw
//   linear_iv       l2_first (0), l2_second (0),
//                   het_basis: "linear"|"pairwise" ("linear")
// A known propensity column on the frame always overrides a fitted one.
struct EstimatorSpec {
    EstimatorFamily family = EstimatorFamily::s_learner;
    Json hyperparams = Json::object();
};

// Per-unit effect estimates on a set of rows. corrected_outcome is
// y_j - impact_j * T_j: the outcome with the estimated treatment impact
// removed from treated rows.
struct EffectEstimate {
    Vector impact;
    double mean_impact = 0.0;
    Vector corrected_outcome;
};

class FittedEstimator {
public:
    virtual ~FittedEstimator() = default;
    const EstimatorSpec& spec() const { return spec_; }
    Eigen::Index n_features() const { return n_features_; }

    // Per-unit impact i_j for the requested rows.
    virtual Vector impact(const CausalFrame& frame, const IndexList& idx) const = 0;

protected:
    FittedEstimator(EstimatorSpec spec, Eigen::Index n_features)
        : spec_(std::move(spec)), n_features_(n_features) {}

    EstimatorSpec spec_;
    Eigen::Index n_features_;
};

// Trains the requested family on the training rows. CATE families need both
// treatment arms in train_idx; IV families need the instrument and both of
// its arms.
std::unique_ptr<FittedEstimator> fit_estimator(const EstimatorSpec& spec,
                                               const CausalFrame& frame,
                                               const IndexList& train_idx);

EffectEstimate estimate_effect(const FittedEstimator& model, const CausalFrame& frame,
                               const IndexList& idx);

// Row-subset helpers shared with scoring and search.
Matrix gather_rows(const Matrix& m, const IndexList& idx);
Vector gather(const Vector& v, const IndexList& idx);

}  // namespace causalscore
