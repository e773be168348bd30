#pragma once

#include <memory>
#include <nlohmann/json.hpp>

#include "causalscore/dataset.hpp"

namespace causalscore {

using Json = nlohmann::json;

// Probabilities from classifiers are clipped to this band so every inverse
// propensity weight stays bounded.
inline constexpr double kProbClipLo = 0.01;
inline constexpr double kProbClipHi = 0.99;

enum class LearnerKind { ridge, boosted_stumps, logistic, prior };

LearnerKind learner_kind_from_string(const std::string& name);
std::string to_string(LearnerKind kind);

// Component-model description. Params are kind-specific:
//   ridge          l2 >= 0                       (default 1.0)
//   boosted_stumps n_rounds >= 1, learning_rate in (0,1], max_depth in {1,2,3}
//                                                (defaults 100, 0.1, 2)
//   logistic       l2 >= 0, max_iter >= 1        (defaults 1e-6, 100)
//   prior          none
// Unknown or out-of-range keys are rejected at fit time.
struct LearnerSpec {
    LearnerKind kind = LearnerKind::ridge;
    Json params = Json::object();

    static LearnerSpec ridge(double l2 = 1.0);
    static LearnerSpec boosted_stumps(int n_rounds = 100, double learning_rate = 0.1,
                                      int max_depth = 2);
    static LearnerSpec logistic(double l2 = 1e-6, int max_iter = 100);
    static LearnerSpec prior();
};

class FittedLearner {
public:
    virtual ~FittedLearner() = default;

    // One value per row of x; classifiers return clipped probabilities.
    Vector predict(const Matrix& x) const;

    const LearnerSpec& spec() const { return spec_; }
    Eigen::Index n_features() const { return n_features_; }
    bool is_classifier() const;

    // Squared (regression) or log (classification) training loss per round;
    // empty for non-iterative kinds.
    virtual std::vector<double> training_loss_curve() const { return {}; }

protected:
    FittedLearner(LearnerSpec spec, Eigen::Index n_features)
        : spec_(std::move(spec)), n_features_(n_features) {}
    virtual Vector predict_impl(const Matrix& x) const = 0;

    LearnerSpec spec_;
    Eigen::Index n_features_;
};

// Deterministic fit of the component model described by spec.
// Classification targets must be 0/1. Ridge with l2 = 0 raises
// SingularSystem on rank-deficient inputs.
std::unique_ptr<FittedLearner> fit(const LearnerSpec& spec, const Matrix& x,
                                   const Vector& target);

}  // namespace causalscore
