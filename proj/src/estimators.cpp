#include "causalscore/estimators.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

#include "causalscore/rng.hpp"

namespace causalscore {

namespace {

double clip_prob(double p) { return std::clamp(p, kProbClipLo, kProbClipHi); }

LearnerSpec regressor_spec(const Json& hp, const char* kind_key) {
    const std::string kind = hp.value(kind_key, "boosted_stumps");
    if (kind == "ridge") return LearnerSpec::ridge(hp.value("ridge_l2", 1.0));
    if (kind == "boosted_stumps")
        return LearnerSpec::boosted_stumps(static_cast<int>(hp.value("bs_rounds", 100.0)),
                                           hp.value("bs_lr", 0.1),
                                           static_cast<int>(hp.value("bs_depth", 2.0)));
    throw ConfigError("unknown regressor kind '" + kind + "'");
}

LearnerSpec propensity_spec(const Json& hp) {
    const std::string kind = hp.value("propensity_learner", "prior");
    if (kind == "prior") return LearnerSpec::prior();
    if (kind == "logistic") return LearnerSpec::logistic(hp.value("logistic_l2", 1e-6), 100);
    throw ConfigError("unknown propensity kind '" + kind + "'");
}

void require_both_arms(const Vector& arm, const IndexList& idx, const char* what) {
    bool has0 = false, has1 = false;
    for (int i : idx) (arm[i] == 1.0 ? has1 : has0) = true;
    if (!has0 || !has1)
        throw SingleArmTrainingData(std::string(what) + " has a single arm in training rows");
}

IndexList arm_subset(const Vector& arm, const IndexList& idx, double value) {
    IndexList out;
    for (int i : idx) {
        if (arm[i] == value) out.push_back(i);
    }
    return out;
}

// Propensity source for a fitted estimator: the frame's known column when
// present, otherwise a classifier trained on the training rows.
class PropensitySource {
public:
    static PropensitySource make(const Json& hp, const CausalFrame& frame,
                                 const IndexList& train_idx) {
        PropensitySource src;
        if (frame.propensity) return src;  // known column wins
        src.model_ = fit(propensity_spec(hp), gather_rows(frame.covariates, train_idx),
                         gather(frame.treatment, train_idx));
        return src;
    }

    Vector at(const CausalFrame& frame, const IndexList& idx) const {
        Vector p;
        if (model_) {
            p = model_->predict(gather_rows(frame.covariates, idx));
        } else {
            p = gather(*frame.propensity, idx);
        }
        for (Eigen::Index i = 0; i < p.size(); ++i) p[i] = clip_prob(p[i]);
        return p;
    }

private:
    std::shared_ptr<const FittedLearner> model_;
};

// ---------------------------------------------------------------------------

class SLearner final : public FittedEstimator {
public:
    SLearner(EstimatorSpec spec, const CausalFrame& frame, const IndexList& train_idx)
        : FittedEstimator(std::move(spec), frame.n_cols()) {
        require_both_arms(frame.treatment, train_idx, "treatment");
        const Eigen::Index n = static_cast<Eigen::Index>(train_idx.size());
        Matrix design(n, n_features_ + 1);
        design.leftCols(n_features_) = gather_rows(frame.covariates, train_idx);
        design.col(n_features_) = gather(frame.treatment, train_idx);
        model_ = fit(regressor_spec(spec_.hyperparams, "outcome_learner"), design,
                     gather(frame.outcome, train_idx));
    }

    Vector impact(const CausalFrame& frame, const IndexList& idx) const override {
        Matrix design(static_cast<Eigen::Index>(idx.size()), n_features_ + 1);
        design.leftCols(n_features_) = gather_rows(frame.covariates, idx);
        design.col(n_features_).setOnes();
        const Vector treated = model_->predict(design);
        design.col(n_features_).setZero();
        return treated - model_->predict(design);
    }

private:
    std::unique_ptr<FittedLearner> model_;
};

class TLearner final : public FittedEstimator {
public:
    TLearner(EstimatorSpec spec, const CausalFrame& frame, const IndexList& train_idx)
        : FittedEstimator(std::move(spec), frame.n_cols()) {
        require_both_arms(frame.treatment, train_idx, "treatment");
        const IndexList treated = arm_subset(frame.treatment, train_idx, 1.0);
        const IndexList control = arm_subset(frame.treatment, train_idx, 0.0);
        if (treated.size() < 2 || control.size() < 2)
            throw SingleArmTrainingData("t_learner needs >= 2 rows per arm");
        const LearnerSpec learner = regressor_spec(spec_.hyperparams, "outcome_learner");
        arm1_ = fit(learner, gather_rows(frame.covariates, treated),
                    gather(frame.outcome, treated));
        arm0_ = fit(learner, gather_rows(frame.covariates, control),
                    gather(frame.outcome, control));
    }

    Vector impact(const CausalFrame& frame, const IndexList& idx) const override {
        const Matrix x = gather_rows(frame.covariates, idx);
        return arm1_->predict(x) - arm0_->predict(x);
    }

private:
    std::unique_ptr<FittedLearner> arm0_;
    std::unique_ptr<FittedLearner> arm1_;
};

class XLearner final : public FittedEstimator {
public:
    XLearner(EstimatorSpec spec, const CausalFrame& frame, const IndexList& train_idx)
        : FittedEstimator(std::move(spec), frame.n_cols()) {
        require_both_arms(frame.treatment, train_idx, "treatment");
        const IndexList treated = arm_subset(frame.treatment, train_idx, 1.0);
        const IndexList control = arm_subset(frame.treatment, train_idx, 0.0);
        if (treated.size() < 2 || control.size() < 2)
            throw SingleArmTrainingData("x_learner needs >= 2 rows per arm");

        const Matrix x1 = gather_rows(frame.covariates, treated);
        const Matrix x0 = gather_rows(frame.covariates, control);
        const Vector y1 = gather(frame.outcome, treated);
        const Vector y0 = gather(frame.outcome, control);

        const LearnerSpec outcome = regressor_spec(spec_.hyperparams, "outcome_learner");
        const auto f1 = fit(outcome, x1, y1);
        const auto f0 = fit(outcome, x0, y0);

        // imputed per-arm effects, then effect regressors per arm
        const Vector d1 = y1 - f0->predict(x1);
        const Vector d0 = f1->predict(x0) - y0;
        const LearnerSpec effect = regressor_spec(spec_.hyperparams, "effect_learner");
        g1_ = fit(effect, x1, d1);
        g0_ = fit(effect, x0, d0);

        propensity_ = PropensitySource::make(spec_.hyperparams, frame, train_idx);
    }

    Vector impact(const CausalFrame& frame, const IndexList& idx) const override {
        const Matrix x = gather_rows(frame.covariates, idx);
        const Vector p = propensity_.at(frame, idx);
        const Vector e1 = g1_->predict(x);
        const Vector e0 = g0_->predict(x);
        // blend: weight the control-side estimate by p, treated-side by 1-p
        return (p.array() * e0.array() + (1.0 - p.array()) * e1.array()).matrix();
    }

private:
    std::unique_ptr<FittedLearner> g0_;
    std::unique_ptr<FittedLearner> g1_;
    PropensitySource propensity_;
};

class TransformedOutcome final : public FittedEstimator {
public:
    TransformedOutcome(EstimatorSpec spec, const CausalFrame& frame,
                       const IndexList& train_idx)
        : FittedEstimator(std::move(spec), frame.n_cols()) {
        require_both_arms(frame.treatment, train_idx, "treatment");
        const auto propensity = PropensitySource::make(spec_.hyperparams, frame, train_idx);
        const Vector p = propensity.at(frame, train_idx);
        const Vector t = gather(frame.treatment, train_idx);
        const Vector y = gather(frame.outcome, train_idx);

        Vector transformed(t.size());
        for (Eigen::Index i = 0; i < t.size(); ++i)
            transformed[i] = t[i] * y[i] / p[i] - (1.0 - t[i]) * y[i] / (1.0 - p[i]);

        model_ = fit(regressor_spec(spec_.hyperparams, "effect_learner"),
                     gather_rows(frame.covariates, train_idx), transformed);
    }

    Vector impact(const CausalFrame& frame, const IndexList& idx) const override {
        return model_->predict(gather_rows(frame.covariates, idx));
    }

private:
    std::unique_ptr<FittedLearner> model_;
};

class NaivePw final : public FittedEstimator {
public:
    NaivePw(EstimatorSpec spec, const CausalFrame& frame, const IndexList& train_idx)
        : FittedEstimator(std::move(spec), frame.n_cols()) {
        require_both_arms(frame.treatment, train_idx, "treatment");
        const auto propensity = PropensitySource::make(spec_.hyperparams, frame, train_idx);
        const Vector p = propensity.at(frame, train_idx);
        const Vector t = gather(frame.treatment, train_idx);
        const Vector y = gather(frame.outcome, train_idx);

        double w1 = 0.0, s1 = 0.0, w0 = 0.0, s0 = 0.0;
        for (Eigen::Index i = 0; i < t.size(); ++i) {
            if (t[i] == 1.0) {
                w1 += 1.0 / p[i];
                s1 += y[i] / p[i];
            } else {
                w0 += 1.0 / (1.0 - p[i]);
                s0 += y[i] / (1.0 - p[i]);
            }
        }
        const double diff = s1 / w1 - s0 / w0;

        // 1% multiplicative noise, one draw from the trial seed
        Rng rng(spec_.hyperparams.value("seed", 0ULL));
        effect_ = diff * (1.0 + rng.normal(0.0, 0.01));
    }

    Vector impact(const CausalFrame&, const IndexList& idx) const override {
        return Vector::Constant(static_cast<Eigen::Index>(idx.size()), effect_);
    }

private:
    double effect_ = 0.0;
};

class WaldEstimator final : public FittedEstimator {
public:
    WaldEstimator(EstimatorSpec spec, const CausalFrame& frame, const IndexList& train_idx)
        : FittedEstimator(std::move(spec), frame.n_cols()) {
        if (!frame.instrument) throw MissingInstrument("wald requires an instrument column");
        require_both_arms(*frame.instrument, train_idx, "instrument");
        const Vector z = gather(*frame.instrument, train_idx);
        const Vector t = gather(frame.treatment, train_idx);
        const Vector y = gather(frame.outcome, train_idx);

        double n1 = 0.0, n0 = 0.0, y1 = 0.0, y0 = 0.0, t1 = 0.0, t0 = 0.0;
        for (Eigen::Index i = 0; i < z.size(); ++i) {
            if (z[i] == 1.0) {
                n1 += 1.0;
                y1 += y[i];
                t1 += t[i];
            } else {
                n0 += 1.0;
                y0 += y[i];
                t0 += t[i];
            }
        }
        const double denom = t1 / n1 - t0 / n0;
        if (std::abs(denom) < 1e-6)
            throw WeakInstrument("treatment uptake difference " + std::to_string(denom));
        effect_ = (y1 / n1 - y0 / n0) / denom;
    }

    Vector impact(const CausalFrame&, const IndexList& idx) const override {
        return Vector::Constant(static_cast<Eigen::Index>(idx.size()), effect_);
    }

private:
    double effect_ = 0.0;
};

// Heterogeneity basis for linear_iv: the raw covariates, optionally extended
// with all pairwise products x_a*x_b (a <= b).
Matrix het_basis(const Matrix& x, bool pairwise) {
    if (!pairwise) return x;
    const Eigen::Index d = x.cols();
    Matrix out(x.rows(), d + d * (d + 1) / 2);
    out.leftCols(d) = x;
    Eigen::Index col = d;
    for (Eigen::Index a = 0; a < d; ++a)
        for (Eigen::Index b = a; b < d; ++b)
            out.col(col++) = x.col(a).cwiseProduct(x.col(b));
    return out;
}

Vector ridge_solve(const Matrix& design, const Vector& target, double l2) {
    Matrix gram = design.transpose() * design;
    // intercept in column 0 stays unpenalized
    for (Eigen::Index j = 1; j < gram.cols(); ++j) gram(j, j) += l2;
    Eigen::ColPivHouseholderQR<Matrix> qr(gram);
    const Vector beta = qr.solve(design.transpose() * target);
    if (!beta.allFinite()) throw SingularSystem("linear_iv stage solve failed");
    return beta;
}

class LinearIv final : public FittedEstimator {
public:
    LinearIv(EstimatorSpec spec, const CausalFrame& frame, const IndexList& train_idx)
        : FittedEstimator(std::move(spec), frame.n_cols()),
          pairwise_(spec_.hyperparams.value("het_basis", "linear") == std::string("pairwise")) {
        if (!frame.instrument) throw MissingInstrument("linear_iv requires an instrument column");
        require_both_arms(*frame.instrument, train_idx, "instrument");
        const double l2_first = spec_.hyperparams.value("l2_first", 0.0);
        const double l2_second = spec_.hyperparams.value("l2_second", 0.0);

        const Matrix x = gather_rows(frame.covariates, train_idx);
        const Vector z = gather(*frame.instrument, train_idx);
        const Vector t = gather(frame.treatment, train_idx);
        const Vector y = gather(frame.outcome, train_idx);
        const Matrix phi = het_basis(x, pairwise_);
        const Eigen::Index n = x.rows();
        const Eigen::Index k = phi.cols();
        const Eigen::Index d = x.cols();

        // first stage: T on (1, Z, Z*phi(X), X)
        Matrix first(n, 2 + k + d);
        first.col(0).setOnes();
        first.col(1) = z;
        first.middleCols(2, k) = (phi.array().colwise() * z.array()).matrix();
        first.rightCols(d) = x;
        const Vector gamma = ridge_solve(first, t, l2_first);
        const Vector t_hat = first * gamma;

        // second stage: Y on (1, T_hat, T_hat*phi(X), X)
        Matrix second(n, 2 + k + d);
        second.col(0).setOnes();
        second.col(1) = t_hat;
        second.middleCols(2, k) = (phi.array().colwise() * t_hat.array()).matrix();
        second.rightCols(d) = x;
        const Vector beta = ridge_solve(second, y, l2_second);

        effect_intercept_ = beta[1];
        effect_slopes_ = beta.segment(2, k);
    }

    Vector impact(const CausalFrame& frame, const IndexList& idx) const override {
        const Matrix phi = het_basis(gather_rows(frame.covariates, idx), pairwise_);
        return ((phi * effect_slopes_).array() + effect_intercept_).matrix();
    }

    double effect_intercept() const { return effect_intercept_; }
    const Vector& effect_slopes() const { return effect_slopes_; }

private:
    bool pairwise_;
    double effect_intercept_ = 0.0;
    Vector effect_slopes_;
};

}  // namespace

EstimatorFamily family_from_string(const std::string& name) {
    if (name == "s_learner") return EstimatorFamily::s_learner;
    if (name == "t_learner") return EstimatorFamily::t_learner;
    if (name == "x_learner") return EstimatorFamily::x_learner;
    if (name == "transformed_outcome") return EstimatorFamily::transformed_outcome;
    if (name == "naive_pw") return EstimatorFamily::naive_pw;
    if (name == "wald") return EstimatorFamily::wald;
    if (name == "linear_iv") return EstimatorFamily::linear_iv;
    throw UnknownFamily("'" + name + "'");
}

std::string to_string(EstimatorFamily family) {
    switch (family) {
        case EstimatorFamily::s_learner: return "s_learner";
        case EstimatorFamily::t_learner: return "t_learner";
        case EstimatorFamily::x_learner: return "x_learner";
        case EstimatorFamily::transformed_outcome: return "transformed_outcome";
        case EstimatorFamily::naive_pw: return "naive_pw";
        case EstimatorFamily::wald: return "wald";
        case EstimatorFamily::linear_iv: return "linear_iv";
    }
    return "?";
}

bool family_needs_instrument(EstimatorFamily family) {
    return family == EstimatorFamily::wald || family == EstimatorFamily::linear_iv;
}

Matrix gather_rows(const Matrix& m, const IndexList& idx) {
    Matrix out(static_cast<Eigen::Index>(idx.size()), m.cols());
    for (std::size_t r = 0; r < idx.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = m.row(idx[r]);
    return out;
}

Vector gather(const Vector& v, const IndexList& idx) {
    Vector out(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t r = 0; r < idx.size(); ++r) out[static_cast<Eigen::Index>(r)] = v[idx[r]];
    return out;
}

std::unique_ptr<FittedEstimator> fit_estimator(const EstimatorSpec& spec,
                                               const CausalFrame& frame,
                                               const IndexList& train_idx) {
    if (train_idx.empty()) throw ShapeMismatch("empty training index list");
    switch (spec.family) {
        case EstimatorFamily::s_learner:
            return std::make_unique<SLearner>(spec, frame, train_idx);
        case EstimatorFamily::t_learner:
            return std::make_unique<TLearner>(spec, frame, train_idx);
        case EstimatorFamily::x_learner:
            return std::make_unique<XLearner>(spec, frame, train_idx);
        case EstimatorFamily::transformed_outcome:
            return std::make_unique<TransformedOutcome>(spec, frame, train_idx);
        case EstimatorFamily::naive_pw:
            return std::make_unique<NaivePw>(spec, frame, train_idx);
        case EstimatorFamily::wald:
            return std::make_unique<WaldEstimator>(spec, frame, train_idx);
        case EstimatorFamily::linear_iv:
            return std::make_unique<LinearIv>(spec, frame, train_idx);
    }
    throw UnknownFamily("unreachable estimator family");
}

EffectEstimate estimate_effect(const FittedEstimator& model, const CausalFrame& frame,
                               const IndexList& idx) {
    if (frame.n_cols() != model.n_features())
        throw ShapeMismatch("frame has " + std::to_string(frame.n_cols()) +
                            " covariates, model trained on " +
                            std::to_string(model.n_features()));
    EffectEstimate estimate;
    estimate.impact = model.impact(frame, idx);
    estimate.mean_impact = estimate.impact.mean();
    estimate.corrected_outcome.resize(estimate.impact.size());
    for (std::size_t r = 0; r < idx.size(); ++r) {
        const int i = idx[r];
        const auto e = static_cast<Eigen::Index>(r);
        estimate.corrected_outcome[e] =
            frame.outcome[i] - estimate.impact[e] * frame.treatment[i];
    }
    return estimate;
}

}  // namespace causalscore
