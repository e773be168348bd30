#include <doctest.h>

#include <cmath>

#include "causalscore/estimators.hpp"
#include "causalscore/rng.hpp"
#include "causalscore/synthdata.hpp"

using namespace causalscore;

namespace {

IndexList all_rows(const CausalFrame& frame) {
    IndexList idx(static_cast<std::size_t>(frame.n_rows()));
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
    return idx;
}

// Noiseless linear outcome with a constant effect c.
CausalFrame linear_frame(int n, double effect, Rng& rng) {
    CausalFrame frame;
    frame.covariates.resize(n, 3);
    for (int j = 0; j < 3; ++j)
        for (int i = 0; i < n; ++i) frame.covariates(i, j) = rng.normal();
    frame.treatment.resize(n);
    for (int i = 0; i < n; ++i) frame.treatment[i] = rng.bernoulli(0.5);
    Vector slope(3);
    slope << 1.0, -1.0, 2.0;
    frame.outcome = frame.covariates * slope + effect * frame.treatment;
    frame.propensity = Vector::Constant(n, 0.5);
    frame.column_names = {"x0", "x1", "x2"};
    frame.validate();
    return frame;
}

EstimatorSpec spec_of(EstimatorFamily family, Json hyperparams = Json::object()) {
    EstimatorSpec spec;
    spec.family = family;
    spec.hyperparams = std::move(hyperparams);
    return spec;
}

}  // namespace

TEST_CASE("s_learner with ridge recovers a constant effect on linear data") {
    Rng rng(1);
    const CausalFrame frame = linear_frame(400, 2.0, rng);
    const IndexList idx = all_rows(frame);
    const auto model = fit_estimator(
        spec_of(EstimatorFamily::s_learner,
                Json{{"outcome_learner", "ridge"}, {"ridge_l2", 1e-10}}),
        frame, idx);
    const EffectEstimate estimate = estimate_effect(*model, frame, idx);
    for (Eigen::Index i = 0; i < estimate.impact.size(); ++i)
        CHECK(estimate.impact[i] == doctest::Approx(2.0).epsilon(1e-6));
}

TEST_CASE("t_learner with ridge recovers a constant effect on linear data") {
    Rng rng(2);
    const CausalFrame frame = linear_frame(400, -1.5, rng);
    const IndexList idx = all_rows(frame);
    const auto model = fit_estimator(
        spec_of(EstimatorFamily::t_learner,
                Json{{"outcome_learner", "ridge"}, {"ridge_l2", 1e-10}}),
        frame, idx);
    const EffectEstimate estimate = estimate_effect(*model, frame, idx);
    CHECK(estimate.mean_impact == doctest::Approx(-1.5).epsilon(1e-6));
}

TEST_CASE("estimate_effect fills mean and corrected outcome") {
    Rng rng(3);
    const CausalFrame frame = linear_frame(100, 1.0, rng);
    const IndexList idx = all_rows(frame);
    const auto model = fit_estimator(spec_of(EstimatorFamily::naive_pw), frame, idx);
    const EffectEstimate estimate = estimate_effect(*model, frame, idx);

    CHECK(estimate.mean_impact == estimate.impact.mean());
    for (std::size_t r = 0; r < idx.size(); ++r) {
        const int i = idx[r];
        const auto e = static_cast<Eigen::Index>(r);
        if (frame.treatment[i] == 0.0) {
            CHECK(estimate.corrected_outcome[e] == frame.outcome[i]);
        } else {
            CHECK(estimate.corrected_outcome[e] ==
                  doctest::Approx(frame.outcome[i] - estimate.impact[e]));
        }
    }
}

TEST_CASE("naive_pw and wald produce constant impact vectors") {
    Rng rng(4);
    const CausalFrame cate = linear_frame(200, 0.7, rng);
    const IndexList idx = all_rows(cate);
    const auto naive = fit_estimator(spec_of(EstimatorFamily::naive_pw,
                                             Json{{"seed", 11}}),
                                     cate, idx);
    const Vector impact = naive->impact(cate, idx);
    CHECK((impact.array() == impact[0]).all());

    const auto [iv_frame, iv_truth] = gen_iv([] {
        DgpConfig config;
        config.n_rows = 5000;
        config.n_covariates = 10;
        config.seed = 8;
        return config;
    }());
    const IndexList iv_idx = all_rows(iv_frame);
    const auto wald = fit_estimator(spec_of(EstimatorFamily::wald), iv_frame, iv_idx);
    const Vector wald_impact = wald->impact(iv_frame, iv_idx);
    CHECK((wald_impact.array() == wald_impact[0]).all());
}

TEST_CASE("naive_pw noise is seeded and about one percent") {
    Rng rng(5);
    const CausalFrame frame = linear_frame(2000, 1.0, rng);
    const IndexList idx = all_rows(frame);

    // hand-computed Hajek IPW difference with the known p = 0.5
    double w1 = 0, s1 = 0, w0 = 0, s0 = 0;
    for (int i : idx) {
        if (frame.treatment[i] == 1.0) {
            w1 += 2.0;
            s1 += 2.0 * frame.outcome[i];
        } else {
            w0 += 2.0;
            s0 += 2.0 * frame.outcome[i];
        }
    }
    const double ipw_diff = s1 / w1 - s0 / w0;

    const auto a = fit_estimator(spec_of(EstimatorFamily::naive_pw, Json{{"seed", 42}}),
                                 frame, idx);
    const auto b = fit_estimator(spec_of(EstimatorFamily::naive_pw, Json{{"seed", 42}}),
                                 frame, idx);
    const auto c = fit_estimator(spec_of(EstimatorFamily::naive_pw, Json{{"seed", 43}}),
                                 frame, idx);
    const double ea = a->impact(frame, idx)[0];
    CHECK(ea == b->impact(frame, idx)[0]);
    CHECK(ea != c->impact(frame, idx)[0]);
    CHECK(std::abs(ea / ipw_diff - 1.0) < 0.05);  // eta ~ N(0, 0.01^2)
}

TEST_CASE("transformed outcome mean matches the population effect on gen_rct") {
    DgpConfig config;
    config.n_rows = 20000;
    config.seed = 55;
    const auto [frame, truth] = gen_rct(config);
    const IndexList idx = all_rows(frame);

    // Y* = 2Y(2T-1) under p = 0.5; its mean is an unbiased ATE estimate
    double mean_star = 0.0, var_star = 0.0;
    for (int i : idx) {
        const double star = 2.0 * frame.outcome[i] * (2.0 * frame.treatment[i] - 1.0);
        mean_star += star;
    }
    mean_star /= static_cast<double>(idx.size());
    for (int i : idx) {
        const double star = 2.0 * frame.outcome[i] * (2.0 * frame.treatment[i] - 1.0);
        var_star += (star - mean_star) * (star - mean_star);
    }
    var_star /= static_cast<double>(idx.size());
    const double se = std::sqrt(var_star / static_cast<double>(idx.size()));
    CHECK(std::abs(mean_star - truth.ate) < 3.0 * se);

    // the fitted transformed-outcome estimator lands near the same mean
    const auto model = fit_estimator(
        spec_of(EstimatorFamily::transformed_outcome,
                Json{{"effect_learner", "ridge"}, {"ridge_l2", 1.0}}),
        frame, idx);
    const EffectEstimate estimate = estimate_effect(*model, frame, idx);
    CHECK(std::abs(estimate.mean_impact - mean_star) < 3.0 * se);
}

TEST_CASE("x_learner tracks heterogeneous effects better than the constant baseline") {
    DgpConfig config;
    config.n_rows = 8000;
    config.seed = 66;
    const auto [frame, truth] = gen_rct(config);
    IndexList train, rest;
    for (int i = 0; i < 6000; ++i) train.push_back(i);
    for (int i = 6000; i < 8000; ++i) rest.push_back(i);

    const auto xl = fit_estimator(spec_of(EstimatorFamily::x_learner), frame, train);
    const auto naive = fit_estimator(spec_of(EstimatorFamily::naive_pw), frame, train);

    auto mse_of = [&](const FittedEstimator& model) {
        const EffectEstimate estimate = estimate_effect(model, frame, rest);
        double acc = 0.0;
        for (std::size_t r = 0; r < rest.size(); ++r) {
            const double diff =
                estimate.impact[static_cast<Eigen::Index>(r)] - truth.tau[rest[r]];
            acc += diff * diff;
        }
        return acc / static_cast<double>(rest.size());
    };
    CHECK(mse_of(*xl) < mse_of(*naive));
}

TEST_CASE("wald matches the hand-computed ratio of arm means") {
    CausalFrame frame;
    frame.covariates = Matrix::Zero(4, 1);
    frame.treatment.resize(4);
    frame.treatment << 1, 0, 0, 0;
    frame.outcome.resize(4);
    frame.outcome << 3, 1, 1, 1;
    frame.instrument = Vector(4);
    *frame.instrument << 1, 1, 0, 0;
    frame.column_names = {"x0"};
    frame.validate();

    const auto model = fit_estimator(spec_of(EstimatorFamily::wald), frame,
                                     {0, 1, 2, 3});
    // (mean(Y|Z=1) - mean(Y|Z=0)) / (mean(T|Z=1) - mean(T|Z=0)) = (2-1)/(0.5-0)
    CHECK(model->impact(frame, {0})[0] == doctest::Approx(2.0));
}

TEST_CASE("wald rejects weak and missing instruments") {
    CausalFrame frame;
    frame.covariates = Matrix::Zero(4, 1);
    frame.treatment.resize(4);
    frame.treatment << 1, 0, 1, 0;  // identical uptake in both arms
    frame.outcome = Vector::Ones(4);
    frame.instrument = Vector(4);
    *frame.instrument << 1, 1, 0, 0;
    frame.column_names = {"x0"};

    CHECK_THROWS_AS(fit_estimator(spec_of(EstimatorFamily::wald), frame, {0, 1, 2, 3}),
                    WeakInstrument);
    frame.instrument.reset();
    CHECK_THROWS_AS(fit_estimator(spec_of(EstimatorFamily::wald), frame, {0, 1, 2, 3}),
                    MissingInstrument);
    CHECK_THROWS_AS(fit_estimator(spec_of(EstimatorFamily::linear_iv), frame, {0, 1, 2, 3}),
                    MissingInstrument);
}

TEST_CASE("single-arm training data is rejected") {
    Rng rng(6);
    CausalFrame frame = linear_frame(50, 1.0, rng);
    frame.treatment.setZero();
    frame.validate();
    CHECK_THROWS_AS(
        fit_estimator(spec_of(EstimatorFamily::s_learner), frame, all_rows(frame)),
        SingleArmTrainingData);
}

TEST_CASE("corrected outcomes shift with the outcome on untreated rows") {
    Rng rng(7);
    const CausalFrame frame = linear_frame(300, 1.2, rng);
    const IndexList idx = all_rows(frame);
    CausalFrame shifted = frame;
    shifted.outcome.array() += 5.0;

    for (const auto family :
         {EstimatorFamily::s_learner, EstimatorFamily::t_learner,
          EstimatorFamily::x_learner, EstimatorFamily::transformed_outcome,
          EstimatorFamily::naive_pw}) {
        const auto base = fit_estimator(spec_of(family, Json{{"seed", 3}}), frame, idx);
        const auto moved = fit_estimator(spec_of(family, Json{{"seed", 3}}), shifted, idx);
        const EffectEstimate eb = estimate_effect(*base, frame, idx);
        const EffectEstimate em = estimate_effect(*moved, shifted, idx);
        for (std::size_t r = 0; r < idx.size(); ++r) {
            if (frame.treatment[idx[r]] != 0.0) continue;
            const auto e = static_cast<Eigen::Index>(r);
            CHECK(em.corrected_outcome[e] - eb.corrected_outcome[e] ==
                  doctest::Approx(5.0).epsilon(1e-9));
        }
    }
}

TEST_CASE("linear_iv recovers a constant effect when theta is patched") {
    std::vector<double> estimates;
    for (std::uint64_t s = 0; s < 5; ++s) {
        DgpConfig config;
        config.n_rows = 200000;
        config.n_covariates = 10;
        config.seed = 500 + s;
        auto [frame, truth] = gen_iv(config);
        // force theta == 7.5 while keeping every other term
        frame.outcome += ((7.5 - truth.theta.array()) * frame.treatment.array()).matrix();

        IndexList train;
        for (int i = 0; i < 150000; ++i) train.push_back(i);
        IndexList held;
        for (int i = 150000; i < 200000; ++i) held.push_back(i);
        const auto model = fit_estimator(spec_of(EstimatorFamily::linear_iv), frame, train);
        estimates.push_back(estimate_effect(*model, frame, held).mean_impact);
    }
    double mean = 0.0;
    for (double e : estimates) mean += e;
    mean /= static_cast<double>(estimates.size());
    double var = 0.0;
    for (double e : estimates) var += (e - mean) * (e - mean);
    var /= static_cast<double>(estimates.size() - 1);
    const double sem = std::sqrt(var / static_cast<double>(estimates.size()));
    CHECK(std::abs(mean - 7.5) < 3.0 * sem);
}

TEST_CASE("linear_iv pairwise basis captures the product effect") {
    DgpConfig config;
    config.n_rows = 60000;
    config.n_covariates = 10;
    config.seed = 91;
    const auto [frame, truth] = gen_iv(config);
    IndexList train, held;
    for (int i = 0; i < 45000; ++i) train.push_back(i);
    for (int i = 45000; i < 60000; ++i) held.push_back(i);

    auto mse_treated = [&](const FittedEstimator& model) {
        const EffectEstimate estimate = estimate_effect(model, frame, held);
        double acc = 0.0;
        long count = 0;
        for (std::size_t r = 0; r < held.size(); ++r) {
            if (frame.treatment[held[r]] != 1.0) continue;
            const double diff =
                estimate.impact[static_cast<Eigen::Index>(r)] - truth.theta[held[r]];
            acc += diff * diff;
            ++count;
        }
        return acc / static_cast<double>(count);
    };

    const auto linear = fit_estimator(spec_of(EstimatorFamily::linear_iv), frame, train);
    const auto pairwise = fit_estimator(
        spec_of(EstimatorFamily::linear_iv, Json{{"het_basis", "pairwise"}}), frame, train);
    CHECK(mse_treated(*pairwise) < 0.05 * mse_treated(*linear));
}

TEST_CASE("estimate_effect validates the covariate count") {
    Rng rng(8);
    const CausalFrame frame = linear_frame(60, 1.0, rng);
    const auto model = fit_estimator(spec_of(EstimatorFamily::s_learner), frame,
                                     all_rows(frame));
    CausalFrame widened = frame;
    widened.covariates = Matrix::Ones(60, 4);
    widened.column_names = {"a", "b", "c", "d"};
    CHECK_THROWS_AS(estimate_effect(*model, widened, all_rows(widened)), ShapeMismatch);
}

TEST_CASE("wald denominator approximates compliance minus the always-taker rate") {
    DgpConfig config;
    config.n_rows = 200000;
    config.n_covariates = 10;
    config.seed = 77;
    const auto [frame, truth] = gen_iv(config);
    const Vector& z = *frame.instrument;
    double t1 = 0, n1 = 0, t0 = 0, n0 = 0;
    for (Eigen::Index i = 0; i < frame.n_rows(); ++i) {
        if (z[i] == 1.0) {
            t1 += frame.treatment[i];
            n1 += 1;
        } else {
            t0 += frame.treatment[i];
            n0 += 1;
        }
    }
    const double denom = t1 / n1 - t0 / n0;
    const double expected = truth.compliance.mean() - 0.006;
    CHECK(denom == doctest::Approx(expected).epsilon(0.02));
}
