#include "causalscore/synthdata.hpp"

#include <algorithm>
#include <cmath>

#include "causalscore/rng.hpp"

namespace causalscore {

namespace {

std::vector<std::string> covariate_names(int d) {
    std::vector<std::string> names;
    names.reserve(static_cast<std::size_t>(d));
    for (int j = 0; j < d; ++j) names.push_back("x" + std::to_string(j));
    return names;
}

Matrix draw_covariates(Rng& rng, int n, int d, double sigma) {
    Matrix x(n, d);
    for (int j = 0; j < d; ++j)           // column-major consumption
        for (int i = 0; i < n; ++i)
            x(i, j) = rng.normal(0.0, sigma);
    return x;
}

// mu0(x) = x1*x2 + x3 + x4*x5 with 1-based covariate indices.
Vector base_outcome(const Matrix& x) {
    return (x.col(0).array() * x.col(1).array() + x.col(2).array() +
            x.col(3).array() * x.col(4).array())
        .matrix();
}

struct CateDraws {
    Matrix x;
    Vector tau;
};

CateDraws draw_cate_core(Rng& rng, const DgpConfig& config) {
    const int n = config.n_rows;
    const int d = config.n_covariates;

    Vector b(d);
    for (int j = 0; j < d; ++j) b[j] = rng.uniform(config.b_low, config.b_high);

    CateDraws draws;
    draws.x = draw_covariates(rng, n, d, config.sigma);
    draws.tau = draws.x * b;
    for (int i = 0; i < n; ++i) draws.tau[i] += rng.normal(0.0, config.effect_noise_sd);
    return draws;
}

double sigmoid(double t) { return 1.0 / (1.0 + std::exp(-t)); }

}  // namespace

void DgpConfig::validate() const {
    if (n_rows < 10) throw ConfigError("n_rows must be >= 10");
    if (!(b_low < b_high)) throw ConfigError("need b_low < b_high");
    if (!(sigma > 0.0)) throw ConfigError("sigma must be positive");
    if (effect_noise_sd < 0.0) throw ConfigError("effect_noise_sd must be >= 0");
}

std::pair<CausalFrame, GroundTruth> gen_rct(const DgpConfig& config) {
    config.validate();
    if (config.n_covariates < 5)
        throw ConfigError("CATE processes need n_covariates >= 5 (mu0 uses five columns)");

    Rng rng(config.seed);
    auto draws = draw_cate_core(rng, config);
    const int n = config.n_rows;

    Vector t(n);
    for (int i = 0; i < n; ++i) t[i] = rng.bernoulli(0.5);

    CausalFrame frame;
    frame.covariates = std::move(draws.x);
    frame.treatment = std::move(t);
    frame.outcome = (draws.tau.array() * frame.treatment.array() +
                     base_outcome(frame.covariates).array())
                        .matrix();
    frame.propensity = Vector::Constant(n, 0.5);
    frame.column_names = covariate_names(config.n_covariates);
    frame.validate();

    GroundTruth truth;
    truth.tau = std::move(draws.tau);
    truth.ate = truth.tau.mean();
    truth.true_propensity = Vector::Constant(n, 0.5);
    return {std::move(frame), std::move(truth)};
}

std::pair<CausalFrame, GroundTruth> gen_confounded(const DgpConfig& config) {
    config.validate();
    if (config.n_covariates < 5)
        throw ConfigError("CATE processes need n_covariates >= 5 (mu0 uses five columns)");

    Rng rng(config.seed);
    auto draws = draw_cate_core(rng, config);
    const int n = config.n_rows;

    Vector p(n);
    for (int i = 0; i < n; ++i) {
        const double logit = draws.x(i, 0) * draws.x(i, 1) + 3.0 * draws.x(i, 2);
        p[i] = std::clamp(1.0 / (1.0 + std::exp(logit)), 0.1, 0.9);
    }
    Vector t(n);
    for (int i = 0; i < n; ++i) t[i] = rng.bernoulli(p[i]);

    CausalFrame frame;
    frame.covariates = std::move(draws.x);
    frame.treatment = std::move(t);
    frame.outcome = (draws.tau.array() * frame.treatment.array() +
                     base_outcome(frame.covariates).array())
                        .matrix();
    frame.column_names = covariate_names(config.n_covariates);
    frame.validate();

    GroundTruth truth;
    truth.tau = std::move(draws.tau);
    truth.ate = truth.tau.mean();
    truth.true_propensity = std::move(p);
    return {std::move(frame), std::move(truth)};
}

std::pair<CausalFrame, IvGroundTruth> gen_iv(const DgpConfig& config) {
    config.validate();
    if (config.n_covariates < 10)
        throw ConfigError("IV process needs n_covariates >= 10 (effect uses X[8])");

    Rng rng(config.seed);
    const int n = config.n_rows;
    const int d = config.n_covariates;

    Matrix x = draw_covariates(rng, n, d, 1.0);

    Vector z(n), nu(n), c(n), c0(n);
    for (int i = 0; i < n; ++i) z[i] = rng.bernoulli(0.5);
    for (int i = 0; i < n; ++i) nu[i] = rng.uniform(0.0, 5.0);
    for (int i = 0; i < n; ++i)
        c[i] = rng.bernoulli(0.8 * sigmoid(0.4 * x(i, 0) + nu[i]));
    for (int i = 0; i < n; ++i) c0[i] = rng.bernoulli(0.006);

    Vector theta = (7.5 * x.col(2).array() * x.col(8).array()).matrix();
    Vector t = (c.array() * z.array() + c0.array() * (1.0 - z.array())).matrix();

    Vector y(n);
    for (int i = 0; i < n; ++i) {
        y[i] = theta[i] * t[i] + 2.0 * nu[i] + (x(i, 3) > 0.0 ? 5.0 : 0.0) +
               0.1 * rng.uniform();
    }

    CausalFrame frame;
    frame.covariates = std::move(x);
    frame.treatment = std::move(t);
    frame.outcome = std::move(y);
    frame.instrument = std::move(z);
    frame.column_names = covariate_names(d);
    frame.validate();

    IvGroundTruth truth;
    truth.theta = std::move(theta);
    truth.nu = std::move(nu);
    truth.compliance = std::move(c);
    truth.always_taker_draw = std::move(c0);
    return {std::move(frame), std::move(truth)};
}

}  // namespace causalscore
