#pragma once

#include <cstdint>

#include "causalscore/dataset.hpp"

namespace causalscore {

// Configuration for the three synthetic data generating processes.
// Covariates are iid N(0, sigma^2); effect weights b_i ~ U(b_low, b_high);
// per-unit effect noise e ~ N(0, effect_noise_sd).
struct DgpConfig {
    int n_rows = 1000;
    int n_covariates = 5;   // 10 for the IV process
    double sigma = 1.0;
    double b_low = 0.4;
    double b_high = 0.7;
    double effect_noise_sd = 0.05;
    std::uint64_t seed = 0;

    void validate() const;
};

// Per-unit ground truth for the CATE processes.
struct GroundTruth {
    Vector tau;              // true per-unit effect
    double ate = 0.0;        // mean of tau
    Vector true_propensity;  // P(T=1 | x)
};

// Ground truth for the IV process.
struct IvGroundTruth {
    Vector theta;             // effect of treatment on outcome per unit
    Vector nu;                // unobserved confounder
    Vector compliance;        // C: takes treatment iff offered
    Vector always_taker_draw; // C0: takes treatment even when not offered
};

// Randomized CATE process: X ~ N(0, sigma^2 I), T ~ Bernoulli(0.5),
// tau = X b' + e, mu0 = x1*x2 + x3 + x4*x5, Y = tau*T + mu0.
// The frame carries the known propensity column (0.5).
// Draw order: b, then X column by column, then e, then T.
std::pair<CausalFrame, GroundTruth> gen_rct(const DgpConfig& config);

// Same process with confounded assignment
// T ~ Bernoulli(clip(1 / (1 + exp(x1*x2 + 3*x3)), 0.1, 0.9)).
// The propensity column is left empty; truth records it.
std::pair<CausalFrame, GroundTruth> gen_confounded(const DgpConfig& config);

// Instrumental-variable process:
//   X ~ N(0, I), Z ~ Bernoulli(0.5), nu ~ U[0,5],
//   C ~ Bernoulli(0.8 * sigmoid(0.4*X[0] + nu)), C0 ~ Bernoulli(0.006),
//   theta = 7.5 * X[2] * X[8], T = C*Z + C0*(1-Z),
//   y = theta*T + 2*nu + 5*[X[3] > 0] + 0.1*U[0,1].
// Column indices are 0-based. Requires n_covariates >= 10.
// Draw order: X column by column, then Z, nu, C, C0, outcome noise.
std::pair<CausalFrame, IvGroundTruth> gen_iv(const DgpConfig& config);

}  // namespace causalscore
