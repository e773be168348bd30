#pragma once

#include <string>
#include <vector>

#include "causalscore/dataset.hpp"
#include "causalscore/estimators.hpp"
#include "causalscore/scoring.hpp"

namespace causalscore {

enum class ProblemKind { rct_cate, confounded_cate, iv };

ProblemKind problem_kind_from_string(const std::string& name);
std::string to_string(ProblemKind kind);

// One hyperparameter and its sampling range.
struct ParamRange {
    enum class Kind { continuous, integer, choice };

    std::string name;
    Kind kind = Kind::continuous;
    double lo = 0.0;
    double hi = 0.0;
    bool log_scale = false;
    std::vector<std::string> choices;
    Json default_value;
};

struct FamilyTemplate {
    EstimatorFamily family = EstimatorFamily::s_learner;
    std::vector<ParamRange> params;
};

struct SearchSpace {
    std::vector<FamilyTemplate> families;
    ProblemKind problem_kind = ProblemKind::rct_cate;
};

// The stock search space for a problem kind: every applicable estimator
// family with its tunable learner grid.
SearchSpace default_space(ProblemKind kind);

// Documented default configuration for a family (phase-1 trials). The
// propensity component defaults to `prior` for randomized problems and
// `logistic` otherwise.
EstimatorSpec default_spec(EstimatorFamily family, ProblemKind kind);

struct TrialRecord {
    int trial_id = -1;
    EstimatorSpec spec;
    std::vector<ScoreValue> scores;  // empty when failed
    bool ok = false;
    std::string failure_reason;
    double wall_time = 0.0;  // seconds; informational, excluded from hashes
    std::uint64_t seed = 0;
};

// Trial and/or wall-clock budget; at least one bound must be positive.
// Determinism across runs and worker counts holds for trial budgets; a
// seconds bound stops at a machine-dependent trial.
struct SearchBudget {
    int max_trials = 0;
    double max_seconds = 0.0;
};

struct SearchOptions {
    int workers = 1;
    // Ground-truth effects for audit scores (never selectable): tau for the
    // CATE kinds, theta for IV. IV audits are evaluated on treated rows.
    const Vector* truth_effect = nullptr;
};

struct SearchReport {
    ProblemKind problem_kind = ProblemKind::rct_cate;
    std::string objective;
    ScoreDirection objective_direction = ScoreDirection::higher_better;
    std::uint64_t seed = 0;
    Split split;
    std::vector<TrialRecord> trials;
    int best_trial_id = -1;
    Json config_echo;
};

// Budgeted estimator selection. Phase 1 fits each family's default spec;
// phase 2 proposes configurations by mutating the current best (p = 0.7,
// one hyperparameter per step) or sampling uniformly (p = 0.3), in fixed
// batches of four so results do not depend on the worker count. Every trial
// trains on split.train_idx and is scored on split.valid_idx; the winner is
// re-scored on split.test_idx. Estimator failures are recorded, never fatal.
SearchReport run_search(const SearchSpace& space, const CausalFrame& frame,
                        const Split& split, const std::string& objective,
                        const SearchBudget& budget, std::uint64_t seed,
                        const SearchOptions& options = {});

// Scoring propensity for a frame: the known column when present, otherwise
// logistic-on-train predictions, clipped. Returns one value per frame row.
Vector scoring_propensity(const CausalFrame& frame, const IndexList& train_idx);

}  // namespace causalscore
