#include "causalscore/search.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <thread>

#include "causalscore/rng.hpp"

namespace causalscore {

namespace {

constexpr int kProposalBatch = 4;  // fixed, so reports are worker-count independent

ParamRange continuous(std::string name, double lo, double hi, bool log_scale,
                      double default_value) {
    ParamRange range;
    range.name = std::move(name);
    range.kind = ParamRange::Kind::continuous;
    range.lo = lo;
    range.hi = hi;
    range.log_scale = log_scale;
    range.default_value = default_value;
    return range;
}

ParamRange integer(std::string name, double lo, double hi, bool log_scale,
                   int default_value) {
    ParamRange range;
    range.name = std::move(name);
    range.kind = ParamRange::Kind::integer;
    range.lo = lo;
    range.hi = hi;
    range.log_scale = log_scale;
    range.default_value = default_value;
    return range;
}

ParamRange choice(std::string name, std::vector<std::string> options,
                  const std::string& default_value) {
    ParamRange range;
    range.name = std::move(name);
    range.kind = ParamRange::Kind::choice;
    range.choices = std::move(options);
    range.default_value = default_value;
    return range;
}

std::vector<ParamRange> regressor_grid(const char* kind_key) {
    return {
        choice(kind_key, {"boosted_stumps", "ridge"}, "boosted_stumps"),
        continuous("ridge_l2", 1e-4, 1e3, true, 1.0),
        integer("bs_rounds", 10, 400, true, 100),
        continuous("bs_lr", 0.02, 1.0, true, 0.1),
        integer("bs_depth", 1, 3, false, 2),
    };
}

std::vector<ParamRange> propensity_grid(ProblemKind kind) {
    if (kind == ProblemKind::rct_cate) {
        // known-random assignment: the prior classifier is pinned
        return {choice("propensity_learner", {"prior"}, "prior")};
    }
    return {
        choice("propensity_learner", {"prior", "logistic"}, "logistic"),
        continuous("logistic_l2", 1e-6, 10.0, true, 1e-6),
    };
}

void append(std::vector<ParamRange>& dst, std::vector<ParamRange> src) {
    for (auto& range : src) {
        const bool seen = std::any_of(dst.begin(), dst.end(), [&](const ParamRange& r) {
            return r.name == range.name;
        });
        if (!seen) dst.push_back(std::move(range));
    }
}

FamilyTemplate family_template(EstimatorFamily family, ProblemKind kind) {
    FamilyTemplate tmpl;
    tmpl.family = family;
    switch (family) {
        case EstimatorFamily::s_learner:
        case EstimatorFamily::t_learner:
            tmpl.params = regressor_grid("outcome_learner");
            break;
        case EstimatorFamily::x_learner:
            tmpl.params = regressor_grid("outcome_learner");
            append(tmpl.params, {choice("effect_learner", {"boosted_stumps", "ridge"},
                                        "boosted_stumps")});
            append(tmpl.params, propensity_grid(kind));
            break;
        case EstimatorFamily::transformed_outcome:
            tmpl.params = regressor_grid("effect_learner");
            append(tmpl.params, propensity_grid(kind));
            break;
        case EstimatorFamily::naive_pw:
            if (kind != ProblemKind::rct_cate) tmpl.params = propensity_grid(kind);
            break;
        case EstimatorFamily::wald:
            break;
        case EstimatorFamily::linear_iv:
            tmpl.params = {
                continuous("l2_first", 1e-6, 1e3, true, 0.0),
                continuous("l2_second", 1e-6, 1e3, true, 0.0),
                choice("het_basis", {"linear", "pairwise"}, "linear"),
            };
            break;
    }
    return tmpl;
}

const FamilyTemplate* find_family(const SearchSpace& space, EstimatorFamily family) {
    for (const auto& tmpl : space.families)
        if (tmpl.family == family) return &tmpl;
    return nullptr;
}

double sample_numeric(const ParamRange& range, Rng& rng) {
    double v;
    if (range.log_scale) {
        v = std::exp(rng.uniform(std::log(range.lo), std::log(range.hi)));
    } else {
        v = rng.uniform(range.lo, range.hi);
    }
    return v;
}

Json sample_param(const ParamRange& range, Rng& rng) {
    switch (range.kind) {
        case ParamRange::Kind::continuous:
            return sample_numeric(range, rng);
        case ParamRange::Kind::integer:
            return static_cast<int>(std::llround(
                std::clamp(sample_numeric(range, rng), range.lo, range.hi)));
        case ParamRange::Kind::choice:
            return range.choices[static_cast<std::size_t>(
                rng.below(range.choices.size()))];
    }
    return {};
}

Json mutate_param(const ParamRange& range, const Json& current, Rng& rng) {
    if (range.kind == ParamRange::Kind::choice)
        return range.choices[static_cast<std::size_t>(rng.below(range.choices.size()))];

    const double value = std::clamp(current.get<double>(), range.lo, range.hi);
    const bool up = rng.bernoulli(0.5) == 1.0;
    double next;
    if (range.log_scale) {
        next = up ? value * 2.0 : value * 0.5;  // one factor-of-two step
    } else {
        const double step = 0.25 * (range.hi - range.lo);
        next = up ? value + step : value - step;
    }
    next = std::clamp(next, range.lo, range.hi);
    if (range.kind == ParamRange::Kind::integer) {
        double rounded = std::llround(next);
        if (rounded == current.get<double>())  // force movement on coarse grids
            rounded = std::clamp(rounded + (up ? 1.0 : -1.0), range.lo, range.hi);
        return static_cast<int>(rounded);
    }
    return next;
}

EstimatorSpec sample_uniform(const SearchSpace& space, Rng& rng) {
    const auto& tmpl =
        space.families[static_cast<std::size_t>(rng.below(space.families.size()))];
    EstimatorSpec spec;
    spec.family = tmpl.family;
    for (const auto& range : tmpl.params)
        spec.hyperparams[range.name] = sample_param(range, rng);
    return spec;
}

// A hyperparameter is worth mutating only when it affects the fitted model
// under the spec's current selections (no dead-knob proposals).
bool param_active(const EstimatorSpec& spec, const ParamRange& range) {
    if (range.kind == ParamRange::Kind::choice && range.choices.size() < 2) return false;
    const auto uses_learner = [&](const char* kind) {
        for (const char* key : {"outcome_learner", "effect_learner"}) {
            if (spec.hyperparams.contains(key) &&
                spec.hyperparams[key] == std::string(kind))
                return true;
        }
        return false;
    };
    if (range.name == "ridge_l2") return uses_learner("ridge");
    if (range.name == "bs_rounds" || range.name == "bs_lr" || range.name == "bs_depth")
        return uses_learner("boosted_stumps");
    if (range.name == "logistic_l2")
        return spec.hyperparams.value("propensity_learner", "prior") ==
               std::string("logistic");
    return true;
}

EstimatorSpec mutate_spec(const SearchSpace& space, const EstimatorSpec& best, Rng& rng) {
    const FamilyTemplate* tmpl = find_family(space, best.family);
    if (tmpl == nullptr || tmpl->params.empty()) return sample_uniform(space, rng);

    EstimatorSpec spec = best;
    spec.hyperparams.erase("seed");
    std::vector<const ParamRange*> active;
    for (const auto& range : tmpl->params)
        if (param_active(spec, range)) active.push_back(&range);
    if (active.empty()) return sample_uniform(space, rng);

    const auto& range = *active[static_cast<std::size_t>(rng.below(active.size()))];
    const Json current = spec.hyperparams.contains(range.name)
                             ? spec.hyperparams[range.name]
                             : range.default_value;
    spec.hyperparams[range.name] = mutate_param(range, current, rng);
    return spec;
}

bool objective_valid(ProblemKind kind, const std::string& objective) {
    if (kind == ProblemKind::iv) return objective == "energy_iv";
    return objective == "norm_erupt" || objective == "qini" || objective == "energy_cate";
}

struct RunContext {
    const CausalFrame& frame;
    const Split& split;
    std::string objective;
    Vector propensity;        // empty for IV problems
    const Vector* truth = nullptr;
    bool iv_truth = false;
    double pair_budget = kEnergyPairBudget;
    std::uint64_t valid_subsample_seed = 0;
    std::uint64_t train_subsample_seed = 0;
    std::uint64_t test_subsample_seed = 0;
};

ScoreValue objective_on(const RunContext& ctx, const FittedEstimator& model,
                        const IndexList& idx, const std::string& split_name,
                        std::uint64_t subsample_seed) {
    const EffectEstimate estimate = estimate_effect(model, ctx.frame, idx);
    ScoreValue score;
    if (ctx.objective == "norm_erupt") {
        score = normalized_erupt(estimate, ctx.frame, ctx.propensity, idx);
    } else if (ctx.objective == "qini") {
        score = qini(estimate, ctx.frame, idx);
    } else if (ctx.objective == "energy_cate") {
        score = energy_score_cate(estimate, ctx.frame, idx, ctx.pair_budget, subsample_seed,
                                  ctx.propensity);
    } else if (ctx.objective == "energy_iv") {
        score = energy_score_iv(estimate, ctx.frame, idx, ctx.pair_budget, subsample_seed);
    } else {
        throw InvalidObjective("'" + ctx.objective + "'");
    }
    score.split = split_name;
    return score;
}

void append_truth_scores(const RunContext& ctx, const FittedEstimator& model,
                         const IndexList& idx, const std::string& split_name,
                         std::vector<ScoreValue>& out) {
    if (ctx.truth == nullptr) return;
    IndexList rows = idx;
    if (ctx.iv_truth) {
        rows.clear();
        for (int i : idx)
            if (ctx.frame.treatment[i] == 1.0) rows.push_back(i);
        if (rows.empty()) return;
    }
    const EffectEstimate estimate = estimate_effect(model, ctx.frame, rows);
    ScoreValue mse = mse_tau(estimate, *ctx.truth, rows);
    mse.split = split_name;
    out.push_back(std::move(mse));
    ScoreValue ate = ate_score(estimate);
    ate.split = split_name;
    out.push_back(std::move(ate));
}

void evaluate_trial(const RunContext& ctx, TrialRecord& trial) {
    const auto started = std::chrono::steady_clock::now();
    try {
        const auto model = fit_estimator(trial.spec, ctx.frame, ctx.split.train_idx);
        std::vector<ScoreValue> scores;
        scores.push_back(objective_on(ctx, *model, ctx.split.valid_idx, "valid",
                                      ctx.valid_subsample_seed));
        scores.push_back(objective_on(ctx, *model, ctx.split.train_idx, "train",
                                      ctx.train_subsample_seed));
        append_truth_scores(ctx, *model, ctx.split.valid_idx, "valid", scores);
        trial.scores = std::move(scores);
        trial.ok = true;
    } catch (const std::exception& e) {
        trial.ok = false;
        trial.scores.clear();
        trial.failure_reason = e.what();
    }
    trial.wall_time =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
}

// Evaluates a batch of trials on up to `workers` threads. Each trial is
// self-contained (own seed, no shared RNG), so scheduling cannot change
// results.
void evaluate_batch(const RunContext& ctx, std::vector<TrialRecord*>& batch, int workers) {
    const int threads = std::max(1, std::min<int>(workers, static_cast<int>(batch.size())));
    if (threads == 1) {
        for (TrialRecord* trial : batch) evaluate_trial(ctx, *trial);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            while (true) {
                const std::size_t mine = next.fetch_add(1);
                if (mine >= batch.size()) break;
                evaluate_trial(ctx, *batch[mine]);
            }
        });
    }
    for (auto& worker : pool) worker.join();
}

double oriented(const ScoreValue& score) {
    return score.direction == ScoreDirection::lower_better ? score.value : -score.value;
}

const ScoreValue* find_score(const TrialRecord& trial, const std::string& name,
                             const std::string& split) {
    for (const auto& score : trial.scores)
        if (score.name == name && score.split == split) return &score;
    return nullptr;
}

}  // namespace

ProblemKind problem_kind_from_string(const std::string& name) {
    if (name == "rct_cate") return ProblemKind::rct_cate;
    if (name == "confounded_cate") return ProblemKind::confounded_cate;
    if (name == "iv") return ProblemKind::iv;
    throw ConfigError("unknown problem kind '" + name + "'");
}

std::string to_string(ProblemKind kind) {
    switch (kind) {
        case ProblemKind::rct_cate: return "rct_cate";
        case ProblemKind::confounded_cate: return "confounded_cate";
        case ProblemKind::iv: return "iv";
    }
    return "?";
}

SearchSpace default_space(ProblemKind kind) {
    SearchSpace space;
    space.problem_kind = kind;
    if (kind == ProblemKind::iv) {
        space.families = {family_template(EstimatorFamily::wald, kind),
                          family_template(EstimatorFamily::linear_iv, kind)};
    } else {
        space.families = {family_template(EstimatorFamily::s_learner, kind),
                          family_template(EstimatorFamily::t_learner, kind),
                          family_template(EstimatorFamily::x_learner, kind),
                          family_template(EstimatorFamily::transformed_outcome, kind),
                          family_template(EstimatorFamily::naive_pw, kind)};
    }
    return space;
}

EstimatorSpec default_spec(EstimatorFamily family, ProblemKind kind) {
    if (family_needs_instrument(family) && kind != ProblemKind::iv)
        throw UnknownFamily(to_string(family) + " is not applicable to " + to_string(kind));
    EstimatorSpec spec;
    spec.family = family;
    for (const auto& range : family_template(family, kind).params)
        spec.hyperparams[range.name] = range.default_value;
    return spec;
}

Vector scoring_propensity(const CausalFrame& frame, const IndexList& train_idx) {
    Vector p(frame.n_rows());
    if (frame.propensity) {
        p = *frame.propensity;
    } else {
        const auto model = fit(LearnerSpec::logistic(), gather_rows(frame.covariates, train_idx),
                               gather(frame.treatment, train_idx));
        p = model->predict(frame.covariates);
    }
    for (Eigen::Index i = 0; i < p.size(); ++i)
        p[i] = std::clamp(p[i], kProbClipLo, kProbClipHi);
    return p;
}

SearchReport run_search(const SearchSpace& space, const CausalFrame& frame,
                        const Split& split, const std::string& objective,
                        const SearchBudget& budget, std::uint64_t seed,
                        const SearchOptions& options) {
    if (space.families.empty()) throw ConfigError("search space has no families");
    if (!objective_valid(space.problem_kind, objective))
        throw InvalidObjective("'" + objective + "' is not selectable for " +
                               to_string(space.problem_kind));
    if (budget.max_trials <= 0 && budget.max_seconds <= 0.0)
        throw EmptyBudget("need a positive trial or time budget");
    for (const auto& tmpl : space.families) {
        if (family_needs_instrument(tmpl.family) && space.problem_kind != ProblemKind::iv)
            throw ConfigError("IV family in a non-IV space");
    }

    const auto started = std::chrono::steady_clock::now();
    auto out_of_time = [&] {
        if (budget.max_seconds <= 0.0) return false;
        const double elapsed =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        return elapsed >= budget.max_seconds;
    };
    auto out_of_trials = [&](int count) {
        return budget.max_trials > 0 && count >= budget.max_trials;
    };

    RunContext ctx{frame, split, objective};
    if (space.problem_kind != ProblemKind::iv)
        ctx.propensity = scoring_propensity(frame, split.train_idx);
    ctx.truth = options.truth_effect;
    ctx.iv_truth = space.problem_kind == ProblemKind::iv;
    ctx.valid_subsample_seed = derive_seed(seed, 101);
    ctx.train_subsample_seed = derive_seed(seed, 102);
    ctx.test_subsample_seed = derive_seed(seed, 103);

    SearchReport report;
    report.problem_kind = space.problem_kind;
    report.objective = objective;
    report.objective_direction = direction_of(objective);
    report.seed = seed;
    report.split = split;

    int best_id = -1;
    double best_value = 0.0;
    const EstimatorSpec* best_spec = nullptr;

    auto absorb = [&](std::vector<TrialRecord>& batch) {
        for (auto& trial : batch) {
            if (trial.ok) {
                const ScoreValue* score = find_score(trial, objective, "valid");
                if (score != nullptr && std::isfinite(score->value)) {
                    const double value = oriented(*score);
                    if (best_id < 0 || value < best_value) {
                        best_id = trial.trial_id;
                        best_value = value;
                    }
                }
            }
            report.trials.push_back(std::move(trial));
        }
        batch.clear();
        if (best_id >= 0)
            best_spec = &report.trials[static_cast<std::size_t>(best_id)].spec;
    };

    auto make_trial = [&](int id, EstimatorSpec spec) {
        TrialRecord trial;
        trial.trial_id = id;
        trial.seed = derive_seed(seed, 1000 + static_cast<std::uint64_t>(id));
        spec.hyperparams["seed"] = trial.seed;
        trial.spec = std::move(spec);
        return trial;
    };

    int next_id = 0;

    // phase 1: every family at its documented default
    {
        std::vector<TrialRecord> defaults;
        for (const auto& tmpl : space.families) {
            if (out_of_trials(next_id) || out_of_time()) break;
            EstimatorSpec spec;
            spec.family = tmpl.family;
            for (const auto& range : tmpl.params)
                spec.hyperparams[range.name] = range.default_value;
            defaults.push_back(make_trial(next_id++, std::move(spec)));
        }
        std::vector<TrialRecord*> ptrs;
        for (auto& trial : defaults) ptrs.push_back(&trial);
        evaluate_batch(ctx, ptrs, options.workers);
        absorb(defaults);
    }

    // phase 2: local mutation of the current best (p=0.7) or uniform
    // sampling (p=0.3), in fixed batches of kProposalBatch
    Rng proposer(derive_seed(seed, 1));
    while (!out_of_trials(next_id) && !out_of_time()) {
        std::vector<TrialRecord> batch;
        for (int b = 0; b < kProposalBatch; ++b) {
            if (out_of_trials(next_id) || out_of_time()) break;
            EstimatorSpec spec;
            if (best_spec != nullptr && proposer.uniform() < 0.7) {
                spec = mutate_spec(space, *best_spec, proposer);
            } else {
                spec = sample_uniform(space, proposer);
            }
            batch.push_back(make_trial(next_id++, std::move(spec)));
        }
        if (batch.empty()) break;
        std::vector<TrialRecord*> ptrs;
        for (auto& trial : batch) ptrs.push_back(&trial);
        evaluate_batch(ctx, ptrs, options.workers);
        absorb(batch);
    }

    report.best_trial_id = best_id;

    // winner re-scored on the held-out test rows (deterministic refit)
    if (best_id >= 0) {
        auto& winner = report.trials[static_cast<std::size_t>(best_id)];
        try {
            const auto model = fit_estimator(winner.spec, frame, split.train_idx);
            winner.scores.push_back(objective_on(ctx, *model, split.test_idx, "test",
                                                 ctx.test_subsample_seed));
            append_truth_scores(ctx, *model, split.test_idx, "test", winner.scores);
        } catch (const std::exception& e) {
            winner.failure_reason = std::string("test rescoring failed: ") + e.what();
        }
    }

    // workers deliberately excluded: payloads are identical across worker counts
    report.config_echo = Json{{"objective", objective},
                              {"problem_kind", to_string(space.problem_kind)},
                              {"seed", seed},
                              {"max_trials", budget.max_trials},
                              {"max_seconds", budget.max_seconds}};
    return report;
}

}  // namespace causalscore
