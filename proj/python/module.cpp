#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "causalscore/dataset.hpp"
#include "causalscore/reporting.hpp"
#include "causalscore/scoring.hpp"
#include "causalscore/search.hpp"
#include "causalscore/synthdata.hpp"

namespace py = pybind11;
using namespace causalscore;

namespace {

CausalFrame make_frame(Matrix covariates, Vector treatment, Vector outcome,
                       std::optional<Vector> instrument, std::optional<Vector> propensity) {
    CausalFrame frame;
    frame.covariates = std::move(covariates);
    frame.treatment = std::move(treatment);
    frame.outcome = std::move(outcome);
    frame.instrument = std::move(instrument);
    frame.propensity = std::move(propensity);
    frame.column_names.reserve(static_cast<std::size_t>(frame.n_cols()));
    for (Eigen::Index j = 0; j < frame.n_cols(); ++j)
        frame.column_names.push_back("x" + std::to_string(j));
    frame.validate();
    return frame;
}

py::dict score_to_dict(const ScoreValue& score) {
    py::dict d;
    d["name"] = score.name;
    d["value"] = score.value;
    d["direction"] =
        score.direction == ScoreDirection::lower_better ? "lower_better" : "higher_better";
    d["split"] = score.split;
    d["n_effective"] = score.n_effective;
    d["subsampled"] = score.subsampled;
    d["degenerate_policy"] = score.degenerate_policy;
    if (score.raw_value) d["raw_value"] = *score.raw_value;
    return d;
}

EstimatorSpec spec_from(const std::string& family, const std::string& hyperparams_json) {
    EstimatorSpec spec;
    spec.family = family_from_string(family);
    spec.hyperparams = Json::parse(hyperparams_json.empty() ? "{}" : hyperparams_json);
    return spec;
}

}  // namespace

PYBIND11_MODULE(_causalscore, m) {
    m.doc() = "Out-of-sample scoring and budgeted selection of causal effect estimators";

    py::register_exception<Error>(m, "CausalScoreError");

    py::class_<CausalFrame>(m, "CausalFrame")
        .def(py::init(&make_frame), py::arg("covariates"), py::arg("treatment"),
             py::arg("outcome"), py::arg("instrument") = std::nullopt,
             py::arg("propensity") = std::nullopt)
        .def_readonly("covariates", &CausalFrame::covariates)
        .def_readonly("treatment", &CausalFrame::treatment)
        .def_readonly("outcome", &CausalFrame::outcome)
        .def_readonly("instrument", &CausalFrame::instrument)
        .def_readonly("propensity", &CausalFrame::propensity)
        .def_property_readonly("n_rows", &CausalFrame::n_rows)
        .def_property_readonly("n_cols", &CausalFrame::n_cols);

    py::class_<Split>(m, "Split")
        .def_readonly("train_idx", &Split::train_idx)
        .def_readonly("valid_idx", &Split::valid_idx)
        .def_readonly("test_idx", &Split::test_idx)
        .def_readonly("seed", &Split::seed);

    py::class_<GroundTruth>(m, "GroundTruth")
        .def_readonly("tau", &GroundTruth::tau)
        .def_readonly("ate", &GroundTruth::ate)
        .def_readonly("true_propensity", &GroundTruth::true_propensity);

    py::class_<IvGroundTruth>(m, "IvGroundTruth")
        .def_readonly("theta", &IvGroundTruth::theta)
        .def_readonly("nu", &IvGroundTruth::nu)
        .def_readonly("compliance", &IvGroundTruth::compliance)
        .def_readonly("always_taker_draw", &IvGroundTruth::always_taker_draw);

    py::class_<EffectEstimate>(m, "EffectEstimate")
        .def_readonly("impact", &EffectEstimate::impact)
        .def_readonly("mean_impact", &EffectEstimate::mean_impact)
        .def_readonly("corrected_outcome", &EffectEstimate::corrected_outcome);

    py::class_<FittedEstimator, std::shared_ptr<FittedEstimator>>(m, "FittedEstimator")
        .def_property_readonly("family", [](const FittedEstimator& model) {
            return to_string(model.spec().family);
        });

    m.def(
        "gen_rct",
        [](int n, int covariates, std::uint64_t seed) {
            DgpConfig config;
            config.n_rows = n;
            config.n_covariates = covariates;
            config.seed = seed;
            return gen_rct(config);
        },
        py::arg("n"), py::arg("covariates") = 5, py::arg("seed") = 0);
    m.def(
        "gen_confounded",
        [](int n, int covariates, std::uint64_t seed) {
            DgpConfig config;
            config.n_rows = n;
            config.n_covariates = covariates;
            config.seed = seed;
            return gen_confounded(config);
        },
        py::arg("n"), py::arg("covariates") = 5, py::arg("seed") = 0);
    m.def(
        "gen_iv",
        [](int n, int covariates, std::uint64_t seed) {
            DgpConfig config;
            config.n_rows = n;
            config.n_covariates = covariates;
            config.seed = seed;
            return gen_iv(config);
        },
        py::arg("n"), py::arg("covariates") = 10, py::arg("seed") = 0);

    m.def(
        "make_split",
        [](int n, double train, double valid, double test, std::uint64_t seed) {
            return make_split(n, SplitFractions{train, valid, test}, seed);
        },
        py::arg("n"), py::arg("train") = 0.6, py::arg("valid") = 0.2, py::arg("test") = 0.2,
        py::arg("seed") = 0);

    m.def(
        "fit_estimator",
        [](const std::string& family, const CausalFrame& frame, const IndexList& train_idx,
           const std::string& hyperparams_json) -> std::shared_ptr<FittedEstimator> {
            return fit_estimator(spec_from(family, hyperparams_json), frame, train_idx);
        },
        py::arg("family"), py::arg("frame"), py::arg("train_idx"),
        py::arg("hyperparams_json") = "");

    m.def(
        "estimate_effect",
        [](const FittedEstimator& model, const CausalFrame& frame, const IndexList& idx) {
            return estimate_effect(model, frame, idx);
        },
        py::arg("model"), py::arg("frame"), py::arg("idx"));

    m.def("energy_distance", &energy_distance, py::arg("a"), py::arg("b"));

    m.def(
        "erupt",
        [](const Vector& assignment, const CausalFrame& frame, const Vector& propensity,
           const IndexList& idx) {
            return score_to_dict(erupt(Policy{assignment}, frame, propensity, idx));
        },
        py::arg("policy"), py::arg("frame"), py::arg("propensity"), py::arg("idx"));

    m.def(
        "normalized_erupt",
        [](const EffectEstimate& estimate, const CausalFrame& frame,
           const Vector& propensity, const IndexList& idx) {
            return score_to_dict(normalized_erupt(estimate, frame, propensity, idx));
        },
        py::arg("estimate"), py::arg("frame"), py::arg("propensity"), py::arg("idx"));

    m.def(
        "qini",
        [](const EffectEstimate& estimate, const CausalFrame& frame, const IndexList& idx) {
            return score_to_dict(qini(estimate, frame, idx));
        },
        py::arg("estimate"), py::arg("frame"), py::arg("idx"));

    m.def(
        "energy_score_cate",
        [](const EffectEstimate& estimate, const CausalFrame& frame, const IndexList& idx,
           double pair_budget, std::uint64_t subsample_seed,
           std::optional<Vector> propensity) {
            return score_to_dict(energy_score_cate(estimate, frame, idx, pair_budget,
                                                   subsample_seed,
                                                   propensity ? *propensity : Vector()));
        },
        py::arg("estimate"), py::arg("frame"), py::arg("idx"),
        py::arg("pair_budget") = kEnergyPairBudget, py::arg("subsample_seed") = 0,
        py::arg("propensity") = std::nullopt);

    m.def(
        "energy_score_iv",
        [](const EffectEstimate& estimate, const CausalFrame& frame, const IndexList& idx,
           double pair_budget, std::uint64_t subsample_seed) {
            return score_to_dict(
                energy_score_iv(estimate, frame, idx, pair_budget, subsample_seed));
        },
        py::arg("estimate"), py::arg("frame"), py::arg("idx"),
        py::arg("pair_budget") = kEnergyPairBudget, py::arg("subsample_seed") = 0);

    m.def(
        "mse_tau",
        [](const EffectEstimate& estimate, const Vector& tau, const IndexList& idx) {
            return score_to_dict(mse_tau(estimate, tau, idx));
        },
        py::arg("estimate"), py::arg("tau"), py::arg("idx"));

    m.def("scoring_propensity", &scoring_propensity, py::arg("frame"), py::arg("train_idx"));

    m.def(
        "run_search",
        [](const std::string& problem_kind, const CausalFrame& frame, const Split& split,
           const std::string& objective, int max_trials, double max_seconds,
           std::uint64_t seed, int workers, std::optional<Vector> truth) {
            const SearchSpace space = default_space(problem_kind_from_string(problem_kind));
            SearchOptions options;
            options.workers = workers;
            if (truth) options.truth_effect = &*truth;
            const SearchReport report = run_search(
                space, frame, split, objective, SearchBudget{max_trials, max_seconds},
                seed, options);
            py::module_ json = py::module_::import("json");
            return json.attr("loads")(to_json(report).dump());
        },
        py::arg("problem_kind"), py::arg("frame"), py::arg("split"), py::arg("objective"),
        py::arg("max_trials") = 0, py::arg("max_seconds") = 0.0, py::arg("seed") = 0,
        py::arg("workers") = 1, py::arg("truth") = std::nullopt);

    m.def("spearman", &spearman, py::arg("a"), py::arg("b"));
}
