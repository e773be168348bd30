#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "causalscore/dataset.hpp"
#include "causalscore/reporting.hpp"
#include "causalscore/rng.hpp"
#include "causalscore/scoring.hpp"
#include "causalscore/search.hpp"
#include "causalscore/synthdata.hpp"

namespace cs = causalscore;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitAllFailed = 4;

struct SchemaFlags {
    std::string treatment_col = "T";
    std::string outcome_col = "Y";
    std::string instrument_col;
    std::string propensity_col;
    std::string covariate_cols;  // comma separated; empty = all remaining

    void add_to(CLI::App* cmd) {
        cmd->add_option("--treatment-col", treatment_col, "Treatment column name");
        cmd->add_option("--outcome-col", outcome_col, "Outcome column name");
        cmd->add_option("--instrument-col", instrument_col, "Instrument column name");
        cmd->add_option("--propensity-col", propensity_col, "Known propensity column name");
        cmd->add_option("--covariate-cols", covariate_cols,
                        "Comma-separated covariate columns (default: all remaining)");
    }

    cs::ColumnSchema to_schema() const {
        cs::ColumnSchema schema;
        schema.treatment = treatment_col;
        schema.outcome = outcome_col;
        if (!instrument_col.empty()) schema.instrument = instrument_col;
        if (!propensity_col.empty()) schema.propensity = propensity_col;
        if (!covariate_cols.empty()) {
            std::stringstream ss(covariate_cols);
            std::string token;
            while (std::getline(ss, token, ','))
                if (!token.empty()) schema.covariates.push_back(token);
        }
        return schema;
    }

    cs::Json to_json() const {
        return cs::Json{{"treatment_col", treatment_col},
                        {"outcome_col", outcome_col},
                        {"instrument_col", instrument_col},
                        {"propensity_col", propensity_col},
                        {"covariate_cols", covariate_cols}};
    }
};

struct SplitFlags {
    double train = 0.6;
    double valid = 0.2;
    double test = 0.2;

    void add_to(CLI::App* cmd) {
        cmd->add_option("--train-frac", train, "Training fraction");
        cmd->add_option("--valid-frac", valid, "Validation fraction");
        cmd->add_option("--test-frac", test, "Test fraction");
    }

    cs::SplitFractions fractions() const { return {train, valid, test}; }
};

void write_json_file(const std::string& path, const cs::Json& payload) {
    std::ofstream out(path);
    if (!out) throw cs::IoError("cannot write '" + path + "'");
    out << payload.dump(2) << "\n";
    if (!out) throw cs::IoError("failed while writing '" + path + "'");
}

// Ground-truth CSV for generated data (tau/theta plus the per-unit latents).
void write_truth_csv(const std::string& path, const std::vector<std::string>& names,
                     const std::vector<const cs::Vector*>& columns,
                     const std::string& comment) {
    std::ofstream out(path);
    if (!out) throw cs::IoError("cannot write '" + path + "'");
    out << "# " << comment << "\n";
    for (std::size_t j = 0; j < names.size(); ++j)
        out << names[j] << (j + 1 < names.size() ? "," : "\n");
    const Eigen::Index n = columns.front()->size();
    for (Eigen::Index i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < columns.size(); ++j)
            out << cs::format_g17((*columns[j])[i]) << (j + 1 < columns.size() ? "," : "\n");
    }
    if (!out) throw cs::IoError("failed while writing '" + path + "'");
}

cs::Vector load_truth_column(const std::string& path, std::string column) {
    const cs::CsvTable table = cs::read_csv_table(path);
    if (column.empty()) {
        for (const char* candidate : {"tau", "theta", "impact"})
            if (table.column(candidate) >= 0) {
                column = candidate;
                break;
            }
        if (column.empty())
            throw cs::MissingColumn("no tau/theta/impact column in '" + path + "'");
    }
    const int c = table.column(column);
    if (c < 0) throw cs::MissingColumn("'" + column + "' not in '" + path + "'");
    cs::Vector values(static_cast<Eigen::Index>(table.rows.size()));
    for (std::size_t i = 0; i < table.rows.size(); ++i)
        values[static_cast<Eigen::Index>(i)] =
            std::stod(table.rows[i][static_cast<std::size_t>(c)]);
    return values;
}

// ---------------------------------------------------------------------------
// gen

struct GenArgs {
    std::string dgp = "rct";
    int n = 1000;
    int covariates = 0;  // 0 = per-DGP default
    double sigma = 1.0;
    double b_low = 0.4;
    double b_high = 0.7;
    double effect_noise_sd = 0.05;
    std::uint64_t seed = 0;
    std::string out_dir = ".";
};

int run_gen(const GenArgs& args) {
    cs::DgpConfig config;
    config.n_rows = args.n;
    config.n_covariates = args.covariates > 0 ? args.covariates : (args.dgp == "iv" ? 10 : 5);
    config.sigma = args.sigma;
    config.b_low = args.b_low;
    config.b_high = args.b_high;
    config.effect_noise_sd = args.effect_noise_sd;
    config.seed = args.seed;

    const cs::Json config_json{{"command", "gen"},
                               {"dgp", args.dgp},
                               {"n", config.n_rows},
                               {"covariates", config.n_covariates},
                               {"sigma", config.sigma},
                               {"b_low", config.b_low},
                               {"b_high", config.b_high},
                               {"effect_noise_sd", config.effect_noise_sd},
                               {"seed", config.seed}};
    const std::string hash = cs::config_hash_hex(config_json);
    const std::string comment = "config_hash=" + hash + " seed=" + std::to_string(args.seed);

    std::filesystem::create_directories(args.out_dir);
    const std::string data_path = args.out_dir + "/data.csv";
    const std::string truth_path = args.out_dir + "/ground_truth.csv";

    cs::ColumnSchema schema;
    schema.instrument = "Z";
    schema.propensity = "p";

    if (args.dgp == "rct" || args.dgp == "confounded") {
        auto [frame, truth] = args.dgp == "rct" ? cs::gen_rct(config) : cs::gen_confounded(config);
        cs::write_csv(data_path, frame, schema, comment);
        write_truth_csv(truth_path, {"tau", "true_propensity"},
                        {&truth.tau, &truth.true_propensity}, comment);
    } else if (args.dgp == "iv") {
        auto [frame, truth] = cs::gen_iv(config);
        cs::write_csv(data_path, frame, schema, comment);
        write_truth_csv(truth_path, {"theta", "nu", "compliance", "always_taker_draw"},
                        {&truth.theta, &truth.nu, &truth.compliance,
                         &truth.always_taker_draw},
                        comment);
    } else {
        throw cs::ConfigError("unknown --dgp '" + args.dgp + "'");
    }

    write_json_file(args.out_dir + "/manifest.json",
                    cs::Json{{"config", config_json},
                             {"config_hash", hash},
                             {"seed", args.seed},
                             {"data", "data.csv"},
                             {"ground_truth", "ground_truth.csv"}});
    return kExitOk;
}

// ---------------------------------------------------------------------------
// search

struct SearchArgs {
    std::string data;
    std::string truth;
    std::string truth_col;
    SchemaFlags schema;
    SplitFlags split;
    std::string problem_kind = "rct_cate";
    std::string objective = "norm_erupt";
    int max_trials = 0;
    double max_seconds = 0.0;
    int workers = 1;
    std::uint64_t seed = 0;
    std::string out_dir = ".";
};

int run_search_cmd(const SearchArgs& args) {
    const cs::CausalFrame frame = cs::load_csv(args.data, args.schema.to_schema());
    const cs::ProblemKind kind = cs::problem_kind_from_string(args.problem_kind);
    const cs::Split split = cs::make_split(static_cast<int>(frame.n_rows()),
                                           args.split.fractions(), args.seed);

    cs::Vector truth;
    cs::SearchOptions options;
    options.workers = args.workers;
    if (!args.truth.empty()) {
        truth = load_truth_column(args.truth, args.truth_col);
        if (truth.size() != frame.n_rows())
            throw cs::ShapeMismatch("ground truth rows do not match data rows");
        options.truth_effect = &truth;
    }

    cs::SearchBudget budget{args.max_trials, args.max_seconds};
    cs::SearchReport report = cs::run_search(cs::default_space(kind), frame, split,
                                             args.objective, budget, args.seed, options);

    report.config_echo["command"] = "search";
    report.config_echo["data"] = args.data;
    report.config_echo["truth"] = args.truth;
    report.config_echo["schema"] = args.schema.to_json();
    report.config_echo["fractions"] =
        cs::Json{{"train", args.split.train}, {"valid", args.split.valid},
                 {"test", args.split.test}};

    cs::write_search_outputs(args.out_dir, report);

    const bool any_ok = report.best_trial_id >= 0;
    if (!any_ok) {
        cs::Json failures = cs::Json::array();
        for (const auto& trial : report.trials)
            failures.push_back(cs::Json{{"trial_id", trial.trial_id},
                                        {"family", cs::to_string(trial.spec.family)},
                                        {"reason", trial.failure_reason}});
        write_json_file(args.out_dir + "/error.json",
                        cs::Json{{"error", "all trials failed"},
                                 {"seed", args.seed},
                                 {"config_hash", cs::config_hash_hex(report.config_echo)},
                                 {"trials", failures}});
        std::cerr << "error: all trials failed (details in error.json)\n";
        return kExitAllFailed;
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------
// score

struct ScoreArgs {
    std::string data;
    SchemaFlags schema;
    SplitFlags split;
    std::string report_path;
    int trial_id = -1;  // default: best trial
    std::string impact_csv;
    std::string impact_col = "impact";
    std::string truth;
    std::string truth_col;
    bool with_mse_tau = false;
    std::string problem_kind;  // inferred when empty
    std::uint64_t seed = 0;
    std::string out_dir = ".";
};

std::vector<cs::ScoreValue> score_estimate(const cs::CausalFrame& frame,
                                           const cs::EffectEstimate& estimate,
                                           const cs::IndexList& idx, bool is_iv,
                                           const cs::Vector& propensity,
                                           const cs::Vector* truth,
                                           std::uint64_t subsample_seed,
                                           const std::string& split_name) {
    std::vector<cs::ScoreValue> scores;
    auto push = [&](cs::ScoreValue score) {
        score.split = split_name;
        scores.push_back(std::move(score));
    };

    if (is_iv) {
        push(cs::energy_score_iv(estimate, frame, idx, cs::kEnergyPairBudget,
                                 subsample_seed));
    } else {
        push(cs::normalized_erupt(estimate, frame, propensity, idx));
        push(cs::qini(estimate, frame, idx));
        push(cs::energy_score_cate(estimate, frame, idx, cs::kEnergyPairBudget,
                                   subsample_seed, propensity));
    }
    push(cs::ate_score(estimate));

    if (truth != nullptr) {
        if (is_iv) {
            // effect truth is identified on treated rows; restrict the
            // aligned estimate to them
            cs::IndexList treated;
            std::vector<int> positions;
            for (std::size_t r = 0; r < idx.size(); ++r) {
                if (frame.treatment[idx[r]] == 1.0) {
                    treated.push_back(idx[r]);
                    positions.push_back(static_cast<int>(r));
                }
            }
            if (!treated.empty()) {
                cs::EffectEstimate sub;
                sub.impact.resize(static_cast<Eigen::Index>(positions.size()));
                sub.corrected_outcome.resize(sub.impact.size());
                for (std::size_t r = 0; r < positions.size(); ++r) {
                    sub.impact[static_cast<Eigen::Index>(r)] =
                        estimate.impact[positions[r]];
                    sub.corrected_outcome[static_cast<Eigen::Index>(r)] =
                        estimate.corrected_outcome[positions[r]];
                }
                sub.mean_impact = sub.impact.mean();
                push(cs::mse_tau(sub, *truth, treated));
            }
        } else {
            push(cs::mse_tau(estimate, *truth, idx));
        }
    }
    return scores;
}

int run_score(const ScoreArgs& args) {
    if (args.with_mse_tau && args.truth.empty())
        throw cs::NoGroundTruth("--with-mse-tau requires --truth");
    if (args.report_path.empty() == args.impact_csv.empty())
        throw cs::ConfigError("provide exactly one of --report or --impact-csv");

    const cs::CausalFrame frame = cs::load_csv(args.data, args.schema.to_schema());
    const bool is_iv = args.problem_kind.empty()
                           ? frame.instrument.has_value()
                           : cs::problem_kind_from_string(args.problem_kind) ==
                                 cs::ProblemKind::iv;

    cs::Vector truth;
    const cs::Vector* truth_ptr = nullptr;
    if (!args.truth.empty()) {
        truth = load_truth_column(args.truth, args.truth_col);
        if (truth.size() != frame.n_rows())
            throw cs::ShapeMismatch("ground truth rows do not match data rows");
        truth_ptr = &truth;
    }

    cs::Json result{{"command", "score"}, {"data", args.data}};
    std::vector<cs::ScoreValue> valid_scores, test_scores;

    if (!args.report_path.empty()) {
        std::ifstream in(args.report_path);
        if (!in) throw cs::IoError("cannot open '" + args.report_path + "'");
        const cs::Json report_json = cs::Json::parse(in);

        cs::Split split;
        split.seed = report_json.at("seed").get<std::uint64_t>();
        split.train_idx = report_json.at("split").at("train_idx").get<cs::IndexList>();
        split.valid_idx = report_json.at("split").at("valid_idx").get<cs::IndexList>();
        split.test_idx = report_json.at("split").at("test_idx").get<cs::IndexList>();

        const int wanted = args.trial_id >= 0
                               ? args.trial_id
                               : report_json.at("best_trial_id").get<int>();
        if (wanted < 0) throw cs::ConfigError("report has no successful trial to score");
        const cs::Json* trial_json = nullptr;
        for (const auto& t : report_json.at("trials"))
            if (t.at("trial_id").get<int>() == wanted) trial_json = &t;
        if (trial_json == nullptr)
            throw cs::ConfigError("trial " + std::to_string(wanted) + " not in report");

        cs::EstimatorSpec spec;
        spec.family = cs::family_from_string(trial_json->at("family").get<std::string>());
        spec.hyperparams = trial_json->at("hyperparams");

        const auto model = cs::fit_estimator(spec, frame, split.train_idx);
        cs::Vector propensity;
        if (!is_iv) propensity = cs::scoring_propensity(frame, split.train_idx);

        const std::uint64_t run_seed = report_json.at("seed").get<std::uint64_t>();
        const auto valid_estimate = cs::estimate_effect(*model, frame, split.valid_idx);
        const auto test_estimate = cs::estimate_effect(*model, frame, split.test_idx);
        valid_scores = score_estimate(frame, valid_estimate, split.valid_idx, is_iv,
                                      propensity, truth_ptr,
                                      cs::derive_seed(run_seed, 101), "valid");
        test_scores = score_estimate(frame, test_estimate, split.test_idx, is_iv,
                                     propensity, truth_ptr,
                                     cs::derive_seed(run_seed, 103), "test");

        result["trial_id"] = wanted;
        result["family"] = cs::to_string(spec.family);
        result["hyperparams"] = spec.hyperparams;
        result["seed"] = run_seed;
    } else {
        const cs::Vector impact = load_truth_column(args.impact_csv, args.impact_col);
        if (impact.size() != frame.n_rows())
            throw cs::ShapeMismatch("impact rows do not match data rows");

        const cs::Split split = cs::make_split(static_cast<int>(frame.n_rows()),
                                               args.split.fractions(), args.seed);
        cs::Vector propensity;
        if (!is_iv) propensity = cs::scoring_propensity(frame, split.train_idx);

        auto estimate_on = [&](const cs::IndexList& idx) {
            cs::EffectEstimate estimate;
            estimate.impact = cs::gather(impact, idx);
            estimate.mean_impact = estimate.impact.mean();
            estimate.corrected_outcome.resize(estimate.impact.size());
            for (std::size_t r = 0; r < idx.size(); ++r)
                estimate.corrected_outcome[static_cast<Eigen::Index>(r)] =
                    frame.outcome[idx[r]] -
                    estimate.impact[static_cast<Eigen::Index>(r)] *
                        frame.treatment[idx[r]];
            return estimate;
        };

        valid_scores = score_estimate(frame, estimate_on(split.valid_idx), split.valid_idx,
                                      is_iv, propensity, truth_ptr,
                                      cs::derive_seed(args.seed, 101), "valid");
        test_scores = score_estimate(frame, estimate_on(split.test_idx), split.test_idx,
                                     is_iv, propensity, truth_ptr,
                                     cs::derive_seed(args.seed, 103), "test");
        result["impact_csv"] = args.impact_csv;
        result["seed"] = args.seed;
    }

    if (args.with_mse_tau) {
        const bool have_mse = std::any_of(valid_scores.begin(), valid_scores.end(),
                                          [](const cs::ScoreValue& s) {
                                              return s.name == "mse_tau";
                                          });
        if (!have_mse) throw cs::NoGroundTruth("mse_tau could not be computed");
    }

    cs::Json valid_json = cs::Json::array(), test_json = cs::Json::array();
    for (const auto& s : valid_scores) valid_json.push_back(cs::to_json(s));
    for (const auto& s : test_scores) test_json.push_back(cs::to_json(s));
    result["valid"] = std::move(valid_json);
    result["test"] = std::move(test_json);
    result["config_hash"] = cs::config_hash_hex(result);

    std::filesystem::create_directories(args.out_dir);
    write_json_file(args.out_dir + "/scores.json", result);
    return kExitOk;
}

// ---------------------------------------------------------------------------

int dispatch(int argc, char** argv) {
    CLI::App app{"Out-of-sample scoring and budgeted selection of causal effect estimators"};
    app.require_subcommand(1);

    GenArgs gen;
    auto* gen_cmd = app.add_subcommand("gen", "Generate a synthetic dataset with ground truth");
    gen_cmd->add_option("--dgp", gen.dgp, "rct | confounded | iv")->required();
    gen_cmd->add_option("--n", gen.n, "Number of rows")->required();
    gen_cmd->add_option("--covariates", gen.covariates, "Covariate count (default 5, iv 10)");
    gen_cmd->add_option("--sigma", gen.sigma, "Covariate standard deviation");
    gen_cmd->add_option("--b-low", gen.b_low, "Effect weight lower bound");
    gen_cmd->add_option("--b-high", gen.b_high, "Effect weight upper bound");
    gen_cmd->add_option("--effect-noise-sd", gen.effect_noise_sd, "Effect noise sd");
    gen_cmd->add_option("--seed", gen.seed, "Random seed");
    gen_cmd->add_option("--out-dir", gen.out_dir, "Output directory");

    SearchArgs search;
    auto* search_cmd = app.add_subcommand("search", "Run budgeted estimator selection");
    search_cmd->add_option("--data", search.data, "Dataset CSV")->required();
    search_cmd->add_option("--truth", search.truth, "Ground-truth CSV (audit scores)");
    search_cmd->add_option("--truth-col", search.truth_col, "Ground-truth column");
    search.schema.add_to(search_cmd);
    search.split.add_to(search_cmd);
    search_cmd->add_option("--problem-kind", search.problem_kind,
                           "rct_cate | confounded_cate | iv");
    search_cmd->add_option("--objective", search.objective,
                           "norm_erupt | qini | energy_cate | energy_iv");
    search_cmd->add_option("--max-trials", search.max_trials, "Trial budget");
    search_cmd->add_option("--max-seconds", search.max_seconds, "Time budget");
    search_cmd->add_option("--workers", search.workers, "Concurrent trial evaluations");
    search_cmd->add_option("--seed", search.seed, "Random seed");
    search_cmd->add_option("--out-dir", search.out_dir, "Output directory");

    ScoreArgs score;
    auto* score_cmd = app.add_subcommand("score", "Score a fitted trial or an impact vector");
    score_cmd->add_option("--data", score.data, "Dataset CSV")->required();
    score.schema.add_to(score_cmd);
    score.split.add_to(score_cmd);
    score_cmd->add_option("--report", score.report_path, "Search report.json to re-score");
    score_cmd->add_option("--trial", score.trial_id, "Trial id (default: best)");
    score_cmd->add_option("--impact-csv", score.impact_csv, "CSV with an impact vector");
    score_cmd->add_option("--impact-col", score.impact_col, "Impact column name");
    score_cmd->add_option("--truth", score.truth, "Ground-truth CSV");
    score_cmd->add_option("--truth-col", score.truth_col, "Ground-truth column");
    score_cmd->add_flag("--with-mse-tau", score.with_mse_tau, "Require mse_tau output");
    score_cmd->add_option("--problem-kind", score.problem_kind, "Override inferred kind");
    score_cmd->add_option("--seed", score.seed, "Split seed (impact-csv mode)");
    score_cmd->add_option("--out-dir", score.out_dir, "Output directory");

    std::vector<std::string> trials_paths;
    std::string report_out_dir = ".";
    auto* report_cmd = app.add_subcommand("report", "Merge trials CSVs into plot data");
    report_cmd->add_option("--trials", trials_paths, "Trials CSV files")->required();
    report_cmd->add_option("--out-dir", report_out_dir, "Output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    if (gen_cmd->parsed()) return run_gen(gen);
    if (search_cmd->parsed()) return run_search_cmd(search);
    if (score_cmd->parsed()) return run_score(score);
    if (report_cmd->parsed()) {
        cs::write_report_outputs(trials_paths, report_out_dir);
        return kExitOk;
    }
    return kExitConfig;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return dispatch(argc, argv);
    } catch (const cs::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const cs::InvalidObjective& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const cs::EmptyBudget& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const cs::UnknownFamily& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const cs::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
}
