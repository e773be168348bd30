#include "causalscore/reporting.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace causalscore {

namespace {

std::string csv_quote(const std::string& field) {
    if (field.find_first_of(",\"\n") == std::string::npos) return field;
    std::string quoted = "\"";
    for (char c : field) {
        if (c == '"') quoted += "\"\"";
        else quoted.push_back(c);
    }
    quoted += "\"";
    return quoted;
}

std::string direction_name(ScoreDirection direction) {
    return direction == ScoreDirection::lower_better ? "lower_better" : "higher_better";
}

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    fields.push_back(cur);
    return fields;
}

const ScoreValue* find_score(const TrialRecord& trial, const std::string& name,
                             const std::string& split) {
    for (const auto& score : trial.scores)
        if (score.name == name && score.split == split) return &score;
    return nullptr;
}

}  // namespace

std::string format_g17(double value) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    return buf;
}

std::string config_hash_hex(const Json& config) {
    const std::string canonical = config.dump();  // nlohmann keeps keys sorted
    std::uint64_t hash = 1469598103934665603ULL;
    for (unsigned char c : canonical) {
        hash ^= c;
        hash *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash));
    return buf;
}

Json to_json(const ScoreValue& score) {
    Json j{{"name", score.name},
           {"value", score.value},
           {"direction", direction_name(score.direction)},
           {"split", score.split},
           {"n_effective", score.n_effective}};
    if (score.subsampled) {
        j["subsampled"] = true;
        j["subsample_seed"] = score.subsample_seed;
    }
    if (score.degenerate_policy) j["degenerate_policy"] = true;
    if (score.raw_value) j["raw_value"] = *score.raw_value;
    return j;
}

Json to_json(const SearchReport& report) {
    Json trials = Json::array();
    for (const auto& trial : report.trials) {
        Json t{{"trial_id", trial.trial_id},
               {"family", to_string(trial.spec.family)},
               {"hyperparams", trial.spec.hyperparams},
               {"status", trial.ok ? "ok" : "failed"},
               {"seed", trial.seed},
               {"wall_time", trial.wall_time}};
        if (!trial.ok) t["reason"] = trial.failure_reason;
        Json scores = Json::array();
        for (const auto& score : trial.scores) scores.push_back(to_json(score));
        t["scores"] = std::move(scores);
        trials.push_back(std::move(t));
    }

    Json j{{"problem_kind", to_string(report.problem_kind)},
           {"objective", report.objective},
           {"objective_direction", direction_name(report.objective_direction)},
           {"seed", report.seed},
           {"best_trial_id", report.best_trial_id},
           {"config", report.config_echo},
           {"config_hash", config_hash_hex(report.config_echo)},
           {"split",
            Json{{"seed", report.split.seed},
                 {"train_idx", report.split.train_idx},
                 {"valid_idx", report.split.valid_idx},
                 {"test_idx", report.split.test_idx}}},
           {"trials", std::move(trials)}};
    return j;
}

void write_trials_csv(const std::string& path, const SearchReport& report,
                      const std::string& run_id) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path + "'");
    out << "# config_hash=" << config_hash_hex(report.config_echo)
        << " seed=" << report.seed << "\n";
    out << "run_id,trial_id,family,status,seed,objective,score_train,score_valid,"
           "score_test,mse_tau_valid,ate_valid,mse_tau_test,ate_test,"
           "n_effective_valid,degenerate_policy,subsampled,is_best,wall_time,"
           "hyperparams\n";

    auto cell = [&](const TrialRecord& trial, const std::string& name,
                    const std::string& split) {
        const ScoreValue* score = find_score(trial, name, split);
        return score ? format_g17(score->value) : std::string();
    };

    for (const auto& trial : report.trials) {
        const ScoreValue* valid = find_score(trial, report.objective, "valid");
        out << run_id << "," << trial.trial_id << "," << to_string(trial.spec.family) << ","
            << (trial.ok ? "ok" : "failed") << "," << trial.seed << ","
            << report.objective << ","
            << cell(trial, report.objective, "train") << ","
            << cell(trial, report.objective, "valid") << ","
            << cell(trial, report.objective, "test") << ","
            << cell(trial, "mse_tau", "valid") << ","
            << cell(trial, "ate", "valid") << ","
            << cell(trial, "mse_tau", "test") << ","
            << cell(trial, "ate", "test") << ","
            << (valid ? std::to_string(valid->n_effective) : std::string()) << ","
            << (valid && valid->degenerate_policy ? "1" : "0") << ","
            << (valid && valid->subsampled ? "1" : "0") << ","
            << (trial.trial_id == report.best_trial_id ? "1" : "0") << ","
            << format_g17(trial.wall_time) << ","
            << csv_quote(trial.spec.hyperparams.dump()) << "\n";
    }
    if (!out) throw IoError("failed while writing '" + path + "'");
}

void write_search_outputs(const std::string& out_dir, const SearchReport& report) {
    std::filesystem::create_directories(out_dir);
    const std::string run_id = config_hash_hex(report.config_echo);

    std::ofstream out(out_dir + "/report.json");
    if (!out) throw IoError("cannot write report.json in '" + out_dir + "'");
    out << to_json(report).dump(2) << "\n";
    if (!out) throw IoError("failed while writing report.json");

    write_trials_csv(out_dir + "/trials.csv", report, run_id);
}

int CsvTable::column(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    return it == header.end() ? -1 : static_cast<int>(it - header.begin());
}

CsvTable read_csv_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    CsvTable table;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (table.header.empty()) {
            table.header = split_line(line);
        } else {
            table.rows.push_back(split_line(line));
        }
    }
    if (table.header.empty()) throw IoError("'" + path + "' has no header row");
    return table;
}

void write_report_outputs(const std::vector<std::string>& trials_csv_paths,
                          const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);

    struct Row {
        std::string run_id, trial_id, family, split, objective, score, mse;
    };
    std::vector<Row> tidy;

    struct RunStat {
        std::string objective;
        int n_trials = 0;
        int n_ok = 0;
        std::string best_family;
        std::string best_score;
        std::string best_mse;
        std::vector<double> oriented_scores;
        std::vector<double> mses;
    };
    std::map<std::string, RunStat> runs;

    for (const auto& path : trials_csv_paths) {
        const CsvTable table = read_csv_table(path);
        const int c_run = table.column("run_id");
        const int c_id = table.column("trial_id");
        const int c_family = table.column("family");
        const int c_status = table.column("status");
        const int c_objective = table.column("objective");
        const int c_best = table.column("is_best");
        const int c_train = table.column("score_train");
        const int c_valid = table.column("score_valid");
        const int c_test = table.column("score_test");
        const int c_mse_v = table.column("mse_tau_valid");
        const int c_mse_t = table.column("mse_tau_test");
        if (c_run < 0 || c_id < 0 || c_family < 0 || c_objective < 0 || c_valid < 0)
            throw IoError("'" + path + "' is not a trials CSV");

        for (const auto& row : table.rows) {
            auto get = [&](int c) {
                return c >= 0 && c < static_cast<int>(row.size())
                           ? row[static_cast<std::size_t>(c)]
                           : std::string();
            };
            const std::string run_id = get(c_run);
            const std::string objective = get(c_objective);
            auto& stat = runs[run_id];
            stat.objective = objective;
            stat.n_trials += 1;
            const bool ok = get(c_status) == "ok" || c_status < 0;
            if (ok) stat.n_ok += 1;

            const struct {
                const char* split;
                int score_col;
                int mse_col;
            } splits[] = {{"train", c_train, -1},
                          {"valid", c_valid, c_mse_v},
                          {"test", c_test, c_mse_t}};
            for (const auto& s : splits) {
                const std::string score = get(s.score_col);
                if (score.empty()) continue;
                tidy.push_back(Row{run_id, get(c_id), get(c_family), s.split, objective,
                                   score, get(s.mse_col)});
            }

            if (ok && !get(c_valid).empty()) {
                const double value = std::stod(get(c_valid));
                const double orientation =
                    direction_of(objective) == ScoreDirection::lower_better ? 1.0 : -1.0;
                if (!get(c_mse_v).empty()) {
                    stat.oriented_scores.push_back(orientation * value);
                    stat.mses.push_back(std::stod(get(c_mse_v)));
                }
            }
            if (get(c_best) == "1") {
                stat.best_family = get(c_family);
                stat.best_score = get(c_valid);
                stat.best_mse = get(c_mse_v);
            }
        }
    }

    {
        std::ofstream out(out_dir + "/plot_data.csv");
        if (!out) throw IoError("cannot write plot_data.csv in '" + out_dir + "'");
        out << "run_id,trial_id,family,split,objective,score,mse_tau\n";
        for (const auto& row : tidy)
            out << row.run_id << "," << row.trial_id << "," << row.family << ","
                << row.split << "," << row.objective << "," << row.score << ","
                << row.mse << "\n";
    }

    {
        std::ofstream out(out_dir + "/summary.md");
        if (!out) throw IoError("cannot write summary.md in '" + out_dir + "'");
        out << "# Search summary\n\n";
        out << "| run_id | objective | trials | ok | best family | best valid score "
               "| best mse_tau | spearman(score, mse_tau) |\n";
        out << "|---|---|---|---|---|---|---|---|\n";
        for (const auto& [run_id, stat] : runs) {
            std::string rho = "n/a";
            if (stat.oriented_scores.size() >= 2) {
                const double r = spearman(stat.oriented_scores, stat.mses);
                if (std::isfinite(r)) rho = format_g17(r);
            }
            out << "| " << run_id << " | " << stat.objective << " | " << stat.n_trials
                << " | " << stat.n_ok << " | " << stat.best_family << " | "
                << stat.best_score << " | "
                << (stat.best_mse.empty() ? "n/a" : stat.best_mse) << " | " << rho
                << " |\n";
        }
    }
}

}  // namespace causalscore
