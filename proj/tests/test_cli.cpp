#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "causalscore/reporting.hpp"

namespace fs = std::filesystem;
using Json = nlohmann::json;

namespace {

const std::string cli = CAUSALSCORE_CLI_PATH;

int run(const std::string& args) {
    const std::string command = cli + " " + args + " > /dev/null 2>&1";
    const int status = std::system(command.c_str());
    return WEXITSTATUS(status);
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("causalscore_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

Json sanitized_report(const fs::path& path) {
    Json report = Json::parse(slurp(path));
    for (auto& trial : report["trials"]) trial.erase("wall_time");
    return report;
}

// trials.csv with the wall_time column blanked
std::string sanitized_trials(const fs::path& path) {
    const causalscore::CsvTable table = causalscore::read_csv_table(path.string());
    const int wall = table.column("wall_time");
    std::ostringstream out;
    for (const auto& row : table.rows) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (static_cast<int>(c) != wall) out << row[c];
            out << '|';
        }
        out << '\n';
    }
    return out.str();
}

}  // namespace

TEST_CASE("cli gen is deterministic and self-describing") {
    const fs::path a = fresh_dir("gen_a");
    const fs::path b = fresh_dir("gen_b");
    REQUIRE(run("gen --dgp rct --n 500 --seed 12 --out-dir " + a.string()) == 0);
    REQUIRE(run("gen --dgp rct --n 500 --seed 12 --out-dir " + b.string()) == 0);

    CHECK(slurp(a / "data.csv") == slurp(b / "data.csv"));
    CHECK(slurp(a / "ground_truth.csv") == slurp(b / "ground_truth.csv"));
    CHECK(slurp(a / "manifest.json") == slurp(b / "manifest.json"));

    const Json manifest = Json::parse(slurp(a / "manifest.json"));
    CHECK(manifest.at("seed") == 12);
    CHECK(manifest.contains("config_hash"));
    const std::string head = slurp(a / "data.csv").substr(0, 80);
    CHECK(head.find("config_hash=") != std::string::npos);
    CHECK(head.find("seed=12") != std::string::npos);

    const fs::path c = fresh_dir("gen_c");
    REQUIRE(run("gen --dgp rct --n 500 --seed 13 --out-dir " + c.string()) == 0);
    CHECK(slurp(a / "data.csv") != slurp(c / "data.csv"));
}

TEST_CASE("cli gen rejects an undersized iv covariate count") {
    const fs::path dir = fresh_dir("gen_iv_bad");
    CHECK(run("gen --dgp iv --n 100 --covariates 5 --out-dir " + dir.string()) == 2);
    CHECK(run("gen --dgp nonsense --n 100 --out-dir " + dir.string()) == 2);
}

TEST_CASE("cli search writes a report and is deterministic") {
    const fs::path data = fresh_dir("search_data");
    REQUIRE(run("gen --dgp rct --n 1500 --seed 3 --out-dir " + data.string()) == 0);

    const std::string common =
        " --data " + (data / "data.csv").string() + " --truth " +
        (data / "ground_truth.csv").string() +
        " --propensity-col p --problem-kind rct_cate --objective qini"
        " --max-trials 8 --seed 21 --out-dir ";
    const fs::path a = fresh_dir("search_a");
    const fs::path b = fresh_dir("search_b");
    REQUIRE(run("search" + common + a.string()) == 0);
    REQUIRE(run("search" + common + b.string()) == 0);

    CHECK(sanitized_report(a / "report.json") == sanitized_report(b / "report.json"));
    CHECK(sanitized_trials(a / "trials.csv") == sanitized_trials(b / "trials.csv"));

    const Json report = sanitized_report(a / "report.json");
    CHECK(report.at("trials").size() == 8);
    CHECK(report.at("best_trial_id").get<int>() >= 0);
    CHECK(report.contains("config_hash"));
    CHECK(report.at("split").at("train_idx").size() == 900);
}

TEST_CASE("cli search rejects barred objectives") {
    const fs::path data = fresh_dir("search_data2");
    REQUIRE(run("gen --dgp rct --n 300 --seed 4 --out-dir " + data.string()) == 0);
    CHECK(run("search --data " + (data / "data.csv").string() +
              " --propensity-col p --objective mse_tau --max-trials 3 --out-dir " +
              fresh_dir("searchx").string()) == 2);
}

TEST_CASE("cli score reproduces the winner's test entry bit for bit") {
    const fs::path data = fresh_dir("score_data");
    REQUIRE(run("gen --dgp rct --n 1500 --seed 5 --out-dir " + data.string()) == 0);
    const fs::path search_dir = fresh_dir("score_search");
    REQUIRE(run("search --data " + (data / "data.csv").string() + " --truth " +
                (data / "ground_truth.csv").string() +
                " --propensity-col p --problem-kind rct_cate --objective energy_cate"
                " --max-trials 6 --seed 8 --out-dir " +
                search_dir.string()) == 0);

    const fs::path score_dir = fresh_dir("score_out");
    REQUIRE(run("score --data " + (data / "data.csv").string() + " --truth " +
                (data / "ground_truth.csv").string() + " --propensity-col p --report " +
                (search_dir / "report.json").string() + " --out-dir " +
                score_dir.string()) == 0);

    const Json report = Json::parse(slurp(search_dir / "report.json"));
    const Json scores = Json::parse(slurp(score_dir / "scores.json"));
    const int best = report.at("best_trial_id").get<int>();

    const Json* winner = nullptr;
    for (const auto& trial : report.at("trials"))
        if (trial.at("trial_id").get<int>() == best) winner = &trial;
    REQUIRE(winner != nullptr);

    auto value_of = [](const Json& score_list, const std::string& name,
                       const std::string& split) -> const Json* {
        for (const auto& s : score_list)
            if (s.at("name") == name && s.at("split") == split) return &s;
        return nullptr;
    };

    for (const std::string name : {std::string("energy_cate"), std::string("mse_tau")}) {
        const Json* in_report = value_of(winner->at("scores"), name, "test");
        const Json* rescored = value_of(scores.at("test"), name, "test");
        REQUIRE(in_report != nullptr);
        REQUIRE(rescored != nullptr);
        CHECK(in_report->at("value") == rescored->at("value"));
    }
}

TEST_CASE("cli score handles impact vectors including degenerate ones") {
    const fs::path data = fresh_dir("impact_data");
    REQUIRE(run("gen --dgp rct --n 900 --seed 6 --out-dir " + data.string()) == 0);

    // a zero impact vector: degenerate treat-none policy, mse equals E[tau^2]
    const fs::path impact = data / "impact.csv";
    {
        std::ofstream out(impact);
        out << "impact\n";
        for (int i = 0; i < 900; ++i) out << "0\n";
    }
    const fs::path out_dir = fresh_dir("impact_out");
    REQUIRE(run("score --data " + (data / "data.csv").string() + " --propensity-col p" +
                " --impact-csv " + impact.string() + " --truth " +
                (data / "ground_truth.csv").string() + " --seed 9 --out-dir " +
                out_dir.string()) == 0);
    const Json scores = Json::parse(slurp(out_dir / "scores.json"));
    bool saw_norm_erupt = false;
    for (const auto& s : scores.at("valid")) {
        if (s.at("name") == "norm_erupt") {
            saw_norm_erupt = true;
            CHECK(s.value("degenerate_policy", false));
        }
    }
    CHECK(saw_norm_erupt);

    // the oracle tau vector scores mse_tau == 0
    const fs::path oracle_out = fresh_dir("impact_oracle");
    REQUIRE(run("score --data " + (data / "data.csv").string() + " --propensity-col p" +
                " --impact-csv " + (data / "ground_truth.csv").string() +
                " --impact-col tau --truth " + (data / "ground_truth.csv").string() +
                " --seed 9 --out-dir " + oracle_out.string()) == 0);
    const Json oracle = Json::parse(slurp(oracle_out / "scores.json"));
    for (const auto& s : oracle.at("valid"))
        if (s.at("name") == "mse_tau") CHECK(s.at("value").get<double>() == 0.0);

    // mse_tau explicitly requested without truth
    CHECK(run("score --data " + (data / "data.csv").string() + " --propensity-col p" +
              " --impact-csv " + impact.string() + " --with-mse-tau --out-dir " +
              fresh_dir("impact_err").string()) == 3);
}

TEST_CASE("cli report merges trials into plot data with rank correlation") {
    const fs::path data = fresh_dir("report_data");
    REQUIRE(run("gen --dgp rct --n 1200 --seed 7 --out-dir " + data.string()) == 0);
    const fs::path s1 = fresh_dir("report_s1");
    REQUIRE(run("search --data " + (data / "data.csv").string() + " --truth " +
                (data / "ground_truth.csv").string() +
                " --propensity-col p --objective qini --max-trials 7 --seed 1 --out-dir " +
                s1.string()) == 0);
    const fs::path s2 = fresh_dir("report_s2");
    REQUIRE(run("search --data " + (data / "data.csv").string() + " --truth " +
                (data / "ground_truth.csv").string() +
                " --propensity-col p --objective norm_erupt --max-trials 7 --seed 2"
                " --out-dir " +
                s2.string()) == 0);

    const fs::path merged = fresh_dir("report_out");
    REQUIRE(run("report --trials " + (s1 / "trials.csv").string() + " " +
                (s2 / "trials.csv").string() + " --out-dir " + merged.string()) == 0);

    const causalscore::CsvTable plot =
        causalscore::read_csv_table((merged / "plot_data.csv").string());
    CHECK(plot.column("score") >= 0);
    CHECK(plot.column("mse_tau") >= 0);
    CHECK(plot.column("family") >= 0);
    CHECK(plot.column("split") >= 0);
    CHECK(plot.rows.size() >= 14);  // at least train+valid per ok trial

    // two distinct run ids
    std::set<std::string> run_ids;
    const int c_run = plot.column("run_id");
    for (const auto& row : plot.rows) run_ids.insert(row[static_cast<std::size_t>(c_run)]);
    CHECK(run_ids.size() == 2);

    const std::string summary = slurp(merged / "summary.md");
    CHECK(summary.find("spearman") != std::string::npos);
    CHECK(summary.find("| qini |") != std::string::npos);
    CHECK(summary.find("| norm_erupt |") != std::string::npos);

    // single-trial passthrough
    const fs::path single_src = fresh_dir("report_single_src");
    {
        std::ofstream out(single_src / "trials.csv");
        out << "run_id,trial_id,family,status,seed,objective,score_train,score_valid,"
               "score_test,mse_tau_valid,ate_valid,mse_tau_test,ate_test,"
               "n_effective_valid,degenerate_policy,subsampled,is_best,wall_time,"
               "hyperparams\n";
        out << "r1,0,s_learner,ok,1,qini,,0.5,,0.25,0.1,,,10,0,0,1,0.1,\"{}\"\n";
    }
    const fs::path single_out = fresh_dir("report_single_out");
    REQUIRE(run("report --trials " + (single_src / "trials.csv").string() +
                " --out-dir " + single_out.string()) == 0);
    const causalscore::CsvTable single =
        causalscore::read_csv_table((single_out / "plot_data.csv").string());
    CHECK(single.rows.size() == 1);
    CHECK(single.rows[0][static_cast<std::size_t>(single.column("score"))] == "0.5");
}

TEST_CASE("cli exit codes for missing files and bad data") {
    CHECK(run("search --data /nonexistent.csv --max-trials 3 --out-dir " +
              fresh_dir("missing").string()) == 3);
    CHECK(run("") == 2);
}

TEST_CASE("cli search exits 4 with an error report when every trial fails") {
    const fs::path dir = fresh_dir("allfail");
    {
        std::ofstream out(dir / "flat.csv");
        out << "a,b,T,Y\n";
        for (int i = 0; i < 200; ++i)
            out << i * 0.1 << "," << i * 0.2 << ",0," << i * 0.3 << "\n";
    }
    const fs::path out_dir = fresh_dir("allfail_out");
    CHECK(run("search --data " + (dir / "flat.csv").string() +
              " --objective qini --max-trials 5 --out-dir " + out_dir.string()) == 4);
    const Json error = Json::parse(slurp(out_dir / "error.json"));
    CHECK(error.at("error") == "all trials failed");
    CHECK(error.at("trials").size() == 5);
}

TEST_CASE("cli gen rct fills the known propensity column") {
    const fs::path dir = fresh_dir("gen_p");
    REQUIRE(run("gen --dgp rct --n 50 --seed 9 --out-dir " + dir.string()) == 0);
    const causalscore::CsvTable data =
        causalscore::read_csv_table((dir / "data.csv").string());
    const int p_col = data.column("p");
    REQUIRE(p_col >= 0);
    for (const auto& row : data.rows)
        CHECK(row[static_cast<std::size_t>(p_col)] == "0.5");
}
