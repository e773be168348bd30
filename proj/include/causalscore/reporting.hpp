#pragma once

#include <string>
#include <vector>

#include "causalscore/search.hpp"

namespace causalscore {

// %.17g, enough digits for an exact double round-trip.
std::string format_g17(double value);

// FNV-1a 64 over the canonical (sorted-key) JSON dump, hex encoded. Emitted
// into every output file so runs can be matched and compared.
std::string config_hash_hex(const Json& config);

Json to_json(const ScoreValue& score);
Json to_json(const SearchReport& report);

// Writes <out_dir>/report.json and <out_dir>/trials.csv. run_id defaults to
// the report's config hash.
void write_search_outputs(const std::string& out_dir, const SearchReport& report);

// Flattened one-row-per-trial table (family, resolved hyperparameters,
// scores per split), used for the score-vs-MSE scatter data.
void write_trials_csv(const std::string& path, const SearchReport& report,
                      const std::string& run_id);

// Generic CSV-with-header reader ('#' comment lines skipped).
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int column(const std::string& name) const;  // -1 when absent
};
CsvTable read_csv_table(const std::string& path);

// Merges one or more trials CSVs into tidy plot data (one row per trial and
// split) plus a Markdown summary table with per-run Spearman correlation
// between the oriented objective and mse_tau where ground truth is present.
void write_report_outputs(const std::vector<std::string>& trials_csv_paths,
                          const std::string& out_dir);

}  // namespace causalscore
