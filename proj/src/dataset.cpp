#include "causalscore/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "causalscore/rng.hpp"

namespace causalscore {

namespace {

bool is_binary01(double v) { return v == 0.0 || v == 1.0; }

// RFC-4180 style field split: quoted fields may contain commas and doubled
// quotes. Returns raw field texts without the surrounding quotes.
std::vector<std::string> split_csv_line(const std::string& line) {
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

std::optional<double> parse_double(const std::string& text) {
    if (text.empty()) return std::nullopt;
    double value = 0.0;
    const char* begin = text.data();
    const char* end = begin + text.size();
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr != end) return std::nullopt;
    return value;
}

}  // namespace

void CausalFrame::validate() const {
    const Eigen::Index n = covariates.rows();
    const Eigen::Index d = covariates.cols();
    if (n < 1 || d < 1) throw ShapeMismatch("frame needs N >= 1 and d >= 1");
    if (treatment.size() != n || outcome.size() != n)
        throw ShapeMismatch("treatment/outcome length does not match covariates");
    if (static_cast<Eigen::Index>(column_names.size()) != d)
        throw ShapeMismatch("column_names length does not match covariate count");
    if (instrument && instrument->size() != n)
        throw ShapeMismatch("instrument length does not match covariates");
    if (propensity && propensity->size() != n)
        throw ShapeMismatch("propensity length does not match covariates");

    for (Eigen::Index j = 0; j < d; ++j) {
        for (Eigen::Index i = 0; i < n; ++i) {
            if (!std::isfinite(covariates(i, j)))
                throw NonFiniteValue("column '" + column_names[j] + "' row " +
                                     std::to_string(i));
        }
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!std::isfinite(outcome[i]))
            throw NonFiniteValue("outcome row " + std::to_string(i));
        if (!is_binary01(treatment[i]))
            throw NonBinaryTreatment("treatment row " + std::to_string(i) +
                                     " has value " + std::to_string(treatment[i]));
        if (instrument && !is_binary01((*instrument)[i]))
            throw NonBinaryTreatment("instrument row " + std::to_string(i) +
                                     " has value " + std::to_string((*instrument)[i]));
        if (propensity) {
            const double p = (*propensity)[i];
            if (!std::isfinite(p) || p <= 0.0 || p >= 1.0)
                throw NonFiniteValue("propensity row " + std::to_string(i) +
                                     " outside (0,1)");
        }
    }
}

Matrix Standardization::apply(const Matrix& x) const {
    Matrix out = x;
    for (Eigen::Index j = 0; j < out.cols(); ++j)
        out.col(j) = (out.col(j).array() - mean[j]) / scale[j];
    return out;
}

Matrix Standardization::invert(const Matrix& x) const {
    Matrix out = x;
    for (Eigen::Index j = 0; j < out.cols(); ++j)
        out.col(j) = out.col(j).array() * scale[j] + mean[j];
    return out;
}

CausalFrame load_csv(const std::string& path, const ColumnSchema& schema) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");

    std::string line;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        header = split_csv_line(line);
        break;
    }
    if (header.empty()) throw IoError("'" + path + "' has no header row");

    std::unordered_map<std::string, int> col_of;
    for (std::size_t j = 0; j < header.size(); ++j) col_of[header[j]] = static_cast<int>(j);

    auto require = [&](const std::string& name) {
        auto it = col_of.find(name);
        if (it == col_of.end()) throw MissingColumn("'" + name + "' not in '" + path + "'");
        return it->second;
    };

    const int t_col = require(schema.treatment);
    const int y_col = require(schema.outcome);
    const int z_col = schema.instrument ? require(*schema.instrument) : -1;
    const int p_col = schema.propensity ? require(*schema.propensity) : -1;

    std::vector<std::string> cov_names = schema.covariates;
    if (cov_names.empty()) {
        for (const auto& name : header) {
            if (name == schema.treatment || name == schema.outcome) continue;
            if (schema.instrument && name == *schema.instrument) continue;
            if (schema.propensity && name == *schema.propensity) continue;
            cov_names.push_back(name);
        }
    }
    if (cov_names.empty()) throw MissingColumn("no covariate columns in '" + path + "'");

    std::vector<int> cov_cols;
    cov_cols.reserve(cov_names.size());
    for (const auto& name : cov_names) cov_cols.push_back(require(name));

    std::vector<int> referenced = cov_cols;
    referenced.push_back(t_col);
    referenced.push_back(y_col);
    if (z_col >= 0) referenced.push_back(z_col);
    if (p_col >= 0) referenced.push_back(p_col);

    const std::size_t d = cov_names.size();
    std::vector<double> cov_data;
    std::vector<double> t_data, y_data, z_data, p_data;
    long file_row = 0;

    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        ++file_row;
        const auto fields = split_csv_line(line);
        if (fields.size() != header.size())
            throw IoError("'" + path + "' row " + std::to_string(file_row) +
                          " has " + std::to_string(fields.size()) + " fields, expected " +
                          std::to_string(header.size()));

        bool missing = false;
        for (int c : referenced) {
            if (fields[static_cast<std::size_t>(c)].empty()) { missing = true; break; }
        }
        if (missing) continue;  // rows with missing referenced values are dropped

        auto numeric = [&](int c) {
            const auto& text = fields[static_cast<std::size_t>(c)];
            const auto v = parse_double(text);
            if (!v || !std::isfinite(*v))
                throw NonFiniteValue("column '" + header[static_cast<std::size_t>(c)] +
                                     "' row " + std::to_string(file_row) + " ('" + text + "')");
            return *v;
        };

        const double t = numeric(t_col);
        if (!is_binary01(t))
            throw NonBinaryTreatment("column '" + schema.treatment + "' row " +
                                     std::to_string(file_row) + " has value " +
                                     fields[static_cast<std::size_t>(t_col)]);
        t_data.push_back(t);
        y_data.push_back(numeric(y_col));
        if (z_col >= 0) {
            const double z = numeric(z_col);
            if (!is_binary01(z))
                throw NonBinaryTreatment("column '" + *schema.instrument + "' row " +
                                         std::to_string(file_row));
            z_data.push_back(z);
        }
        if (p_col >= 0) p_data.push_back(numeric(p_col));
        for (int c : cov_cols) cov_data.push_back(numeric(c));
    }

    const Eigen::Index n = static_cast<Eigen::Index>(t_data.size());
    if (n < 1) throw IoError("'" + path + "' has no usable data rows");

    CausalFrame frame;
    frame.covariates.resize(n, static_cast<Eigen::Index>(d));
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(d); ++j)
            frame.covariates(i, j) = cov_data[static_cast<std::size_t>(i) * d +
                                              static_cast<std::size_t>(j)];
    frame.treatment = Eigen::Map<Vector>(t_data.data(), n);
    frame.outcome = Eigen::Map<Vector>(y_data.data(), n);
    if (z_col >= 0) frame.instrument = Eigen::Map<Vector>(z_data.data(), n);
    if (p_col >= 0) frame.propensity = Eigen::Map<Vector>(p_data.data(), n);
    frame.column_names = cov_names;
    frame.validate();
    return frame;
}

void write_csv(const std::string& path, const CausalFrame& frame,
               const ColumnSchema& schema, const std::string& comment) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path + "'");
    if (!comment.empty()) out << "# " << comment << "\n";

    char buf[40];
    auto fmt = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        return std::string(buf);
    };

    for (std::size_t j = 0; j < frame.column_names.size(); ++j)
        out << frame.column_names[j] << ",";
    out << schema.treatment << "," << schema.outcome;
    if (frame.instrument) out << "," << (schema.instrument ? *schema.instrument : "Z");
    if (frame.propensity) out << "," << (schema.propensity ? *schema.propensity : "p");
    out << "\n";

    for (Eigen::Index i = 0; i < frame.n_rows(); ++i) {
        for (Eigen::Index j = 0; j < frame.n_cols(); ++j)
            out << fmt(frame.covariates(i, j)) << ",";
        out << fmt(frame.treatment[i]) << "," << fmt(frame.outcome[i]);
        if (frame.instrument) out << "," << fmt((*frame.instrument)[i]);
        if (frame.propensity) out << "," << fmt((*frame.propensity)[i]);
        out << "\n";
    }
    if (!out) throw IoError("failed while writing '" + path + "'");
}

Split make_split(int n, const SplitFractions& fractions, std::uint64_t seed) {
    const double sum = fractions.train + fractions.valid + fractions.test;
    if (fractions.train <= 0 || fractions.valid <= 0 || fractions.test <= 0)
        throw DegenerateSplit("fractions must be positive");
    if (std::abs(sum - 1.0) > 1e-9)
        throw DegenerateSplit("fractions sum to " + std::to_string(sum) + ", expected 1");
    if (n < 3) throw DegenerateSplit("n = " + std::to_string(n) + " < 3");

    // Largest-remainder apportionment of n rows over the three parts.
    const double raw[3] = {fractions.train * n, fractions.valid * n, fractions.test * n};
    int sizes[3];
    double rem[3];
    int assigned = 0;
    for (int k = 0; k < 3; ++k) {
        sizes[k] = static_cast<int>(std::floor(raw[k]));
        rem[k] = raw[k] - sizes[k];
        assigned += sizes[k];
    }
    int order[3] = {0, 1, 2};
    std::stable_sort(order, order + 3, [&](int a, int b) { return rem[a] > rem[b]; });
    for (int k = 0; assigned < n; ++k, ++assigned) sizes[order[k % 3]] += 1;

    if (sizes[0] == 0 || sizes[1] == 0 || sizes[2] == 0)
        throw DegenerateSplit("a split part would be empty for n = " + std::to_string(n));

    IndexList perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng(seed);
    rng.shuffle(perm);

    Split split;
    split.seed = seed;
    split.train_idx.assign(perm.begin(), perm.begin() + sizes[0]);
    split.valid_idx.assign(perm.begin() + sizes[0], perm.begin() + sizes[0] + sizes[1]);
    split.test_idx.assign(perm.begin() + sizes[0] + sizes[1], perm.end());
    std::sort(split.train_idx.begin(), split.train_idx.end());
    std::sort(split.valid_idx.begin(), split.valid_idx.end());
    std::sort(split.test_idx.begin(), split.test_idx.end());
    return split;
}

double subset_mean(const Vector& column, const IndexList& idx) {
    double s = 0.0;
    for (int i : idx) s += column[i];
    return s / static_cast<double>(idx.size());
}

double subset_population_sd(const Vector& column, const IndexList& idx) {
    const double m = subset_mean(column, idx);
    double s = 0.0;
    for (int i : idx) {
        const double dlt = column[i] - m;
        s += dlt * dlt;
    }
    return std::sqrt(s / static_cast<double>(idx.size()));
}

std::pair<CausalFrame, Standardization> standardize(const CausalFrame& frame,
                                                    const IndexList& reference_idx) {
    if (reference_idx.empty()) throw ShapeMismatch("standardize needs reference rows");

    const Eigen::Index d = frame.n_cols();
    Standardization stats;
    stats.mean.resize(d);
    stats.scale.resize(d);
    stats.constant.resize(static_cast<std::size_t>(d));

    for (Eigen::Index j = 0; j < d; ++j) {
        const double m = subset_mean(frame.covariates.col(j), reference_idx);
        const double sd = subset_population_sd(frame.covariates.col(j), reference_idx);
        if (sd > 0.0) {
            stats.mean[j] = m;
            stats.scale[j] = sd;
            stats.constant[static_cast<std::size_t>(j)] = false;
        } else {
            stats.mean[j] = 0.0;  // constant column passes through unchanged
            stats.scale[j] = 1.0;
            stats.constant[static_cast<std::size_t>(j)] = true;
        }
    }

    CausalFrame out = frame;
    out.covariates = stats.apply(frame.covariates);
    return {std::move(out), std::move(stats)};
}

}  // namespace causalscore
