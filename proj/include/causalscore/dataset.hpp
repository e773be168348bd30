#pragma once

#include <Eigen/Core>

#include <optional>
#include <string>
#include <vector>

#include "causalscore/errors.hpp"

namespace causalscore {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using IndexList = std::vector<int>;

// Tabular causal dataset. Immutable after validate(); treatment and
// instrument hold 0/1 stored as doubles, propensity lies strictly in (0,1).
struct CausalFrame {
    Matrix covariates;                  // N x d
    Vector treatment;                   // N
    Vector outcome;                     // N
    std::optional<Vector> instrument;   // N, 0/1
    std::optional<Vector> propensity;   // N, (0,1)
    std::vector<std::string> column_names;  // d labels

    Eigen::Index n_rows() const { return covariates.rows(); }
    Eigen::Index n_cols() const { return covariates.cols(); }

    // Enforces the type invariants; throws NonBinaryTreatment /
    // NonFiniteValue / ShapeMismatch with column and row context.
    void validate() const;
};

struct Split {
    IndexList train_idx;
    IndexList valid_idx;
    IndexList test_idx;
    std::uint64_t seed = 0;
};

struct SplitFractions {
    double train = 0.6;
    double valid = 0.2;
    double test = 0.2;
};

// Column roles for CSV ingestion. Empty covariates list means "every column
// not claimed by another role".
struct ColumnSchema {
    std::string treatment = "T";
    std::string outcome = "Y";
    std::optional<std::string> instrument;
    std::optional<std::string> propensity;
    std::vector<std::string> covariates;
};

// Per-column location/scale statistics from standardize(). Zero-variance
// columns keep scale 1 and are flagged in `constant`.
struct Standardization {
    Vector mean;
    Vector scale;
    std::vector<bool> constant;

    Matrix apply(const Matrix& x) const;
    Matrix invert(const Matrix& x) const;
};

// Parses a headered CSV into a validated CausalFrame. Lines starting with
// '#' are skipped (emitted files carry a seed/config-hash comment line).
// Rows with an empty field in any referenced column are dropped; textual
// nan/inf raise NonFiniteValue.
CausalFrame load_csv(const std::string& path, const ColumnSchema& schema);

// Writes the frame back out: covariates under their column names, then the
// role columns. Values round-trip through %.17g.
void write_csv(const std::string& path, const CausalFrame& frame,
               const ColumnSchema& schema, const std::string& comment = "");

// Deterministic three-way split: indices 0..n-1 shuffled with Rng(seed),
// sizes assigned by largest remainder, each part returned sorted ascending.
Split make_split(int n, const SplitFractions& fractions, std::uint64_t seed);

// Standardizes covariate columns with mean/population-sd computed on
// reference_idx rows only. Outcome and treatment are untouched.
std::pair<CausalFrame, Standardization> standardize(const CausalFrame& frame,
                                                    const IndexList& reference_idx);

// Shared helpers for column statistics on a row subset (population sd).
double subset_mean(const Vector& column, const IndexList& idx);
double subset_population_sd(const Vector& column, const IndexList& idx);

}  // namespace causalscore
