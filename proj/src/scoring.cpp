#include "causalscore/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "causalscore/rng.hpp"

namespace causalscore {

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

double clip_prob(double p) { return std::clamp(p, kProbClipLo, kProbClipHi); }

double row_distance(const RowMajor& a, Eigen::Index i, const RowMajor& b, Eigen::Index j) {
    const double* pa = a.data() + i * a.cols();
    const double* pb = b.data() + j * b.cols();
    double acc = 0.0;
    for (Eigen::Index k = 0; k < a.cols(); ++k) {
        const double diff = pa[k] - pb[k];
        acc += diff * diff;
    }
    return std::sqrt(acc);
}

// Distances from row i of `a` to rows [j0, j1) of `b` via
// |a-b|^2 = |a|^2 + |b|^2 - 2 a.b, written into `d2`. The expansion loses
// precision when the distance is tiny relative to the norms, so those rare
// pairs are recomputed directly (still as a squared distance).
void squared_row_distances(const RowMajor& a, const Vector& norms_a, Eigen::Index i,
                           const RowMajor& b, const Vector& norms_b, Eigen::Index j0,
                           Eigen::Index j1, Vector& d2) {
    const Eigen::Index count = j1 - j0;
    d2.head(count).noalias() = b.middleRows(j0, count) * a.row(i).transpose();
    const double na = norms_a[i];
    for (Eigen::Index j = 0; j < count; ++j) {
        const double scale = na + norms_b[j0 + j];
        const double expanded = scale - 2.0 * d2[j];
        if (expanded < 1e-6 * scale) {
            const double direct = row_distance(a, i, b, j0 + j);
            d2[j] = direct * direct;
        } else {
            d2[j] = expanded;
        }
    }
}

// sum over j in [w0, w1) of weights[j] * sqrt(d2[j - w0])
double weighted_sqrt_sum(const Vector& d2, const Vector& weights, Eigen::Index w0,
                         Eigen::Index w1) {
    double acc = 0.0;
    const double* p = d2.data();
    const double* w = weights.data() + w0;
    for (Eigen::Index j = 0; j < w1 - w0; ++j) acc += w[j] * std::sqrt(p[j]);
    return acc;
}

Vector squared_norms(const RowMajor& m) {
    Vector norms(m.rows());
    for (Eigen::Index i = 0; i < m.rows(); ++i) norms[i] = m.row(i).squaredNorm();
    return norms;
}

double cross_sum(const RowMajor& a, const RowMajor& b, const Vector& u, const Vector& v) {
    const Vector na = squared_norms(a);
    const Vector nb = squared_norms(b);
    Vector d2(b.rows());
    double acc = 0.0;
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        squared_row_distances(a, na, i, b, nb, 0, b.rows(), d2);
        acc += u[i] * weighted_sqrt_sum(d2, v, 0, b.rows());
    }
    return acc;
}

double self_sum(const RowMajor& a, const Vector& u) {
    const Vector norms = squared_norms(a);
    Vector d2(a.rows());
    double acc = 0.0;
    for (Eigen::Index i = 0; i + 1 < a.rows(); ++i) {
        squared_row_distances(a, norms, i, a, norms, i + 1, a.rows(), d2);
        acc += u[i] * weighted_sqrt_sum(d2, u, i + 1, a.rows());
    }
    return acc;
}

// Content-based ordering so energy_of(a, b) and energy_of(b, a) walk the
// exact same float path: d(A,B) == d(B,A) bit for bit.
bool canonical_before(const RowMajor& a, const RowMajor& b) {
    if (a.rows() != b.rows()) return a.rows() < b.rows();
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index k = 0; k < a.cols(); ++k) {
            if (a(i, k) != b(i, k)) return a(i, k) < b(i, k);
        }
    return true;
}

double energy_of(const RowMajor& a, const RowMajor& b, const Vector& u, const Vector& v) {
    const bool a_first = canonical_before(a, b);
    const RowMajor& first = a_first ? a : b;
    const RowMajor& second = a_first ? b : a;
    const Vector& wf = a_first ? u : v;
    const Vector& ws = a_first ? v : u;
    const double n = wf.sum();
    const double m = ws.sum();
    return 2.0 / (n * m) * cross_sum(first, second, wf, ws) -
           2.0 / (n * n) * self_sum(first, wf) - 2.0 / (m * m) * self_sum(second, ws);
}

double energy_of(const RowMajor& a, const RowMajor& b) {
    return energy_of(a, b, Vector::Ones(a.rows()), Vector::Ones(b.rows()));
}

// Uniform subsample of k positions out of n (partial Fisher-Yates), sorted
// to keep row order stable.
std::vector<int> subsample_positions(int n, int k, Rng& rng) {
    std::vector<int> pool(static_cast<std::size_t>(n));
    std::iota(pool.begin(), pool.end(), 0);
    for (int i = 0; i < k; ++i) {
        const int j = i + static_cast<int>(rng.below(static_cast<std::uint64_t>(n - i)));
        std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
    }
    pool.resize(static_cast<std::size_t>(k));
    std::sort(pool.begin(), pool.end());
    return pool;
}

struct ArmEnergy {
    double standardized = 0.0;
    double raw = 0.0;
    long n_effective = 0;
    bool subsampled = false;
};

// Shared core of the two energy scores: extended vectors [X | y_corrected]
// split by the given arm indicator; standardization statistics from the
// arm-0 rows; both sides subsampled to sqrt(budget) rows when the pairwise
// work would exceed the budget. arm0_weight, when non-empty, carries one
// energy weight per frame row for arm-0 members (arm-1 rows stay at 1).
ArmEnergy arm_energy(const EffectEstimate& estimate, const CausalFrame& frame,
                     const IndexList& idx, const Vector& arm_of_row,
                     double pair_budget, std::uint64_t subsample_seed,
                     const Vector& arm0_weight = Vector()) {
    const Eigen::Index m = static_cast<Eigen::Index>(idx.size());
    if (estimate.corrected_outcome.size() != m)
        throw ShapeMismatch("estimate rows do not match idx");
    const Eigen::Index d = frame.n_cols();

    Matrix extended(m, d + 1);
    for (Eigen::Index r = 0; r < m; ++r) {
        extended.row(r).head(d) = frame.covariates.row(idx[static_cast<std::size_t>(r)]);
        extended(r, d) = estimate.corrected_outcome[r];
    }

    std::vector<int> arm0, arm1;
    for (Eigen::Index r = 0; r < m; ++r) {
        if (arm_of_row[idx[static_cast<std::size_t>(r)]] == 1.0)
            arm1.push_back(static_cast<int>(r));
        else
            arm0.push_back(static_cast<int>(r));
    }

    // standardize every extended column with arm-0 statistics
    Matrix standardized = extended;
    for (Eigen::Index j = 0; j <= d; ++j) {
        double mean = 0.0;
        for (int r : arm0) mean += extended(r, j);
        mean /= static_cast<double>(arm0.size());
        double var = 0.0;
        for (int r : arm0) {
            const double diff = extended(r, j) - mean;
            var += diff * diff;
        }
        const double sd = std::sqrt(var / static_cast<double>(arm0.size()));
        if (sd > 0.0) standardized.col(j) = (extended.col(j).array() - mean) / sd;
    }

    const int cap = static_cast<int>(std::floor(std::sqrt(pair_budget)));
    ArmEnergy result;
    Rng rng(subsample_seed);
    auto maybe_subsample = [&](std::vector<int>& rows) {
        if (static_cast<int>(rows.size()) > cap) {
            std::vector<int> positions =
                subsample_positions(static_cast<int>(rows.size()), cap, rng);
            std::vector<int> kept;
            kept.reserve(positions.size());
            for (int p : positions) kept.push_back(rows[static_cast<std::size_t>(p)]);
            rows = std::move(kept);
            result.subsampled = true;
        }
    };
    maybe_subsample(arm0);
    maybe_subsample(arm1);
    result.n_effective = static_cast<long>(arm0.size() + arm1.size());

    auto take = [&](const Matrix& source, const std::vector<int>& rows) {
        RowMajor out(static_cast<Eigen::Index>(rows.size()), source.cols());
        for (std::size_t r = 0; r < rows.size(); ++r)
            out.row(static_cast<Eigen::Index>(r)) = source.row(rows[r]);
        return out;
    };

    Vector w0 = Vector::Ones(static_cast<Eigen::Index>(arm0.size()));
    if (arm0_weight.size() > 0) {
        for (std::size_t r = 0; r < arm0.size(); ++r)
            w0[static_cast<Eigen::Index>(r)] =
                arm0_weight[idx[static_cast<std::size_t>(arm0[r])]];
    }
    const Vector w1 = Vector::Ones(static_cast<Eigen::Index>(arm1.size()));

    result.standardized =
        energy_of(take(standardized, arm0), take(standardized, arm1), w0, w1);
    result.raw = energy_of(take(extended, arm0), take(extended, arm1), w0, w1);
    return result;
}

}  // namespace

ScoreDirection direction_of(const std::string& score_name) {
    if (score_name == "energy_cate" || score_name == "energy_iv" || score_name == "mse_tau")
        return ScoreDirection::lower_better;
    return ScoreDirection::higher_better;
}

ScoreValue erupt(const Policy& policy, const CausalFrame& frame,
                 const Vector& propensity, const IndexList& idx) {
    if (idx.empty()) throw EmptySample("erupt needs at least one row");
    if (policy.assignment.size() != static_cast<Eigen::Index>(idx.size()))
        throw ShapeMismatch("policy length does not match idx");

    double total = 0.0;
    long matched = 0;
    for (std::size_t r = 0; r < idx.size(); ++r) {
        const int i = idx[r];
        const double t = frame.treatment[i];
        if (policy.assignment[static_cast<Eigen::Index>(r)] != t) continue;
        const double p = clip_prob(propensity[i]);
        total += frame.outcome[i] / (t == 1.0 ? p : 1.0 - p);
        ++matched;
    }
    if (matched == 0) throw NoMatchedRows("policy never matches the observed assignment");

    ScoreValue score;
    score.name = "erupt";
    score.value = total / static_cast<double>(idx.size());
    score.direction = ScoreDirection::higher_better;
    score.n_effective = matched;
    return score;
}

ScoreValue normalized_erupt(const EffectEstimate& estimate, const CausalFrame& frame,
                            const Vector& propensity, const IndexList& idx) {
    if (estimate.impact.size() != static_cast<Eigen::Index>(idx.size()))
        throw ShapeMismatch("estimate rows do not match idx");

    const double mean_impact = estimate.impact.mean();
    Policy policy;
    policy.assignment.resize(estimate.impact.size());
    for (Eigen::Index r = 0; r < estimate.impact.size(); ++r)
        policy.assignment[r] = estimate.impact[r] > mean_impact ? 1.0 : 0.0;

    const double first = policy.assignment.size() > 0 ? policy.assignment[0] : 0.0;
    const bool constant =
        (policy.assignment.array() == first).all();

    ScoreValue score = erupt(policy, frame, propensity, idx);
    score.name = "norm_erupt";
    score.degenerate_policy = constant;
    return score;
}

ScoreValue qini(const EffectEstimate& estimate, const CausalFrame& frame,
                const IndexList& idx) {
    const std::size_t n = idx.size();
    if (estimate.impact.size() != static_cast<Eigen::Index>(n))
        throw ShapeMismatch("estimate rows do not match idx");

    bool has0 = false, has1 = false;
    for (int i : idx) (frame.treatment[i] == 1.0 ? has1 : has0) = true;
    if (!has0 || !has1) throw SingleArm("qini needs both treatment arms");

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return estimate.impact[a] > estimate.impact[b];
    });

    // prefix uplift: Y1(k) - Y0(k) * N1(k)/N0(k), diagonal subtracted at the end
    std::vector<double> uplift(n);
    double y1 = 0.0, y0 = 0.0, n1 = 0.0, n0 = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const int i = idx[static_cast<std::size_t>(order[k])];
        if (frame.treatment[i] == 1.0) {
            y1 += frame.outcome[i];
            n1 += 1.0;
        } else {
            y0 += frame.outcome[i];
            n0 += 1.0;
        }
        uplift[k] = n0 > 0.0 ? y1 - y0 * n1 / n0 : y1;
    }

    const double total = uplift[n - 1];
    const double nd = static_cast<double>(n);
    double acc = 0.0;
    for (std::size_t k = 0; k < n; ++k)
        acc += uplift[k] - (static_cast<double>(k + 1) / nd) * total;

    ScoreValue score;
    score.name = "qini";
    score.value = acc / nd;
    score.direction = ScoreDirection::higher_better;
    score.n_effective = static_cast<long>(n);
    return score;
}

double energy_distance(const Matrix& a, const Matrix& b) {
    if (a.rows() == 0 || b.rows() == 0) throw EmptySample("energy_distance needs rows");
    if (a.cols() != b.cols())
        throw ColumnMismatch("A has " + std::to_string(a.cols()) + " columns, B has " +
                             std::to_string(b.cols()));
    const RowMajor ra = a;
    const RowMajor rb = b;
    return energy_of(ra, rb);
}

ScoreValue energy_score_iv(const EffectEstimate& estimate, const CausalFrame& frame,
                           const IndexList& valid_idx, double pair_budget,
                           std::uint64_t subsample_seed) {
    if (!frame.instrument) throw MissingInstrument("energy_score_iv needs an instrument");
    bool has0 = false, has1 = false;
    for (int i : valid_idx) ((*frame.instrument)[i] == 1.0 ? has1 : has0) = true;
    if (!has0 || !has1) throw SingleInstrumentArm("both instrument arms required");

    const ArmEnergy result = arm_energy(estimate, frame, valid_idx, *frame.instrument,
                                        pair_budget, subsample_seed);
    ScoreValue score;
    score.name = "energy_iv";
    score.value = result.standardized;
    score.raw_value = result.raw;
    score.direction = ScoreDirection::lower_better;
    score.n_effective = result.n_effective;
    score.subsampled = result.subsampled;
    score.subsample_seed = subsample_seed;
    return score;
}

ScoreValue energy_score_cate(const EffectEstimate& estimate, const CausalFrame& frame,
                             const IndexList& valid_idx, double pair_budget,
                             std::uint64_t subsample_seed, const Vector& propensity) {
    bool has0 = false, has1 = false;
    for (int i : valid_idx) (frame.treatment[i] == 1.0 ? has1 : has0) = true;
    if (!has0 || !has1) throw SingleArm("both treatment arms required");

    Vector odds;
    if (propensity.size() > 0) {
        if (propensity.size() != frame.n_rows())
            throw ShapeMismatch("propensity length does not match frame rows");
        odds.resize(propensity.size());
        for (Eigen::Index i = 0; i < propensity.size(); ++i) {
            const double p = clip_prob(propensity[i]);
            odds[i] = p / (1.0 - p);
        }
    }

    const ArmEnergy result = arm_energy(estimate, frame, valid_idx, frame.treatment,
                                        pair_budget, subsample_seed, odds);
    ScoreValue score;
    score.name = "energy_cate";
    score.value = result.standardized;
    score.raw_value = result.raw;
    score.direction = ScoreDirection::lower_better;
    score.n_effective = result.n_effective;
    score.subsampled = result.subsampled;
    score.subsample_seed = subsample_seed;
    return score;
}

ScoreValue mse_tau(const EffectEstimate& estimate, const Vector& tau, const IndexList& idx) {
    if (tau.size() == 0) throw NoGroundTruth("mse_tau needs ground-truth effects");
    if (estimate.impact.size() != static_cast<Eigen::Index>(idx.size()))
        throw ShapeMismatch("estimate rows do not match idx");

    double acc = 0.0;
    for (std::size_t r = 0; r < idx.size(); ++r) {
        const double diff = estimate.impact[static_cast<Eigen::Index>(r)] - tau[idx[r]];
        acc += diff * diff;
    }

    ScoreValue score;
    score.name = "mse_tau";
    score.value = acc / static_cast<double>(idx.size());
    score.direction = ScoreDirection::lower_better;
    score.n_effective = static_cast<long>(idx.size());
    return score;
}

ScoreValue ate_score(const EffectEstimate& estimate) {
    ScoreValue score;
    score.name = "ate";
    score.value = estimate.mean_impact;
    score.direction = ScoreDirection::higher_better;  // informational only
    score.n_effective = static_cast<long>(estimate.impact.size());
    return score;
}

namespace {

std::vector<double> average_ranks(const std::vector<double>& values) {
    const std::size_t n = values.size();
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return values[static_cast<std::size_t>(a)] <
                                                values[static_cast<std::size_t>(b)]; });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n &&
               values[static_cast<std::size_t>(order[j + 1])] ==
                   values[static_cast<std::size_t>(order[i])])
            ++j;
        const double rank = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
        for (std::size_t k = i; k <= j; ++k)
            ranks[static_cast<std::size_t>(order[k])] = rank;
        i = j + 1;
    }
    return ranks;
}

}  // namespace

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.size() < 2)
        throw ShapeMismatch("spearman needs two equal-length vectors of size >= 2");
    const auto ra = average_ranks(a);
    const auto rb = average_ranks(b);
    const double n = static_cast<double>(a.size());
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += ra[i];
        mb += rb[i];
    }
    ma /= n;
    mb /= n;
    double cov = 0.0, va = 0.0, vb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double da = ra[i] - ma;
        const double db = rb[i] - mb;
        cov += da * db;
        va += da * da;
        vb += db * db;
    }
    if (va == 0.0 || vb == 0.0) return std::numeric_limits<double>::quiet_NaN();
    return cov / std::sqrt(va * vb);
}

}  // namespace causalscore
