#include "causalscore/learners.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace causalscore {

namespace {

void check_params(const Json& params, std::initializer_list<const char*> allowed) {
    for (auto it = params.begin(); it != params.end(); ++it) {
        if (std::find_if(allowed.begin(), allowed.end(), [&](const char* k) {
                return it.key() == k;
            }) == allowed.end())
            throw ConfigError("unknown learner param '" + it.key() + "'");
    }
}

double param_num(const Json& params, const char* key, double fallback) {
    if (!params.contains(key)) return fallback;
    const auto& v = params.at(key);
    if (!v.is_number()) throw ConfigError(std::string("param '") + key + "' must be numeric");
    return v.get<double>();
}

void require_binary(const Vector& target) {
    for (Eigen::Index i = 0; i < target.size(); ++i)
        if (target[i] != 0.0 && target[i] != 1.0)
            throw NonBinaryTarget("target row " + std::to_string(i) + " is " +
                                  std::to_string(target[i]));
}

double clip_prob(double p) { return std::clamp(p, kProbClipLo, kProbClipHi); }

// ---------------------------------------------------------------------------
// ridge

class RidgeModel final : public FittedLearner {
public:
    RidgeModel(LearnerSpec spec, const Matrix& x, const Vector& y, double l2)
        : FittedLearner(std::move(spec), x.cols()) {
        const Eigen::Index d = x.cols();
        const Vector x_mean = x.colwise().mean();
        const double y_mean = y.mean();
        const Matrix xc = x.rowwise() - x_mean.transpose();
        const Vector yc = y.array() - y_mean;

        Matrix gram = xc.transpose() * xc;
        gram.diagonal().array() += l2;

        if (l2 == 0.0) {
            Eigen::ColPivHouseholderQR<Matrix> qr(gram);
            if (qr.rank() < d)
                throw SingularSystem("ridge with l2 = 0 on rank-deficient design");
            coef_ = qr.solve(xc.transpose() * yc);
        } else {
            coef_ = gram.ldlt().solve(xc.transpose() * yc);
        }
        intercept_ = y_mean - x_mean.dot(coef_);
    }

    const Vector& coefficients() const { return coef_; }

private:
    Vector predict_impl(const Matrix& x) const override {
        return (x * coef_).array() + intercept_;
    }

    Vector coef_;
    double intercept_ = 0.0;
};

// ---------------------------------------------------------------------------
// logistic (penalized IRLS, intercept unpenalized)

class LogisticModel final : public FittedLearner {
public:
    LogisticModel(LearnerSpec spec, const Matrix& x, const Vector& y, double l2,
                  int max_iter)
        : FittedLearner(std::move(spec), x.cols()) {
        const Eigen::Index n = x.rows();
        const Eigen::Index d = x.cols();

        Matrix design(n, d + 1);
        design.col(0).setOnes();
        design.rightCols(d) = x;

        Vector beta = Vector::Zero(d + 1);
        Vector penalty = Vector::Constant(d + 1, l2);
        penalty[0] = 0.0;

        for (int iter = 0; iter < max_iter; ++iter) {
            const Vector eta = design * beta;
            Vector p(n), w(n);
            for (Eigen::Index i = 0; i < n; ++i) {
                p[i] = 1.0 / (1.0 + std::exp(-eta[i]));
                w[i] = std::max(p[i] * (1.0 - p[i]), 1e-10);
            }
            // working response z = eta + (y - p) / w
            const Vector z = eta.array() + (y - p).array() / w.array();
            Matrix lhs = design.transpose() * w.asDiagonal() * design;
            lhs.diagonal() += penalty;
            const Vector rhs = design.transpose() * (w.asDiagonal() * z);
            const Vector next = lhs.ldlt().solve(rhs);
            if (!next.allFinite()) break;
            const double step = (next - beta).cwiseAbs().maxCoeff();
            beta = next;
            if (step < 1e-8) break;
        }
        intercept_ = beta[0];
        coef_ = beta.tail(d);
    }

private:
    Vector predict_impl(const Matrix& x) const override {
        Vector eta = (x * coef_).array() + intercept_;
        for (Eigen::Index i = 0; i < eta.size(); ++i)
            eta[i] = clip_prob(1.0 / (1.0 + std::exp(-eta[i])));
        return eta;
    }

    Vector coef_;
    double intercept_ = 0.0;
};

// ---------------------------------------------------------------------------
// prior

class PriorModel final : public FittedLearner {
public:
    PriorModel(LearnerSpec spec, Eigen::Index d, double rate)
        : FittedLearner(std::move(spec), d), rate_(clip_prob(rate)) {}

private:
    Vector predict_impl(const Matrix& x) const override {
        return Vector::Constant(x.rows(), rate_);
    }

    double rate_;
};

// ---------------------------------------------------------------------------
// boosted_stumps: gradient boosting on squared loss with small axis-aligned
// regression trees (depth <= 3), feature order presorted once per fit.

struct TreeNode {
    bool is_leaf = true;
    int feature = -1;
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;
};

using Tree = std::vector<TreeNode>;

double predict_tree(const Tree& tree, const Matrix& x, Eigen::Index i) {
    int node = 0;
    while (!tree[node].is_leaf)
        node = x(i, tree[node].feature) <= tree[node].threshold ? tree[node].left
                                                                : tree[node].right;
    return tree[node].value;
}

class StumpBooster {
public:
    StumpBooster(const Matrix& x, int max_depth)
        : x_(x), max_depth_(max_depth), order_(static_cast<std::size_t>(x.cols())) {
        const Eigen::Index n = x.rows();
        for (Eigen::Index j = 0; j < x.cols(); ++j) {
            auto& ord = order_[static_cast<std::size_t>(j)];
            ord.resize(static_cast<std::size_t>(n));
            std::iota(ord.begin(), ord.end(), 0);
            std::stable_sort(ord.begin(), ord.end(),
                             [&](int a, int b) { return x(a, j) < x(b, j); });
        }
        in_node_.assign(static_cast<std::size_t>(n), 0);
    }

    Tree fit_tree(const Vector& residual) {
        Tree tree;
        tree.push_back(TreeNode{});
        std::vector<int> all(static_cast<std::size_t>(x_.rows()));
        std::iota(all.begin(), all.end(), 0);
        grow(tree, 0, all, residual, 0);
        return tree;
    }

private:
    void grow(Tree& tree, int node, const std::vector<int>& members,
              const Vector& residual, int depth) {
        double sum = 0.0;
        for (int i : members) sum += residual[i];
        const double n_node = static_cast<double>(members.size());
        tree[node].value = sum / n_node;

        if (depth >= max_depth_ || members.size() < 2) return;

        ++membership_epoch_;
        for (int i : members) in_node_[static_cast<std::size_t>(i)] = membership_epoch_;

        const double parent_term = sum * sum / n_node;
        double best_gain = parent_term;
        int best_feature = -1;
        double best_threshold = 0.0;

        for (Eigen::Index j = 0; j < x_.cols(); ++j) {
            const auto& ord = order_[static_cast<std::size_t>(j)];
            double left_sum = 0.0;
            double left_n = 0.0;
            double prev_value = 0.0;
            bool have_prev = false;
            for (int i : ord) {
                if (in_node_[static_cast<std::size_t>(i)] != membership_epoch_) continue;
                const double v = x_(i, j);
                if (have_prev && v > prev_value && left_n > 0.0 && left_n < n_node) {
                    const double right_sum = sum - left_sum;
                    const double right_n = n_node - left_n;
                    const double gain =
                        left_sum * left_sum / left_n + right_sum * right_sum / right_n;
                    if (gain > best_gain) {
                        best_gain = gain;
                        best_feature = static_cast<int>(j);
                        best_threshold = 0.5 * (prev_value + v);
                    }
                }
                left_sum += residual[i];
                left_n += 1.0;
                prev_value = v;
                have_prev = true;
            }
        }

        if (best_feature < 0) return;

        std::vector<int> left_members, right_members;
        left_members.reserve(members.size());
        right_members.reserve(members.size());
        for (int i : members) {
            if (x_(i, best_feature) <= best_threshold)
                left_members.push_back(i);
            else
                right_members.push_back(i);
        }

        tree[node].is_leaf = false;
        tree[node].feature = best_feature;
        tree[node].threshold = best_threshold;
        tree[node].left = static_cast<int>(tree.size());
        tree.push_back(TreeNode{});
        tree[node].right = static_cast<int>(tree.size());
        tree.push_back(TreeNode{});
        grow(tree, tree[node].left, left_members, residual, depth + 1);
        grow(tree, tree[node].right, right_members, residual, depth + 1);
    }

    const Matrix& x_;
    int max_depth_;
    std::vector<std::vector<int>> order_;
    std::vector<std::uint32_t> in_node_;
    std::uint32_t membership_epoch_ = 0;
};

class BoostedStumpsModel final : public FittedLearner {
public:
    BoostedStumpsModel(LearnerSpec spec, const Matrix& x, const Vector& y,
                       int n_rounds, double learning_rate, int max_depth)
        : FittedLearner(std::move(spec), x.cols()), learning_rate_(learning_rate) {
        const Eigen::Index n = x.rows();
        base_ = y.mean();
        Vector fitted = Vector::Constant(n, base_);
        StumpBooster booster(x, max_depth);
        trees_.reserve(static_cast<std::size_t>(n_rounds));
        loss_curve_.reserve(static_cast<std::size_t>(n_rounds));

        for (int round = 0; round < n_rounds; ++round) {
            const Vector residual = y - fitted;
            Tree tree = booster.fit_tree(residual);
            for (Eigen::Index i = 0; i < n; ++i)
                fitted[i] += learning_rate_ * predict_tree(tree, x, i);
            trees_.push_back(std::move(tree));
            loss_curve_.push_back((y - fitted).squaredNorm() / static_cast<double>(n));
        }
    }

    std::vector<double> training_loss_curve() const override { return loss_curve_; }

private:
    Vector predict_impl(const Matrix& x) const override {
        Vector out = Vector::Constant(x.rows(), base_);
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            double acc = 0.0;
            for (const auto& tree : trees_) acc += predict_tree(tree, x, i);
            out[i] += learning_rate_ * acc;
        }
        return out;
    }

    double base_ = 0.0;
    double learning_rate_;
    std::vector<Tree> trees_;
    std::vector<double> loss_curve_;
};

}  // namespace

LearnerKind learner_kind_from_string(const std::string& name) {
    if (name == "ridge") return LearnerKind::ridge;
    if (name == "boosted_stumps") return LearnerKind::boosted_stumps;
    if (name == "logistic") return LearnerKind::logistic;
    if (name == "prior") return LearnerKind::prior;
    throw ConfigError("unknown learner kind '" + name + "'");
}

std::string to_string(LearnerKind kind) {
    switch (kind) {
        case LearnerKind::ridge: return "ridge";
        case LearnerKind::boosted_stumps: return "boosted_stumps";
        case LearnerKind::logistic: return "logistic";
        case LearnerKind::prior: return "prior";
    }
    return "?";
}

LearnerSpec LearnerSpec::ridge(double l2) {
    return {LearnerKind::ridge, Json{{"l2", l2}}};
}

LearnerSpec LearnerSpec::boosted_stumps(int n_rounds, double learning_rate, int max_depth) {
    return {LearnerKind::boosted_stumps,
            Json{{"n_rounds", n_rounds},
                 {"learning_rate", learning_rate},
                 {"max_depth", max_depth}}};
}

LearnerSpec LearnerSpec::logistic(double l2, int max_iter) {
    return {LearnerKind::logistic, Json{{"l2", l2}, {"max_iter", max_iter}}};
}

LearnerSpec LearnerSpec::prior() { return {LearnerKind::prior, Json::object()}; }

bool FittedLearner::is_classifier() const {
    return spec_.kind == LearnerKind::logistic || spec_.kind == LearnerKind::prior;
}

Vector FittedLearner::predict(const Matrix& x) const {
    if (x.cols() != n_features_)
        throw ShapeMismatch("predict got " + std::to_string(x.cols()) +
                            " columns, model trained on " + std::to_string(n_features_));
    return predict_impl(x);
}

std::unique_ptr<FittedLearner> fit(const LearnerSpec& spec, const Matrix& x,
                                   const Vector& target) {
    if (x.rows() != target.size())
        throw ShapeMismatch("x rows != target length");
    if (x.rows() < 2) throw ShapeMismatch("fit needs at least 2 rows");

    switch (spec.kind) {
        case LearnerKind::ridge: {
            check_params(spec.params, {"l2"});
            const double l2 = param_num(spec.params, "l2", 1.0);
            if (l2 < 0.0) throw ConfigError("ridge l2 must be >= 0");
            return std::make_unique<RidgeModel>(spec, x, target, l2);
        }
        case LearnerKind::boosted_stumps: {
            check_params(spec.params, {"n_rounds", "learning_rate", "max_depth"});
            const int n_rounds = static_cast<int>(param_num(spec.params, "n_rounds", 100));
            const double lr = param_num(spec.params, "learning_rate", 0.1);
            const int depth = static_cast<int>(param_num(spec.params, "max_depth", 2));
            if (n_rounds < 1) throw ConfigError("n_rounds must be >= 1");
            if (!(lr > 0.0 && lr <= 1.0)) throw ConfigError("learning_rate must be in (0,1]");
            if (depth < 1 || depth > 3) throw ConfigError("max_depth must be 1, 2 or 3");
            return std::make_unique<BoostedStumpsModel>(spec, x, target, n_rounds, lr, depth);
        }
        case LearnerKind::logistic: {
            check_params(spec.params, {"l2", "max_iter"});
            require_binary(target);
            const double l2 = param_num(spec.params, "l2", 1e-6);
            const int max_iter = static_cast<int>(param_num(spec.params, "max_iter", 100));
            if (l2 < 0.0) throw ConfigError("logistic l2 must be >= 0");
            if (max_iter < 1) throw ConfigError("max_iter must be >= 1");
            return std::make_unique<LogisticModel>(spec, x, target, l2, max_iter);
        }
        case LearnerKind::prior: {
            check_params(spec.params, {});
            require_binary(target);
            return std::make_unique<PriorModel>(spec, x.cols(), target.mean());
        }
    }
    throw ConfigError("unreachable learner kind");
}

}  // namespace causalscore
