#include "cipred/baselines/models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "cipred/core/linalg.hpp"
#include "cipred/core/rng.hpp"
#include "cipred/kernels/kernels.hpp"

namespace cipred::baselines {

std::string baseline_name(BaselineKind k) {
    switch (k) {
        case BaselineKind::lasso: return "lasso";
        case BaselineKind::ridge: return "ridge";
        case BaselineKind::elastic_net: return "elastic_net";
        case BaselineKind::svm_linear: return "svm_linear";
        case BaselineKind::dtree: return "dtree";
        case BaselineKind::rforest: return "rforest";
        case BaselineKind::knn: return "knn";
        case BaselineKind::gbt: return "gbt";
    }
    return "?";
}

BaselineKind baseline_from_name(const std::string& s) {
    for (const auto k : {BaselineKind::lasso, BaselineKind::ridge, BaselineKind::elastic_net,
                         BaselineKind::svm_linear, BaselineKind::dtree, BaselineKind::rforest,
                         BaselineKind::knn, BaselineKind::gbt})
        if (baseline_name(k) == s) return k;
    throw ValidationError("unknown baseline model '" + s + "'");
}

std::string HyperParams::canonical() const {
    std::ostringstream ss;
    bool first = true;
    for (const auto& [k, v] : values) {
        if (!first) ss << ";";
        first = false;
        ss << k << "=" << v;
    }
    return ss.str();
}

double Tree::eval(const float* row) const {
    int i = 0;
    while (nodes[static_cast<std::size_t>(i)].feature >= 0) {
        const auto& nd = nodes[static_cast<std::size_t>(i)];
        i = row[nd.feature] <= nd.threshold ? nd.left : nd.right;
    }
    return nodes[static_cast<std::size_t>(i)].value;
}

namespace {

void require_both_classes(const std::vector<int>& y, const std::string& kind) {
    int n1 = 0;
    for (int v : y) n1 += v;
    if (n1 == 0 || n1 == static_cast<int>(y.size()))
        throw ValidationError(kind + " requires both classes in the training labels");
}

void check_finite(const FeatureMatrix& X) {
    for (float v : X.x)
        if (!std::isfinite(v)) throw ValidationError("non-finite feature value");
}

struct Scaled {
    std::vector<double> mean, sd;
    std::vector<double> z;  // n x p standardized, double for the solvers
};

Scaled standardize(const FeatureMatrix& X) {
    Scaled s;
    s.mean.assign(X.p, 0.0);
    s.sd.assign(X.p, 0.0);
    for (int i = 0; i < X.n; ++i) {
        const float* row = X.row(i);
        for (int j = 0; j < X.p; ++j) s.mean[j] += row[j];
    }
    for (auto& m : s.mean) m /= X.n;
    for (int i = 0; i < X.n; ++i) {
        const float* row = X.row(i);
        for (int j = 0; j < X.p; ++j)
            s.sd[j] += (row[j] - s.mean[j]) * (row[j] - s.mean[j]);
    }
    for (auto& v : s.sd) {
        v = std::sqrt(v / std::max(1, X.n - 1));
        if (v < 1e-12) v = 1.0;
    }
    s.z.resize(static_cast<std::size_t>(X.n) * X.p);
    for (int i = 0; i < X.n; ++i) {
        const float* row = X.row(i);
        double* dst = s.z.data() + static_cast<std::size_t>(i) * X.p;
        for (int j = 0; j < X.p; ++j) dst[j] = (row[j] - s.mean[j]) / s.sd[j];
    }
    return s;
}

// ----------------------------------------------------------- linear family

FittedBaseline fit_coordinate_descent(BaselineKind kind, const HyperParams& hp,
                                      const FeatureMatrix& X, const std::vector<int>& y) {
    const double lambda = hp.get("lambda", 0.01);
    const double l1_ratio = kind == BaselineKind::lasso ? 1.0 : hp.get("l1_ratio", 0.5);
    const double l1 = lambda * l1_ratio;
    const double l2 = lambda * (1.0 - l1_ratio);
    const double tol = hp.get("tol", 1e-6);
    const int max_sweeps = static_cast<int>(hp.get("max_sweeps", 1e4));

    FittedBaseline m;
    m.kind = kind;
    m.hp = hp;
    m.threshold = 0.0;
    Scaled sc = standardize(X);
    m.col_mean = sc.mean;
    m.col_sd = sc.sd;

    const int n = X.n, p = X.p;
    std::vector<double> yc(n);
    double ybar = 0.0;
    for (int i = 0; i < n; ++i) {
        yc[i] = y[static_cast<std::size_t>(i)] ? 1.0 : -1.0;
        ybar += yc[i];
    }
    ybar /= n;
    for (auto& v : yc) v -= ybar;
    m.bias = ybar;

    m.w.assign(p, 0.0);
    std::vector<double> resid = yc;  // r = yc - Z w
    std::vector<double> col_sq(p, 0.0);
    for (int i = 0; i < n; ++i) {
        const double* zi = sc.z.data() + static_cast<std::size_t>(i) * p;
        for (int j = 0; j < p; ++j) col_sq[j] += zi[j] * zi[j];
    }
    for (auto& v : col_sq) v /= n;

    auto objective = [&]() {
        double rss = 0.0;
        for (double r : resid) rss += r * r;
        double pen = 0.0;
        for (double wj : m.w) pen += l1 * std::fabs(wj) + 0.5 * l2 * wj * wj;
        return rss / (2.0 * n) + pen;
    };

    m.objective_per_sweep.push_back(objective());
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double max_delta = 0.0;
        for (int j = 0; j < p; ++j) {
            double rho = 0.0;
            for (int i = 0; i < n; ++i)
                rho += sc.z[static_cast<std::size_t>(i) * p + j] * resid[i];
            rho = rho / n + col_sq[j] * m.w[j];
            double wj = 0.0;
            if (rho > l1)
                wj = (rho - l1) / (col_sq[j] + l2);
            else if (rho < -l1)
                wj = (rho + l1) / (col_sq[j] + l2);
            const double delta = wj - m.w[j];
            if (delta != 0.0) {
                for (int i = 0; i < n; ++i)
                    resid[i] -= delta * sc.z[static_cast<std::size_t>(i) * p + j];
                m.w[j] = wj;
                max_delta = std::max(max_delta, std::fabs(delta));
            }
        }
        m.objective_per_sweep.push_back(objective());
        if (max_delta < tol) break;
    }
    return m;
}

FittedBaseline fit_ridge(const HyperParams& hp, const FeatureMatrix& X,
                         const std::vector<int>& y) {
    const double lambda = hp.get("lambda", 1.0);
    FittedBaseline m;
    m.kind = BaselineKind::ridge;
    m.hp = hp;
    m.threshold = 0.0;
    Scaled sc = standardize(X);
    m.col_mean = sc.mean;
    m.col_sd = sc.sd;

    const int n = X.n, p = X.p;
    std::vector<double> yc(n);
    double ybar = 0.0;
    for (int i = 0; i < n; ++i) {
        yc[i] = y[static_cast<std::size_t>(i)] ? 1.0 : -1.0;
        ybar += yc[i];
    }
    ybar /= n;
    for (auto& v : yc) v -= ybar;
    m.bias = ybar;

    linalg::Mat xtx(p, p);
    linalg::Mat xty(p, 1);
    for (int i = 0; i < n; ++i) {
        const double* zi = sc.z.data() + static_cast<std::size_t>(i) * p;
        for (int a = 0; a < p; ++a) {
            xty(a, 0) += zi[a] * yc[i];
            for (int b = a; b < p; ++b) xtx(a, b) += zi[a] * zi[b];
        }
    }
    for (int a = 0; a < p; ++a) {
        for (int b = 0; b < a; ++b) xtx(a, b) = xtx(b, a);
        xtx(a, a) += lambda;
    }
    linalg::Mat w;
    try {
        w = linalg::cholesky_solve(xtx, xty);
    } catch (const ValidationError&) {
        w = linalg::lu_solve(xtx, xty);  // lambda = 0 on rank-deficient input
    }
    m.w.resize(p);
    for (int j = 0; j < p; ++j) m.w[j] = w(j, 0);
    return m;
}

FittedBaseline fit_svm(const HyperParams& hp, const FeatureMatrix& X,
                       const std::vector<int>& y) {
    const double lambda = hp.get("lambda", 0.01);
    const int epochs = static_cast<int>(hp.get("epochs", 300));
    FittedBaseline m;
    m.kind = BaselineKind::svm_linear;
    m.hp = hp;
    m.threshold = 0.0;
    Scaled sc = standardize(X);
    m.col_mean = sc.mean;
    m.col_sd = sc.sd;

    const int n = X.n, p = X.p;
    m.w.assign(p, 0.0);
    m.bias = 0.0;
    for (int t = 1; t <= epochs; ++t) {
        const double eta = 1.0 / (lambda * (t + 1));
        std::vector<double> grad(p, 0.0);
        double grad_b = 0.0;
        for (int i = 0; i < n; ++i) {
            const double* zi = sc.z.data() + static_cast<std::size_t>(i) * p;
            double margin = m.bias;
            for (int j = 0; j < p; ++j) margin += m.w[j] * zi[j];
            const double yi = y[static_cast<std::size_t>(i)] ? 1.0 : -1.0;
            if (yi * margin < 1.0) {
                for (int j = 0; j < p; ++j) grad[j] -= yi * zi[j];
                grad_b -= yi;
            }
        }
        for (int j = 0; j < p; ++j)
            m.w[j] -= eta * (lambda * m.w[j] + grad[j] / n);
        m.bias -= eta * grad_b / n;
    }
    return m;
}

// ------------------------------------------------------------- tree family

struct TreeTask {
    const FeatureMatrix* X = nullptr;
    const double* target = nullptr;  // regression target or 0/1 class
    const double* hessian = nullptr; // gbt Newton denominators (optional)
    bool classification = true;      // gini splits vs variance splits
    int max_depth = 6;
    int min_leaf = 1;
    int feature_subsample = 0;  // 0 = all features
    Rng* rng = nullptr;
};

struct SplitChoice {
    int feature = -1;
    float threshold = 0.0f;
    double gain = 0.0;
};

SplitChoice best_split(const TreeTask& t, const std::vector<int>& rows,
                       const std::vector<int>& features) {
    const int n = static_cast<int>(rows.size());
    double sum = 0.0, sum_sq = 0.0;
    for (int r : rows) {
        sum += t.target[r];
        sum_sq += t.target[r] * t.target[r];
    }

    SplitChoice best;
    std::vector<std::pair<float, int>> vals(static_cast<std::size_t>(n));
    for (int f : features) {
        for (int i = 0; i < n; ++i)
            vals[static_cast<std::size_t>(i)] = {t.X->row(rows[static_cast<std::size_t>(i)])[f],
                                                 rows[static_cast<std::size_t>(i)]};
        std::sort(vals.begin(), vals.end());
        double left_sum = 0.0, left_sq = 0.0;
        for (int i = 0; i + 1 < n; ++i) {
            const double tv = t.target[vals[static_cast<std::size_t>(i)].second];
            left_sum += tv;
            left_sq += tv * tv;
            if (vals[static_cast<std::size_t>(i)].first ==
                vals[static_cast<std::size_t>(i + 1)].first)
                continue;
            const int nl = i + 1, nr = n - nl;
            if (nl < t.min_leaf || nr < t.min_leaf) continue;
            double gain;
            if (t.classification) {
                // Gini improvement; target holds 0/1, so sum == positives.
                const double pl = left_sum / nl, pr = (sum - left_sum) / nr;
                const double p0 = sum / n;
                const double gini_parent = 2.0 * p0 * (1.0 - p0);
                const double gini_children =
                    (nl * 2.0 * pl * (1.0 - pl) + nr * 2.0 * pr * (1.0 - pr)) / n;
                gain = gini_parent - gini_children;
            } else {
                // Variance reduction (proportional form).
                const double right_sum = sum - left_sum;
                gain = left_sum * left_sum / nl + right_sum * right_sum / nr -
                       sum * sum / n;
            }
            if (gain > best.gain + 1e-15) {
                best.gain = gain;
                best.feature = f;
                best.threshold = 0.5f * (vals[static_cast<std::size_t>(i)].first +
                                         vals[static_cast<std::size_t>(i + 1)].first);
            }
        }
    }
    return best;
}

int grow_tree(const TreeTask& t, Tree& tree, std::vector<int>& rows, int depth) {
    const int node_id = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();

    double sum = 0.0;
    for (int r : rows) sum += t.target[r];
    bool pure = true;
    for (int r : rows)
        if (t.target[r] != t.target[rows[0]]) {
            pure = false;
            break;
        }

    auto leaf_value = [&]() {
        if (t.hessian) {
            double h = 0.0;
            for (int r : rows) h += t.hessian[r];
            return static_cast<float>(sum / std::max(h, 1e-12));
        }
        return static_cast<float>(sum / rows.size());
    };

    if (pure || depth >= t.max_depth ||
        static_cast<int>(rows.size()) < 2 * t.min_leaf) {
        tree.nodes[static_cast<std::size_t>(node_id)].value = leaf_value();
        return node_id;
    }

    std::vector<int> features;
    const int p = t.X->p;
    if (t.feature_subsample > 0 && t.feature_subsample < p) {
        // Seeded sample without replacement, node by node.
        std::vector<int> all(p);
        std::iota(all.begin(), all.end(), 0);
        for (int i = 0; i < t.feature_subsample; ++i) {
            const int j = i + static_cast<int>(t.rng->uniform_u64(
                                  static_cast<std::uint64_t>(p - i)));
            std::swap(all[static_cast<std::size_t>(i)], all[static_cast<std::size_t>(j)]);
        }
        features.assign(all.begin(), all.begin() + t.feature_subsample);
        std::sort(features.begin(), features.end());
    } else {
        features.resize(static_cast<std::size_t>(p));
        std::iota(features.begin(), features.end(), 0);
    }

    const SplitChoice split = best_split(t, rows, features);
    if (split.feature < 0) {
        tree.nodes[static_cast<std::size_t>(node_id)].value = leaf_value();
        return node_id;
    }

    std::vector<int> left_rows, right_rows;
    for (int r : rows) {
        if (t.X->row(r)[split.feature] <= split.threshold)
            left_rows.push_back(r);
        else
            right_rows.push_back(r);
    }
    rows.clear();
    rows.shrink_to_fit();

    const int left = grow_tree(t, tree, left_rows, depth + 1);
    const int right = grow_tree(t, tree, right_rows, depth + 1);
    auto& nd = tree.nodes[static_cast<std::size_t>(node_id)];
    nd.feature = split.feature;
    nd.threshold = split.threshold;
    nd.left = left;
    nd.right = right;
    return node_id;
}

FittedBaseline fit_dtree(const HyperParams& hp, const FeatureMatrix& X,
                         const std::vector<int>& y) {
    FittedBaseline m;
    m.kind = BaselineKind::dtree;
    m.hp = hp;
    m.threshold = 0.5;
    std::vector<double> target(y.begin(), y.end());
    TreeTask t;
    t.X = &X;
    t.target = target.data();
    t.classification = true;
    t.max_depth = static_cast<int>(hp.get("max_depth", 6));
    t.min_leaf = static_cast<int>(hp.get("min_samples_leaf", 1));
    Tree tree;
    std::vector<int> rows(X.n);
    std::iota(rows.begin(), rows.end(), 0);
    grow_tree(t, tree, rows, 0);
    m.trees.push_back(std::move(tree));
    return m;
}

FittedBaseline fit_rforest(const HyperParams& hp, const FeatureMatrix& X,
                           const std::vector<int>& y, std::uint64_t seed) {
    FittedBaseline m;
    m.kind = BaselineKind::rforest;
    m.hp = hp;
    m.threshold = 0.5;
    const int n_trees = static_cast<int>(hp.get("n_trees", 100));
    const int max_depth = static_cast<int>(hp.get("max_depth", 12));
    const int min_leaf = static_cast<int>(hp.get("min_samples_leaf", 1));
    const int mtry = std::max(1, static_cast<int>(std::sqrt(static_cast<double>(X.p))));

    std::vector<double> target(y.begin(), y.end());
    m.trees.resize(static_cast<std::size_t>(n_trees));
    for (int b = 0; b < n_trees; ++b) {
        Rng rng(derive_seed(seed, 0xf07, static_cast<std::uint64_t>(b)));
        std::vector<int> rows(X.n);
        for (int i = 0; i < X.n; ++i)
            rows[static_cast<std::size_t>(i)] =
                static_cast<int>(rng.uniform_u64(static_cast<std::uint64_t>(X.n)));
        TreeTask t;
        t.X = &X;
        t.target = target.data();
        t.classification = true;
        t.max_depth = max_depth;
        t.min_leaf = min_leaf;
        t.feature_subsample = mtry;
        t.rng = &rng;
        grow_tree(t, m.trees[static_cast<std::size_t>(b)], rows, 0);
    }
    return m;
}

FittedBaseline fit_knn(const HyperParams& hp, const FeatureMatrix& X,
                       const std::vector<int>& y) {
    FittedBaseline m;
    m.kind = BaselineKind::knn;
    m.hp = hp;
    m.threshold = 0.5;
    m.knn_k = std::max(1, static_cast<int>(hp.get("k", 5)));
    m.knn_p = X.p;
    m.knn_x = X.x;
    m.knn_y = y;
    return m;
}

FittedBaseline fit_gbt(const HyperParams& hp, const FeatureMatrix& X,
                       const std::vector<int>& y, std::uint64_t seed) {
    FittedBaseline m;
    m.kind = BaselineKind::gbt;
    m.hp = hp;
    m.threshold = 0.0;  // log-odds scores
    const int rounds = static_cast<int>(hp.get("rounds", 100));
    const double eta = hp.get("eta", 0.1);
    const int max_depth = static_cast<int>(hp.get("max_depth", 3));
    const int min_leaf = static_cast<int>(hp.get("min_samples_leaf", 5));
    const double subsample = hp.get("subsample", 1.0);
    m.gbt_eta = eta;

    const int n = X.n;
    double prevalence = 0.0;
    for (int v : y) prevalence += v;
    prevalence /= n;
    prevalence = std::min(1.0 - 1e-9, std::max(1e-9, prevalence));
    m.gbt_f0 = std::log(prevalence / (1.0 - prevalence));

    std::vector<double> f(static_cast<std::size_t>(n), m.gbt_f0);
    std::vector<double> resid(static_cast<std::size_t>(n)), hess(static_cast<std::size_t>(n));
    for (int round = 0; round < rounds; ++round) {
        for (int i = 0; i < n; ++i) {
            const double p = 1.0 / (1.0 + std::exp(-f[static_cast<std::size_t>(i)]));
            resid[static_cast<std::size_t>(i)] = y[static_cast<std::size_t>(i)] - p;
            hess[static_cast<std::size_t>(i)] = std::max(p * (1.0 - p), 1e-12);
        }
        Rng rng(derive_seed(seed, 0x6b7, static_cast<std::uint64_t>(round)));
        std::vector<int> rows;
        if (subsample < 1.0) {
            for (int i = 0; i < n; ++i)
                if (rng.uniform() < subsample) rows.push_back(i);
            if (rows.empty()) rows.push_back(static_cast<int>(rng.uniform_u64(n)));
        } else {
            rows.resize(static_cast<std::size_t>(n));
            std::iota(rows.begin(), rows.end(), 0);
        }
        TreeTask t;
        t.X = &X;
        t.target = resid.data();
        t.hessian = hess.data();
        t.classification = false;
        t.max_depth = max_depth;
        t.min_leaf = min_leaf;
        Tree tree;
        grow_tree(t, tree, rows, 0);
        for (int i = 0; i < n; ++i)
            f[static_cast<std::size_t>(i)] += eta * tree.eval(X.row(i));
        m.trees.push_back(std::move(tree));
    }
    return m;
}

}  // namespace

FittedBaseline fit_baseline(BaselineKind kind, const HyperParams& hp,
                            const FeatureMatrix& X, const std::vector<int>& y,
                            std::uint64_t seed) {
    if (X.n == 0 || X.n != static_cast<int>(y.size()))
        throw ValidationError("baseline fit: empty data or label length mismatch");
    check_finite(X);
    if (kind != BaselineKind::knn) require_both_classes(y, baseline_name(kind));
    switch (kind) {
        case BaselineKind::lasso:
        case BaselineKind::elastic_net:
            return fit_coordinate_descent(kind, hp, X, y);
        case BaselineKind::ridge: return fit_ridge(hp, X, y);
        case BaselineKind::svm_linear: return fit_svm(hp, X, y);
        case BaselineKind::dtree: return fit_dtree(hp, X, y);
        case BaselineKind::rforest: return fit_rforest(hp, X, y, seed);
        case BaselineKind::knn: return fit_knn(hp, X, y);
        case BaselineKind::gbt: return fit_gbt(hp, X, y, seed);
    }
    throw ValidationError("unknown baseline kind");
}

std::vector<double> predict_baseline(const FittedBaseline& m, const FeatureMatrix& X) {
    std::vector<double> scores(static_cast<std::size_t>(X.n), 0.0);
    switch (m.kind) {
        case BaselineKind::lasso:
        case BaselineKind::ridge:
        case BaselineKind::elastic_net:
        case BaselineKind::svm_linear: {
            if (X.p != static_cast<int>(m.w.size()))
                throw ValidationError("linear model width mismatch");
            for (int i = 0; i < X.n; ++i) {
                const float* row = X.row(i);
                double s = m.bias;
                for (int j = 0; j < X.p; ++j)
                    s += m.w[j] * ((row[j] - m.col_mean[j]) / m.col_sd[j]);
                scores[static_cast<std::size_t>(i)] = s;
            }
            break;
        }
        case BaselineKind::dtree: {
            for (int i = 0; i < X.n; ++i)
                scores[static_cast<std::size_t>(i)] = m.trees[0].eval(X.row(i));
            break;
        }
        case BaselineKind::rforest: {
            for (int i = 0; i < X.n; ++i) {
                double votes = 0.0;
                for (const auto& t : m.trees) votes += t.eval(X.row(i)) >= 0.5 ? 1.0 : 0.0;
                scores[static_cast<std::size_t>(i)] = votes / m.trees.size();
            }
            break;
        }
        case BaselineKind::knn: {
            if (X.p != m.knn_p) throw ValidationError("knn width mismatch");
            const int n_train = static_cast<int>(m.knn_y.size());
            const int k = std::min(m.knn_k, n_train);
            std::vector<std::pair<double, int>> dist(static_cast<std::size_t>(n_train));
            for (int i = 0; i < X.n; ++i) {
                const float* row = X.row(i);
                for (int t = 0; t < n_train; ++t) {
                    const float* tr = m.knn_x.data() + static_cast<std::size_t>(t) * m.knn_p;
                    double d = 0.0;
                    for (int j = 0; j < m.knn_p; ++j) {
                        const double diff = row[j] - tr[j];
                        d += diff * diff;
                    }
                    dist[static_cast<std::size_t>(t)] = {d, t};
                }
                std::partial_sort(dist.begin(), dist.begin() + k, dist.end());
                double pos = 0.0;
                for (int t = 0; t < k; ++t)
                    pos += m.knn_y[static_cast<std::size_t>(dist[static_cast<std::size_t>(t)].second)];
                scores[static_cast<std::size_t>(i)] = pos / k;
            }
            break;
        }
        case BaselineKind::gbt: {
            for (int i = 0; i < X.n; ++i) {
                double f = m.gbt_f0;
                for (const auto& t : m.trees) f += m.gbt_eta * t.eval(X.row(i));
                scores[static_cast<std::size_t>(i)] = f;
            }
            break;
        }
    }
    return scores;
}

LogisticModel LogisticModel::fit(const std::vector<std::array<double, 7>>& rows,
                                 const std::vector<int>& y, double l2) {
    if (rows.empty() || rows.size() != y.size())
        throw ValidationError("logistic fit: bad inputs");
    const int n = static_cast<int>(rows.size()), p = 7;
    LogisticModel m;
    m.col_mean.assign(p, 0.0);
    m.col_sd.assign(p, 0.0);
    for (const auto& r : rows)
        for (int j = 0; j < p; ++j) m.col_mean[j] += r[j];
    for (auto& v : m.col_mean) v /= n;
    for (const auto& r : rows)
        for (int j = 0; j < p; ++j)
            m.col_sd[j] += (r[j] - m.col_mean[j]) * (r[j] - m.col_mean[j]);
    for (auto& v : m.col_sd) {
        v = std::sqrt(v / std::max(1, n - 1));
        if (v < 1e-12) v = 1.0;
    }

    // Newton-Raphson on the regularized log-likelihood (bias unpenalized).
    m.w.assign(p, 0.0);
    m.bias = 0.0;
    for (int iter = 0; iter < 50; ++iter) {
        linalg::Mat h(p + 1, p + 1);
        linalg::Mat g(p + 1, 1);
        for (int i = 0; i < n; ++i) {
            std::array<double, 8> z;
            z[0] = 1.0;
            for (int j = 0; j < p; ++j)
                z[static_cast<std::size_t>(j) + 1] =
                    (rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] -
                     m.col_mean[j]) / m.col_sd[j];
            double eta = m.bias;
            for (int j = 0; j < p; ++j) eta += m.w[j] * z[static_cast<std::size_t>(j) + 1];
            const double mu = 1.0 / (1.0 + std::exp(-eta));
            const double wgt = std::max(mu * (1.0 - mu), 1e-10);
            const double r = y[static_cast<std::size_t>(i)] - mu;
            for (int a = 0; a <= p; ++a) {
                g(a, 0) += r * z[static_cast<std::size_t>(a)];
                for (int b = a; b <= p; ++b)
                    h(a, b) += wgt * z[static_cast<std::size_t>(a)] * z[static_cast<std::size_t>(b)];
            }
        }
        for (int a = 0; a <= p; ++a) {
            for (int b = 0; b < a; ++b) h(a, b) = h(b, a);
            if (a > 0) {
                h(a, a) += l2;
                g(a, 0) -= l2 * m.w[a - 1];
            }
        }
        const linalg::Mat step = linalg::cholesky_solve(h, g);
        double max_step = 0.0;
        m.bias += step(0, 0);
        for (int j = 0; j < p; ++j) {
            m.w[j] += step(j + 1, 0);
            max_step = std::max(max_step, std::fabs(step(j + 1, 0)));
        }
        max_step = std::max(max_step, std::fabs(step(0, 0)));
        if (max_step < 1e-10) break;
    }
    return m;
}

double LogisticModel::prob(const std::array<double, 7>& row) const {
    double eta = bias;
    for (int j = 0; j < 7; ++j)
        eta += w[static_cast<std::size_t>(j)] *
               ((row[static_cast<std::size_t>(j)] - col_mean[static_cast<std::size_t>(j)]) /
                col_sd[static_cast<std::size_t>(j)]);
    return 1.0 / (1.0 + std::exp(-eta));
}

std::map<std::string, std::vector<double>> default_grid(BaselineKind kind) {
    switch (kind) {
        case BaselineKind::lasso:
            return {{"lambda", {0.0001, 0.001, 0.01, 0.1}}};
        case BaselineKind::ridge:
            return {{"lambda", {0.01, 0.1, 1.0, 10.0, 100.0}}};
        case BaselineKind::elastic_net:
            return {{"lambda", {0.0001, 0.001, 0.01, 0.1}}, {"l1_ratio", {0.2, 0.5, 0.8}}};
        case BaselineKind::svm_linear:
            return {{"lambda", {0.0001, 0.001, 0.01, 0.1}}};
        case BaselineKind::dtree:
            return {{"max_depth", {3, 5, 8, 12}}, {"min_samples_leaf", {1, 5, 10}}};
        case BaselineKind::rforest:
            return {{"n_trees", {50, 100}}, {"max_depth", {8, 12}},
                    {"min_samples_leaf", {1, 5}}};
        case BaselineKind::knn:
            return {{"k", {1, 5, 11, 21}}};
        case BaselineKind::gbt:
            return {{"rounds", {50, 100}}, {"eta", {0.1, 0.3}}, {"max_depth", {2, 3}}};
    }
    return {};
}

}  // namespace cipred::baselines
