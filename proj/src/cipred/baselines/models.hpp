#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cipred/baselines/features.hpp"

namespace cipred::baselines {

enum class BaselineKind {
    lasso,
    ridge,
    elastic_net,
    svm_linear,
    dtree,
    rforest,
    knn,
    gbt
};

std::string baseline_name(BaselineKind k);
BaselineKind baseline_from_name(const std::string& s);

struct HyperParams {
    std::map<std::string, double> values;

    double get(const std::string& name, double fallback) const {
        const auto it = values.find(name);
        return it == values.end() ? fallback : it->second;
    }
    std::string canonical() const;  // "k=v;k=v" sorted by key
};

struct TreeNode {
    int feature = -1;  // -1: leaf
    float threshold = 0.0f;
    int left = -1, right = -1;
    float value = 0.0f;  // leaf payload
};

struct Tree {
    std::vector<TreeNode> nodes;  // node 0 is the root
    double eval(const float* row) const;
};

// Decision scores are monotone in class-high confidence; `threshold` is the
// model's operating point for hard labels (0 for margin/log-odds scores,
// 0.5 for probability scores).
struct FittedBaseline {
    BaselineKind kind = BaselineKind::ridge;
    HyperParams hp;
    double threshold = 0.0;

    // Linear family (lasso/ridge/elastic_net/svm_linear): standardized
    // features, +-1 target.
    std::vector<double> col_mean, col_sd, w;
    double bias = 0.0;

    // Coordinate-descent diagnostics (lasso/elastic_net).
    std::vector<double> objective_per_sweep;

    // Tree family.
    std::vector<Tree> trees;
    double gbt_f0 = 0.0, gbt_eta = 0.1;

    // knn.
    std::vector<float> knn_x;
    std::vector<int> knn_y;
    int knn_k = 5, knn_p = 0;
};

FittedBaseline fit_baseline(BaselineKind kind, const HyperParams& hp,
                            const FeatureMatrix& X, const std::vector<int>& y,
                            std::uint64_t seed = 1);

std::vector<double> predict_baseline(const FittedBaseline& m, const FeatureMatrix& X);

// Small L2-regularized logistic regression on standardized features (the
// clinical-only comparison model). Newton iterations, deterministic.
struct LogisticModel {
    std::vector<double> col_mean, col_sd, w;
    double bias = 0.0;

    static LogisticModel fit(const std::vector<std::array<double, 7>>& rows,
                             const std::vector<int>& y, double l2 = 1e-3);
    double prob(const std::array<double, 7>& row) const;
};

// Default random-search grids per model kind (pipeline configuration seeds
// these; tests use them directly).
std::map<std::string, std::vector<double>> default_grid(BaselineKind kind);

}  // namespace cipred::baselines
