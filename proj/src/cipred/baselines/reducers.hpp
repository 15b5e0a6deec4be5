#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cipred/baselines/features.hpp"

namespace cipred::baselines {

enum class ReducerMethod { pca, grp, rfe, ufs };

std::string reducer_name(ReducerMethod m);
ReducerMethod reducer_from_name(const std::string& s);

struct ReducerOptions {
    double rfe_lambda = 1.0;     // ridge ranker penalty
    bool ufs_mutual_info = false;  // score by binned mutual information instead
                                   // of the ANOVA F statistic
};

struct FittedReducer {
    ReducerMethod method = ReducerMethod::pca;
    int k = 0;
    int p_in = 0;

    // pca: mean + orthonormal components (p x k, column j = component j,
    // ordered by decreasing singular value) kept in double for the
    // orthogonality contract.
    std::vector<double> mean;
    std::vector<double> components;          // p*k, row-major p rows
    std::vector<double> explained_variance;  // k
    double total_variance = 0.0;
    bool padded = false;  // rank-deficient input, padded deterministically

    // grp: seeded Gaussian projection, entries N(0, 1/k).
    std::vector<float> projection;  // p*k row-major

    // rfe / ufs: selected feature indices, ascending.
    std::vector<int> selected;
};

// y is required by the supervised methods (rfe, ufs) and ignored otherwise.
FittedReducer fit_reducer(ReducerMethod method, const FeatureMatrix& X, int k,
                          std::uint64_t seed, const std::vector<int>* y = nullptr,
                          const ReducerOptions& opts = {});

FeatureMatrix apply_reducer(const FittedReducer& r, const FeatureMatrix& X);

// ANOVA F statistic of every column against the binary class (the UFS
// score); exposed for direct verification.
std::vector<double> anova_f_scores(const FeatureMatrix& X, const std::vector<int>& y);

}  // namespace cipred::baselines
