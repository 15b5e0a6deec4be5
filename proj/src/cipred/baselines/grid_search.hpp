#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cipred/baselines/models.hpp"

namespace cipred::baselines {

using Grid = std::map<std::string, std::vector<double>>;

struct GridSearchRow {
    HyperParams hp;
    std::vector<double> fold_auc;
    double mean_auc = 0.0;
};

struct GridSearchResult {
    HyperParams best;
    double best_mean_auc = 0.0;
    std::vector<GridSearchRow> table;  // draw order
};

// Random search over the grid: n_draws configurations sampled uniformly
// (duplicates collapse), each scored by subject-grouped stratified
// inner-fold mean AUC. Ties keep the earliest draw. subject_labels maps rows
// to the 0/1 class (constant within a subject).
GridSearchResult grid_search(BaselineKind kind, const Grid& grid,
                             const FeatureMatrix& X, const std::vector<int>& y,
                             int inner_folds, int n_draws, std::uint64_t seed);

// The inner fold assignment used by grid_search, exposed so results can be
// recomputed independently: returns fold id per row.
std::vector<int> grouped_stratified_folds(const FeatureMatrix& X,
                                          const std::vector<int>& y, int n_folds,
                                          std::uint64_t seed);

}  // namespace cipred::baselines
