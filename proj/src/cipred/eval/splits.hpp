#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cipred/cohort/types.hpp"

namespace cipred::eval {

// Subject-grouped, label-stratified split plan: a held-out test carve-out
// plus a k-fold partition of the remainder. Subject indices refer to the
// cohort the plan was made from.
struct SplitPlan {
    std::vector<int> test;
    std::vector<std::vector<int>> folds;
    std::uint64_t seed = 0;

    // Train subjects for one cross-validation round (every fold but val_fold).
    std::vector<int> train_subjects(int val_fold) const;
    std::vector<int> all_train_val() const;
    std::string fingerprint() const;
    void validate_disjoint(int n_subjects) const;
};

SplitPlan make_splits(const cohort::CohortDataset& cohort, std::uint64_t seed,
                      int n_folds = 5, double test_fraction = 0.2);

}  // namespace cipred::eval
