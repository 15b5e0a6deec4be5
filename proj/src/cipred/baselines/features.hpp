#pragma once

#include <string>
#include <vector>

#include "cipred/cohort/types.hpp"
#include "cipred/preproc/preproc.hpp"

namespace cipred::baselines {

struct SampleKey {
    int subject = 0;  // cohort subject index
    int z = 0;
};

// Flattened slice pixels, one row per slice sample.
struct FeatureMatrix {
    int n = 0, p = 0;
    std::vector<float> x;  // row-major
    std::vector<SampleKey> keys;

    const float* row(int i) const { return x.data() + static_cast<std::size_t>(i) * p; }
    float* row(int i) { return x.data() + static_cast<std::size_t>(i) * p; }
};

// One row per slice: the standardized single-channel pixel values in row
// major order (exactly the values the neural path replicates to 3 channels).
FeatureMatrix flatten_features(const std::vector<preproc::SliceSample>& slices);

// 0/1 class per row, taken from the subjects' labels.
std::vector<int> labels_for(const cohort::CohortDataset& cohort,
                            const FeatureMatrix& X);

// Row subset (copying), preserving order.
FeatureMatrix take_rows(const FeatureMatrix& X, const std::vector<int>& rows);

}  // namespace cipred::baselines
