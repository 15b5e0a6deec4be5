#include "cipred/baselines/features.hpp"

#include <cstring>

namespace cipred::baselines {

FeatureMatrix flatten_features(const std::vector<preproc::SliceSample>& slices) {
    FeatureMatrix m;
    if (slices.empty()) throw ValidationError("no slices to flatten");
    m.p = slices[0].scaled.h * slices[0].scaled.w;
    m.n = static_cast<int>(slices.size());
    m.x.resize(static_cast<std::size_t>(m.n) * m.p);
    m.keys.reserve(slices.size());
    for (int i = 0; i < m.n; ++i) {
        const auto& s = slices[static_cast<std::size_t>(i)];
        if (s.scaled.h * s.scaled.w != m.p)
            throw ValidationError("inconsistent slice image sizes");
        std::memcpy(m.row(i), s.scaled.v.data(), sizeof(float) * m.p);
        m.keys.push_back({s.subject, s.z});
    }
    return m;
}

std::vector<int> labels_for(const cohort::CohortDataset& cohort, const FeatureMatrix& X) {
    std::vector<int> y;
    y.reserve(X.keys.size());
    for (const auto& k : X.keys) {
        const auto& subj = cohort.subjects.at(static_cast<std::size_t>(k.subject));
        if (!subj.label)
            throw ValidationError("unlabeled subject " + subj.record.subject_id);
        y.push_back(subj.label == cohort::Label::high ? 1 : 0);
    }
    return y;
}

FeatureMatrix take_rows(const FeatureMatrix& X, const std::vector<int>& rows) {
    FeatureMatrix out;
    out.n = static_cast<int>(rows.size());
    out.p = X.p;
    out.x.resize(static_cast<std::size_t>(out.n) * out.p);
    out.keys.reserve(rows.size());
    for (int i = 0; i < out.n; ++i) {
        std::memcpy(out.row(i), X.row(rows[static_cast<std::size_t>(i)]),
                    sizeof(float) * X.p);
        out.keys.push_back(X.keys[static_cast<std::size_t>(rows[static_cast<std::size_t>(i)])]);
    }
    return out;
}

}  // namespace cipred::baselines
