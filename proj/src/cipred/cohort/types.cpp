#include "cipred/cohort/types.hpp"

#include <cmath>

namespace cipred::cohort {

std::string center_name(Center c) {
    switch (c) {
        case Center::A: return "A";
        case Center::B: return "B";
        case Center::C: return "C";
    }
    return "?";
}

Center center_from_name(const std::string& s) {
    if (s == "A") return Center::A;
    if (s == "B") return Center::B;
    if (s == "C") return Center::C;
    throw ValidationError("unknown center '" + s + "' (expected A, B or C)");
}

std::string language_name(Language l) {
    switch (l) {
        case Language::english: return "english";
        case Language::spanish: return "spanish";
        case Language::cantonese: return "cantonese";
    }
    return "?";
}

Language language_from_name(const std::string& s) {
    if (s == "english") return Language::english;
    if (s == "spanish") return Language::spanish;
    if (s == "cantonese") return Language::cantonese;
    throw ValidationError("unknown language '" + s + "'");
}

std::string label_name(Label l) { return l == Label::high ? "high" : "low"; }

Label label_from_name(const std::string& s) {
    if (s == "high") return Label::high;
    if (s == "low") return Label::low;
    throw ValidationError("unknown label '" + s + "' (expected high or low)");
}

void Volume::validate() const {
    if (nx <= 0 || ny <= 0 || nz <= 0)
        throw ValidationError("volume dims must be positive");
    if (!(sx > 0.0) || !(sy > 0.0) || !(sz > 0.0))
        throw ValidationError("volume spacing must be strictly positive");
    const std::size_t expect = static_cast<std::size_t>(nx) * ny * nz;
    if (voxels.size() != expect)
        throw ValidationError("voxel count does not match dims");
    for (float v : voxels)
        if (!std::isfinite(v)) throw ValidationError("non-finite voxel value");
}

const char* ClinicalRecord::feature_name(int i) {
    static const char* names[kNumFeatures] = {
        "sex", "age_at_ci", "age_at_mri", "age_at_ha",
        "pta_left", "pta_right", "preop_score"};
    return names[i];
}

void ClinicalRecord::validate() const {
    if (subject_id.empty()) throw ValidationError("empty subject_id");
    if (sex != 0 && sex != 1)
        throw ValidationError("sex must be 0 or 1 for subject " + subject_id);
    if (age_at_ci < 0 || age_at_mri < 0 || age_at_ha < 0)
        throw ValidationError("negative age for subject " + subject_id);
    for (double pta : {pta_left, pta_right})
        if (!(pta >= 0.0 && pta <= 130.0))
            throw ValidationError("PTA out of [0, 130] for subject " + subject_id);
    if (!std::isfinite(preop_score))
        throw ValidationError("non-finite preop_score for subject " + subject_id);
}

void LongitudinalSeries::validate() const {
    if (observations.size() < 2)
        throw ValidationError("subject " + subject_id +
                              " has fewer than 2 observations");
    for (std::size_t i = 0; i < observations.size(); ++i) {
        if (!std::isfinite(observations[i].score))
            throw ValidationError("non-finite score for subject " + subject_id);
        if (i > 0 && !(observations[i].time_months > observations[i - 1].time_months))
            throw ValidationError("assessment times not strictly increasing for subject " +
                                  subject_id);
    }
}

std::vector<std::size_t> CohortDataset::subjects_of_center(Center c) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < subjects.size(); ++i)
        if (subjects[i].record.center == c) out.push_back(i);
    return out;
}

int CohortDataset::index_of(const std::string& subject_id) const {
    for (std::size_t i = 0; i < subjects.size(); ++i)
        if (subjects[i].record.subject_id == subject_id) return static_cast<int>(i);
    return -1;
}

void CohortDataset::validate_for_training() const {
    for (const auto& s : subjects) {
        if (!s.label)
            throw ValidationError("subject " + s.record.subject_id + " has no label");
        if (s.volume.voxels.empty())
            throw ValidationError("subject " + s.record.subject_id + " has no volume");
        s.series.validate();
    }
}

}  // namespace cipred::cohort
