#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cipred/core/errors.hpp"

namespace cipred::cohort {

enum class Center : int { A = 0, B = 1, C = 2 };
enum class Language : int { english = 0, spanish = 1, cantonese = 2 };
enum class Label : int { low = 0, high = 1 };

std::string center_name(Center c);
Center center_from_name(const std::string& s);
std::string language_name(Language l);
Language language_from_name(const std::string& s);
std::string label_name(Label l);
Label label_from_name(const std::string& s);

// 3-D scalar field with voxel spacing, x-fastest storage:
// voxels[x + nx * (y + ny * z)].
struct Volume {
    int nx = 0, ny = 0, nz = 0;
    double sx = 1.0, sy = 1.0, sz = 1.0;
    std::vector<float> voxels;

    std::size_t size() const { return voxels.size(); }
    float at(int x, int y, int z) const {
        return voxels[static_cast<std::size_t>(x) +
                      static_cast<std::size_t>(nx) *
                          (static_cast<std::size_t>(y) +
                           static_cast<std::size_t>(ny) * static_cast<std::size_t>(z))];
    }
    float& at(int x, int y, int z) {
        return voxels[static_cast<std::size_t>(x) +
                      static_cast<std::size_t>(nx) *
                          (static_cast<std::size_t>(y) +
                           static_cast<std::size_t>(ny) * static_cast<std::size_t>(z))];
    }
    // Throws ValidationError when dims/spacing/voxel contents are invalid.
    void validate() const;
};

// One clinical intake row; exactly seven model features are derivable
// (sex, the three ages, both PTAs, and the preoperative score).
struct ClinicalRecord {
    std::string subject_id;
    Center center = Center::A;
    Language language = Language::english;
    int sex = 0;  // binary flag
    double age_at_ci = 0.0;   // months
    double age_at_mri = 0.0;  // months
    double age_at_ha = 0.0;   // months
    double pta_left = 0.0;    // dB HL, [0, 130]
    double pta_right = 0.0;   // dB HL, [0, 130]
    double preop_score = 0.0;  // center-native scale

    static constexpr int kNumFeatures = 7;
    // Feature order: sex, age_at_ci, age_at_mri, age_at_ha, pta_left,
    // pta_right, preop_score.
    std::array<double, kNumFeatures> features() const {
        return {static_cast<double>(sex), age_at_ci, age_at_mri, age_at_ha,
                pta_left, pta_right, preop_score};
    }
    static const char* feature_name(int i);

    void validate() const;
};

struct Observation {
    double time_months = 0.0;  // pre-CI rows sit at time 0 (or negative) per config
    double score = 0.0;
};

struct LongitudinalSeries {
    std::string subject_id;
    std::vector<Observation> observations;  // times strictly increasing

    void validate() const;
};

struct Subject {
    ClinicalRecord record;
    Volume volume;
    LongitudinalSeries series;
    std::optional<Label> label;
};

// Immutable after assembly; shareable across threads.
struct CohortDataset {
    std::vector<Subject> subjects;

    std::vector<std::size_t> subjects_of_center(Center c) const;
    int index_of(const std::string& subject_id) const;  // -1 when absent
    void validate_for_training() const;  // every subject labeled + complete
};

}  // namespace cipred::cohort
