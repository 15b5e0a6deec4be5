#pragma once

#include <map>
#include <string>
#include <vector>

#include "cipred/cohort/types.hpp"
#include "cipred/core/rng.hpp"
#include "cipred/preproc/preproc.hpp"

namespace cipred::synth {

using cohort::Center;
using cohort::CohortDataset;
using cohort::Label;
using cohort::Language;
using cohort::LongitudinalSeries;
using cohort::Volume;

// Per-center generative parameters: score scale/offset mimic center-native
// instruments; image shift/scale and feature shifts realize the cross-center
// heterogeneity.
struct CenterParams {
    double score_scale = 1.0;
    double score_offset = 0.0;
    double image_shift = 0.0;
    double image_scale = 1.0;
    double age_mri_mean = 20.0;  // months
    double age_gap_ci = 4.0;     // CI happens this long after MRI on average
    double age_ha_mean = 11.0;
    double pta_mean = 96.0;
};

struct CenterSpec {
    Center center = Center::A;
    int n_subjects = 0;
    // Language mix; counts must sum to n_subjects.
    std::vector<std::pair<Language, int>> languages;
    std::vector<double> times;  // assessment schedule, months since implantation
};

struct SynthSpec {
    std::vector<CenterSpec> centers;
    int nx = 160, ny = 160, nz = 160;
    double sx = 1.0, sy = 1.0, sz = 1.0;
    double kappa_img = 1.0;   // image signal strength, >= 0
    double kappa_clin = 0.0;  // clinical signal strength, >= 0
    preproc::SliceWindow signal_region;  // axial slab carrying the class signal
    double slope_mean_high = 1.0;  // mixture components in standard units;
    double slope_mean_low = 0.45;  // native slope = score_scale * draw
    double slope_sd = 0.2;
    double intercept_mean = 1.0;
    double intercept_sd = 0.35;
    double score_noise_sd = 0.0;  // standard units, scaled per center
    double voxel_noise_sd = 0.06;
    double signal_jitter_vox = 6.0;  // per-subject translation of the bump layout
    std::uint64_t seed = 1;

    void validate() const;
    static SynthSpec small_default(int per_center, std::uint64_t seed);
};

struct SubjectTruth {
    std::string subject_id;
    Center center = Center::A;
    Label true_class = Label::low;
    double true_slope = 0.0;      // center-native units
    double true_intercept = 0.0;  // center-native units
};

struct OracleTruth {
    std::vector<SubjectTruth> subjects;
    std::map<Center, CenterParams> center_params;

    const SubjectTruth& of(const std::string& subject_id) const;
};

// Class-conditional smooth additive bump pattern confined to the region's
// z-slab; amplitude is proportional to kappa_img, voxels outside the slab
// are untouched. jitter_rng drives the per-subject layout translation.
void inject_signal(Volume& v, Label cls, double kappa_img,
                   const preproc::SliceWindow& region, double jitter_vox,
                   Rng& jitter_rng);

// score_t = intercept + slope * t + Normal(0, noise_sd^2).
LongitudinalSeries simulate_scores(const std::string& subject_id, double intercept,
                                   double slope, const std::vector<double>& times,
                                   double noise_sd, Rng& rng);

// Deterministic in spec.seed; per-subject streams make generation order
// irrelevant. Subject labels are left unset (the labeling stage fills them).
std::pair<CohortDataset, OracleTruth> generate_cohort(const SynthSpec& spec);

// Copies ground-truth classes onto the cohort (test shortcut for components
// downstream of labeling).
void label_from_truth(CohortDataset& cohort, const OracleTruth& truth);

void write_truth_csv(const OracleTruth& truth, const std::string& path);

}  // namespace cipred::synth
