#pragma once

#include <array>
#include <string>
#include <vector>

#include "cipred/cohort/types.hpp"
#include "cipred/cohort/volume_io.hpp"
#include "cipred/core/rng.hpp"

namespace cipred::preproc {

using cohort::Image2d;
using cohort::Volume;

// Fixed per-channel normalization constants applied after [0,1] scaling.
struct NormalizationConstants {
    static constexpr std::array<float, 3> mean{0.485f, 0.456f, 0.406f};
    static constexpr std::array<float, 3> std{0.229f, 0.224f, 0.225f};
};

inline constexpr int kTargetSize = 128;

// 3 x 128 x 128, channel-major storage.
struct NormalizedImage {
    static constexpr int kC = 3, kH = kTargetSize, kW = kTargetSize;
    std::vector<float> v;  // c*kH*kW + y*kW + x

    NormalizedImage() : v(static_cast<std::size_t>(kC) * kH * kW, 0.0f) {}
    float at(int c, int y, int x) const {
        return v[(static_cast<std::size_t>(c) * kH + y) * kW + x];
    }
    float& at(int c, int y, int x) {
        return v[(static_cast<std::size_t>(c) * kH + y) * kW + x];
    }
};

enum class WindowPosition { superior, central, inferior, explicit_range };

struct SliceWindow {
    WindowPosition position = WindowPosition::central;
    int count = 15;
    int start = 0, end = 0;  // inclusive, explicit_range only

    // Resolved inclusive z-range for a volume with nz axial slices. The
    // superior/inferior windows are the central window shifted by -/+45
    // slices, clamped so the window stays in range.
    std::pair<int, int> resolve(int nz) const;

    std::string describe() const;
};

// Trilinear resampling onto an isotropic grid of target_mm spacing. Grid
// point i sits at physical coordinate i * spacing; output dims are
// round(n * spacing / target). Exact identity when the volume is already
// isotropic at the target.
Volume resample_isotropic(const Volume& v, double target_mm = 1.0);

// Axial slices (rows = y, cols = x) at the window's z indices, increasing z.
std::vector<Image2d> extract_slices(const Volume& v, const SliceWindow& w);

// Center-crop to square, bilinear resize to 128x128, per-slice min-max scale
// to [0,1] (an all-constant slice maps to all zeros). This is the
// single-channel form consumed by the flattened-feature pathway.
Image2d standardize_to_scaled(const Image2d& img);

// Channel replication plus the fixed per-channel affine normalization.
NormalizedImage normalize_channels(const Image2d& scaled);

// Full standardization: crop/resize/scale then channel normalization.
NormalizedImage standardize_slice(const Image2d& img);

// Deterministic core of the augmentation: rotate by angle_deg (bilinear,
// replicate padding) then optionally mirror columns.
NormalizedImage augment_with(const NormalizedImage& img, double angle_deg, bool flip);

// Training-time augmentation: angle ~ U[-15, +15] degrees, flip with p = 0.5.
NormalizedImage augment(const NormalizedImage& img, Rng& rng);

// One training sample: a subject's axial slice in scaled single-channel form.
struct SliceSample {
    int subject = 0;  // index into the cohort
    int z = 0;        // source z index
    Image2d scaled;   // 128 x 128, [0,1]
};

// Resample + window + standardize for one volume.
std::vector<SliceSample> preprocess_volume(const Volume& v, const SliceWindow& w,
                                           int subject_index, double target_mm = 1.0);

}  // namespace cipred::preproc
