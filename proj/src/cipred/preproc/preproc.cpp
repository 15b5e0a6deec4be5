#include "cipred/preproc/preproc.hpp"

#include <algorithm>
#include <cmath>

namespace cipred::preproc {

namespace {

constexpr double kPi = 3.14159265358979323846;

int clampi(int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); }

// Bilinear lookup with clamped (replicate) borders.
float sample_bilinear(const Image2d& img, double y, double x) {
    const int y0 = static_cast<int>(std::floor(y));
    const int x0 = static_cast<int>(std::floor(x));
    const double fy = y - y0;
    const double fx = x - x0;
    const int y0c = clampi(y0, 0, img.h - 1), y1c = clampi(y0 + 1, 0, img.h - 1);
    const int x0c = clampi(x0, 0, img.w - 1), x1c = clampi(x0 + 1, 0, img.w - 1);
    const double v00 = img.at(y0c, x0c), v01 = img.at(y0c, x1c);
    const double v10 = img.at(y1c, x0c), v11 = img.at(y1c, x1c);
    const double top = v00 + fx * (v01 - v00);
    const double bot = v10 + fx * (v11 - v10);
    return static_cast<float>(top + fy * (bot - top));
}

}  // namespace

std::pair<int, int> SliceWindow::resolve(int nz) const {
    if (count < 1) throw ValidationError("slice window count must be >= 1");
    if (position == WindowPosition::explicit_range) {
        if (start > end) throw ValidationError("explicit slice window has start > end");
        if (start < 0 || end >= nz)
            throw ValidationError("explicit slice window [" + std::to_string(start) +
                                  ", " + std::to_string(end) +
                                  "] outside volume z-range 0.." + std::to_string(nz - 1));
        return {start, end};
    }
    if (count > nz)
        throw ValidationError("slice window count " + std::to_string(count) +
                              " exceeds volume z-extent " + std::to_string(nz));
    int s = nz / 2 - count / 2;
    if (position == WindowPosition::superior) s -= 45;
    if (position == WindowPosition::inferior) s += 45;
    s = clampi(s, 0, nz - count);
    return {s, s + count - 1};
}

std::string SliceWindow::describe() const {
    switch (position) {
        case WindowPosition::superior: return "superior:" + std::to_string(count);
        case WindowPosition::central: return "central:" + std::to_string(count);
        case WindowPosition::inferior: return "inferior:" + std::to_string(count);
        case WindowPosition::explicit_range:
            return "explicit:" + std::to_string(start) + "-" + std::to_string(end);
    }
    return "?";
}

Volume resample_isotropic(const Volume& v, double target_mm) {
    v.validate();
    if (!(target_mm > 0.0)) throw ValidationError("target spacing must be positive");
    if (v.sx == target_mm && v.sy == target_mm && v.sz == target_mm) return v;

    Volume out;
    out.nx = static_cast<int>(std::lround(v.nx * v.sx / target_mm));
    out.ny = static_cast<int>(std::lround(v.ny * v.sy / target_mm));
    out.nz = static_cast<int>(std::lround(v.nz * v.sz / target_mm));
    if (out.nx <= 0 || out.ny <= 0 || out.nz <= 0)
        throw ValidationError("resampling would produce an empty volume");
    out.sx = out.sy = out.sz = target_mm;
    out.voxels.resize(static_cast<std::size_t>(out.nx) * out.ny * out.nz);

    const double rx = target_mm / v.sx;
    const double ry = target_mm / v.sy;
    const double rz = target_mm / v.sz;
    std::size_t idx = 0;
    for (int z = 0; z < out.nz; ++z) {
        const double zf = z * rz;
        const int z0 = clampi(static_cast<int>(std::floor(zf)), 0, v.nz - 1);
        const int z1 = clampi(z0 + 1, 0, v.nz - 1);
        const double fz = zf - std::floor(zf);
        for (int y = 0; y < out.ny; ++y) {
            const double yf = y * ry;
            const int y0 = clampi(static_cast<int>(std::floor(yf)), 0, v.ny - 1);
            const int y1 = clampi(y0 + 1, 0, v.ny - 1);
            const double fy = yf - std::floor(yf);
            for (int x = 0; x < out.nx; ++x, ++idx) {
                const double xf = x * rx;
                const int x0 = clampi(static_cast<int>(std::floor(xf)), 0, v.nx - 1);
                const int x1 = clampi(x0 + 1, 0, v.nx - 1);
                const double fx = xf - std::floor(xf);
                const double c00 = v.at(x0, y0, z0) + fx * (v.at(x1, y0, z0) - v.at(x0, y0, z0));
                const double c01 = v.at(x0, y0, z1) + fx * (v.at(x1, y0, z1) - v.at(x0, y0, z1));
                const double c10 = v.at(x0, y1, z0) + fx * (v.at(x1, y1, z0) - v.at(x0, y1, z0));
                const double c11 = v.at(x0, y1, z1) + fx * (v.at(x1, y1, z1) - v.at(x0, y1, z1));
                const double c0 = c00 + fy * (c10 - c00);
                const double c1 = c01 + fy * (c11 - c01);
                out.voxels[idx] = static_cast<float>(c0 + fz * (c1 - c0));
            }
        }
    }
    return out;
}

std::vector<Image2d> extract_slices(const Volume& v, const SliceWindow& w) {
    const auto [z_lo, z_hi] = w.resolve(v.nz);
    std::vector<Image2d> out;
    out.reserve(static_cast<std::size_t>(z_hi - z_lo + 1));
    for (int z = z_lo; z <= z_hi; ++z) {
        Image2d img;
        img.h = v.ny;
        img.w = v.nx;
        img.v.resize(static_cast<std::size_t>(v.ny) * v.nx);
        for (int y = 0; y < v.ny; ++y)
            for (int x = 0; x < v.nx; ++x) img.at(y, x) = v.at(x, y, z);
        out.push_back(std::move(img));
    }
    return out;
}

Image2d standardize_to_scaled(const Image2d& img) {
    if (img.h <= 0 || img.w <= 0 || img.v.empty())
        throw ValidationError("cannot standardize an empty image");

    const int side = std::min(img.h, img.w);
    const int r_off = (img.h - side) / 2;
    const int c_off = (img.w - side) / 2;

    Image2d cropped;
    cropped.h = cropped.w = side;
    cropped.v.resize(static_cast<std::size_t>(side) * side);
    for (int r = 0; r < side; ++r)
        for (int c = 0; c < side; ++c) cropped.at(r, c) = img.at(r + r_off, c + c_off);

    Image2d resized;
    resized.h = resized.w = kTargetSize;
    resized.v.resize(static_cast<std::size_t>(kTargetSize) * kTargetSize);
    if (side == kTargetSize) {
        resized = cropped;
    } else {
        const double scale = static_cast<double>(side) / kTargetSize;
        for (int r = 0; r < kTargetSize; ++r) {
            const double sy = (r + 0.5) * scale - 0.5;
            for (int c = 0; c < kTargetSize; ++c) {
                const double sx = (c + 0.5) * scale - 0.5;
                resized.at(r, c) = sample_bilinear(cropped, sy, sx);
            }
        }
    }

    float lo = resized.v[0], hi = resized.v[0];
    for (float x : resized.v) {
        lo = std::min(lo, x);
        hi = std::max(hi, x);
    }
    if (hi > lo) {
        const float inv = 1.0f / (hi - lo);
        for (float& x : resized.v) x = (x - lo) * inv;
    } else {
        std::fill(resized.v.begin(), resized.v.end(), 0.0f);
    }
    return resized;
}

NormalizedImage normalize_channels(const Image2d& scaled) {
    if (scaled.h != kTargetSize || scaled.w != kTargetSize)
        throw ValidationError("normalize_channels expects a 128x128 input");
    NormalizedImage out;
    for (int c = 0; c < 3; ++c) {
        const float m = NormalizationConstants::mean[c];
        const float inv = 1.0f / NormalizationConstants::std[c];
        float* dst = &out.v[static_cast<std::size_t>(c) * kTargetSize * kTargetSize];
        for (std::size_t i = 0; i < scaled.v.size(); ++i) dst[i] = (scaled.v[i] - m) * inv;
    }
    return out;
}

NormalizedImage standardize_slice(const Image2d& img) {
    return normalize_channels(standardize_to_scaled(img));
}

NormalizedImage augment_with(const NormalizedImage& img, double angle_deg, bool flip) {
    NormalizedImage out;
    const int H = NormalizedImage::kH, W = NormalizedImage::kW;
    if (angle_deg == 0.0) {
        out = img;
    } else {
        const double a = angle_deg * kPi / 180.0;
        const double ca = std::cos(a), sa = std::sin(a);
        const double cy = (H - 1) / 2.0, cx = (W - 1) / 2.0;
        for (int c = 0; c < 3; ++c) {
            Image2d chan;
            chan.h = H;
            chan.w = W;
            chan.v.assign(img.v.begin() + static_cast<std::size_t>(c) * H * W,
                          img.v.begin() + static_cast<std::size_t>(c + 1) * H * W);
            for (int y = 0; y < H; ++y) {
                for (int x = 0; x < W; ++x) {
                    const double dy = y - cy, dx = x - cx;
                    const double sy = cy + ca * dy - sa * dx;
                    const double sx = cx + sa * dy + ca * dx;
                    out.at(c, y, x) = sample_bilinear(chan, sy, sx);
                }
            }
        }
    }
    if (flip) {
        for (int c = 0; c < 3; ++c)
            for (int y = 0; y < H; ++y)
                for (int x = 0; x < W / 2; ++x)
                    std::swap(out.at(c, y, x), out.at(c, y, W - 1 - x));
    }
    return out;
}

NormalizedImage augment(const NormalizedImage& img, Rng& rng) {
    const double angle = rng.uniform(-15.0, 15.0);
    const bool flip = rng.bernoulli(0.5);
    return augment_with(img, angle, flip);
}

std::vector<SliceSample> preprocess_volume(const Volume& v, const SliceWindow& w,
                                           int subject_index, double target_mm) {
    const Volume iso = resample_isotropic(v, target_mm);
    const auto [z_lo, z_hi] = w.resolve(iso.nz);
    const auto slices = extract_slices(iso, w);
    std::vector<SliceSample> out;
    out.reserve(slices.size());
    for (std::size_t i = 0; i < slices.size(); ++i) {
        SliceSample s;
        s.subject = subject_index;
        s.z = z_lo + static_cast<int>(i);
        s.scaled = standardize_to_scaled(slices[i]);
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace cipred::preproc
