#pragma once

#include <string>
#include <vector>

#include "cipred/cohort/types.hpp"

namespace cipred::cohort {

// RVOL: three ASCII header lines ("RVOL1", "nx ny nz", "sx sy sz") followed
// by nx*ny*nz little-endian float32 voxels, x fastest, then y, then z.
Volume read_volume(const std::string& path);
void write_volume(const Volume& v, const std::string& path);

// RIMG: the 2-D sibling used by the slice cache ("RIMG1", "h w", float32
// payload, row major).
struct Image2d {
    int h = 0, w = 0;
    std::vector<float> v;

    float at(int r, int c) const { return v[static_cast<std::size_t>(r) * w + c]; }
    float& at(int r, int c) { return v[static_cast<std::size_t>(r) * w + c]; }
};

Image2d read_image(const std::string& path);
void write_image(const Image2d& img, const std::string& path);

}  // namespace cipred::cohort
