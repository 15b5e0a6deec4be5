#include "cipred/cohort/volume_io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "cipred/core/csv.hpp"

namespace cipred::cohort {

namespace {

// Payloads are little-endian on disk and written verbatim.
static_assert(std::endian::native == std::endian::little,
              "big-endian hosts need byte swapping in volume_io");

std::string read_header_line(std::istream& in, const std::string& path) {
    std::string line;
    if (!std::getline(in, line))
        throw FormatError("unexpected end of header in " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
}

void parse_triplet(const std::string& line, const std::string& path, double out[3]) {
    std::istringstream ss(line);
    std::string tok;
    for (int i = 0; i < 3; ++i) {
        if (!(ss >> tok)) throw FormatError("short header line in " + path);
        out[i] = csv::parse_double(tok, path);
    }
    if (ss >> tok) throw FormatError("trailing tokens in header of " + path);
}

void read_f32_payload(std::istream& in, std::size_t count, float* dst,
                      const std::string& path) {
    in.read(reinterpret_cast<char*>(dst),
            static_cast<std::streamsize>(count * sizeof(float)));
    if (static_cast<std::size_t>(in.gcount()) != count * sizeof(float))
        throw TruncationError("payload shorter than header promises in " + path);
}

}  // namespace

Volume read_volume(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open volume file: " + path);

    const std::string magic = read_header_line(in, path);
    if (magic != "RVOL1")
        throw FormatError("bad magic '" + magic + "' in " + path + " (expected RVOL1)");

    double dims[3], spacing[3];
    parse_triplet(read_header_line(in, path), path, dims);
    parse_triplet(read_header_line(in, path), path, spacing);

    Volume v;
    for (int i = 0; i < 3; ++i) {
        if (dims[i] <= 0 || dims[i] != std::floor(dims[i]))
            throw FormatError("non-positive or fractional dim in " + path);
    }
    v.nx = static_cast<int>(dims[0]);
    v.ny = static_cast<int>(dims[1]);
    v.nz = static_cast<int>(dims[2]);
    v.sx = spacing[0];
    v.sy = spacing[1];
    v.sz = spacing[2];

    const std::size_t count = static_cast<std::size_t>(v.nx) * v.ny * v.nz;
    v.voxels.resize(count);
    read_f32_payload(in, count, v.voxels.data(), path);
    v.validate();
    return v;
}

void write_volume(const Volume& v, const std::string& path) {
    v.validate();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write volume file: " + path);
    out << "RVOL1\n";
    out << v.nx << " " << v.ny << " " << v.nz << "\n";
    out << csv::format_double(v.sx) << " " << csv::format_double(v.sy) << " "
        << csv::format_double(v.sz) << "\n";
    out.write(reinterpret_cast<const char*>(v.voxels.data()),
              static_cast<std::streamsize>(v.voxels.size() * sizeof(float)));
    if (!out) throw IoError("write failed for volume file: " + path);
}

Image2d read_image(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open image file: " + path);
    const std::string magic = read_header_line(in, path);
    if (magic != "RIMG1")
        throw FormatError("bad magic '" + magic + "' in " + path + " (expected RIMG1)");
    const std::string dims = read_header_line(in, path);
    std::istringstream ss(dims);
    long long h = 0, w = 0;
    if (!(ss >> h >> w) || h <= 0 || w <= 0)
        throw FormatError("bad image dims in " + path);
    Image2d img;
    img.h = static_cast<int>(h);
    img.w = static_cast<int>(w);
    img.v.resize(static_cast<std::size_t>(h) * static_cast<std::size_t>(w));
    read_f32_payload(in, img.v.size(), img.v.data(), path);
    for (float x : img.v)
        if (!std::isfinite(x)) throw ValidationError("non-finite pixel in " + path);
    return img;
}

void write_image(const Image2d& img, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write image file: " + path);
    out << "RIMG1\n" << img.h << " " << img.w << "\n";
    out.write(reinterpret_cast<const char*>(img.v.data()),
              static_cast<std::streamsize>(img.v.size() * sizeof(float)));
    if (!out) throw IoError("write failed for image file: " + path);
}

}  // namespace cipred::cohort
