#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace srmnet {

/// Single-channel image: row-major real samples in the canonical range
/// [0, 255]. All pipeline stages (residuals, manipulations, networks)
/// operate on this representation.
struct Plane {
    int width = 0;
    int height = 0;
    std::vector<double> data;  // row-major, data[y * width + x]

    Plane() = default;
    Plane(int w, int h, double fill = 0.0)
        : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}

    double at(int y, int x) const { return data[static_cast<std::size_t>(y) * width + x]; }
    double& at(int y, int x) { return data[static_cast<std::size_t>(y) * width + x]; }

    std::size_t size() const { return data.size(); }
    bool square() const { return width == height; }
};

/// Default analysis window side.
inline constexpr int kPatchSize = 128;

struct PatchOrigin {
    int x = 0;
    int y = 0;
};

/// Loads an 8-bit image. PGM (P5) is read as-is; PPM (P6) and PNG return the
/// green band. Sub-byte and 16-bit inputs are rejected.
Plane load_image(const std::string& path);

/// Writes a binary 8-bit PGM; samples are rounded and clamped to [0, 255].
void save_pgm(const Plane& p, const std::string& path);

/// out[y][x] = in[x][y].
Plane transpose(const Plane& p);

/// Square windows of the given side at origins (i*stride, j*stride) that fit
/// fully inside the plane, enumerated top-left first, row-major.
std::vector<std::pair<Plane, PatchOrigin>> extract_patches(const Plane& p, int size, int stride);

/// Rounds every sample half away from zero and clamps to [0, 255], as an
/// 8-bit save/load round trip would.
Plane quantize_to_8bit(const Plane& p);

/// Compact 8-bit pixel buffer for datasets held in memory.
struct StoredPatch {
    int side = 0;
    std::vector<std::uint8_t> pix;

    static StoredPatch from_plane(const Plane& p);
    Plane to_plane() const;
};

}  // namespace srmnet
