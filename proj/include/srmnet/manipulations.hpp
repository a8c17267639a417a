#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "srmnet/image.hpp"

namespace srmnet {

enum class ManipulationKind { Median, Blur, Noise, Resize, Jpeg };

std::string to_string(ManipulationKind kind);
ManipulationKind manipulation_kind_from_string(const std::string& name);

/// One row of the manipulation grid: a processing operation plus its
/// parameter (kernel side, noise/blur std-dev, scale factor or JPEG quality).
struct ManipulationSpec {
    ManipulationKind kind = ManipulationKind::Median;
    double parameter = 3.0;
    std::uint64_t seed = 0;  // noise only

    std::string label() const;
};

/// The full 5x3 parameter grid of manipulations under test.
std::vector<ManipulationSpec> manipulation_grid();

/// k x k median with edge-replicated borders. k odd, k >= 3.
Plane median_filter(const Plane& p, int k);

/// Separable convolution with a normalized sampled Gaussian of the given
/// std-dev; kernel radius ceil(3*sigma), edge-replicated borders.
Plane gaussian_blur(const Plane& p, double sigma);

/// Adds i.i.d. zero-mean Gaussian noise on the 0-255 scale and clamps.
/// Deterministic for a given seed.
Plane add_awgn(const Plane& p, double sigma, std::uint64_t seed);

/// Bicubic (Catmull-Rom) resampling to round(W*scale) x round(H*scale) with
/// edge replication for out-of-range taps.
Plane resize(const Plane& p, double scale);

/// JPEG quantization round trip: per 8x8 block, level shift, 2-D DCT,
/// quantize with the baseline luminance table scaled by the conventional
/// quality law, dequantize, inverse DCT, clamp. Entropy coding is lossless
/// and therefore omitted. Dimensions are padded to multiples of 8 by edge
/// replication and cropped back.
Plane jpeg_compress(const Plane& p, int quality);

/// Scaled luminance quantization table for the given quality (row-major 64).
std::vector<int> jpeg_quant_table(int quality);

/// Dispatches on spec.kind.
Plane apply_manipulation(const Plane& p, const ManipulationSpec& spec);

}  // namespace srmnet
