#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "srmnet/image.hpp"

namespace srmnet {

/// Quantizer defaults: three levels spaced 4.5 gray levels apart.
inline constexpr double kQuantStep = 4.5;
inline constexpr int kQuantLevels = 3;

/// Co-occurrence order and the resulting histogram sizes.
inline constexpr int kCoocOrder = 4;
inline constexpr int kHistBins = 81;       // 3^4
inline constexpr int kFeatureDim = 162;    // along + across blocks

/// Residual filter taps, applied as a sliding inner product along a row.
inline constexpr std::array<double, 4> kResidualTaps = {1.0, -3.0, 3.0, -1.0};

/// High-pass residual of a plane; valid support only, so an H x W input
/// yields an H x (W-3) map.
struct ResidualMap {
    int width = 0;
    int height = 0;
    std::vector<double> data;

    double at(int y, int x) const { return data[static_cast<std::size_t>(y) * width + x]; }
    double& at(int y, int x) { return data[static_cast<std::size_t>(y) * width + x]; }
};

/// Residual quantized to the levels {-1, 0, +1}.
struct QuantizedMap {
    int width = 0;
    int height = 0;
    std::vector<std::int8_t> data;

    std::int8_t at(int y, int x) const { return data[static_cast<std::size_t>(y) * width + x]; }
    std::int8_t& at(int y, int x) { return data[static_cast<std::size_t>(y) * width + x]; }
};

/// 162-component descriptor; entries 0..80 are the along-direction
/// co-occurrence histogram, 81..161 the across-direction one.
using Feature = std::vector<double>;

enum class CoocDirection { Along, Across };

/// r[y][x] = p[y][x] - 3 p[y][x+1] + 3 p[y][x+2] - p[y][x+3].
ResidualMap residual(const Plane& p);

/// q = clamp(round_half_away_from_zero(r / delta), -(L-1)/2, +(L-1)/2).
QuantizedMap quantize(const ResidualMap& r, double delta = kQuantStep, int levels = kQuantLevels);

/// Base-3 code of four digits in {-1, 0, +1}: sum of (q_n + 1) * 3^n.
int encode_digits(int q0, int q1, int q2, int q3);

/// Histogram of encode_digits over every run of four consecutive samples,
/// horizontal runs for Along, vertical runs for Across.
std::array<double, kHistBins> cooccurrence_hist(const QuantizedMap& q, CoocDirection direction);

/// Full descriptor of a square patch: residual + quantization on the patch
/// and on its transpose, both orientations accumulated per direction block.
/// With normalize set, each 81-bin block is divided by its total count.
Feature extract_feature(const Plane& patch, bool normalize, double delta = kQuantStep);

/// Valid co-occurrence window count for one orientation of an H x W patch.
std::size_t window_count(int width, int height, CoocDirection direction);

}  // namespace srmnet
