#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "srmnet/descriptor.hpp"
#include "srmnet/image.hpp"

namespace srmnet {

/// Bank of small convolution filters, all sharing one kernel shape, applied
/// with valid support (no padding). Kernels are stored at their effective
/// support: the residual-extraction bank declared as 5x5 in the construction
/// carries its taps in the top-left 4x4 window and the structurally zero
/// fifth row and column are dropped, so the valid output grid covers exactly
/// the window set the handcrafted descriptor counts over.
struct ConvBank {
    int kernel_h = 0;
    int kernel_w = 0;
    std::vector<std::vector<double>> weights;  // one row-major kernel per filter
    std::vector<double> biases;

    int filters() const { return static_cast<int>(weights.size()); }
};

/// Codeword-matching layer: 81 four-dimensional codewords c_k with biases
/// eps_k. Scores <r, c_k> + eps_k realize minimum-distance quantization when
/// eps_k = -|c_k|^2 / 2.
struct Codebook {
    static constexpr int kWords = kHistBins;
    static constexpr int kDim = kCoocOrder;

    std::vector<double> words;   // kWords x kDim, row-major
    std::vector<double> biases;  // kWords

    double word(int k, int n) const { return words[static_cast<std::size_t>(k) * kDim + n]; }
    double& word(int k, int n) { return words[static_cast<std::size_t>(k) * kDim + n]; }
};

/// Four-channel feature maps with per-site channel fibers stored
/// contiguously: data[(y*width + x)*channels + c].
struct ChannelMap {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<double> data;

    std::size_t sites() const { return static_cast<std::size_t>(width) * height; }
    const double* fiber(std::size_t site) const { return data.data() + site * channels; }
    double* fiber(std::size_t site) { return data.data() + site * channels; }
};

/// Per-site one-hot selection over 81 channels.
struct OneHotMap {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> winner;  // selected channel per site

    std::size_t sites() const { return winner.size(); }
};

/// Residual bank whose n-th filter carries the taps [1,-3,3,-1] on its n-th
/// row: channel fibers stack four vertically consecutive residual samples
/// (the across-direction grouping).
ConvBank build_across_bank(double tap_scale = 1.0);

/// Twin arrangement with the taps shifted column-wise (filter n starts at
/// column n of a 1x7 kernel): fibers stack four horizontally consecutive
/// residual samples (the along-direction grouping).
ConvBank build_along_bank(double tap_scale = 1.0);

/// Codebook on the lattice {-delta, 0, +delta}^4, row k holding the codeword
/// whose digits decode index k, with eps_k = -|c_k|^2 / 2.
Codebook build_codebook(double delta);

struct ConstrainedParams {
    ConvBank across_bank;  // the 4-filter residual bank of the construction
    ConvBank along_bank;   // twin column-shifted arrangement
    Codebook codebook;
    double delta = kQuantStep;
};

/// Hard-wired parameters that make the network reproduce the handcrafted
/// descriptor exactly.
ConstrainedParams build_constrained_params(double delta = kQuantStep);

/// Valid-support correlation of every filter in the bank with the plane.
ChannelMap conv_bank(const Plane& p, const ConvBank& bank);

/// m_k(site) = <fiber, c_k> + eps_k for every site; 81 channels out.
ChannelMap matching_scores(const ChannelMap& fibers, const Codebook& cb);

/// Per-site argmax over channels; ties resolve to the lowest index.
OneHotMap hardmax(const ChannelMap& scores);

/// h_k = number of sites whose winner is k (sum pooling).
std::array<double, kHistBins> pool_histogram(const OneHotMap& onehot);

/// Full constrained forward pass: both banks on the patch and its transpose,
/// matching scores, hardmax, pooling; along-direction counts land in bins
/// 0..80 and across-direction counts in bins 81..161, ordered exactly as
/// extract_feature.
Feature forward_hardmax(const Plane& patch, const ConstrainedParams& params);

/// Versioned parameter dump (JSON text with a magic field).
void save_params(const ConstrainedParams& params, const std::string& path);
ConstrainedParams load_params(const std::string& path);

}  // namespace srmnet
