#include "srmnet/descriptor.hpp"

#include <cmath>
#include <stdexcept>

namespace srmnet {

ResidualMap residual(const Plane& p) {
    if (p.width < 4) throw std::invalid_argument("plane narrower than the residual filter");
    ResidualMap r;
    r.width = p.width - 3;
    r.height = p.height;
    r.data.resize(static_cast<std::size_t>(r.width) * r.height);
    for (int y = 0; y < r.height; ++y) {
        for (int x = 0; x < r.width; ++x) {
            r.at(y, x) = p.at(y, x) - 3.0 * p.at(y, x + 1) + 3.0 * p.at(y, x + 2) - p.at(y, x + 3);
        }
    }
    return r;
}

QuantizedMap quantize(const ResidualMap& r, double delta, int levels) {
    if (!(delta > 0.0)) throw std::invalid_argument("quantizer step must be positive");
    if (levels < 3 || levels % 2 == 0) throw std::invalid_argument("quantizer level count must be odd and >= 3");
    const int top = (levels - 1) / 2;
    QuantizedMap q;
    q.width = r.width;
    q.height = r.height;
    q.data.resize(r.data.size());
    for (std::size_t i = 0; i < r.data.size(); ++i) {
        // lround rounds halfway cases away from zero, keeping the quantizer
        // odd-symmetric.
        const long level = std::lround(r.data[i] / delta);
        q.data[i] = static_cast<std::int8_t>(std::clamp(level, static_cast<long>(-top), static_cast<long>(top)));
    }
    return q;
}

int encode_digits(int q0, int q1, int q2, int q3) {
    for (int d : {q0, q1, q2, q3}) {
        if (d < -1 || d > 1) throw std::invalid_argument("co-occurrence digit out of {-1,0,1}");
    }
    return (q0 + 1) + 3 * (q1 + 1) + 9 * (q2 + 1) + 27 * (q3 + 1);
}

std::array<double, kHistBins> cooccurrence_hist(const QuantizedMap& q, CoocDirection direction) {
    std::array<double, kHistBins> hist{};
    if (direction == CoocDirection::Along) {
        if (q.width < kCoocOrder) throw std::invalid_argument("quantized map too narrow for co-occurrences");
        for (int y = 0; y < q.height; ++y) {
            for (int x = 0; x + kCoocOrder <= q.width; ++x) {
                const int bin = (q.at(y, x) + 1) + 3 * (q.at(y, x + 1) + 1) + 9 * (q.at(y, x + 2) + 1) +
                                27 * (q.at(y, x + 3) + 1);
                hist[static_cast<std::size_t>(bin)] += 1.0;
            }
        }
    } else {
        if (q.height < kCoocOrder) throw std::invalid_argument("quantized map too short for co-occurrences");
        for (int y = 0; y + kCoocOrder <= q.height; ++y) {
            for (int x = 0; x < q.width; ++x) {
                const int bin = (q.at(y, x) + 1) + 3 * (q.at(y + 1, x) + 1) + 9 * (q.at(y + 2, x) + 1) +
                                27 * (q.at(y + 3, x) + 1);
                hist[static_cast<std::size_t>(bin)] += 1.0;
            }
        }
    }
    return hist;
}

Feature extract_feature(const Plane& patch, bool normalize, double delta) {
    if (patch.width < 8 || patch.height < 8) throw std::invalid_argument("patch too small for the descriptor");
    Feature feature(kFeatureDim, 0.0);
    for (int orientation = 0; orientation < 2; ++orientation) {
        const Plane oriented = orientation == 0 ? patch : transpose(patch);
        const QuantizedMap q = quantize(residual(oriented), delta);
        const auto along = cooccurrence_hist(q, CoocDirection::Along);
        const auto across = cooccurrence_hist(q, CoocDirection::Across);
        for (int k = 0; k < kHistBins; ++k) {
            feature[static_cast<std::size_t>(k)] += along[static_cast<std::size_t>(k)];
            feature[static_cast<std::size_t>(kHistBins + k)] += across[static_cast<std::size_t>(k)];
        }
    }
    if (normalize) {
        for (int block = 0; block < 2; ++block) {
            double total = 0.0;
            for (int k = 0; k < kHistBins; ++k) total += feature[static_cast<std::size_t>(block * kHistBins + k)];
            if (total > 0.0) {
                for (int k = 0; k < kHistBins; ++k) feature[static_cast<std::size_t>(block * kHistBins + k)] /= total;
            }
        }
    }
    return feature;
}

std::size_t window_count(int width, int height, CoocDirection direction) {
    const int rw = width - 3;  // residual width
    if (direction == CoocDirection::Along) {
        return static_cast<std::size_t>(height) * static_cast<std::size_t>(std::max(0, rw - 3));
    }
    return static_cast<std::size_t>(std::max(0, height - 3)) * static_cast<std::size_t>(std::max(0, rw));
}

}  // namespace srmnet
