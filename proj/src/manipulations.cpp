#include "srmnet/manipulations.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "srmnet/rng.hpp"

namespace srmnet {

namespace {

int clamp_index(int i, int n) { return std::clamp(i, 0, n - 1); }

double clamp_255(double v) { return std::clamp(v, 0.0, 255.0); }

}  // namespace

std::string to_string(ManipulationKind kind) {
    switch (kind) {
        case ManipulationKind::Median: return "median";
        case ManipulationKind::Blur: return "blur";
        case ManipulationKind::Noise: return "noise";
        case ManipulationKind::Resize: return "resize";
        case ManipulationKind::Jpeg: return "jpeg";
    }
    throw std::logic_error("unreachable");
}

ManipulationKind manipulation_kind_from_string(const std::string& name) {
    if (name == "median") return ManipulationKind::Median;
    if (name == "blur") return ManipulationKind::Blur;
    if (name == "noise") return ManipulationKind::Noise;
    if (name == "resize") return ManipulationKind::Resize;
    if (name == "jpeg") return ManipulationKind::Jpeg;
    throw std::invalid_argument("unknown manipulation kind: " + name);
}

std::string ManipulationSpec::label() const {
    std::ostringstream out;
    out << to_string(kind) << ":";
    if (kind == ManipulationKind::Median || kind == ManipulationKind::Jpeg) {
        out << static_cast<int>(parameter);
    } else {
        out << parameter;
    }
    return out.str();
}

std::vector<ManipulationSpec> manipulation_grid() {
    std::vector<ManipulationSpec> grid;
    for (double k : {7.0, 5.0, 3.0}) grid.push_back({ManipulationKind::Median, k, 0});
    for (double s : {1.1, 0.75, 0.5}) grid.push_back({ManipulationKind::Blur, s, 0});
    for (double s : {2.0, 0.5, 0.25}) grid.push_back({ManipulationKind::Noise, s, 0});
    for (double s : {1.5, 1.125, 1.01}) grid.push_back({ManipulationKind::Resize, s, 0});
    for (double q : {70.0, 80.0, 90.0}) grid.push_back({ManipulationKind::Jpeg, q, 0});
    return grid;
}

Plane median_filter(const Plane& p, int k) {
    if (k < 3 || k % 2 == 0) throw std::invalid_argument("median kernel side must be odd and >= 3");
    if (p.width < 1 || p.height < 1) throw std::invalid_argument("empty plane");
    const int r = k / 2;
    Plane out(p.width, p.height);
    std::vector<double> window(static_cast<std::size_t>(k) * k);
    for (int y = 0; y < p.height; ++y) {
        for (int x = 0; x < p.width; ++x) {
            std::size_t n = 0;
            for (int dy = -r; dy <= r; ++dy) {
                const int sy = clamp_index(y + dy, p.height);
                for (int dx = -r; dx <= r; ++dx) {
                    window[n++] = p.at(sy, clamp_index(x + dx, p.width));
                }
            }
            auto mid = window.begin() + static_cast<std::ptrdiff_t>(n / 2);
            std::nth_element(window.begin(), mid, window.begin() + static_cast<std::ptrdiff_t>(n));
            out.at(y, x) = *mid;
        }
    }
    return out;
}

Plane gaussian_blur(const Plane& p, double sigma) {
    if (!(sigma > 0.0)) throw std::invalid_argument("blur sigma must be positive");
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> taps(static_cast<std::size_t>(2 * radius + 1));
    double total = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        const double w = std::exp(-0.5 * (i * i) / (sigma * sigma));
        taps[static_cast<std::size_t>(i + radius)] = w;
        total += w;
    }
    for (double& w : taps) w /= total;

    // Horizontal pass, then vertical.
    Plane tmp(p.width, p.height);
    for (int y = 0; y < p.height; ++y) {
        for (int x = 0; x < p.width; ++x) {
            double acc = 0.0;
            for (int i = -radius; i <= radius; ++i) {
                acc += taps[static_cast<std::size_t>(i + radius)] * p.at(y, clamp_index(x + i, p.width));
            }
            tmp.at(y, x) = acc;
        }
    }
    Plane out(p.width, p.height);
    for (int y = 0; y < p.height; ++y) {
        for (int x = 0; x < p.width; ++x) {
            double acc = 0.0;
            for (int i = -radius; i <= radius; ++i) {
                acc += taps[static_cast<std::size_t>(i + radius)] * tmp.at(clamp_index(y + i, p.height), x);
            }
            out.at(y, x) = clamp_255(acc);
        }
    }
    return out;
}

Plane add_awgn(const Plane& p, double sigma, std::uint64_t seed) {
    if (sigma < 0.0) throw std::invalid_argument("noise sigma must be nonnegative");
    Plane out(p.width, p.height);
    if (sigma == 0.0) {
        out.data = p.data;
        return out;
    }
    Rng rng(seed);
    for (std::size_t i = 0; i < p.size(); ++i) {
        out.data[i] = clamp_255(p.data[i] + sigma * rng.gaussian());
    }
    return out;
}

namespace {

// Catmull-Rom cubic (a = -0.5).
double cubic_weight(double t) {
    t = std::fabs(t);
    if (t <= 1.0) return 1.5 * t * t * t - 2.5 * t * t + 1.0;
    if (t < 2.0) return -0.5 * t * t * t + 2.5 * t * t - 4.0 * t + 2.0;
    return 0.0;
}

struct ResampleTap {
    int base;                      // leftmost source index before clamping
    std::array<double, 4> weight;  // weights for base .. base+3
};

std::vector<ResampleTap> cubic_taps(int src_n, int dst_n, double scale) {
    std::vector<ResampleTap> taps(static_cast<std::size_t>(dst_n));
    for (int d = 0; d < dst_n; ++d) {
        // Pixel-center mapping: the output grid samples the source at
        // (d + 0.5)/scale - 0.5, which leaves the grid unchanged at scale 1.
        const double src = (d + 0.5) / scale - 0.5;
        const int floor_src = static_cast<int>(std::floor(src));
        const double frac = src - floor_src;
        ResampleTap tap;
        tap.base = floor_src - 1;
        for (int i = 0; i < 4; ++i) tap.weight[static_cast<std::size_t>(i)] = cubic_weight(frac - (i - 1));
        taps[static_cast<std::size_t>(d)] = tap;
        (void)src_n;
    }
    return taps;
}

}  // namespace

Plane resize(const Plane& p, double scale) {
    if (!(scale > 0.0)) throw std::invalid_argument("resize scale must be positive");
    const int out_w = static_cast<int>(std::lround(p.width * scale));
    const int out_h = static_cast<int>(std::lround(p.height * scale));
    if (out_w < 1 || out_h < 1) throw std::invalid_argument("degenerate resize output size");

    const auto col_taps = cubic_taps(p.width, out_w, scale);
    const auto row_taps = cubic_taps(p.height, out_h, scale);

    Plane tmp(out_w, p.height);
    for (int y = 0; y < p.height; ++y) {
        for (int x = 0; x < out_w; ++x) {
            const auto& tap = col_taps[static_cast<std::size_t>(x)];
            double acc = 0.0;
            for (int i = 0; i < 4; ++i) {
                acc += tap.weight[static_cast<std::size_t>(i)] * p.at(y, clamp_index(tap.base + i, p.width));
            }
            tmp.at(y, x) = acc;
        }
    }
    Plane out(out_w, out_h);
    for (int y = 0; y < out_h; ++y) {
        const auto& tap = row_taps[static_cast<std::size_t>(y)];
        for (int x = 0; x < out_w; ++x) {
            double acc = 0.0;
            for (int i = 0; i < 4; ++i) {
                acc += tap.weight[static_cast<std::size_t>(i)] * tmp.at(clamp_index(tap.base + i, p.height), x);
            }
            out.at(y, x) = clamp_255(acc);
        }
    }
    return out;
}

namespace {

// Baseline luminance quantization table, raster order.
constexpr std::array<int, 64> kBaseLumaTable = {
    16, 11, 10, 16, 24,  40,  51,  61,   //
    12, 12, 14, 19, 26,  58,  60,  55,   //
    14, 13, 16, 24, 40,  57,  69,  56,   //
    14, 17, 22, 29, 51,  87,  80,  62,   //
    18, 22, 37, 56, 68,  109, 103, 77,   //
    24, 35, 55, 64, 81,  104, 113, 92,   //
    49, 64, 78, 87, 103, 121, 120, 101,  //
    72, 92, 95, 98, 112, 100, 103, 99,
};

// Orthonormal 8-point DCT-II matrix; dct[u][x].
const std::array<std::array<double, 8>, 8>& dct_matrix() {
    static const auto m = [] {
        std::array<std::array<double, 8>, 8> a{};
        for (int u = 0; u < 8; ++u) {
            const double c = u == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0);
            for (int x = 0; x < 8; ++x) {
                a[static_cast<std::size_t>(u)][static_cast<std::size_t>(x)] =
                    c * std::cos((2 * x + 1) * u * M_PI / 16.0);
            }
        }
        return a;
    }();
    return m;
}

}  // namespace

std::vector<int> jpeg_quant_table(int quality) {
    if (quality < 1 || quality > 100) throw std::invalid_argument("JPEG quality must be in [1, 100]");
    const double scale = quality < 50 ? 5000.0 / quality : 200.0 - 2.0 * quality;
    std::vector<int> table(64);
    for (int i = 0; i < 64; ++i) {
        const auto scaled = std::lround(kBaseLumaTable[static_cast<std::size_t>(i)] * scale / 100.0);
        table[static_cast<std::size_t>(i)] = std::max(1L, scaled);
    }
    return table;
}

Plane jpeg_compress(const Plane& p, int quality) {
    const std::vector<int> table = jpeg_quant_table(quality);
    const auto& dct = dct_matrix();

    const int pw = (p.width + 7) / 8 * 8;
    const int ph = (p.height + 7) / 8 * 8;
    Plane padded(pw, ph);
    for (int y = 0; y < ph; ++y) {
        for (int x = 0; x < pw; ++x) {
            padded.at(y, x) = p.at(clamp_index(y, p.height), clamp_index(x, p.width));
        }
    }

    double block[8][8], coef[8][8], tmp[8][8];
    for (int by = 0; by < ph; by += 8) {
        for (int bx = 0; bx < pw; bx += 8) {
            for (int y = 0; y < 8; ++y) {
                for (int x = 0; x < 8; ++x) block[y][x] = padded.at(by + y, bx + x) - 128.0;
            }
            // coef = D * block * D^T
            for (int u = 0; u < 8; ++u) {
                for (int x = 0; x < 8; ++x) {
                    double acc = 0.0;
                    for (int y = 0; y < 8; ++y) acc += dct[static_cast<std::size_t>(u)][static_cast<std::size_t>(y)] * block[y][x];
                    tmp[u][x] = acc;
                }
            }
            for (int u = 0; u < 8; ++u) {
                for (int v = 0; v < 8; ++v) {
                    double acc = 0.0;
                    for (int x = 0; x < 8; ++x) acc += tmp[u][x] * dct[static_cast<std::size_t>(v)][static_cast<std::size_t>(x)];
                    const int q = table[static_cast<std::size_t>(u * 8 + v)];
                    coef[u][v] = static_cast<double>(std::lround(acc / q)) * q;
                }
            }
            // block = D^T * coef * D
            for (int y = 0; y < 8; ++y) {
                for (int v = 0; v < 8; ++v) {
                    double acc = 0.0;
                    for (int u = 0; u < 8; ++u) acc += dct[static_cast<std::size_t>(u)][static_cast<std::size_t>(y)] * coef[u][v];
                    tmp[y][v] = acc;
                }
            }
            for (int y = 0; y < 8; ++y) {
                for (int x = 0; x < 8; ++x) {
                    double acc = 0.0;
                    for (int v = 0; v < 8; ++v) acc += tmp[y][v] * dct[static_cast<std::size_t>(v)][static_cast<std::size_t>(x)];
                    padded.at(by + y, bx + x) = clamp_255(acc + 128.0);
                }
            }
        }
    }

    Plane out(p.width, p.height);
    for (int y = 0; y < p.height; ++y) {
        for (int x = 0; x < p.width; ++x) out.at(y, x) = padded.at(y, x);
    }
    return out;
}

Plane apply_manipulation(const Plane& p, const ManipulationSpec& spec) {
    switch (spec.kind) {
        case ManipulationKind::Median: return median_filter(p, static_cast<int>(spec.parameter));
        case ManipulationKind::Blur: return gaussian_blur(p, spec.parameter);
        case ManipulationKind::Noise: return add_awgn(p, spec.parameter, spec.seed);
        case ManipulationKind::Resize: return resize(p, spec.parameter);
        case ManipulationKind::Jpeg: return jpeg_compress(p, static_cast<int>(spec.parameter));
    }
    throw std::logic_error("unreachable");
}

}  // namespace srmnet
