#include "srmnet/bow_net.hpp"

#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace srmnet {

ConvBank build_across_bank(double tap_scale) {
    ConvBank bank;
    bank.kernel_h = 4;
    bank.kernel_w = 4;
    bank.weights.assign(4, std::vector<double>(16, 0.0));
    bank.biases.assign(4, 0.0);
    for (int n = 0; n < 4; ++n) {
        for (int c = 0; c < 4; ++c) {
            bank.weights[static_cast<std::size_t>(n)][static_cast<std::size_t>(n * 4 + c)] =
                tap_scale * kResidualTaps[static_cast<std::size_t>(c)];
        }
    }
    return bank;
}

ConvBank build_along_bank(double tap_scale) {
    ConvBank bank;
    bank.kernel_h = 1;
    bank.kernel_w = 7;
    bank.weights.assign(4, std::vector<double>(7, 0.0));
    bank.biases.assign(4, 0.0);
    for (int n = 0; n < 4; ++n) {
        for (int c = 0; c < 4; ++c) {
            bank.weights[static_cast<std::size_t>(n)][static_cast<std::size_t>(n + c)] =
                tap_scale * kResidualTaps[static_cast<std::size_t>(c)];
        }
    }
    return bank;
}

Codebook build_codebook(double delta) {
    if (!(delta > 0.0)) throw std::invalid_argument("codebook delta must be positive");
    Codebook cb;
    cb.words.resize(static_cast<std::size_t>(Codebook::kWords) * Codebook::kDim);
    cb.biases.resize(Codebook::kWords);
    for (int k = 0; k < Codebook::kWords; ++k) {
        double norm2 = 0.0;
        int rest = k;
        for (int n = 0; n < Codebook::kDim; ++n) {
            const int digit = rest % 3 - 1;
            rest /= 3;
            const double w = delta * digit;
            cb.word(k, n) = w;
            norm2 += w * w;
        }
        cb.biases[static_cast<std::size_t>(k)] = -0.5 * norm2;
    }
    return cb;
}

ConstrainedParams build_constrained_params(double delta) {
    ConstrainedParams params;
    params.across_bank = build_across_bank();
    params.along_bank = build_along_bank();
    params.codebook = build_codebook(delta);
    params.delta = delta;
    return params;
}

ChannelMap conv_bank(const Plane& p, const ConvBank& bank) {
    if (bank.filters() < 1) throw std::invalid_argument("empty convolution bank");
    if (p.width < bank.kernel_w || p.height < bank.kernel_h) {
        throw std::invalid_argument("plane smaller than convolution kernel");
    }
    ChannelMap out;
    out.width = p.width - bank.kernel_w + 1;
    out.height = p.height - bank.kernel_h + 1;
    out.channels = bank.filters();
    out.data.resize(out.sites() * out.channels);
    for (int y = 0; y < out.height; ++y) {
        for (int x = 0; x < out.width; ++x) {
            double* fiber = out.fiber(static_cast<std::size_t>(y) * out.width + x);
            for (int n = 0; n < out.channels; ++n) {
                const auto& kernel = bank.weights[static_cast<std::size_t>(n)];
                double acc = bank.biases[static_cast<std::size_t>(n)];
                for (int u = 0; u < bank.kernel_h; ++u) {
                    const double* row = &p.data[static_cast<std::size_t>(y + u) * p.width + x];
                    const double* krow = &kernel[static_cast<std::size_t>(u) * bank.kernel_w];
                    for (int v = 0; v < bank.kernel_w; ++v) acc += krow[v] * row[v];
                }
                fiber[n] = acc;
            }
        }
    }
    return out;
}

ChannelMap matching_scores(const ChannelMap& fibers, const Codebook& cb) {
    if (fibers.channels != Codebook::kDim) throw std::invalid_argument("matching layer expects 4 input channels");
    ChannelMap scores;
    scores.width = fibers.width;
    scores.height = fibers.height;
    scores.channels = Codebook::kWords;
    scores.data.resize(scores.sites() * scores.channels);
    for (std::size_t s = 0; s < fibers.sites(); ++s) {
        const double* r = fibers.fiber(s);
        double* m = scores.fiber(s);
        for (int k = 0; k < Codebook::kWords; ++k) {
            m[k] = cb.biases[static_cast<std::size_t>(k)] + r[0] * cb.word(k, 0) + r[1] * cb.word(k, 1) +
                   r[2] * cb.word(k, 2) + r[3] * cb.word(k, 3);
        }
    }
    return scores;
}

OneHotMap hardmax(const ChannelMap& scores) {
    if (scores.channels != kHistBins) throw std::invalid_argument("hardmax expects 81 channels");
    OneHotMap out;
    out.width = scores.width;
    out.height = scores.height;
    out.winner.resize(scores.sites());
    for (std::size_t s = 0; s < scores.sites(); ++s) {
        const double* m = scores.fiber(s);
        int best = 0;
        for (int k = 1; k < kHistBins; ++k) {
            if (m[k] > m[best]) best = k;
        }
        out.winner[s] = static_cast<std::uint8_t>(best);
    }
    return out;
}

std::array<double, kHistBins> pool_histogram(const OneHotMap& onehot) {
    std::array<double, kHistBins> hist{};
    for (const std::uint8_t k : onehot.winner) hist[k] += 1.0;
    return hist;
}

Feature forward_hardmax(const Plane& patch, const ConstrainedParams& params) {
    if (patch.width < 8 || patch.height < 8) throw std::invalid_argument("patch too small for the network");
    Feature feature(kFeatureDim, 0.0);
    for (int orientation = 0; orientation < 2; ++orientation) {
        const Plane oriented = orientation == 0 ? patch : transpose(patch);
        for (int half = 0; half < 2; ++half) {
            const ConvBank& bank = half == 0 ? params.along_bank : params.across_bank;
            const auto hist = pool_histogram(hardmax(matching_scores(conv_bank(oriented, bank), params.codebook)));
            const int offset = half == 0 ? 0 : kHistBins;
            for (int k = 0; k < kHistBins; ++k) feature[static_cast<std::size_t>(offset + k)] += hist[static_cast<std::size_t>(k)];
        }
    }
    return feature;
}

namespace {

nlohmann::json bank_to_json(const ConvBank& bank) {
    return {{"kernel_h", bank.kernel_h},
            {"kernel_w", bank.kernel_w},
            {"weights", bank.weights},
            {"biases", bank.biases}};
}

ConvBank bank_from_json(const nlohmann::json& j) {
    ConvBank bank;
    bank.kernel_h = j.at("kernel_h").get<int>();
    bank.kernel_w = j.at("kernel_w").get<int>();
    bank.weights = j.at("weights").get<std::vector<std::vector<double>>>();
    bank.biases = j.at("biases").get<std::vector<double>>();
    for (const auto& kernel : bank.weights) {
        if (static_cast<int>(kernel.size()) != bank.kernel_h * bank.kernel_w) {
            throw std::runtime_error("parameter file: kernel size mismatch");
        }
    }
    if (bank.biases.size() != bank.weights.size()) throw std::runtime_error("parameter file: bias count mismatch");
    return bank;
}

}  // namespace

void save_params(const ConstrainedParams& params, const std::string& path) {
    nlohmann::json j{
        {"magic", "srmnet-params"},
        {"version", 1},
        {"delta", params.delta},
        {"layer_order", {"conv_bank", "matching_scores", "hardmax", "pool"}},
        {"along_bank", bank_to_json(params.along_bank)},
        {"across_bank", bank_to_json(params.across_bank)},
        {"codebook", {{"words", params.codebook.words}, {"biases", params.codebook.biases}}},
    };
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write parameter file: " + path);
    out << j.dump(2) << "\n";
}

ConstrainedParams load_params(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open parameter file: " + path);
    nlohmann::json j;
    in >> j;
    if (j.value("magic", "") != std::string("srmnet-params")) {
        throw std::runtime_error("not a parameter file: " + path);
    }
    ConstrainedParams params;
    params.delta = j.at("delta").get<double>();
    params.along_bank = bank_from_json(j.at("along_bank"));
    params.across_bank = bank_from_json(j.at("across_bank"));
    params.codebook.words = j.at("codebook").at("words").get<std::vector<double>>();
    params.codebook.biases = j.at("codebook").at("biases").get<std::vector<double>>();
    if (params.codebook.words.size() != Codebook::kWords * Codebook::kDim ||
        params.codebook.biases.size() != Codebook::kWords) {
        throw std::runtime_error("parameter file: codebook shape mismatch");
    }
    return params;
}

}  // namespace srmnet
