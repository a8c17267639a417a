#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numeric>

#include "srmnet/bow_net.hpp"
#include "srmnet/rng.hpp"

using namespace srmnet;

namespace {

Plane random_patch(int side, std::uint64_t seed) {
    Plane p(side, side);
    Rng rng(seed);
    for (auto& v : p.data) v = std::floor(rng.uniform(0, 256));
    return p;
}

// Independent oracle: index of the codeword with minimum Euclidean distance.
int brute_force_nearest(const Codebook& cb, const double r[4]) {
    int best = 0;
    double best_d = 1e300;
    for (int k = 0; k < Codebook::kWords; ++k) {
        double d = 0.0;
        for (int n = 0; n < 4; ++n) {
            const double diff = r[n] - cb.word(k, n);
            d += diff * diff;
        }
        if (d < best_d) {
            best_d = d;
            best = k;
        }
    }
    return best;
}

}  // namespace

TEST_CASE("constrained parameter construction") {
    const ConstrainedParams params = build_constrained_params();
    REQUIRE(params.codebook.words.size() == 81 * 4);

    SUBCASE("codeword 40 is the origin") {
        for (int n = 0; n < 4; ++n) CHECK(params.codebook.word(40, n) == 0.0);
        CHECK(params.codebook.biases[40] == 0.0);
    }
    SUBCASE("codeword 80 is the all-positive corner") {
        for (int n = 0; n < 4; ++n) CHECK(params.codebook.word(80, n) == 4.5);
        CHECK(params.codebook.biases[80] == -40.5);
    }
    SUBCASE("every lattice point appears exactly once") {
        std::set<std::array<double, 4>> seen;
        for (int k = 0; k < 81; ++k) {
            std::array<double, 4> w{};
            for (int n = 0; n < 4; ++n) {
                w[static_cast<std::size_t>(n)] = params.codebook.word(k, n);
                CHECK((w[static_cast<std::size_t>(n)] == 0.0 || std::fabs(w[static_cast<std::size_t>(n)]) == 4.5));
            }
            seen.insert(w);
        }
        CHECK(seen.size() == 81);
    }
    SUBCASE("across bank carries the taps on its n-th row") {
        const ConvBank& bank = params.across_bank;
        REQUIRE(bank.kernel_h == 4);
        REQUIRE(bank.kernel_w == 4);
        for (int n = 0; n < 4; ++n) {
            CHECK(bank.biases[static_cast<std::size_t>(n)] == 0.0);
            for (int u = 0; u < 4; ++u) {
                for (int v = 0; v < 4; ++v) {
                    const double expected = u == n ? kResidualTaps[static_cast<std::size_t>(v)] : 0.0;
                    CHECK(bank.weights[static_cast<std::size_t>(n)][static_cast<std::size_t>(u * 4 + v)] == expected);
                }
            }
        }
    }
    SUBCASE("along bank shifts the taps column-wise") {
        const ConvBank& bank = params.along_bank;
        REQUIRE(bank.kernel_h == 1);
        REQUIRE(bank.kernel_w == 7);
        for (int n = 0; n < 4; ++n) {
            for (int v = 0; v < 7; ++v) {
                const double expected =
                    (v >= n && v < n + 4) ? kResidualTaps[static_cast<std::size_t>(v - n)] : 0.0;
                CHECK(bank.weights[static_cast<std::size_t>(n)][static_cast<std::size_t>(v)] == expected);
            }
        }
    }
}

TEST_CASE("constrained conv banks reproduce shifted residuals") {
    const ConstrainedParams params = build_constrained_params();
    const Plane patch = random_patch(16, 31);
    const ResidualMap r = residual(patch);

    const ChannelMap across = conv_bank(patch, params.across_bank);
    CHECK(across.width == 13);   // 16 - 4 + 1
    CHECK(across.height == 13);
    for (int y = 0; y < across.height; ++y) {
        for (int x = 0; x < across.width; ++x) {
            const double* fiber = across.fiber(static_cast<std::size_t>(y) * across.width + x);
            for (int n = 0; n < 4; ++n) CHECK(fiber[n] == r.at(y + n, x));
        }
    }

    const ChannelMap along = conv_bank(patch, params.along_bank);
    CHECK(along.width == 10);   // 16 - 7 + 1
    CHECK(along.height == 16);
    for (int y = 0; y < along.height; ++y) {
        for (int x = 0; x < along.width; ++x) {
            const double* fiber = along.fiber(static_cast<std::size_t>(y) * along.width + x);
            for (int n = 0; n < 4; ++n) CHECK(fiber[n] == r.at(y, x + n));
        }
    }
}

TEST_CASE("conv output is affine in the bias") {
    ConstrainedParams params = build_constrained_params();
    const Plane patch = random_patch(12, 8);
    const ChannelMap base = conv_bank(patch, params.across_bank);
    params.across_bank.biases[2] = 7.0;
    const ChannelMap shifted = conv_bank(patch, params.across_bank);
    for (std::size_t s = 0; s < base.sites(); ++s) {
        CHECK(shifted.fiber(s)[2] == base.fiber(s)[2] + 7.0);
        CHECK(shifted.fiber(s)[0] == base.fiber(s)[0]);
    }
}

TEST_CASE("matching scores realize minimum-distance quantization") {
    const Codebook cb = build_codebook(kQuantStep);

    SUBCASE("zero fiber selects the origin codeword") {
        ChannelMap fibers;
        fibers.width = 1;
        fibers.height = 1;
        fibers.channels = 4;
        fibers.data = {0.0, 0.0, 0.0, 0.0};
        const ChannelMap scores = matching_scores(fibers, cb);
        const double* m = scores.fiber(0);
        for (int k = 0; k < 81; ++k) {
            CHECK(m[k] == cb.biases[static_cast<std::size_t>(k)]);
            if (k != 40) CHECK(m[k] < m[40]);
        }
    }
    SUBCASE("argmax score equals brute-force nearest codeword") {
        Rng rng(13);
        for (int trial = 0; trial < 500; ++trial) {
            double r[4];
            for (double& v : r) v = rng.uniform(-12.0, 12.0);
            ChannelMap fibers;
            fibers.width = 1;
            fibers.height = 1;
            fibers.channels = 4;
            fibers.data = {r[0], r[1], r[2], r[3]};
            const ChannelMap scores = matching_scores(fibers, cb);
            const double* m = scores.fiber(0);
            int best = 0;
            for (int k = 1; k < 81; ++k) {
                if (m[k] > m[best]) best = k;
            }
            CHECK(best == brute_force_nearest(cb, r));
        }
    }
    SUBCASE("the identity is a property of the bias structure, not the lattice") {
        Codebook doubled = build_codebook(kQuantStep);
        for (auto& w : doubled.words) w *= 2.0;
        for (int k = 0; k < 81; ++k) {
            double norm2 = 0.0;
            for (int n = 0; n < 4; ++n) norm2 += doubled.word(k, n) * doubled.word(k, n);
            doubled.biases[static_cast<std::size_t>(k)] = -0.5 * norm2;
        }
        Rng rng(14);
        for (int trial = 0; trial < 200; ++trial) {
            double r[4];
            for (double& v : r) v = rng.uniform(-15.0, 15.0);
            ChannelMap fibers;
            fibers.width = 1;
            fibers.height = 1;
            fibers.channels = 4;
            fibers.data = {r[0], r[1], r[2], r[3]};
            const ChannelMap scores = matching_scores(fibers, doubled);
            const double* m = scores.fiber(0);
            int best = 0;
            for (int k = 1; k < 81; ++k) {
                if (m[k] > m[best]) best = k;
            }
            CHECK(best == brute_force_nearest(doubled, r));
        }
    }
    SUBCASE("channel mismatch rejected") {
        ChannelMap fibers;
        fibers.width = 1;
        fibers.height = 1;
        fibers.channels = 3;
        fibers.data = {0.0, 0.0, 0.0};
        CHECK_THROWS(matching_scores(fibers, cb));
    }
}

TEST_CASE("hardmax") {
    ChannelMap scores;
    scores.width = 2;
    scores.height = 1;
    scores.channels = 81;
    scores.data.resize(162);
    for (int k = 0; k < 81; ++k) scores.data[static_cast<std::size_t>(k)] = k;  // ascending
    for (int k = 0; k < 81; ++k) scores.data[static_cast<std::size_t>(81 + k)] = 5.0;  // all equal
    const OneHotMap oh = hardmax(scores);
    CHECK(oh.winner[0] == 80);  // unique max at the last channel
    CHECK(oh.winner[1] == 0);   // tie resolves to the lowest index
}

TEST_CASE("histogram pooling conserves sites") {
    OneHotMap oh;
    oh.width = 5;
    oh.height = 3;
    oh.winner.assign(15, 40);
    auto hist = pool_histogram(oh);
    CHECK(hist[40] == 15.0);
    CHECK(std::accumulate(hist.begin(), hist.end(), 0.0) == 15.0);
    oh.winner[3] = 7;
    hist = pool_histogram(oh);
    CHECK(hist[40] == 14.0);
    CHECK(hist[7] == 1.0);
    for (int k = 0; k < 81; ++k) {
        if (k != 7 && k != 40) CHECK(hist[static_cast<std::size_t>(k)] == 0.0);
    }
}

TEST_CASE("constrained forward pass equals the handcrafted descriptor") {
    const ConstrainedParams params = build_constrained_params();
    SUBCASE("constant patch") {
        const Feature f = forward_hardmax(Plane(16, 16, 50.0), params);
        REQUIRE(f.size() == 162);
        for (int k = 0; k < 162; ++k) {
            if (k == 40 || k == 121) {
                CHECK(f[static_cast<std::size_t>(k)] > 0.0);
            } else {
                CHECK(f[static_cast<std::size_t>(k)] == 0.0);
            }
        }
    }
    SUBCASE("random patches, exact integer counts") {
        for (const int side : {16, 33, 64}) {
            for (int trial = 0; trial < 5; ++trial) {
                const Plane patch = random_patch(side, 100 + static_cast<std::uint64_t>(side) * 10 + trial);
                CHECK(forward_hardmax(patch, params) == extract_feature(patch, false));
            }
        }
    }
}

TEST_CASE("parameter file round trip") {
    const ConstrainedParams params = build_constrained_params();
    const auto path = (std::filesystem::temp_directory_path() / "srmnet_params.json").string();
    save_params(params, path);
    const ConstrainedParams back = load_params(path);
    CHECK(back.delta == params.delta);
    CHECK(back.codebook.words == params.codebook.words);
    CHECK(back.codebook.biases == params.codebook.biases);
    CHECK(back.across_bank.weights == params.across_bank.weights);
    CHECK(back.along_bank.weights == params.along_bank.weights);
}
