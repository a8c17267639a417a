#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>

#include "srmnet/descriptor.hpp"
#include "srmnet/rng.hpp"

using namespace srmnet;

namespace {

Plane random_patch(int side, std::uint64_t seed) {
    Plane p(side, side);
    Rng rng(seed);
    for (auto& v : p.data) v = std::floor(rng.uniform(0, 256));
    return p;
}

}  // namespace

TEST_CASE("residual filter") {
    SUBCASE("constant plane gives zero residual") {
        const ResidualMap r = residual(Plane(8, 8, 42.0));
        CHECK(r.width == 5);
        CHECK(r.height == 8);
        for (const double v : r.data) CHECK(v == 0.0);
    }
    SUBCASE("third difference annihilates ramps") {
        Plane p(10, 4);
        for (int y = 0; y < 4; ++y) {
            for (int x = 0; x < 10; ++x) p.at(y, x) = 3.0 * x + 11.0;
        }
        for (const double v : residual(p).data) CHECK(v == 0.0);
    }
    SUBCASE("impulse row expands the taps") {
        Plane p(6, 1, 0.0);
        p.at(0, 2) = 1.0;
        const ResidualMap r = residual(p);
        REQUIRE(r.width == 3);
        CHECK(r.at(0, 0) == 3.0);
        CHECK(r.at(0, 1) == -3.0);
        CHECK(r.at(0, 2) == 1.0);
    }
    SUBCASE("rejects narrow planes") { CHECK_THROWS(residual(Plane(3, 5, 0.0))); }
}

TEST_CASE("scalar quantization") {
    ResidualMap r;
    r.width = 5;
    r.height = 1;
    r.data = {0.0, 5.0, -100.0, 2.25, -2.25};
    const QuantizedMap q = quantize(r);
    CHECK(q.data[0] == 0);
    CHECK(q.data[1] == 1);    // round(5/4.5) = round(1.111) = 1
    CHECK(q.data[2] == -1);   // clamped
    CHECK(q.data[3] == 1);    // halfway rounds away from zero
    CHECK(q.data[4] == -1);

    SUBCASE("odd symmetry") {
        Rng rng(21);
        ResidualMap a, b;
        a.width = b.width = 100;
        a.height = b.height = 1;
        a.data.resize(100);
        b.data.resize(100);
        for (int i = 0; i < 100; ++i) {
            a.data[static_cast<std::size_t>(i)] = rng.uniform(-20, 20);
            b.data[static_cast<std::size_t>(i)] = -a.data[static_cast<std::size_t>(i)];
        }
        const QuantizedMap qa = quantize(a), qb = quantize(b);
        for (int i = 0; i < 100; ++i) CHECK(qa.data[static_cast<std::size_t>(i)] == -qb.data[static_cast<std::size_t>(i)]);
    }
    SUBCASE("validation") {
        CHECK_THROWS(quantize(r, 0.0));
        CHECK_THROWS(quantize(r, 4.5, 4));
    }
}

TEST_CASE("digit encoding") {
    CHECK(encode_digits(0, 0, 0, 0) == 40);
    CHECK(encode_digits(-1, -1, -1, -1) == 0);
    CHECK(encode_digits(1, 1, 1, 1) == 80);
    CHECK(encode_digits(-1, 0, 1, 0) == 48);
    CHECK_THROWS(encode_digits(2, 0, 0, 0));
    CHECK_THROWS(encode_digits(0, 0, -2, 0));
}

TEST_CASE("co-occurrence histograms") {
    SUBCASE("all-zero map concentrates in bin 40") {
        QuantizedMap q;
        q.width = 6;
        q.height = 4;
        q.data.assign(24, 0);
        for (const auto dir : {CoocDirection::Along, CoocDirection::Across}) {
            const auto hist = cooccurrence_hist(q, dir);
            const double total = std::accumulate(hist.begin(), hist.end(), 0.0);
            CHECK(hist[40] == total);
            CHECK(total == (dir == CoocDirection::Along ? 4.0 * 3.0 : 1.0 * 6.0));
        }
    }
    SUBCASE("single window lands in its code bin") {
        QuantizedMap q;
        q.width = 4;
        q.height = 1;
        q.data = {-1, 0, 1, 0};
        const auto hist = cooccurrence_hist(q, CoocDirection::Along);
        CHECK(hist[48] == 1.0);
        CHECK(std::accumulate(hist.begin(), hist.end(), 0.0) == 1.0);
    }
    SUBCASE("window count totals") {
        Rng rng(4);
        QuantizedMap q;
        q.width = 17;
        q.height = 9;
        q.data.resize(17 * 9);
        for (auto& v : q.data) v = static_cast<std::int8_t>(rng.uniform_int(-1, 1));
        const auto along = cooccurrence_hist(q, CoocDirection::Along);
        const auto across = cooccurrence_hist(q, CoocDirection::Across);
        CHECK(std::accumulate(along.begin(), along.end(), 0.0) == 9.0 * (17 - 3));
        CHECK(std::accumulate(across.begin(), across.end(), 0.0) == (9 - 3) * 17.0);
    }
    SUBCASE("undersized maps rejected") {
        QuantizedMap q;
        q.width = 3;
        q.height = 2;
        q.data.assign(6, 0);
        CHECK_THROWS(cooccurrence_hist(q, CoocDirection::Along));
        CHECK_THROWS(cooccurrence_hist(q, CoocDirection::Across));
    }
}

TEST_CASE("feature extraction") {
    SUBCASE("length and block totals") {
        const Plane patch = random_patch(128, 5);
        const Feature f = extract_feature(patch, false);
        REQUIRE(f.size() == 162);
        const double along_total = std::accumulate(f.begin(), f.begin() + 81, 0.0);
        const double across_total = std::accumulate(f.begin() + 81, f.end(), 0.0);
        CHECK(along_total == 2.0 * static_cast<double>(window_count(128, 128, CoocDirection::Along)));
        CHECK(across_total == 2.0 * static_cast<double>(window_count(128, 128, CoocDirection::Across)));
        for (const double v : f) CHECK(v >= 0.0);
    }
    SUBCASE("constant patch concentrates in bins 40 and 121") {
        const Feature f = extract_feature(Plane(16, 16, 9.0), false);
        for (int k = 0; k < 162; ++k) {
            if (k == 40 || k == 121) {
                CHECK(f[static_cast<std::size_t>(k)] > 0.0);
            } else {
                CHECK(f[static_cast<std::size_t>(k)] == 0.0);
            }
        }
    }
    SUBCASE("normalized blocks sum to one") {
        const Feature f = extract_feature(random_patch(32, 6), true);
        CHECK(std::accumulate(f.begin(), f.begin() + 81, 0.0) == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(std::accumulate(f.begin() + 81, f.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("joint rescaling of input and step leaves the feature unchanged") {
        const Plane patch = random_patch(24, 7);
        Plane doubled = patch;
        for (auto& v : doubled.data) v *= 2.0;
        CHECK(extract_feature(patch, false) == extract_feature(doubled, false, 2.0 * kQuantStep));
    }
    SUBCASE("undersized patches rejected") { CHECK_THROWS(extract_feature(Plane(4, 4, 0.0), false)); }
}
