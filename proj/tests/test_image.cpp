#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <png.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "srmnet/image.hpp"
#include "srmnet/rng.hpp"

using namespace srmnet;

namespace {

std::filesystem::path tmp_dir() {
    auto dir = std::filesystem::temp_directory_path() / "srmnet_image_tests";
    std::filesystem::create_directories(dir);
    return dir;
}

void write_bytes(const std::filesystem::path& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

void write_rgb_png(const std::filesystem::path& path, int w, int h,
                   const std::vector<std::uint8_t>& rgb) {
    std::FILE* fp = std::fopen(path.string().c_str(), "wb");
    REQUIRE(fp != nullptr);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    REQUIRE(setjmp(png_jmpbuf(png)) == 0);
    png_init_io(png, fp);
    png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8, PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < h; ++y) {
        png_write_row(png, const_cast<png_bytep>(rgb.data() + static_cast<std::size_t>(y) * w * 3));
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
}

}  // namespace

TEST_CASE("PGM decode is the identity on raw bytes") {
    const auto path = tmp_dir() / "tiny.pgm";
    write_bytes(path, std::string("P5\n2 2\n255\n") + '\x00' + '\x80' + '\xff' + '\x40');
    const Plane p = load_image(path.string());
    CHECK(p.width == 2);
    CHECK(p.height == 2);
    CHECK(p.at(0, 0) == 0.0);
    CHECK(p.at(0, 1) == 128.0);
    CHECK(p.at(1, 0) == 255.0);
    CHECK(p.at(1, 1) == 64.0);
}

TEST_CASE("PGM header comments are skipped") {
    const auto path = tmp_dir() / "comment.pgm";
    write_bytes(path, std::string("P5\n# a comment\n1 1\n255\n") + '\x2a');
    CHECK(load_image(path.string()).at(0, 0) == 42.0);
}

TEST_CASE("PPM decoding returns the green band") {
    const auto path = tmp_dir() / "tiny.ppm";
    write_bytes(path, std::string("P6\n1 1\n255\n") + '\x0a' + '\xc8' + '\x1e');  // (10, 200, 30)
    const Plane p = load_image(path.string());
    CHECK(p.at(0, 0) == 200.0);
}

TEST_CASE("PNG decoding returns the green band") {
    const auto path = tmp_dir() / "tiny.png";
    write_rgb_png(path, 2, 1, {10, 200, 30, 255, 0, 128});
    const Plane p = load_image(path.string());
    CHECK(p.width == 2);
    CHECK(p.at(0, 0) == 200.0);
    CHECK(p.at(0, 1) == 0.0);
}

TEST_CASE("decode errors") {
    const auto truncated = tmp_dir() / "truncated.pgm";
    write_bytes(truncated, std::string("P5\n4 4\n255\n") + "ab");
    CHECK_THROWS(load_image(truncated.string()));

    const auto deep = tmp_dir() / "deep.pgm";
    write_bytes(deep, std::string("P5\n1 1\n65535\n") + "ab");
    CHECK_THROWS(load_image(deep.string()));

    const auto shallow = tmp_dir() / "shallow.pgm";
    write_bytes(shallow, std::string("P5\n1 1\n15\n") + "a");
    CHECK_THROWS(load_image(shallow.string()));

    CHECK_THROWS(load_image((tmp_dir() / "does_not_exist.pgm").string()));
}

TEST_CASE("transpose examples and involution") {
    Plane one(1, 1);
    one.at(0, 0) = 7.0;
    const Plane t1 = transpose(one);
    CHECK(t1.at(0, 0) == 7.0);

    Plane p(3, 2);  // [[1,2,3],[4,5,6]]
    for (int i = 0; i < 6; ++i) p.data[static_cast<std::size_t>(i)] = i + 1;
    const Plane t = transpose(p);
    CHECK(t.width == 2);
    CHECK(t.height == 3);
    CHECK(t.at(0, 0) == 1.0);
    CHECK(t.at(0, 1) == 4.0);
    CHECK(t.at(1, 0) == 2.0);
    CHECK(t.at(2, 1) == 6.0);

    Rng rng(7);
    Plane r(13, 9);
    for (auto& v : r.data) v = rng.uniform(0, 255);
    const Plane rt = transpose(transpose(r));
    CHECK(rt.data == r.data);
}

TEST_CASE("patch extraction grids") {
    const Plane big(256, 256, 1.0);
    CHECK(extract_patches(big, 128, 128).size() == 4);

    Plane exact(128, 128);
    Rng rng(3);
    for (auto& v : exact.data) v = std::floor(rng.uniform(0, 256));
    const auto single = extract_patches(exact, 128, 128);
    REQUIRE(single.size() == 1);
    CHECK(single[0].first.data == exact.data);
    CHECK(single[0].second.x == 0);
    CHECK(single[0].second.y == 0);

    const Plane odd(300, 300, 0.0);
    const auto nine = extract_patches(odd, 128, 64);
    REQUIRE(nine.size() == 9);
    for (int i = 0; i < 9; ++i) {
        CHECK(nine[static_cast<std::size_t>(i)].second.x == (i % 3) * 64);
        CHECK(nine[static_cast<std::size_t>(i)].second.y == (i / 3) * 64);
    }

    CHECK_THROWS(extract_patches(Plane(100, 100), 128, 128));
}

TEST_CASE("save_pgm round trip and clamping") {
    const auto path = tmp_dir() / "roundtrip.pgm";
    Plane p(9, 5);
    Rng rng(11);
    for (auto& v : p.data) v = std::floor(rng.uniform(0, 256));
    save_pgm(p, path.string());
    const Plane back = load_image(path.string());
    CHECK(back.data == p.data);

    Plane clamped(2, 1);
    clamped.at(0, 0) = 255.7;
    clamped.at(0, 1) = -3.0;
    save_pgm(clamped, path.string());
    const Plane c = load_image(path.string());
    CHECK(c.at(0, 0) == 255.0);
    CHECK(c.at(0, 1) == 0.0);
}

TEST_CASE("stored patches preserve 8-bit content") {
    Plane p(16, 16);
    Rng rng(5);
    for (auto& v : p.data) v = std::floor(rng.uniform(0, 256));
    const StoredPatch sp = StoredPatch::from_plane(p);
    CHECK(sp.to_plane().data == p.data);
}
