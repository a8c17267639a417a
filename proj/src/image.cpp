#include "srmnet/image.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace srmnet {

namespace {

// Reads the next header token of a PNM file, skipping whitespace and
// '#' comment lines.
std::string next_pnm_token(std::istream& in) {
    std::string tok;
    int c;
    while ((c = in.get()) != EOF) {
        if (c == '#') {
            while ((c = in.get()) != EOF && c != '\n') {
            }
            continue;
        }
        if (!std::isspace(c)) {
            tok.push_back(static_cast<char>(c));
            while ((c = in.get()) != EOF && !std::isspace(c)) tok.push_back(static_cast<char>(c));
            return tok;
        }
    }
    throw std::runtime_error("truncated PNM header");
}

int parse_pnm_int(std::istream& in, const char* what) {
    const std::string tok = next_pnm_token(in);
    try {
        std::size_t used = 0;
        const int v = std::stoi(tok, &used);
        if (used != tok.size()) throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        throw std::runtime_error(std::string("malformed PNM header field: ") + what);
    }
}

Plane load_pnm(std::ifstream& in, bool rgb, const std::string& path) {
    const int width = parse_pnm_int(in, "width");
    const int height = parse_pnm_int(in, "height");
    const int maxval = parse_pnm_int(in, "maxval");
    if (width < 1 || height < 1) throw std::runtime_error("invalid PNM dimensions in " + path);
    if (maxval != 255) {
        throw std::runtime_error("unsupported bit depth (maxval " + std::to_string(maxval) + ") in " + path);
    }
    // Exactly one whitespace byte separates the header from the raster.
    const std::size_t channels = rgb ? 3 : 1;
    const std::size_t count = static_cast<std::size_t>(width) * height * channels;
    std::vector<std::uint8_t> raw(count);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(count));
    if (static_cast<std::size_t>(in.gcount()) != count) {
        throw std::runtime_error("truncated pixel data in " + path);
    }
    Plane p(width, height);
    if (rgb) {
        for (std::size_t i = 0; i < p.size(); ++i) p.data[i] = raw[i * 3 + 1];  // green band
    } else {
        for (std::size_t i = 0; i < p.size(); ++i) p.data[i] = raw[i];
    }
    return p;
}

Plane load_png(const std::string& path) {
    std::FILE* fp = std::fopen(path.c_str(), "rb");
    if (!fp) throw std::runtime_error("cannot open image file: " + path);

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
        std::fclose(fp);
        throw std::runtime_error("libpng initialization failed");
    }

    std::vector<std::uint8_t> pixels;
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(fp);
        throw std::runtime_error("malformed PNG file: " + path);
    }

    png_init_io(png, fp);
    png_read_info(png, info);

    const png_uint_32 width = png_get_image_width(png, info);
    const png_uint_32 height = png_get_image_height(png, info);
    const int bit_depth = png_get_bit_depth(png, info);
    const int color_type = png_get_color_type(png, info);

    if (bit_depth != 8 && color_type != PNG_COLOR_TYPE_PALETTE) {
        png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(fp);
        throw std::runtime_error("unsupported bit depth (" + std::to_string(bit_depth) + "-bit) in " + path);
    }

    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    png_set_strip_alpha(png);
    png_read_update_info(png, info);

    if (png_get_bit_depth(png, info) != 8) {
        png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(fp);
        throw std::runtime_error("unsupported bit depth after expansion in " + path);
    }

    const png_uint_32 channels = png_get_channels(png, info);
    const std::size_t stride = static_cast<std::size_t>(width) * channels;
    pixels.resize(stride * height);
    rows.resize(height);
    for (png_uint_32 y = 0; y < height; ++y) rows[y] = pixels.data() + y * stride;
    png_read_image(png, rows.data());
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);

    Plane p(static_cast<int>(width), static_cast<int>(height));
    const std::size_t green = channels >= 3 ? 1 : 0;
    for (std::size_t i = 0; i < p.size(); ++i) p.data[i] = pixels[i * channels + green];
    return p;
}

}  // namespace

Plane load_image(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open image file: " + path);
    char magic[2] = {0, 0};
    in.read(magic, 2);
    if (in.gcount() != 2) throw std::runtime_error("truncated image file: " + path);
    if (magic[0] == 'P' && magic[1] == '5') return load_pnm(in, false, path);
    if (magic[0] == 'P' && magic[1] == '6') return load_pnm(in, true, path);
    if (magic[0] == '\x89' && magic[1] == 'P') {
        in.close();
        return load_png(path);
    }
    throw std::runtime_error("unrecognized image format in " + path);
}

void save_pgm(const Plane& p, const std::string& path) {
    if (p.width < 1 || p.height < 1) throw std::invalid_argument("cannot save empty plane");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write image file: " + path);
    out << "P5\n" << p.width << " " << p.height << "\n255\n";
    std::vector<std::uint8_t> raw(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double v = std::lround(p.data[i]);
        raw[i] = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
    }
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!out) throw std::runtime_error("failed writing image file: " + path);
}

Plane transpose(const Plane& p) {
    Plane out(p.height, p.width);
    for (int y = 0; y < p.height; ++y) {
        for (int x = 0; x < p.width; ++x) out.at(x, y) = p.at(y, x);
    }
    return out;
}

std::vector<std::pair<Plane, PatchOrigin>> extract_patches(const Plane& p, int size, int stride) {
    if (size < 1 || size > std::min(p.width, p.height)) {
        throw std::invalid_argument("patch size exceeds plane dimensions");
    }
    if (stride < 1) throw std::invalid_argument("stride must be positive");
    std::vector<std::pair<Plane, PatchOrigin>> patches;
    for (int oy = 0; oy + size <= p.height; oy += stride) {
        for (int ox = 0; ox + size <= p.width; ox += stride) {
            Plane patch(size, size);
            for (int y = 0; y < size; ++y) {
                for (int x = 0; x < size; ++x) patch.at(y, x) = p.at(oy + y, ox + x);
            }
            patches.emplace_back(std::move(patch), PatchOrigin{ox, oy});
        }
    }
    return patches;
}

Plane quantize_to_8bit(const Plane& p) {
    Plane out(p.width, p.height);
    for (std::size_t i = 0; i < p.size(); ++i) {
        out.data[i] = std::clamp(static_cast<double>(std::lround(p.data[i])), 0.0, 255.0);
    }
    return out;
}

StoredPatch StoredPatch::from_plane(const Plane& p) {
    StoredPatch sp;
    sp.side = p.width;
    sp.pix.resize(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double v = std::lround(p.data[i]);
        sp.pix[i] = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
    }
    return sp;
}

Plane StoredPatch::to_plane() const {
    Plane p(side, side);
    for (std::size_t i = 0; i < p.size(); ++i) p.data[i] = pix[i];
    return p;
}

}  // namespace srmnet
