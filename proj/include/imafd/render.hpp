#ifndef IMAFD_RENDER_HPP
#define IMAFD_RENDER_HPP

#include <array>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <png.h>

#include "imafd/error.hpp"
#include "imafd/raster.hpp"

namespace imafd::render {

struct Rgb {
    std::uint8_t r = 0, g = 0, b = 0;
    bool operator==(const Rgb&) const = default;
};

using RgbImage = Raster<Rgb>;

// green - Land, yellow - Cloud, blue - Water
inline constexpr std::array<Rgb, 4> kPalette = {Rgb{0, 0, 0}, Rgb{0, 160, 0}, Rgb{0, 0, 255}, Rgb{255, 255, 0}};
inline constexpr Rgb kBackgroundGray{128, 128, 128};
inline constexpr Rgb kChangedWater = kPalette[static_cast<std::size_t>(Label::Water)];

inline Rgb color_of(Label l) {
    const auto code = static_cast<std::size_t>(l);
    if (code >= kPalette.size()) throw InputError("cannot render unknown label " + std::to_string(code));
    return kPalette[code];
}

/// Halfway to white, rounding half up.
inline Rgb lighten(Rgb c) {
    auto half = [](std::uint8_t x) { return static_cast<std::uint8_t>((x + 255 + 1) / 2); };
    return {half(c.r), half(c.g), half(c.b)};
}

inline RgbImage render_class_map(const ClassMap& map) {
    RgbImage out(map.height(), map.width());
    for (std::size_t p = 0; p < map.size(); ++p) out[p] = color_of(map[p]);
    return out;
}

/// Full class colour where confidence >= tau, lightened below it. Invalid
/// pixels stay black.
inline RgbImage render_confidence(const ConfidenceMap& conf, const ClassMap& classes, double tau) {
    if (!(tau >= 0.0 && tau <= 1.0)) throw ConfigError("confidence threshold must lie in [0, 1]");
    if (!conf.same_shape(classes)) throw InputError("confidence and class maps differ in size");
    RgbImage out(classes.height(), classes.width());
    for (std::size_t p = 0; p < classes.size(); ++p) {
        const Rgb c = color_of(classes[p]);
        out[p] = classes[p] == Label::Invalid || conf[p] >= tau ? c : lighten(c);
    }
    return out;
}

/// Changed-water pixels blue on a gray background.
inline RgbImage render_change_overlay(const BinaryMap& water_change) {
    RgbImage out(water_change.height(), water_change.width(), kBackgroundGray);
    for (std::size_t p = 0; p < water_change.size(); ++p)
        if (water_change[p]) out[p] = kChangedWater;
    return out;
}

/// 8-bit RGB PNG, no ancillary chunks, so identical images give identical files.
inline void write_png(const std::filesystem::path& path, const RgbImage& img) {
    if (img.height() == 0 || img.width() == 0) throw InputError("cannot write an empty PNG");
    std::unique_ptr<std::FILE, int (*)(std::FILE*)> fp(std::fopen(path.string().c_str(), "wb"), &std::fclose);
    if (!fp) throw InputError("cannot open '" + path.string() + "' for writing");

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw Error("png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw Error("png_create_info_struct failed");
    }
    std::vector<png_byte> row(img.width() * 3);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw InputError("failed writing PNG '" + path.string() + "'");
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width()), static_cast<png_uint_32>(img.height()), 8,
                 PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (std::size_t h = 0; h < img.height(); ++h) {
        for (std::size_t v = 0; v < img.width(); ++v) {
            const Rgb c = img(h, v);
            row[3 * v] = c.r;
            row[3 * v + 1] = c.g;
            row[3 * v + 2] = c.b;
        }
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

/// Decodes an 8-bit RGB PNG (used to check written files).
inline RgbImage read_png(const std::filesystem::path& path) {
    std::unique_ptr<std::FILE, int (*)(std::FILE*)> fp(std::fopen(path.string().c_str(), "rb"), &std::fclose);
    if (!fp) throw InputError("cannot open '" + path.string() + "'");
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    RgbImage out;
    std::vector<png_byte> row;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw InputError("failed reading PNG '" + path.string() + "'");
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);
    if (png_get_color_type(png, info) != PNG_COLOR_TYPE_RGB || png_get_bit_depth(png, info) != 8) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw InputError("'" + path.string() + "' is not an 8-bit RGB PNG");
    }
    const auto w = png_get_image_width(png, info), h = png_get_image_height(png, info);
    out = RgbImage(h, w);
    row.resize(w * 3);
    for (png_uint_32 y = 0; y < h; ++y) {
        png_read_row(png, row.data(), nullptr);
        for (png_uint_32 x = 0; x < w; ++x) out(y, x) = {row[3 * x], row[3 * x + 1], row[3 * x + 2]};
    }
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return out;
}

} // namespace imafd::render

#endif // IMAFD_RENDER_HPP
