#ifndef IMAFD_RASTER_HPP
#define IMAFD_RASTER_HPP

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "imafd/error.hpp"

namespace imafd {

/// Dense row-major H×V grid. Row index h, column index v.
template <typename T>
class Raster {
public:
    Raster() = default;
    Raster(std::size_t height, std::size_t width, T fill = T{})
        : height_(height), width_(width), data_(height * width, fill) {}
    Raster(std::size_t height, std::size_t width, std::vector<T> data)
        : height_(height), width_(width), data_(std::move(data)) {
        if (data_.size() != height_ * width_)
            throw InputError("raster payload does not match " + std::to_string(height_) + "x" +
                             std::to_string(width_));
    }

    std::size_t height() const noexcept { return height_; }
    std::size_t width() const noexcept { return width_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool same_shape(std::size_t h, std::size_t w) const noexcept { return h == height_ && w == width_; }
    template <typename U>
    bool same_shape(const Raster<U>& other) const noexcept {
        return same_shape(other.height(), other.width());
    }

    T& operator()(std::size_t h, std::size_t v) { return data_[h * width_ + v]; }
    const T& operator()(std::size_t h, std::size_t v) const { return data_[h * width_ + v]; }
    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    std::span<T> values() noexcept { return data_; }
    std::span<const T> values() const noexcept { return data_; }

    bool operator==(const Raster&) const = default;

private:
    std::size_t height_ = 0;
    std::size_t width_ = 0;
    std::vector<T> data_;
};

enum class Label : std::uint8_t { Invalid = 0, Land = 1, Water = 2, Cloud = 3 };

inline constexpr std::array<Label, 3> kClasses = {Label::Land, Label::Water, Label::Cloud};

inline constexpr bool is_label_code(std::uint8_t code) noexcept { return code <= 3; }

inline std::string_view label_name(Label l) {
    switch (l) {
    case Label::Invalid: return "Invalid";
    case Label::Land: return "Land";
    case Label::Water: return "Water";
    case Label::Cloud: return "Cloud";
    }
    return "?";
}

inline Label parse_label(std::string_view name) {
    if (name == "Invalid") return Label::Invalid;
    if (name == "Land") return Label::Land;
    if (name == "Water") return Label::Water;
    if (name == "Cloud") return Label::Cloud;
    throw InputError("unknown class name '" + std::string(name) + "'");
}

using ClassMap = Raster<Label>;
/// Fraction of agreeing kNN neighbours, i/k.
using ConfidenceMap = Raster<double>;
/// 1 = changed / flagged, 0 = unchanged.
using BinaryMap = Raster<std::uint8_t>;
using BinaryChangeMap = BinaryMap;
/// Per-pixel similarity s; NaN where the pixel was not scored.
using SimilarityMap = Raster<double>;

/// Sentinel-2 band order; files carry no band metadata.
enum class Band : std::size_t { B1, B2, B3, B4, B5, B6, B7, B8, B8A, B9, B10, B11, B12 };
inline constexpr std::size_t kSentinel2Bands = 13;

/// H×V×n reflectance cube with validity mask.
struct MultispectralImage {
    std::string id;
    std::string timestamp;
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t bands = 0;
    std::vector<float> data;          // row-major (h, v, band)
    std::vector<std::uint8_t> valid;  // row-major (h, v), nonzero = valid

    std::size_t pixel_count() const noexcept { return height * width; }
    std::span<const float> pixel(std::size_t h, std::size_t v) const {
        return {data.data() + (h * width + v) * bands, bands};
    }
    bool is_valid(std::size_t h, std::size_t v) const { return valid[h * width + v] != 0; }
    std::size_t valid_count() const {
        std::size_t n = 0;
        for (auto b : valid) n += b != 0;
        return n;
    }
};

/// Checks the MultispectralImage invariants; throws InputError.
inline void validate(const MultispectralImage& img) {
    if (img.height == 0 || img.width == 0 || img.bands == 0)
        throw InputError("image '" + img.id + "' has an empty dimension");
    if (img.data.size() != img.height * img.width * img.bands)
        throw InputError("image '" + img.id + "' payload length does not match H*V*n");
    if (img.valid.size() != img.height * img.width)
        throw InputError("image '" + img.id + "' mask does not match H*V");
    for (std::size_t p = 0; p < img.pixel_count(); ++p) {
        if (!img.valid[p]) continue;
        for (std::size_t b = 0; b < img.bands; ++b)
            if (!std::isfinite(img.data[p * img.bands + b]))
                throw InputError("image '" + img.id + "' has a non-finite value at a valid pixel (h=" +
                                 std::to_string(p / img.width) + ", v=" + std::to_string(p % img.width) +
                                 ")");
    }
}

/// Read-only H×V×d view used by the statistics and kNN code, so raw bands
/// and latent features go through the same path.
struct PixelGrid {
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t depth = 0;
    std::span<const float> values;
    std::span<const std::uint8_t> valid;

    std::span<const float> pixel(std::size_t p) const { return values.subspan(p * depth, depth); }
    bool is_valid(std::size_t p) const { return valid[p] != 0; }
};

inline PixelGrid grid_of(const MultispectralImage& img) {
    return {img.height, img.width, img.bands, img.data, img.valid};
}

} // namespace imafd

#endif // IMAFD_RASTER_HPP
