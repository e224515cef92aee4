#ifndef IMAFD_FEATURES_HPP
#define IMAFD_FEATURES_HPP

#include <filesystem>
#include <string>
#include <vector>

#include "imafd/error.hpp"
#include "imafd/raster.hpp"
#include "imafd/tensor_io.hpp"

namespace imafd {

/// H×V×D latent map aligned with a source image.
struct FeatureMap {
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t depth = 0;
    std::vector<float> values;

    std::span<const float> pixel(std::size_t p) const { return {values.data() + p * depth, depth}; }
    std::span<const float> pixel(std::size_t h, std::size_t v) const { return pixel(h * width + v); }
};

inline PixelGrid grid_of(const FeatureMap& f, std::span<const std::uint8_t> valid) {
    return {f.height, f.width, f.depth, f.values, valid};
}

/// Where latent features come from: the raw bands themselves, or tensors
/// exported offline as `<image_id>.features.imtf` inside a directory.
struct ProviderSpec {
    enum class Kind { Identity, File };
    Kind kind = Kind::Identity;
    std::filesystem::path directory;

    static ProviderSpec identity() { return {}; }
    static ProviderSpec from_directory(std::filesystem::path dir) { return {Kind::File, std::move(dir)}; }
    /// "identity" or a directory path.
    static ProviderSpec parse(const std::string& text) {
        if (text.empty() || text == "identity") return identity();
        return from_directory(text);
    }
    std::string describe() const { return kind == Kind::Identity ? "identity" : directory.string(); }

    std::filesystem::path feature_path(const std::string& image_id) const {
        return directory / (image_id + ".features.imtf");
    }
};

inline FeatureMap features(const ProviderSpec& spec, const MultispectralImage& image) {
    if (spec.kind == ProviderSpec::Kind::Identity)
        return {image.height, image.width, image.bands, image.data};

    const auto path = spec.feature_path(image.id);
    if (!std::filesystem::exists(path))
        throw InputError("no feature tensor for image '" + image.id + "' (expected " + path.string() + ")");
    auto t = read_tensor(path);
    if (t.dims.size() != 3 || t.dtype() != DType::Float32)
        throw InputError(path.string() + ": feature tensor must be a rank-3 f32 tensor");
    if (t.dims[0] != image.height || t.dims[1] != image.width)
        throw InputError(path.string() + ": feature dims " + std::to_string(t.dims[0]) + "x" +
                         std::to_string(t.dims[1]) + " do not match image " + std::to_string(image.height) + "x" +
                         std::to_string(image.width));
    FeatureMap f{image.height, image.width, t.dims[2], std::get<0>(std::move(t.values))};
    for (std::size_t p = 0; p < image.pixel_count(); ++p) {
        if (!image.valid[p]) continue;
        for (float x : f.pixel(p))
            if (!std::isfinite(x)) throw InputError(path.string() + ": non-finite feature at a valid pixel");
    }
    return f;
}

} // namespace imafd

#endif // IMAFD_FEATURES_HPP
