#ifndef IMAFD_TENSOR_IO_HPP
#define IMAFD_TENSOR_IO_HPP

// "IMTF" tensor container.
//
//   offset  size        field
//   0       4           magic "IMTF"
//   4       2           version (u16 LE, = 1)
//   6       1           dtype (1 = f32 LE, 2 = u8)
//   7       1           ndim
//   8       4*ndim      dims (u32 LE each)
//   ...                 payload, row-major, last dimension fastest
//
// No padding, no trailing bytes. Identical tensors encode to identical bytes.

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "imafd/error.hpp"
#include "imafd/raster.hpp"

namespace imafd {

enum class DType : std::uint8_t { Float32 = 1, UInt8 = 2 };

inline constexpr std::uint16_t kTensorVersion = 1;
inline constexpr std::array<char, 4> kTensorMagic = {'I', 'M', 'T', 'F'};

class TensorFormatError : public InputError {
public:
    enum class Kind { BadMagic, UnsupportedVersion, UnsupportedDType, BadHeader, Truncated, TrailingBytes };

    TensorFormatError(Kind kind, const std::string& what) : InputError(what), kind_(kind) {}
    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

struct Tensor {
    std::vector<std::uint32_t> dims;
    std::variant<std::vector<float>, std::vector<std::uint8_t>> values;

    DType dtype() const { return values.index() == 0 ? DType::Float32 : DType::UInt8; }
    std::size_t element_count() const {
        return std::accumulate(dims.begin(), dims.end(), std::size_t{1},
                               [](std::size_t a, std::uint32_t d) { return a * d; });
    }
    const std::vector<float>& f32() const { return std::get<0>(values); }
    const std::vector<std::uint8_t>& u8() const { return std::get<1>(values); }
    bool operator==(const Tensor&) const = default;
};

namespace detail {

inline std::size_t checked_count(std::span<const std::uint32_t> dims, std::size_t payload) {
    if (dims.empty()) throw InputError("tensor must have at least one dimension");
    if (dims.size() > 255) throw InputError("tensor rank exceeds 255");
    std::size_t n = 1;
    for (auto d : dims) n *= d;
    if (n != payload)
        throw InputError("tensor payload has " + std::to_string(payload) + " elements but dims imply " +
                         std::to_string(n));
    return n;
}

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t x) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(x >> (8 * i)));
}

inline std::uint32_t get_u32(const std::uint8_t* p) {
    return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 | std::uint32_t(p[3]) << 24;
}

inline std::vector<std::uint8_t> encode_header(std::span<const std::uint32_t> dims, DType dtype) {
    std::vector<std::uint8_t> out(kTensorMagic.begin(), kTensorMagic.end());
    out.push_back(kTensorVersion & 0xff);
    out.push_back(kTensorVersion >> 8);
    out.push_back(static_cast<std::uint8_t>(dtype));
    out.push_back(static_cast<std::uint8_t>(dims.size()));
    for (auto d : dims) put_u32(out, d);
    return out;
}

} // namespace detail

inline std::vector<std::uint8_t> encode_tensor(std::span<const std::uint32_t> dims, std::span<const float> payload) {
    detail::checked_count(dims, payload.size());
    auto out = detail::encode_header(dims, DType::Float32);
    out.reserve(out.size() + 4 * payload.size());
    for (float f : payload) detail::put_u32(out, std::bit_cast<std::uint32_t>(f));
    return out;
}

inline std::vector<std::uint8_t> encode_tensor(std::span<const std::uint32_t> dims,
                                               std::span<const std::uint8_t> payload) {
    detail::checked_count(dims, payload.size());
    auto out = detail::encode_header(dims, DType::UInt8);
    out.insert(out.end(), payload.begin(), payload.end());
    return out;
}

inline std::vector<std::uint8_t> encode_tensor(const Tensor& t) {
    return std::visit([&](const auto& v) { return encode_tensor(t.dims, std::span(v)); }, t.values);
}

inline Tensor decode_tensor(std::span<const std::uint8_t> bytes) {
    using K = TensorFormatError::Kind;
    if (bytes.size() < 8) {
        if (bytes.size() >= 4 && std::memcmp(bytes.data(), kTensorMagic.data(), 4) != 0)
            throw TensorFormatError(K::BadMagic, "not an IMTF tensor (bad magic)");
        throw TensorFormatError(K::Truncated, "truncated IMTF header");
    }
    if (std::memcmp(bytes.data(), kTensorMagic.data(), 4) != 0)
        throw TensorFormatError(K::BadMagic, "not an IMTF tensor (bad magic)");
    const std::uint16_t version = std::uint16_t(bytes[4]) | std::uint16_t(bytes[5]) << 8;
    if (version != kTensorVersion)
        throw TensorFormatError(K::UnsupportedVersion, "unsupported IMTF version " + std::to_string(version));
    const std::uint8_t code = bytes[6];
    if (code != static_cast<std::uint8_t>(DType::Float32) && code != static_cast<std::uint8_t>(DType::UInt8))
        throw TensorFormatError(K::UnsupportedDType, "unsupported IMTF dtype code " + std::to_string(code));
    const std::size_t ndim = bytes[7];
    if (ndim == 0) throw TensorFormatError(K::BadHeader, "IMTF tensor declares zero dimensions");
    if (bytes.size() < 8 + 4 * ndim) throw TensorFormatError(K::Truncated, "truncated IMTF dims");

    Tensor t;
    std::size_t count = 1;
    for (std::size_t i = 0; i < ndim; ++i) {
        t.dims.push_back(detail::get_u32(bytes.data() + 8 + 4 * i));
        count *= t.dims.back();
    }
    const std::size_t elem = code == 1 ? 4 : 1;
    const std::size_t offset = 8 + 4 * ndim;
    const std::size_t have = bytes.size() - offset;
    if (have < count * elem)
        throw TensorFormatError(K::Truncated, "truncated IMTF payload: expected " + std::to_string(count * elem) +
                                                  " bytes, found " + std::to_string(have));
    if (have > count * elem)
        throw TensorFormatError(K::TrailingBytes, "IMTF file has " + std::to_string(have - count * elem) +
                                                      " trailing bytes");
    const auto* p = bytes.data() + offset;
    if (code == 1) {
        std::vector<float> v(count);
        for (std::size_t i = 0; i < count; ++i) v[i] = std::bit_cast<float>(detail::get_u32(p + 4 * i));
        t.values = std::move(v);
    } else {
        t.values = std::vector<std::uint8_t>(p, p + count);
    }
    return t;
}

inline void write_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot open '" + path.string() + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw InputError("failed writing '" + path.string() + "'");
}

inline std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open '" + path.string() + "'");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

template <typename T>
void write_tensor(const std::filesystem::path& path, std::span<const std::uint32_t> dims, std::span<const T> payload) {
    write_bytes(path, encode_tensor(dims, payload));
}

inline void write_tensor(const std::filesystem::path& path, const Tensor& t) { write_bytes(path, encode_tensor(t)); }

inline Tensor read_tensor(const std::filesystem::path& path) {
    try {
        return decode_tensor(read_bytes(path));
    } catch (const TensorFormatError& e) {
        throw TensorFormatError(e.kind(), path.string() + ": " + e.what());
    }
}

// ---- domain rasters <-> tensors ----------------------------------------

inline std::vector<std::uint32_t> dims2(std::size_t h, std::size_t w) {
    return {static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(w)};
}

inline void write_class_map(const std::filesystem::path& path, const ClassMap& map) {
    std::vector<std::uint8_t> codes(map.size());
    for (std::size_t i = 0; i < map.size(); ++i) codes[i] = static_cast<std::uint8_t>(map[i]);
    write_tensor(path, std::span<const std::uint32_t>(dims2(map.height(), map.width())),
                 std::span<const std::uint8_t>(codes));
}

inline ClassMap class_map_from_tensor(const Tensor& t) {
    if (t.dims.size() != 2 || t.dtype() != DType::UInt8)
        throw InputError("class map must be a rank-2 u8 tensor");
    ClassMap map(t.dims[0], t.dims[1]);
    const auto& codes = t.u8();
    for (std::size_t i = 0; i < codes.size(); ++i) {
        if (!is_label_code(codes[i])) throw InputError("class map holds unknown label " + std::to_string(codes[i]));
        map[i] = static_cast<Label>(codes[i]);
    }
    return map;
}

inline ClassMap read_class_map(const std::filesystem::path& path) { return class_map_from_tensor(read_tensor(path)); }

inline void write_binary_map(const std::filesystem::path& path, const BinaryMap& map) {
    write_tensor(path, std::span<const std::uint32_t>(dims2(map.height(), map.width())), map.values());
}

inline BinaryMap read_binary_map(const std::filesystem::path& path) {
    auto t = read_tensor(path);
    if (t.dims.size() != 2 || t.dtype() != DType::UInt8) throw InputError(path.string() + ": expected a rank-2 u8 mask");
    std::vector<std::uint8_t> v(t.u8());
    for (auto& b : v) b = b != 0;
    return BinaryMap(t.dims[0], t.dims[1], std::move(v));
}

/// Real-valued raster stored as f32.
template <typename T>
void write_real_map(const std::filesystem::path& path, const Raster<T>& map) {
    std::vector<float> v(map.values().begin(), map.values().end());
    write_tensor(path, std::span<const std::uint32_t>(dims2(map.height(), map.width())), std::span<const float>(v));
}

inline Raster<double> read_real_map(const std::filesystem::path& path) {
    auto t = read_tensor(path);
    if (t.dims.size() != 2 || t.dtype() != DType::Float32)
        throw InputError(path.string() + ": expected a rank-2 f32 tensor");
    return Raster<double>(t.dims[0], t.dims[1], std::vector<double>(t.f32().begin(), t.f32().end()));
}

inline void write_image(const std::filesystem::path& path, const MultispectralImage& img) {
    std::vector<std::uint32_t> dims = {static_cast<std::uint32_t>(img.height), static_cast<std::uint32_t>(img.width),
                                       static_cast<std::uint32_t>(img.bands)};
    write_tensor(path, std::span<const std::uint32_t>(dims), std::span<const float>(img.data));
}

inline void write_mask(const std::filesystem::path& path, const MultispectralImage& img) {
    write_tensor(path, std::span<const std::uint32_t>(dims2(img.height, img.width)),
                 std::span<const std::uint8_t>(img.valid));
}

/// Loads a rank-3 (H, V, n) f32 data tensor and an optional rank-2 u8 mask.
/// Without a mask every pixel is valid.
inline MultispectralImage load_image(const std::filesystem::path& data_path,
                                     const std::optional<std::filesystem::path>& mask_path, std::string timestamp,
                                     std::string id) {
    auto data = read_tensor(data_path);
    if (data.dims.size() != 3) throw InputError(data_path.string() + ": image tensor must be rank 3 (H, V, bands)");
    if (data.dtype() != DType::Float32) throw InputError(data_path.string() + ": image tensor must be f32");

    MultispectralImage img;
    img.id = std::move(id);
    img.timestamp = std::move(timestamp);
    img.height = data.dims[0];
    img.width = data.dims[1];
    img.bands = data.dims[2];
    img.data = std::get<0>(std::move(data.values));
    if (mask_path) {
        auto mask = read_tensor(*mask_path);
        if (mask.dims.size() != 2 || mask.dtype() != DType::UInt8)
            throw InputError(mask_path->string() + ": mask must be a rank-2 u8 tensor");
        if (mask.dims[0] != img.height || mask.dims[1] != img.width)
            throw InputError(mask_path->string() + ": mask dims " + std::to_string(mask.dims[0]) + "x" +
                             std::to_string(mask.dims[1]) + " do not match image " + std::to_string(img.height) +
                             "x" + std::to_string(img.width));
        img.valid = std::get<1>(std::move(mask.values));
        for (auto& b : img.valid) b = b != 0;
    } else {
        img.valid.assign(img.height * img.width, 1);
    }
    validate(img);
    return img;
}

} // namespace imafd

#endif // IMAFD_TENSOR_IO_HPP
