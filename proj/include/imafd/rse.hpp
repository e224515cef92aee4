#ifndef IMAFD_RSE_HPP
#define IMAFD_RSE_HPP

// Recursive similarity estimation over a frame sequence.
//
// Per pixel we keep the running mean vector mu and the running mean of the
// squared norm big_sigma over accepted (non-novel) frames. A new observation
// x scores
//
//     s = 1 / (1 + |x - mu|^2 + big_sigma - |mu|^2)
//
// and a frame's overall similarity S is the mean of s over its scored pixels.
// S feeds a running mean/variance; a frame is novel when S < S_bar - m*sigma.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <algorithm>
#include <stdexcept>
#include <span>
#include <string>
#include <vector>

#include "imafd/error.hpp"
#include "imafd/raster.hpp"

namespace imafd::rse {

inline constexpr double kDefaultSigmaMultiplier = 3.0;
inline constexpr double kDefaultChangeThreshold = 0.5;
inline constexpr std::size_t kDefaultWarmup = 2;

/// Similarity of observation x to a pixel history summarised by (mu, big_sigma).
/// A slightly negative variance term from rounding is clamped to zero.
template <typename X, typename M>
double pixel_similarity(std::span<const X> x, std::span<const M> mu, double big_sigma) {
    if (x.size() != mu.size()) throw std::invalid_argument("pixel_similarity: dimension mismatch");
    double dist_sq = 0.0;
    double mu_sq = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double xi = x[i];
        const double mi = mu[i];
        const double d = xi - mi;
        dist_sq += d * d;
        mu_sq += mi * mi;
    }
    if (!std::isfinite(dist_sq) || !std::isfinite(mu_sq) || !std::isfinite(big_sigma))
        throw InputError("pixel_similarity: non-finite input");
    const double variance = std::max(0.0, big_sigma - mu_sq);
    return 1.0 / (1.0 + dist_sq + variance);
}

inline double pixel_similarity(std::span<const double> x, std::span<const double> mu, double big_sigma) {
    return pixel_similarity<double, double>(x, mu, big_sigma);
}

/// Running per-pixel statistics over accepted frames.
///
/// `accepted` is the number of frames folded in (L). Pixels that were invalid
/// in some accepted frames keep their own observation count so that mu and
/// big_sigma remain exact means of the observations they did see.
struct PixelStatField {
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t depth = 0;
    std::vector<double> mu;                 // (h, v, d)
    std::vector<double> big_sigma;          // (h, v)
    std::vector<std::uint32_t> observations;  // (h, v)
    std::size_t accepted = 0;

    PixelStatField() = default;
    PixelStatField(std::size_t h, std::size_t w, std::size_t d)
        : height(h), width(w), depth(d), mu(h * w * d, 0.0), big_sigma(h * w, 0.0), observations(h * w, 0) {}

    bool empty() const noexcept { return accepted == 0; }
    std::span<const double> mean(std::size_t p) const { return {mu.data() + p * depth, depth}; }
    /// big_sigma - |mu|^2 before clamping.
    double raw_variance(std::size_t p) const {
        double mu_sq = 0.0;
        for (double m : mean(p)) mu_sq += m * m;
        return big_sigma[p] - mu_sq;
    }
    bool matches(const PixelGrid& g) const { return g.height == height && g.width == width && g.depth == depth; }
};

/// Folds one accepted frame into the per-pixel statistics.
inline void update_pixel_stats(PixelStatField& field, const PixelGrid& frame) {
    if (field.accepted == 0 && field.mu.empty()) field = PixelStatField(frame.height, frame.width, frame.depth);
    if (!field.matches(frame))
        throw InputError("frame dims " + std::to_string(frame.height) + "x" + std::to_string(frame.width) + "x" +
                         std::to_string(frame.depth) + " do not match statistics " + std::to_string(field.height) +
                         "x" + std::to_string(field.width) + "x" + std::to_string(field.depth));
    const std::size_t d = field.depth;
    for (std::size_t p = 0; p < field.height * field.width; ++p) {
        if (!frame.is_valid(p)) continue;
        const auto x = frame.pixel(p);
        const double n = ++field.observations[p];
        double* mu = field.mu.data() + p * d;
        double norm_sq = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            const double xi = x[i];
            mu[i] += (xi - mu[i]) / n;
            norm_sq += xi * xi;
        }
        field.big_sigma[p] += (norm_sq - field.big_sigma[p]) / n;
    }
    ++field.accepted;
}

inline void update_pixel_stats(PixelStatField& field, const MultispectralImage& image) {
    update_pixel_stats(field, grid_of(image));
}

/// Per-pixel similarity of a frame against the field. Pixels that are invalid
/// in the frame or have no history are NaN.
inline SimilarityMap similarity_map(const PixelGrid& frame, const PixelStatField& field) {
    if (!field.matches(frame)) throw InputError("frame dims do not match statistics");
    SimilarityMap out(frame.height, frame.width, std::numeric_limits<double>::quiet_NaN());
    for (std::size_t p = 0; p < out.size(); ++p) {
        if (!frame.is_valid(p) || field.observations[p] == 0) continue;
        out[p] = pixel_similarity(frame.pixel(p), field.mean(p), field.big_sigma[p]);
    }
    return out;
}

/// Mean of the scored (non-NaN) similarities in row-major order.
inline double mean_similarity(const SimilarityMap& map) {
    double sum = 0.0;
    std::size_t n = 0;
    for (double s : map.values()) {
        if (std::isnan(s)) continue;
        sum += s;
        ++n;
    }
    if (n == 0) throw InputError("image similarity undefined: zero valid pixels with history");
    return sum / static_cast<double>(n);
}

inline double image_similarity(const PixelGrid& frame, const PixelStatField& field) {
    if (field.empty()) throw std::invalid_argument("image_similarity: statistics are empty");
    return mean_similarity(similarity_map(frame, field));
}

inline double image_similarity(const MultispectralImage& image, const PixelStatField& field) {
    return image_similarity(grid_of(image), field);
}

/// Running mean and variance of the overall similarity over all frames seen.
struct SeriesState {
    std::size_t k = 0;
    double s_bar = 0.0;
    double sigma_sq = 0.0;

    double sigma() const { return std::sqrt(sigma_sq); }
};

inline SeriesState update_series_stats(SeriesState state, double s) {
    if (!(s > 0.0 && s <= 1.0)) throw std::invalid_argument("update_series_stats: S must lie in (0, 1]");
    state.k += 1;
    const double k = static_cast<double>(state.k);
    state.s_bar += (s - state.s_bar) / k;  // = ((k-1)/k) S_bar + S/k, exact for constant S
    const double dev = s - state.s_bar;
    state.sigma_sq = ((k - 1.0) / k) * state.sigma_sq + dev * dev / k;
    return state;
}

inline double novelty_threshold(const SeriesState& state, double m) { return state.s_bar - m * state.sigma(); }

/// Strict test S < S_bar - m*sigma against the state before this frame.
inline bool detect_novelty(double s, const SeriesState& state, double m) { return s < novelty_threshold(state, m); }

struct FrameVerdict {
    std::string id;
    std::string timestamp;
    double similarity = 1.0;             // S
    std::optional<double> threshold;     // S_bar - m*sigma; empty during warm-up
    bool is_novel = false;
    std::optional<SimilarityMap> similarity_map;
};

struct DetectorParams {
    double m = kDefaultSigmaMultiplier;
    /// Frames whose series state holds fewer than this many frames are never
    /// novel. The first frame is always a bootstrap frame.
    std::size_t warmup = kDefaultWarmup;
    bool keep_normal_maps = false;
};

/// Test-then-train: score against prior stats, update series stats with S,
/// fold the frame into the pixel stats only when it is not novel.
inline FrameVerdict process_frame(PixelStatField& field, SeriesState& state, const PixelGrid& frame,
                                  const DetectorParams& params, std::string id = {}, std::string timestamp = {}) {
    if (!(params.m > 0.0)) throw ConfigError("sigma multiplier m must be positive");
    FrameVerdict verdict;
    verdict.id = std::move(id);
    verdict.timestamp = std::move(timestamp);

    if (field.empty()) {
        update_pixel_stats(field, frame);
        state = update_series_stats(state, 1.0);
        verdict.similarity = 1.0;
        return verdict;
    }
    auto smap = similarity_map(frame, field);
    verdict.similarity = mean_similarity(smap);
    if (state.k >= std::max<std::size_t>(params.warmup, 1)) {
        verdict.threshold = novelty_threshold(state, params.m);
        verdict.is_novel = detect_novelty(verdict.similarity, state, params.m);
    }
    state = update_series_stats(state, verdict.similarity);
    if (!verdict.is_novel) update_pixel_stats(field, frame);
    if (verdict.is_novel || params.keep_normal_maps) verdict.similarity_map = std::move(smap);
    return verdict;
}

/// Stateful wrapper over process_frame for streaming use.
class NoveltyDetector {
public:
    explicit NoveltyDetector(DetectorParams params = {}) : params_(params) {}

    FrameVerdict process(const MultispectralImage& image) {
        return process(grid_of(image), image.id, image.timestamp);
    }
    FrameVerdict process(const PixelGrid& frame, std::string id, std::string timestamp) {
        return process_frame(field_, state_, frame, params_, std::move(id), std::move(timestamp));
    }

    const PixelStatField& field() const noexcept { return field_; }
    const SeriesState& series() const noexcept { return state_; }
    const DetectorParams& params() const noexcept { return params_; }

private:
    DetectorParams params_;
    PixelStatField field_;
    SeriesState state_;
};

/// Changed iff scored and s < epsilon.
inline BinaryChangeMap binary_change_map(const SimilarityMap& smap, double epsilon) {
    if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ConfigError("change threshold epsilon must lie in [0, 1]");
    BinaryChangeMap out(smap.height(), smap.width(), 0);
    for (std::size_t p = 0; p < smap.size(); ++p) out[p] = !std::isnan(smap[p]) && smap[p] < epsilon;
    return out;
}

/// Optional post-filter: clears changed pixels with fewer than
/// `min_neighbors` changed pixels in their 8-neighbourhood.
inline BinaryChangeMap remove_isolated(const BinaryChangeMap& mask, std::size_t min_neighbors = 1) {
    BinaryChangeMap out = mask;
    const auto H = static_cast<std::ptrdiff_t>(mask.height());
    const auto W = static_cast<std::ptrdiff_t>(mask.width());
    for (std::ptrdiff_t h = 0; h < H; ++h)
        for (std::ptrdiff_t v = 0; v < W; ++v) {
            if (!mask(h, v)) continue;
            std::size_t n = 0;
            for (std::ptrdiff_t dh = -1; dh <= 1; ++dh)
                for (std::ptrdiff_t dv = -1; dv <= 1; ++dv) {
                    if (dh == 0 && dv == 0) continue;
                    const auto hh = h + dh, vv = v + dv;
                    if (hh >= 0 && hh < H && vv >= 0 && vv < W) n += mask(hh, vv) != 0;
                }
            if (n < min_neighbors) out(h, v) = 0;
        }
    return out;
}

} // namespace imafd::rse

#endif // IMAFD_RSE_HPP
