#ifndef IMAFD_DECISION_HPP
#define IMAFD_DECISION_HPP

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "imafd/error.hpp"
#include "imafd/raster.hpp"

namespace imafd::decision {

inline constexpr double kDefaultDecisionThreshold = 1.0;  // percent of valid pixels

enum class Verdict { NoFlooding, Flooding };

inline std::string_view to_string(Verdict v) { return v == Verdict::Flooding ? "Flooding" : "NoFlooding"; }

/// Changed pixels labelled Water.
inline BinaryMap water_change_mask(const BinaryChangeMap& change, const ClassMap& classes) {
    if (!change.same_shape(classes)) throw InputError("change mask and class map differ in size");
    BinaryMap out(change.height(), change.width(), 0);
    for (std::size_t p = 0; p < out.size(); ++p) out[p] = change[p] && classes[p] == Label::Water;
    return out;
}

/// 100 * |changed & Water| / |valid|, with valid = class map not Invalid.
inline double water_change_percentage(const BinaryChangeMap& change, const ClassMap& classes) {
    if (!change.same_shape(classes)) throw InputError("change mask and class map differ in size");
    std::size_t valid = 0, water = 0;
    for (std::size_t p = 0; p < change.size(); ++p) {
        if (classes[p] == Label::Invalid) continue;
        ++valid;
        water += change[p] && classes[p] == Label::Water;
    }
    if (valid == 0) throw InputError("water change percentage undefined: zero valid pixels");
    return 100.0 * static_cast<double>(water) / static_cast<double>(valid);
}

inline Verdict flood_decision(double percentage, double threshold) {
    if (!(threshold >= 0.0 && threshold <= 100.0)) throw ConfigError("decision threshold must lie in [0, 100]");
    return percentage >= threshold ? Verdict::Flooding : Verdict::NoFlooding;
}

struct FrameRecord {
    std::string id;
    std::string timestamp;
    double new_water_percentage = 0.0;
    Verdict decision = Verdict::NoFlooding;
    BinaryMap water_change;  // changed & Water
};

struct FloodReport {
    std::vector<FrameRecord> records;
    std::optional<std::string> flood_onset;  // timestamp
    std::optional<std::string> onset_id;
    std::optional<BinaryMap> extent;

    std::size_t extent_pixels() const {
        std::size_t n = 0;
        if (extent)
            for (auto b : extent->values()) n += b != 0;
        return n;
    }
};

/// Records must be in timestamp order. The onset is the first Flooding
/// record; the extent is that frame's Water-changed mask.
inline FloodReport build_report(std::vector<FrameRecord> records) {
    FloodReport r;
    r.records = std::move(records);
    for (const auto& rec : r.records) {
        if (rec.decision != Verdict::Flooding) continue;
        r.flood_onset = rec.timestamp;
        r.onset_id = rec.id;
        r.extent = rec.water_change;
        break;
    }
    return r;
}

} // namespace imafd::decision

#endif // IMAFD_DECISION_HPP
