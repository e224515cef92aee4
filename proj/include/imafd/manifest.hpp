#ifndef IMAFD_MANIFEST_HPP
#define IMAFD_MANIFEST_HPP

// Series manifest: a JSON array of
//   {"id": ..., "timestamp": "YYYY-MM-DD[THH:MM:SS[Z]]", "data": path,
//    "mask": path?, "label": path?}
// Relative paths resolve against the manifest's directory.

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "imafd/error.hpp"
#include "imafd/raster.hpp"
#include "imafd/tensor_io.hpp"

namespace imafd {

struct ManifestEntry {
    std::string id;
    std::string timestamp;
    std::filesystem::path data;
    std::optional<std::filesystem::path> mask;
    std::optional<std::filesystem::path> label;
};

inline bool is_iso_timestamp(const std::string& t) {
    auto digits = [&](std::size_t from, std::size_t n) {
        if (t.size() < from + n) return false;
        for (std::size_t i = from; i < from + n; ++i)
            if (!std::isdigit(static_cast<unsigned char>(t[i]))) return false;
        return true;
    };
    if (!(digits(0, 4) && t.size() >= 10 && t[4] == '-' && digits(5, 2) && t[7] == '-' && digits(8, 2))) return false;
    if (t.size() == 10) return true;
    if (!(t.size() >= 19 && t[10] == 'T' && digits(11, 2) && t[13] == ':' && digits(14, 2) && t[16] == ':' &&
          digits(17, 2)))
        return false;
    return t.size() == 19 || (t.size() == 20 && t[19] == 'Z');
}

struct Manifest {
    std::vector<ManifestEntry> entries;
    bool reordered = false;  // entries were not in timestamp order on disk
};

/// Entries are returned in timestamp order. Duplicate ids or timestamps are
/// input errors since they leave the acquisition order ambiguous.
inline Manifest parse_manifest(const nlohmann::json& j, const std::filesystem::path& base_dir) {
    if (!j.is_array()) throw InputError("manifest must be a JSON array");
    Manifest m;
    auto resolve = [&](const std::string& p) {
        std::filesystem::path path(p);
        return path.is_absolute() ? path : base_dir / path;
    };
    try {
        for (const auto& e : j) {
            ManifestEntry entry;
            entry.id = e.at("id").get<std::string>();
            entry.timestamp = e.at("timestamp").get<std::string>();
            if (!is_iso_timestamp(entry.timestamp))
                throw InputError("manifest entry '" + entry.id + "' has a malformed timestamp '" + entry.timestamp + "'");
            entry.data = resolve(e.at("data").get<std::string>());
            if (e.contains("mask") && !e["mask"].is_null()) entry.mask = resolve(e["mask"].get<std::string>());
            if (e.contains("label") && !e["label"].is_null()) entry.label = resolve(e["label"].get<std::string>());
            m.entries.push_back(std::move(entry));
        }
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("malformed manifest entry: ") + e.what());
    }
    auto by_time = [](const ManifestEntry& a, const ManifestEntry& b) { return a.timestamp < b.timestamp; };
    if (!std::is_sorted(m.entries.begin(), m.entries.end(), by_time)) {
        m.reordered = true;
        std::stable_sort(m.entries.begin(), m.entries.end(), by_time);
    }
    std::set<std::string> ids;
    for (std::size_t i = 0; i < m.entries.size(); ++i) {
        if (!ids.insert(m.entries[i].id).second) throw InputError("duplicate image id '" + m.entries[i].id + "'");
        if (i > 0 && m.entries[i].timestamp == m.entries[i - 1].timestamp)
            throw InputError("images '" + m.entries[i - 1].id + "' and '" + m.entries[i].id +
                             "' share timestamp " + m.entries[i].timestamp);
    }
    return m;
}

inline Manifest load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open manifest '" + path.string() + "'");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw InputError(path.string() + ": " + e.what());
    }
    auto m = parse_manifest(j, path.parent_path());
    if (m.reordered) std::cerr << "warning: " << path.string() << " was not in timestamp order; sorted\n";
    return m;
}

inline MultispectralImage load_entry_image(const ManifestEntry& e) {
    return load_image(e.data, e.mask, e.timestamp, e.id);
}

inline ClassMap load_entry_labels(const ManifestEntry& e, const MultispectralImage& img) {
    if (!e.label) throw InputError("manifest entry '" + e.id + "' has no label map");
    auto labels = read_class_map(*e.label);
    if (!labels.same_shape(img.height, img.width))
        throw InputError(e.label->string() + ": label dims do not match image '" + e.id + "'");
    return labels;
}

} // namespace imafd

#endif // IMAFD_MANIFEST_HPP
