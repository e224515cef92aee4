#ifndef IMAFD_BANK_IO_HPP
#define IMAFD_BANK_IO_HPP

#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "imafd/error.hpp"
#include "imafd/idss.hpp"

namespace imafd::idss {

using Json = nlohmann::ordered_json;

inline Json to_json(const Provenance& p) { return Json{{"image_id", p.image_id}, {"h", p.h}, {"v", p.v}}; }

inline Json to_json(const PrototypeBank& bank) {
    Json protos = Json::array();
    for (const auto& p : bank.prototypes) {
        Json j;
        j["class"] = static_cast<int>(p.cls);
        j["y"] = p.latent;
        j["x"] = p.raw;
        if (p.provenance) j["provenance"] = to_json(*p.provenance);
        protos.push_back(std::move(j));
    }
    return Json{{"method", to_string(bank.method)},
                {"mode", to_string(bank.mode)},
                {"seed", bank.seed},
                {"D", bank.latent_dim},
                {"n", bank.raw_dim},
                {"L_per_class", bank.per_class},
                {"prototypes", std::move(protos)}};
}

inline PrototypeBank bank_from_json(const Json& j) {
    try {
        PrototypeBank bank;
        bank.method = parse_method(j.at("method").get<std::string>());
        bank.mode = parse_mode(j.at("mode").get<std::string>());
        bank.seed = j.at("seed").get<std::uint64_t>();
        bank.latent_dim = j.at("D").get<std::size_t>();
        bank.raw_dim = j.at("n").get<std::size_t>();
        bank.per_class = j.at("L_per_class").get<std::size_t>();
        for (const auto& pj : j.at("prototypes")) {
            Prototype p;
            const int code = pj.at("class").get<int>();
            if (code < 1 || code > 3) throw InputError("prototype class must be 1, 2 or 3");
            p.cls = static_cast<Label>(code);
            p.latent = pj.at("y").get<std::vector<float>>();
            p.raw = pj.at("x").get<std::vector<float>>();
            if (p.latent.size() != bank.latent_dim || p.raw.size() != bank.raw_dim)
                throw InputError("prototype vector length does not match bank D/n");
            if (auto it = pj.find("provenance"); it != pj.end())
                p.provenance = Provenance{it->at("image_id").get<std::string>(), it->at("h").get<std::uint32_t>(),
                                          it->at("v").get<std::uint32_t>()};
            bank.prototypes.push_back(std::move(p));
        }
        return bank;
    } catch (const Json::exception& e) {
        throw InputError(std::string("malformed prototype bank: ") + e.what());
    }
}

inline std::string serialize_bank(const PrototypeBank& bank) { return to_json(bank).dump(1) + "\n"; }

inline void save_bank(const std::filesystem::path& path, const PrototypeBank& bank) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot open '" + path.string() + "' for writing");
    out << serialize_bank(bank);
}

inline PrototypeBank load_bank(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open bank '" + path.string() + "'");
    Json j;
    try {
        j = Json::parse(in);
    } catch (const Json::exception& e) {
        throw InputError(path.string() + ": " + e.what());
    }
    return bank_from_json(j);
}

inline Json to_json(const PixelExplanation& e) {
    Json ns = Json::array();
    for (const auto& n : e.neighbors) {
        Json j{{"prototype", n.prototype},
               {"distance", n.distance},
               {"class", label_name(n.cls)},
               {"raw", n.raw}};
        j["provenance"] = n.provenance ? to_json(*n.provenance) : Json(nullptr);
        ns.push_back(std::move(j));
    }
    return Json{{"h", e.h},
                {"v", e.v},
                {"class", label_name(e.winner)},
                {"confidence", e.confidence},
                {"neighbors", std::move(ns)}};
}

} // namespace imafd::idss

#endif // IMAFD_BANK_IO_HPP
