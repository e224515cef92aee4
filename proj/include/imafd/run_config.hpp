#ifndef IMAFD_RUN_CONFIG_HPP
#define IMAFD_RUN_CONFIG_HPP

// Settings shared by the command-line tools. A JSON file may supply any
// subset of the keys; command-line flags override it.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>

#include <json.hpp>

#include "imafd/decision.hpp"
#include "imafd/error.hpp"
#include "imafd/idss.hpp"
#include "imafd/pipeline.hpp"
#include "imafd/rse.hpp"

namespace imafd {

struct RunConfig {
    std::optional<std::filesystem::path> manifest;
    double m = rse::kDefaultSigmaMultiplier;
    std::size_t warmup = rse::kDefaultWarmup;
    double epsilon = rse::kDefaultChangeThreshold;
    bool despeckle = false;
    std::size_t k = idss::kDefaultNeighbors;
    std::size_t prototypes = idss::kDefaultPrototypesPerClass;
    double confidence_threshold = idss::kDefaultConfidenceThreshold;
    double decision_threshold = decision::kDefaultDecisionThreshold;
    std::string method = "minibatch-kmeans";
    std::string mode = "nearest-real-pixel";
    std::string provider = "identity";
    std::string detect_provider = "identity";
    std::optional<std::filesystem::path> bank;
    std::uint64_t seed = 0;
    std::size_t cap = idss::kDefaultCapPerClass;
    std::size_t batch_size = 1024;
    std::size_t iterations = 0;
    std::optional<std::filesystem::path> out;

    /// Throws ConfigError for values outside their documented ranges.
    void validate() const {
        if (!(m > 0.0 && std::isfinite(m))) throw ConfigError("m must be a positive number");
        if (warmup < 1) throw ConfigError("warmup must be at least 1");
        if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ConfigError("epsilon must lie in [0, 1]");
        if (k < 1) throw ConfigError("k must be at least 1");
        if (prototypes < 1) throw ConfigError("prototypes per class must be at least 1");
        if (!(confidence_threshold >= 0.0 && confidence_threshold <= 1.0))
            throw ConfigError("confidence threshold must lie in [0, 1]");
        if (!(decision_threshold >= 0.0 && decision_threshold <= 100.0))
            throw ConfigError("decision threshold must lie in [0, 100] percent");
        if (batch_size < 1) throw ConfigError("batch size must be at least 1");
        clustering();
    }

    /// "medoid" as a mode selects k-medoids with real-pixel prototypes.
    std::pair<idss::ClusteringMethod, idss::PrototypeMode> clustering() const {
        if (mode == "medoid" || mode == "medoids") return {idss::ClusteringMethod::KMedoids, idss::PrototypeMode::NearestRealPixel};
        return {idss::parse_method(method), idss::parse_mode(mode)};
    }

    idss::BankParams bank_params() const {
        const auto [meth, mod] = clustering();
        idss::BankParams p;
        p.method = meth;
        p.mode = mod;
        p.per_class = prototypes;
        p.seed = seed;
        p.batch_size = batch_size;
        p.iterations = iterations;
        return p;
    }

    PipelineConfig pipeline() const {
        PipelineConfig c;
        c.detector.m = m;
        c.detector.warmup = warmup;
        c.epsilon = epsilon;
        c.despeckle = despeckle;
        c.k = k;
        c.confidence_threshold = confidence_threshold;
        c.decision_threshold = decision_threshold;
        c.provider = ProviderSpec::parse(provider);
        c.detect_provider = ProviderSpec::parse(detect_provider);
        return c;
    }
};

/// Reads the keys present in `j` into `c`. Relative paths resolve against
/// `base_dir`. Unknown keys are rejected so that typos do not pass silently.
inline void apply_json(RunConfig& c, const nlohmann::json& j, const std::filesystem::path& base_dir = {}) {
    if (!j.is_object()) throw ConfigError("run config must be a JSON object");
    auto path = [&](const nlohmann::json& v) {
        std::filesystem::path p(v.get<std::string>());
        return p.is_absolute() || base_dir.empty() ? p : base_dir / p;
    };
    try {
        for (const auto& [key, v] : j.items()) {
            if (key == "manifest") c.manifest = path(v);
            else if (key == "m") c.m = v.get<double>();
            else if (key == "warmup") c.warmup = v.get<std::size_t>();
            else if (key == "epsilon") c.epsilon = v.get<double>();
            else if (key == "despeckle") c.despeckle = v.get<bool>();
            else if (key == "k") c.k = v.get<std::size_t>();
            else if (key == "prototypes" || key == "L_per_class") c.prototypes = v.get<std::size_t>();
            else if (key == "confidence_threshold") c.confidence_threshold = v.get<double>();
            else if (key == "decision_threshold") c.decision_threshold = v.get<double>();
            else if (key == "method") c.method = v.get<std::string>();
            else if (key == "mode") c.mode = v.get<std::string>();
            else if (key == "provider") c.provider = v.get<std::string>();
            else if (key == "detect_provider") c.detect_provider = v.get<std::string>();
            else if (key == "bank") c.bank = path(v);
            else if (key == "seed") c.seed = v.get<std::uint64_t>();
            else if (key == "cap") c.cap = v.get<std::size_t>();
            else if (key == "batch_size") c.batch_size = v.get<std::size_t>();
            else if (key == "iterations") c.iterations = v.get<std::size_t>();
            else if (key == "out") c.out = path(v);
            else throw ConfigError("unknown run config key '" + key + "'");
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad run config value: ") + e.what());
    }
}

inline RunConfig load_run_config(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw ConfigError("cannot open run config '" + file.string() + "'");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(file.string() + ": " + e.what());
    }
    RunConfig c;
    apply_json(c, j, file.parent_path());
    return c;
}

} // namespace imafd

#endif // IMAFD_RUN_CONFIG_HPP
