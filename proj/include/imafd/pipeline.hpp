#ifndef IMAFD_PIPELINE_HPP
#define IMAFD_PIPELINE_HPP

// Four-stage flood detection over a time series. Stages 2-4 (change map,
// segmentation, decision) run only on frames stage 1 flags as novel.

#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "imafd/decision.hpp"
#include "imafd/features.hpp"
#include "imafd/idss.hpp"
#include "imafd/manifest.hpp"
#include "imafd/render.hpp"
#include "imafd/rse.hpp"
#include "imafd/tensor_io.hpp"

namespace imafd {

struct PipelineConfig {
    rse::DetectorParams detector;
    double epsilon = rse::kDefaultChangeThreshold;
    bool despeckle = false;
    std::size_t k = idss::kDefaultNeighbors;
    double confidence_threshold = idss::kDefaultConfidenceThreshold;
    double decision_threshold = decision::kDefaultDecisionThreshold;
    ProviderSpec provider;         // latent features for segmentation
    ProviderSpec detect_provider;  // features for stage 1; raw bands by default
};

using Segmenter = std::function<idss::Segmentation(const MultispectralImage&)>;

struct FrameResult {
    rse::FrameVerdict verdict;
    std::optional<BinaryChangeMap> change;
    std::optional<idss::Segmentation> segmentation;
};

struct PipelineResult {
    std::vector<FrameResult> frames;
    decision::FloodReport report;
    std::size_t segment_calls = 0;

    std::size_t novel_count() const {
        std::size_t n = 0;
        for (const auto& f : frames) n += f.verdict.is_novel;
        return n;
    }
};

inline nlohmann::ordered_json verdict_json(const rse::FrameVerdict& v) {
    nlohmann::ordered_json j;
    j["id"] = v.id;
    j["timestamp"] = v.timestamp;
    j["S"] = v.similarity;
    j["threshold"] = v.threshold ? nlohmann::ordered_json(*v.threshold) : nlohmann::ordered_json(nullptr);
    j["is_novel"] = v.is_novel;
    return j;
}

inline nlohmann::ordered_json report_json(const decision::FloodReport& r, double threshold) {
    nlohmann::ordered_json recs = nlohmann::ordered_json::array();
    for (const auto& rec : r.records)
        recs.push_back({{"id", rec.id},
                        {"timestamp", rec.timestamp},
                        {"new_water_percentage", rec.new_water_percentage},
                        {"decision", decision::to_string(rec.decision)}});
    nlohmann::ordered_json j;
    j["decision_threshold"] = threshold;
    j["records"] = std::move(recs);
    j["flood_onset"] = r.flood_onset ? nlohmann::ordered_json(*r.flood_onset) : nlohmann::ordered_json(nullptr);
    j["onset_id"] = r.onset_id ? nlohmann::ordered_json(*r.onset_id) : nlohmann::ordered_json(nullptr);
    j["extent_pixels"] = r.extent_pixels();
    return j;
}

/// Streams frames through the stages. When `out_dir` is set, writes
/// verdicts.jsonl, per-flagged-frame maps and PNGs, report.json, extent.imtf
/// (if a flood onset was found) and invocations.json.
class FloodPipeline {
public:
    FloodPipeline(PipelineConfig config, Segmenter segmenter, std::optional<std::filesystem::path> out_dir = {})
        : config_(std::move(config)), detector_(config_.detector), segmenter_(std::move(segmenter)),
          out_dir_(std::move(out_dir)) {
        if (out_dir_) {
            std::filesystem::create_directories(*out_dir_);
            verdict_log_.open(*out_dir_ / "verdicts.jsonl", std::ios::binary | std::ios::trunc);
            if (!verdict_log_) throw InputError("cannot write verdict log in " + out_dir_->string());
        }
    }

    /// Frames must arrive in timestamp order.
    const FrameResult& process(const MultispectralImage& image) {
        if (!result_.frames.empty() && !(result_.frames.back().verdict.timestamp < image.timestamp))
            throw InputError("frame '" + image.id + "' (" + image.timestamp + ") is not after the previous frame");
        try {
            FrameResult fr;
            if (config_.detect_provider.kind == ProviderSpec::Kind::Identity) {
                fr.verdict = detector_.process(image);
            } else {
                const auto f = features(config_.detect_provider, image);
                fr.verdict = detector_.process(grid_of(f, image.valid), image.id, image.timestamp);
            }
            if (fr.verdict.is_novel) dense_stages(image, fr);
            if (verdict_log_.is_open()) verdict_log_ << verdict_json(fr.verdict).dump() << '\n';
            result_.frames.push_back(std::move(fr));
            return result_.frames.back();
        } catch (const InputError& e) {
            throw InputError("frame '" + image.id + "': " + e.what());
        }
    }

    PipelineResult finish() {
        result_.report = decision::build_report(std::move(records_));
        if (out_dir_) {
            verdict_log_.close();
            std::ofstream(*out_dir_ / "report.json", std::ios::binary | std::ios::trunc)
                << report_json(result_.report, config_.decision_threshold).dump(1) << '\n';
            if (result_.report.extent) write_binary_map(*out_dir_ / "extent.imtf", *result_.report.extent);
            nlohmann::ordered_json inv;
            inv["frames"] = result_.frames.size();
            inv["novel_frames"] = result_.novel_count();
            inv["segment_image_calls"] = result_.segment_calls;
            std::ofstream(*out_dir_ / "invocations.json", std::ios::binary | std::ios::trunc) << inv.dump(1) << '\n';
        }
        return std::move(result_);
    }

private:
    void dense_stages(const MultispectralImage& image, FrameResult& fr) {
        const auto& smap = *fr.verdict.similarity_map;
        auto change = rse::binary_change_map(smap, config_.epsilon);
        if (config_.despeckle) change = rse::remove_isolated(change);

        ++result_.segment_calls;
        auto seg = segmenter_(image);
        if (!seg.classes.same_shape(image.height, image.width))
            throw InputError("segmentation size does not match the image");

        decision::FrameRecord rec;
        rec.id = image.id;
        rec.timestamp = image.timestamp;
        rec.water_change = decision::water_change_mask(change, seg.classes);
        rec.new_water_percentage = decision::water_change_percentage(change, seg.classes);
        rec.decision = decision::flood_decision(rec.new_water_percentage, config_.decision_threshold);

        if (out_dir_) {
            const auto base = *out_dir_ / image.id;
            write_real_map(base.string() + ".similarity.imtf", smap);
            write_binary_map(base.string() + ".change.imtf", change);
            write_class_map(base.string() + ".classes.imtf", seg.classes);
            write_real_map(base.string() + ".confidence.imtf", seg.confidence);
            write_binary_map(base.string() + ".water_change.imtf", rec.water_change);
            render::write_png(base.string() + ".classes.png", render::render_class_map(seg.classes));
            render::write_png(base.string() + ".confidence.png",
                              render::render_confidence(seg.confidence, seg.classes, config_.confidence_threshold));
            render::write_png(base.string() + ".change.png", render::render_change_overlay(rec.water_change));
        }
        records_.push_back(rec);
        fr.change = std::move(change);
        fr.segmentation = std::move(seg);
    }

    PipelineConfig config_;
    rse::NoveltyDetector detector_;
    Segmenter segmenter_;
    std::optional<std::filesystem::path> out_dir_;
    std::ofstream verdict_log_;
    std::vector<decision::FrameRecord> records_;
    PipelineResult result_;
};

inline Segmenter make_segmenter(const idss::PrototypeBank& bank, const ProviderSpec& provider, std::size_t k) {
    auto index = std::make_shared<idss::KnnIndex>(bank);
    return [index, provider, k](const MultispectralImage& img) {
        return idss::segment_features(features(provider, img), img.valid, *index, k);
    };
}

inline PipelineResult run_pipeline(const std::vector<ManifestEntry>& entries, const idss::PrototypeBank& bank,
                                   const PipelineConfig& config,
                                   const std::optional<std::filesystem::path>& out_dir = {}) {
    FloodPipeline p(config, make_segmenter(bank, config.provider, config.k), out_dir);
    for (const auto& e : entries) p.process(load_entry_image(e));
    return p.finish();
}

} // namespace imafd

#endif // IMAFD_PIPELINE_HPP
