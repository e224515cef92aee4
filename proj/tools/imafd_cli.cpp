// imafd: command-line front end.
//
//   imafd detect      --manifest series.json [--m 3] [--out dir]
//   imafd change-map  --manifest series.json --out dir [--epsilon 0.5]
//   imafd train-bank  --manifest labeled.json --out bank.json [--method ...]
//   imafd segment     --manifest series.json --bank bank.json --out dir
//   imafd explain     --manifest series.json --bank bank.json --id ID --h H --v V
//   imafd pipeline    --manifest series.json --bank bank.json --out dir
//   imafd eval        --mode segmentation|anomaly|change --pred ... --gt ...
//   imafd render      --input map.imtf --kind classes|confidence|change --out map.png
//
// Exit codes: 0 success, 2 input error, 3 configuration error, 1 otherwise.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "imafd/imafd.hpp"

namespace fs = std::filesystem;
using namespace imafd;

namespace {

/// Flags as given on the command line; unset ones fall back to --config.
struct Flags {
    std::optional<std::string> config;
    std::optional<std::string> manifest;
    std::optional<double> m;
    std::optional<std::size_t> warmup;
    std::optional<double> epsilon;
    bool despeckle = false;
    std::optional<std::size_t> k;
    std::optional<std::size_t> prototypes;
    std::optional<double> confidence_threshold;
    std::optional<double> decision_threshold;
    std::optional<std::string> method;
    std::optional<std::string> mode;
    std::optional<std::string> provider;
    std::optional<std::string> detect_provider;
    std::optional<std::string> bank;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> cap;
    std::optional<std::size_t> batch_size;
    std::optional<std::size_t> iterations;
    std::optional<std::string> out;

    // command specific
    bool all_frames = false;
    std::vector<std::string> ids;
    std::optional<std::size_t> h, v;
    std::string eval_mode;
    std::vector<std::string> pred, gt;
    std::string name = "run";
    std::string input, kind = "classes", classes;
};

RunConfig resolve(const Flags& f) {
    RunConfig c = f.config ? load_run_config(*f.config) : RunConfig{};
    if (f.manifest) c.manifest = *f.manifest;
    if (f.m) c.m = *f.m;
    if (f.warmup) c.warmup = *f.warmup;
    if (f.epsilon) c.epsilon = *f.epsilon;
    if (f.despeckle) c.despeckle = true;
    if (f.k) c.k = *f.k;
    if (f.prototypes) c.prototypes = *f.prototypes;
    if (f.confidence_threshold) c.confidence_threshold = *f.confidence_threshold;
    if (f.decision_threshold) c.decision_threshold = *f.decision_threshold;
    if (f.method) c.method = *f.method;
    if (f.mode) c.mode = *f.mode;
    if (f.provider) c.provider = *f.provider;
    if (f.detect_provider) c.detect_provider = *f.detect_provider;
    if (f.bank) c.bank = *f.bank;
    if (f.seed) c.seed = *f.seed;
    if (f.cap) c.cap = *f.cap;
    if (f.batch_size) c.batch_size = *f.batch_size;
    if (f.iterations) c.iterations = *f.iterations;
    if (f.out) c.out = *f.out;
    c.validate();
    return c;
}

const fs::path& need(const std::optional<fs::path>& p, const char* what) {
    if (!p) throw ConfigError(std::string("missing ") + what);
    return *p;
}

std::vector<ManifestEntry> selected(const Manifest& m, const std::vector<std::string>& ids) {
    if (ids.empty()) return m.entries;
    std::vector<ManifestEntry> out;
    for (const auto& id : ids) {
        auto it = std::ranges::find(m.entries, id, &ManifestEntry::id);
        if (it == m.entries.end()) throw InputError("manifest has no image '" + id + "'");
        out.push_back(*it);
    }
    return out;
}

rse::FrameVerdict detect_frame(rse::NoveltyDetector& det, const ProviderSpec& provider, const MultispectralImage& img) {
    if (provider.kind == ProviderSpec::Kind::Identity) return det.process(img);
    const auto f = features(provider, img);
    return det.process(grid_of(f, img.valid), img.id, img.timestamp);
}

int cmd_detect(const Flags& f, bool write_maps) {
    const auto c = resolve(f);
    const auto manifest = load_manifest(need(c.manifest, "--manifest"));
    rse::DetectorParams params{c.m, c.warmup, write_maps && f.all_frames};
    rse::NoveltyDetector det(params);
    const auto provider = ProviderSpec::parse(c.detect_provider);

    std::ofstream file;
    if (write_maps) need(c.out, "--out");
    if (c.out) {
        fs::create_directories(*c.out);
        file.open(*c.out / "verdicts.jsonl", std::ios::binary | std::ios::trunc);
    }
    std::ostream& log = c.out ? static_cast<std::ostream&>(file) : std::cout;
    std::size_t novel = 0;
    std::string prev;
    for (const auto& e : manifest.entries) {
        const auto img = load_entry_image(e);
        rse::FrameVerdict v;
        try {
            v = detect_frame(det, provider, img);
        } catch (const InputError& err) {
            throw InputError("frame '" + e.id + "': " + err.what());
        }
        novel += v.is_novel;
        log << verdict_json(v).dump() << '\n';
        if (write_maps && v.similarity_map) {
            auto change = rse::binary_change_map(*v.similarity_map, c.epsilon);
            if (c.despeckle) change = rse::remove_isolated(change);
            const auto base = (*c.out / e.id).string();
            write_real_map(base + ".similarity.imtf", *v.similarity_map);
            write_binary_map(base + ".change.imtf", change);
            render::write_png(base + ".change.png", render::render_change_overlay(change));
        }
    }
    std::cerr << manifest.entries.size() << " frames, " << novel << " novel\n";
    return 0;
}

int cmd_train_bank(const Flags& f) {
    const auto c = resolve(f);
    const auto manifest = load_manifest(need(c.manifest, "--manifest"));
    const auto& out = need(c.out, "--out (bank file)");
    std::vector<idss::LabeledImage> corpus;
    for (const auto& e : manifest.entries) {
        auto img = load_entry_image(e);
        auto labels = load_entry_labels(e, img);
        corpus.push_back({std::move(img), std::move(labels)});
    }
    const auto provider = ProviderSpec::parse(c.provider);
    const auto samples = idss::collect_class_pixels(corpus, provider, c.cap, c.seed);
    const auto bank = idss::build_prototype_bank(samples, c.bank_params());
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    idss::save_bank(out, bank);
    std::cerr << "bank: " << bank.size() << " prototypes (" << bank.count(Label::Land) << " Land, "
              << bank.count(Label::Water) << " Water, " << bank.count(Label::Cloud) << " Cloud), D = "
              << bank.latent_dim << "\n";
    return 0;
}

int cmd_segment(const Flags& f) {
    const auto c = resolve(f);
    const auto manifest = load_manifest(need(c.manifest, "--manifest"));
    const auto bank = idss::load_bank(need(c.bank, "--bank"));
    const auto& out = need(c.out, "--out");
    fs::create_directories(out);
    const auto segmenter = make_segmenter(bank, ProviderSpec::parse(c.provider), c.k);
    for (const auto& e : selected(manifest, f.ids)) {
        const auto img = load_entry_image(e);
        const auto seg = segmenter(img);
        const auto base = (out / e.id).string();
        write_class_map(base + ".classes.imtf", seg.classes);
        write_real_map(base + ".confidence.imtf", seg.confidence);
        write_binary_map(base + ".high_confidence.imtf",
                         idss::threshold_confidence(seg.confidence, seg.classes, c.confidence_threshold));
        render::write_png(base + ".classes.png", render::render_class_map(seg.classes));
        render::write_png(base + ".confidence.png",
                          render::render_confidence(seg.confidence, seg.classes, c.confidence_threshold));
    }
    return 0;
}

int cmd_explain(const Flags& f) {
    const auto c = resolve(f);
    const auto manifest = load_manifest(need(c.manifest, "--manifest"));
    const auto bank = idss::load_bank(need(c.bank, "--bank"));
    if (f.ids.size() != 1) throw ConfigError("explain needs exactly one --id");
    if (!f.h || !f.v) throw ConfigError("explain needs --h and --v");
    const auto entry = selected(manifest, f.ids).front();
    const auto img = load_entry_image(entry);
    auto j = idss::to_json(idss::explain_pixel(img, *f.h, *f.v, bank, ProviderSpec::parse(c.provider), c.k));
    j["image_id"] = entry.id;
    if (c.out) {
        std::ofstream(*c.out, std::ios::binary | std::ios::trunc) << j.dump(1) << '\n';
    } else {
        std::cout << j.dump(1) << '\n';
    }
    return 0;
}

int cmd_pipeline(const Flags& f) {
    const auto c = resolve(f);
    const auto manifest = load_manifest(need(c.manifest, "--manifest"));
    const auto bank = idss::load_bank(need(c.bank, "--bank"));
    const auto r = run_pipeline(manifest.entries, bank, c.pipeline(), need(c.out, "--out"));
    std::cerr << r.frames.size() << " frames, " << r.novel_count() << " novel, " << r.segment_calls
              << " segmented; flood onset: " << r.report.flood_onset.value_or("none") << "\n";
    return 0;
}

std::vector<bool> truth_flags(const fs::path& gt, const std::vector<std::string>& ids) {
    std::ifstream in(gt);
    if (!in) throw InputError("cannot open '" + gt.string() + "'");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw InputError(gt.string() + ": " + e.what());
    }
    std::set<std::string> flooded;
    if (j.is_array()) {
        for (const auto& x : j) flooded.insert(x.get<std::string>());
    } else if (j.is_object()) {
        for (const auto& [id, flag] : j.items())
            if (flag.get<bool>()) flooded.insert(id);
    } else {
        throw InputError(gt.string() + ": expected an array of flood ids or an id -> bool object");
    }
    for (const auto& id : flooded)
        if (std::ranges::find(ids, id) == ids.end())
            throw InputError(gt.string() + ": flood id '" + id + "' is not in the verdict log");
    std::vector<bool> out;
    for (const auto& id : ids) out.push_back(flooded.contains(id));
    return out;
}

int cmd_eval(const Flags& f) {
    if (f.pred.size() != f.gt.size())
        throw InputError(std::to_string(f.pred.size()) + " prediction files vs " + std::to_string(f.gt.size()) +
                         " ground-truth files");
    if (f.pred.empty()) throw InputError("no files to evaluate");
    std::string header, row;
    if (f.eval_mode == "segmentation") {
        metrics::ConfusionMatrix cm;
        for (std::size_t i = 0; i < f.pred.size(); ++i) cm.add(read_class_map(f.pred[i]), read_class_map(f.gt[i]));
        header = metrics::segmentation_csv_header();
        row = metrics::segmentation_csv_row(f.name, cm);
    } else if (f.eval_mode == "anomaly") {
        metrics::BinaryCounts counts;
        for (std::size_t i = 0; i < f.pred.size(); ++i) {
            std::ifstream in(f.pred[i]);
            if (!in) throw InputError("cannot open '" + f.pred[i] + "'");
            std::vector<std::string> ids;
            std::vector<char> flagged;
            std::string line;
            while (std::getline(in, line)) {
                if (line.empty()) continue;
                try {
                    const auto v = nlohmann::json::parse(line);
                    ids.push_back(v.at("id").get<std::string>());
                    flagged.push_back(v.at("is_novel").get<bool>());
                } catch (const nlohmann::json::exception& e) {
                    throw InputError(f.pred[i] + ": " + e.what());
                }
            }
            const auto truth = truth_flags(f.gt[i], ids);
            for (std::size_t t = 0; t < ids.size(); ++t) counts.add(flagged[t] != 0, truth[t]);
        }
        header = metrics::anomaly_csv_header();
        row = metrics::anomaly_csv_row(f.name, counts);
    } else if (f.eval_mode == "change") {
        metrics::BinaryCounts counts;
        for (std::size_t i = 0; i < f.pred.size(); ++i)
            counts += metrics::eval_change(read_binary_map(f.pred[i]), read_binary_map(f.gt[i]));
        header = metrics::change_csv_header();
        row = metrics::change_csv_row(f.name, counts);
    } else {
        throw ConfigError("eval --mode must be segmentation, anomaly or change");
    }
    if (f.out) {
        std::ofstream(*f.out, std::ios::binary | std::ios::trunc) << header << '\n' << row << '\n';
    } else {
        std::cout << header << '\n' << row << '\n';
    }
    return 0;
}

int cmd_render(const Flags& f) {
    if (!f.out) throw ConfigError("missing --out");
    const double tau = f.confidence_threshold.value_or(idss::kDefaultConfidenceThreshold);
    render::RgbImage img;
    if (f.kind == "classes") {
        img = render::render_class_map(read_class_map(f.input));
    } else if (f.kind == "change") {
        img = render::render_change_overlay(read_binary_map(f.input));
    } else if (f.kind == "confidence") {
        if (f.classes.empty()) throw ConfigError("--kind confidence needs --classes");
        img = render::render_confidence(read_real_map(f.input), read_class_map(f.classes), tau);
    } else {
        throw ConfigError("--kind must be classes, confidence or change");
    }
    render::write_png(*f.out, img);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Flood detection for Sentinel-2 time series"};
    app.require_subcommand(1);
    Flags f;

    auto config = [&](CLI::App* s) { s->add_option("--config", f.config, "JSON run config; flags override it"); };
    auto manifest = [&](CLI::App* s, const char* what) { s->add_option("--manifest", f.manifest, what); };
    auto detector = [&](CLI::App* s) {
        s->add_option("--m", f.m, "sigma multiplier of the novelty test (3)");
        s->add_option("--warmup", f.warmup, "frames before novelty is tested (2)");
        s->add_option("--detect-provider", f.detect_provider, "features for novelty detection (identity)");
    };
    auto change = [&](CLI::App* s) {
        s->add_option("--epsilon", f.epsilon, "change threshold on pixel similarity (0.5)");
        s->add_flag("--despeckle", f.despeckle, "drop isolated changed pixels");
    };
    auto knn = [&](CLI::App* s) {
        s->add_option("--bank", f.bank, "prototype bank JSON");
        s->add_option("--provider", f.provider, "'identity' or a directory of <id>.features.imtf");
        s->add_option("--k", f.k, "neighbours (10)");
        s->add_option("--confidence-threshold", f.confidence_threshold, "high-confidence threshold (0.8)");
    };

    auto* detect = app.add_subcommand("detect", "novelty verdicts for a series");
    config(detect);
    manifest(detect, "series manifest");
    detector(detect);
    detect->add_option("--out", f.out, "directory for verdicts.jsonl (default: stdout)");

    auto* change_map = app.add_subcommand("change-map", "binary change maps for novel frames");
    config(change_map);
    manifest(change_map, "series manifest");
    detector(change_map);
    change(change_map);
    change_map->add_flag("--all-frames", f.all_frames, "also write maps for normal frames");
    change_map->add_option("--out", f.out, "output directory");

    auto* train = app.add_subcommand("train-bank", "build a prototype bank from labelled images");
    config(train);
    manifest(train, "manifest with label maps");
    train->add_option("--provider", f.provider, "'identity' or a directory of <id>.features.imtf");
    train->add_option("--method", f.method, "minibatch-kmeans | kmedoids");
    train->add_option("--mode", f.mode, "nearest-real-pixel | centroid | medoid");
    train->add_option("--prototypes", f.prototypes, "prototypes per class (100)");
    train->add_option("--seed", f.seed, "random seed (0)");
    train->add_option("--cap", f.cap, "max sampled pixels per class, 0 = all (20000)");
    train->add_option("--batch-size", f.batch_size, "mini-batch size (1024)");
    train->add_option("--iterations", f.iterations, "mini-batch iterations, 0 = 100 x prototypes");
    train->add_option("--out", f.out, "bank file to write");

    auto* segment = app.add_subcommand("segment", "class and confidence maps");
    config(segment);
    manifest(segment, "series manifest");
    knn(segment);
    segment->add_option("--id", f.ids, "only these image ids");
    segment->add_option("--out", f.out, "output directory");

    auto* explain = app.add_subcommand("explain", "neighbouring prototypes of one pixel");
    config(explain);
    manifest(explain, "series manifest");
    knn(explain);
    explain->add_option("--id", f.ids, "image id")->expected(1);
    explain->set_help_flag("--help", "print this help message and exit");
    explain->add_option("--h", f.h, "row");
    explain->add_option("--v", f.v, "column");
    explain->add_option("--out", f.out, "JSON file (default: stdout)");

    auto* pipeline = app.add_subcommand("pipeline", "full four-stage flood detection");
    config(pipeline);
    manifest(pipeline, "series manifest");
    detector(pipeline);
    change(pipeline);
    knn(pipeline);
    pipeline->add_option("--decision-threshold", f.decision_threshold, "new-water percentage for Flooding (1.0)");
    pipeline->add_option("--out", f.out, "output directory");

    auto* eval = app.add_subcommand("eval", "metrics as CSV");
    eval->add_option("--mode", f.eval_mode, "segmentation | anomaly | change")->required();
    eval->add_option("--pred", f.pred, "predictions: class maps, verdict logs or change masks")->required();
    eval->add_option("--gt", f.gt, "ground truth: class maps, flood-id JSON or change masks")->required();
    eval->add_option("--name", f.name, "row label");
    eval->add_option("--out", f.out, "CSV file (default: stdout)");

    auto* render = app.add_subcommand("render", "PNG of a class, confidence or change map");
    render->add_option("--input", f.input, "map tensor")->required();
    render->add_option("--kind", f.kind, "classes | confidence | change");
    render->add_option("--classes", f.classes, "class map for --kind confidence");
    render->add_option("--confidence-threshold", f.confidence_threshold, "high-confidence threshold (0.8)");
    render->add_option("--out", f.out, "PNG file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 3;
    }

    try {
        if (detect->parsed()) return cmd_detect(f, false);
        if (change_map->parsed()) return cmd_detect(f, true);
        if (train->parsed()) return cmd_train_bank(f);
        if (segment->parsed()) return cmd_segment(f);
        if (explain->parsed()) return cmd_explain(f);
        if (pipeline->parsed()) return cmd_pipeline(f);
        if (eval->parsed()) return cmd_eval(f);
        if (render->parsed()) return cmd_render(f);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 3;
    } catch (const InputError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
