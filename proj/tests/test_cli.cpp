#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "imafd/bank_io.hpp"
#include "imafd/tensor_io.hpp"
#include "support/synthetic.hpp"

namespace fs = std::filesystem;
using namespace imafd;

namespace {

fs::path scratch_dir(const std::string& name) {
    auto dir = fs::temp_directory_path() / "imafd_cli" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

/// Runs the tool; stdout goes to `stdout_file` when given.
int run(const std::string& args, const fs::path& stdout_file = {}) {
    std::string cmd = std::string("\"") + IMAFD_CLI + "\" " + args;
    cmd += stdout_file.empty() ? " > /dev/null" : " > \"" + stdout_file.string() + "\"";
    cmd += " 2> /dev/null";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<nlohmann::json> jsonl(const fs::path& p) {
    std::ifstream in(p);
    std::vector<nlohmann::json> out;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) out.push_back(nlohmann::json::parse(line));
    return out;
}

fs::path labeled_manifest(const fs::path& dir, std::size_t size) {
    auto [img, labels] = synth::labeled_scene(size, size, 12, "train");
    return synth::write_series(dir, {img}, {&labels});
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

} // namespace

TEST(Cli, ConstantSeriesHasNoNovelFrames) {
    const auto dir = scratch_dir("constant");
    auto frames = synth::quiet_series({8, 8, 10, 0.01f, 1});
    for (auto& f : frames) f.data = frames.front().data;
    const auto manifest = synth::write_series(dir, frames);
    ASSERT_EQ(run("detect --manifest " + q(manifest), dir / "verdicts.jsonl"), 0);
    const auto verdicts = jsonl(dir / "verdicts.jsonl");
    ASSERT_EQ(verdicts.size(), 10u);
    for (const auto& v : verdicts) {
        EXPECT_FALSE(v["is_novel"].get<bool>());
        EXPECT_EQ(v["S"].get<double>(), 1.0);
    }
}

TEST(Cli, PerturbedFifteenthFrameIsTheOnlyNovelOne) {
    const auto dir = scratch_dir("perturbed");
    synth::SeriesSpec spec;
    auto frames = synth::quiet_series(spec);
    frames.push_back(synth::shifted_frame(spec, frames, 0.3, 5.0));
    const auto manifest = synth::write_series(dir, frames);
    ASSERT_EQ(run("detect --manifest " + q(manifest) + " --out " + q(dir / "out")), 0);
    const auto verdicts = jsonl(dir / "out" / "verdicts.jsonl");
    ASSERT_EQ(verdicts.size(), 15u);
    for (std::size_t i = 0; i < 15; ++i) EXPECT_EQ(verdicts[i]["is_novel"].get<bool>(), i == 14) << i;
    EXPECT_TRUE(verdicts[0]["threshold"].is_null());
}

TEST(Cli, ExitCodes) {
    const auto dir = scratch_dir("exit");
    std::ofstream(dir / "manifest.json") << R"([{"id":"a","timestamp":"2020-01-01","data":"missing.imtf"}])";
    EXPECT_EQ(run("detect --manifest " + q(dir / "manifest.json")), 2);
    EXPECT_EQ(run("detect --manifest " + q(dir / "nope.json")), 2);
    EXPECT_EQ(run("detect --manifest " + q(dir / "manifest.json") + " --m -1"), 3);
    std::ofstream(dir / "run.json") << R"({"sigma": 3})";
    EXPECT_EQ(run("detect --config " + q(dir / "run.json")), 3);
    EXPECT_EQ(run("detect --unknown-flag"), 3);
    EXPECT_EQ(run("--help"), 0);
}

TEST(Cli, FlagsOverrideConfigFile) {
    const auto dir = scratch_dir("override");
    synth::SeriesSpec spec;
    auto frames = synth::quiet_series(spec);
    frames.push_back(synth::shifted_frame(spec, frames, 0.3, 5.0));
    const auto manifest = synth::write_series(dir, frames);
    // a huge m in the file suppresses the flag; the command line restores it
    std::ofstream(dir / "run.json") << R"({"m": 1000, "manifest": "manifest.json"})";
    ASSERT_EQ(run("detect --config " + q(dir / "run.json"), dir / "file.jsonl"), 0);
    ASSERT_EQ(run("detect --config " + q(dir / "run.json") + " --m 3", dir / "flag.jsonl"), 0);
    EXPECT_FALSE(jsonl(dir / "file.jsonl").back()["is_novel"].get<bool>());
    EXPECT_TRUE(jsonl(dir / "flag.jsonl").back()["is_novel"].get<bool>());
}

TEST(Cli, TrainBankIsDeterministicAndCarriesProvenance) {
    const auto dir = scratch_dir("train");
    const auto manifest = labeled_manifest(dir / "data", 12);
    const std::string base = "train-bank --manifest " + q(manifest) + " --prototypes 5 --seed 7 --iterations 100";
    ASSERT_EQ(run(base + " --out " + q(dir / "a.json")), 0);
    ASSERT_EQ(run(base + " --out " + q(dir / "b.json")), 0);
    EXPECT_EQ(slurp(dir / "a.json"), slurp(dir / "b.json"));

    ASSERT_EQ(run(base + " --mode medoid --out " + q(dir / "m.json")), 0);
    const auto bank = idss::load_bank(dir / "m.json");
    EXPECT_EQ(bank.method, idss::ClusteringMethod::KMedoids);
    EXPECT_EQ(bank.size(), 15u);
    for (const auto& p : bank.prototypes) {
        ASSERT_TRUE(p.provenance.has_value());
        EXPECT_EQ(p.provenance->image_id, "train");
    }
}

TEST(Cli, HundredPrototypesPerClass) {
    const auto dir = scratch_dir("hundred");
    const auto manifest = labeled_manifest(dir / "data", 30);
    ASSERT_EQ(run("train-bank --manifest " + q(manifest) + " --iterations 20 --out " + q(dir / "bank.json")), 0);
    const auto bank = idss::load_bank(dir / "bank.json");
    EXPECT_EQ(bank.size(), 300u);
    for (Label c : kClasses) EXPECT_EQ(bank.count(c), 100u);
    for (const auto& p : bank.prototypes) EXPECT_EQ(p.latent.size(), 13u);
}

TEST(Cli, PipelineSegmentExplainAndRender) {
    const auto dir = scratch_dir("pipeline");
    ASSERT_EQ(run("train-bank --manifest " + q(labeled_manifest(dir / "train", 12)) +
                  " --prototypes 6 --mode medoid --out " + q(dir / "bank.json")),
              0);
    synth::SeriesSpec spec;
    auto frames = synth::quiet_series(spec);
    frames.push_back(synth::flooded_frame(spec, frames, 0.25));
    const auto manifest = synth::write_series(dir / "series", frames);
    const std::string common = " --manifest " + q(manifest) + " --bank " + q(dir / "bank.json");

    ASSERT_EQ(run("pipeline" + common + " --epsilon 0.8 --out " + q(dir / "out")), 0);
    std::ifstream rin(dir / "out" / "report.json");
    const auto report = nlohmann::json::parse(rin);
    EXPECT_EQ(report["flood_onset"], frames.back().timestamp);
    EXPECT_EQ(report["records"].size(), 1u);
    std::ifstream iin(dir / "out" / "invocations.json");
    const auto inv = nlohmann::json::parse(iin);
    EXPECT_EQ(inv["segment_image_calls"], inv["novel_frames"]);

    ASSERT_EQ(run("segment" + common + " --id frame15 --out " + q(dir / "seg")), 0);
    EXPECT_TRUE(fs::exists(dir / "seg" / "frame15.classes.imtf"));
    EXPECT_FALSE(fs::exists(dir / "seg" / "frame1.classes.imtf"));

    ASSERT_EQ(run("explain" + common + " --id frame15 --h 2 --v 3 --k 4", dir / "explain.json"), 0);
    std::ifstream ein(dir / "explain.json");
    const auto ex = nlohmann::json::parse(ein);
    ASSERT_EQ(ex["neighbors"].size(), 4u);
    for (const auto& n : ex["neighbors"]) EXPECT_EQ(n["provenance"]["image_id"], "train");
    EXPECT_EQ(run("explain" + common + " --id frame15 --h 99 --v 0"), 2);

    ASSERT_EQ(run("render --input " + q(dir / "seg" / "frame15.classes.imtf") + " --out " + q(dir / "c.png")), 0);
    EXPECT_TRUE(fs::exists(dir / "c.png"));
    ASSERT_EQ(run("render --kind confidence --input " + q(dir / "seg" / "frame15.confidence.imtf") + " --classes " +
                  q(dir / "seg" / "frame15.classes.imtf") + " --out " + q(dir / "conf.png")),
              0);
    EXPECT_EQ(run("render --kind bogus --input " + q(dir / "c.png") + " --out " + q(dir / "x.png")), 3);

    ASSERT_EQ(run("change-map --manifest " + q(manifest) + " --epsilon 0.8 --out " + q(dir / "cm")), 0);
    EXPECT_TRUE(fs::exists(dir / "cm" / "frame15.change.imtf"));
    EXPECT_FALSE(fs::exists(dir / "cm" / "frame14.change.imtf"));
}

TEST(Cli, EvalSegmentationPerfectPrediction) {
    const auto dir = scratch_dir("eval_seg");
    const auto labels = synth::labeled_scene(9, 3, 1).second;
    write_class_map(dir / "gt.imtf", labels);
    ASSERT_EQ(run("eval --mode segmentation --name unet --pred " + q(dir / "gt.imtf") + " --gt " + q(dir / "gt.imtf"),
                  dir / "out.csv"),
              0);
    EXPECT_EQ(slurp(dir / "out.csv"), "name,iou_water,iou_land,iou_cloud,miou\nunet,100.00,100.00,100.00,100.00\n");
    EXPECT_EQ(run("eval --mode segmentation --pred " + q(dir / "gt.imtf") + " --gt " + q(dir / "gt.imtf") + " " +
                  q(dir / "gt.imtf")),
              2);
}

TEST(Cli, EvalAnomalyReproducesTableRow) {
    const auto dir = scratch_dir("eval_anomaly");
    {
        std::ofstream v(dir / "verdicts.jsonl");
        for (int i = 1; i <= 15; ++i)
            v << nlohmann::json{{"id", "f" + std::to_string(i)}, {"is_novel", i == 4 || i == 15}}.dump() << "\n";
    }
    std::ofstream(dir / "gt.json") << R"(["f15"])";
    ASSERT_EQ(run("eval --mode anomaly --name raw --pred " + q(dir / "verdicts.jsonl") + " --gt " + q(dir / "gt.json"),
                  dir / "out.csv"),
              0);
    EXPECT_EQ(slurp(dir / "out.csv"), "name,precision,recall,f1\nraw,0.50,1.00,0.67\n");
    std::ofstream(dir / "bad.json") << R"(["f99"])";
    EXPECT_EQ(run("eval --mode anomaly --pred " + q(dir / "verdicts.jsonl") + " --gt " + q(dir / "bad.json")), 2);
}

TEST(Cli, EvalChangeColumns) {
    const auto dir = scratch_dir("eval_change");
    BinaryMap pred(1, 4, 0), truth(1, 4, 0);
    pred[0] = pred[1] = 1;
    truth[1] = 1;
    write_binary_map(dir / "pred.imtf", pred);
    write_binary_map(dir / "gt.imtf", truth);
    ASSERT_EQ(run("eval --mode change --name m --pred " + q(dir / "pred.imtf") + " --gt " + q(dir / "gt.imtf"),
                  dir / "out.csv"),
              0);
    EXPECT_EQ(slurp(dir / "out.csv"), "name,precision,recall,f1,iou_water\nm,50.00,100.00,66.67,50.00\n");
}
