#include <gtest/gtest.h>

#include <random>

#include "imafd/bank_io.hpp"
#include "imafd/idss.hpp"
#include "imafd/projection.hpp"
#include "support/oracles.hpp"
#include "support/synthetic.hpp"

using namespace imafd;
using namespace imafd::idss;

namespace {

Prototype proto(Label c, std::vector<float> y) {
    Prototype p;
    p.cls = c;
    p.latent = std::move(y);
    p.raw.assign(13, 0.0f);
    return p;
}

PrototypeBank bank_of(std::vector<Prototype> ps) {
    PrototypeBank b;
    b.latent_dim = ps.front().latent.size();
    b.raw_dim = 13;
    b.prototypes = std::move(ps);
    return b;
}

PrototypeBank random_bank(std::mt19937_64& rng, std::size_t n, std::size_t d, bool coarse) {
    std::uniform_real_distribution<float> u(-1.0f, 1.0f);
    std::vector<Prototype> ps;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<float> y(d);
        // coarse grids make distance ties common
        for (auto& x : y) x = coarse ? static_cast<float>(static_cast<int>(rng() % 5)) : u(rng);
        ps.push_back(proto(static_cast<Label>(1 + rng() % 3), y));
    }
    return bank_of(std::move(ps));
}

std::vector<LabeledImage> training_corpus() {
    std::vector<LabeledImage> corpus;
    for (std::uint64_t s = 0; s < 2; ++s) {
        auto [img, labels] = synth::labeled_scene(12, 10, 40 + s, "train" + std::to_string(s));
        corpus.push_back({std::move(img), std::move(labels)});
    }
    return corpus;
}

} // namespace

TEST(CollectClassPixels, CountsPerClassAndEmptyClassError) {
    auto img = synth::blank_image(2, 2, 13, "w", "2020-01-01");
    std::vector<LabeledImage> corpus{{img, ClassMap(2, 2, Label::Water)}};
    EXPECT_THROW(collect_class_pixels(corpus, ProviderSpec::identity(), 0, 1), InputError);
    const Label water[] = {Label::Water};
    const auto sets = collect_class_pixels(corpus, ProviderSpec::identity(), 0, 1, water);
    ASSERT_EQ(sets.size(), 1u);
    EXPECT_EQ(sets.at(Label::Water).size(), 4u);
}

TEST(CollectClassPixels, CapIsReproducible) {
    auto img = synth::blank_image(2, 2, 13, "w", "2020-01-01");
    for (std::size_t i = 0; i < img.data.size(); ++i) img.data[i] = static_cast<float>(i);
    std::vector<LabeledImage> corpus{{img, ClassMap(2, 2, Label::Water)}};
    const Label water[] = {Label::Water};
    const auto a = collect_class_pixels(corpus, ProviderSpec::identity(), 2, 77, water);
    const auto b = collect_class_pixels(corpus, ProviderSpec::identity(), 2, 77, water);
    EXPECT_EQ(a.at(Label::Water).size(), 2u);
    EXPECT_EQ(a.at(Label::Water).provenance, b.at(Label::Water).provenance);
    EXPECT_EQ(a.at(Label::Water).latent, b.at(Label::Water).latent);
}

TEST(CollectClassPixels, ProvenancePointsAtTheSourcePixel) {
    const auto corpus = training_corpus();
    const auto sets = collect_class_pixels(corpus, ProviderSpec::identity(), 30, 3);
    for (const auto& [cls, set] : sets) {
        EXPECT_EQ(set.size(), 30u);
        for (std::size_t i = 0; i < set.size(); ++i) {
            const auto& p = set.provenance[i];
            const auto& item = p.image_id == "train0" ? corpus[0] : corpus[1];
            EXPECT_EQ(item.labels(p.h, p.v), cls);
            const auto x = item.image.pixel(p.h, p.v);
            EXPECT_TRUE(std::ranges::equal(x, set.raw.row(i)));
            EXPECT_TRUE(std::ranges::equal(x, set.latent.row(i)));
        }
    }
}

TEST(CollectClassPixels, SkipsInvalidPixelsAndInvalidLabels) {
    auto img = synth::blank_image(1, 4, 13, "m", "2020-01-01");
    img.valid[1] = 0;
    ClassMap labels(1, 4, Label::Land);
    labels[2] = Label::Invalid;
    std::vector<LabeledImage> corpus{{img, labels}};
    const Label land[] = {Label::Land};
    const auto sets = collect_class_pixels(corpus, ProviderSpec::identity(), 0, 1, land);
    ASSERT_EQ(sets.at(Label::Land).size(), 2u);
    EXPECT_EQ(sets.at(Label::Land).provenance[0].v, 0u);
    EXPECT_EQ(sets.at(Label::Land).provenance[1].v, 3u);
}

TEST(NearestRealPixel, LinearScanWithLowIndexTies) {
    SampleSet s{RowMatrix<float>(2, 1, {0.0f, 2.0f}), RowMatrix<float>(2, 1, {0.0f, 2.0f}), {{"a", 0, 0}, {"a", 0, 1}}};
    const std::vector<double> c09 = {0.9}, c10 = {1.0}, c2 = {2.0};
    EXPECT_EQ(nearest_real_pixel(std::span<const double>(c09), s), 0u);
    EXPECT_EQ(nearest_real_pixel(std::span<const double>(c10), s), 0u);
    EXPECT_EQ(nearest_real_pixel(std::span<const double>(c2), s), 1u);
}

TEST(PrototypeBank, ThreeClassesTimesPerClass) {
    const auto sets = collect_class_pixels(training_corpus(), ProviderSpec::identity(), 0, 5);
    BankParams p;
    p.per_class = 20;
    p.mode = PrototypeMode::Centroid;
    p.seed = 9;
    p.iterations = 200;
    const auto bank = build_prototype_bank(sets, p);
    EXPECT_EQ(bank.size(), 60u);
    for (Label c : kClasses) EXPECT_EQ(bank.count(c), 20u);
    for (const auto& pr : bank.prototypes) {
        EXPECT_EQ(pr.latent.size(), 13u);
        EXPECT_EQ(pr.raw.size(), 13u);
        EXPECT_FALSE(pr.provenance.has_value());
    }
}

TEST(PrototypeBank, RealPixelModesCarryProvenance) {
    const auto corpus = training_corpus();
    const auto sets = collect_class_pixels(corpus, ProviderSpec::identity(), 40, 5);
    for (auto method : {ClusteringMethod::KMedoids, ClusteringMethod::MiniBatchKMeans}) {
        BankParams p;
        p.method = method;
        p.mode = PrototypeMode::NearestRealPixel;
        p.per_class = 5;
        p.iterations = 100;
        const auto bank = build_prototype_bank(sets, p);
        EXPECT_LE(bank.size(), 15u);
        for (const auto& pr : bank.prototypes) {
            ASSERT_TRUE(pr.provenance.has_value());
            const auto& item = pr.provenance->image_id == "train0" ? corpus[0] : corpus[1];
            EXPECT_EQ(item.labels(pr.provenance->h, pr.provenance->v), pr.cls);
            EXPECT_TRUE(std::ranges::equal(item.image.pixel(pr.provenance->h, pr.provenance->v), pr.raw));
        }
    }
}

TEST(PrototypeBank, FewerPrototypesGiveADifferentBank) {
    const auto sets = collect_class_pixels(training_corpus(), ProviderSpec::identity(), 0, 5);
    BankParams p;
    p.iterations = 100;
    p.per_class = 4;
    const auto small = build_prototype_bank(sets, p);
    p.per_class = 12;
    const auto large = build_prototype_bank(sets, p);
    EXPECT_NE(small.prototypes, large.prototypes);
}

TEST(Classify, ExampleNeighbourhoods) {
    const auto bank = bank_of({proto(Label::Water, {0.0f}), proto(Label::Water, {1.0f}), proto(Label::Land, {2.0f}),
                               proto(Label::Cloud, {10.0f})});
    const std::vector<float> q0 = {0.0f};
    auto c = classify_pixel(std::span<const float>(q0), bank, 1);
    EXPECT_EQ(c.cls, Label::Water);
    EXPECT_EQ(c.confidence, 1.0);
    c = classify_pixel(std::span<const float>(q0), bank, 3);
    EXPECT_EQ(c.cls, Label::Water);
    EXPECT_DOUBLE_EQ(c.confidence, 2.0 / 3.0);
}

TEST(Classify, EightOfTenIsConfidencePointEight) {
    std::vector<Prototype> ps;
    for (int i = 0; i < 8; ++i) ps.push_back(proto(Label::Water, {static_cast<float>(i)}));
    for (int i = 0; i < 2; ++i) ps.push_back(proto(Label::Land, {static_cast<float>(i) + 0.5f}));
    ps.push_back(proto(Label::Cloud, {100.0f}));
    const auto bank = bank_of(std::move(ps));
    const std::vector<float> q = {0.0f};
    const auto c = classify_pixel(std::span<const float>(q), bank, 10);
    EXPECT_EQ(c.cls, Label::Water);
    EXPECT_EQ(c.votes, 8u);
    EXPECT_EQ(c.confidence, 0.8);
    ConfidenceMap conf(1, 1, c.confidence);
    EXPECT_EQ(threshold_confidence(conf, 0.8)[0], 1);
}

TEST(Classify, VoteTieGoesToSmallerDistanceSumThenLowerClass) {
    const auto bank = bank_of({proto(Label::Land, {-1.0f}), proto(Label::Water, {0.5f})});
    const std::vector<float> q = {0.0f};
    EXPECT_EQ(classify_pixel(std::span<const float>(q), bank, 2).cls, Label::Water);
    const auto sym = bank_of({proto(Label::Cloud, {-1.0f}), proto(Label::Land, {1.0f})});
    EXPECT_EQ(classify_pixel(std::span<const float>(q), sym, 2).cls, Label::Land);
}

TEST(Classify, Errors) {
    const auto bank = bank_of({proto(Label::Land, {0.0f, 0.0f})});
    const std::vector<float> q2 = {0.0f, 0.0f}, q3 = {0.0f, 0.0f, 0.0f};
    EXPECT_THROW(classify_pixel(std::span<const float>(q2), bank, 2), ConfigError);
    EXPECT_THROW(classify_pixel(std::span<const float>(q2), bank, 0), ConfigError);
    EXPECT_THROW(classify_pixel(std::span<const float>(q3), bank, 1), InputError);
    PrototypeBank empty;
    EXPECT_THROW(classify_pixel(std::span<const float>(q2), empty, 1), InputError);
}

TEST(Classify, MatchesExhaustiveOracleIncludingTies) {
    std::mt19937_64 rng(123);
    for (int b = 0; b < 20; ++b) {
        const bool coarse = b % 2 == 0;
        const std::size_t d = 1 + rng() % 4;
        const auto bank = random_bank(rng, 1 + rng() % 300, d, coarse);
        std::vector<std::vector<float>> ys;
        std::vector<int> cs;
        for (const auto& p : bank.prototypes) {
            ys.push_back(p.latent);
            cs.push_back(static_cast<int>(p.cls));
        }
        const KnnIndex index(bank);
        for (int q = 0; q < 50; ++q) {
            std::vector<float> x(d);
            for (auto& v : x) v = coarse ? static_cast<float>(rng() % 5) : std::uniform_real_distribution<float>(-1, 1)(rng);
            const std::size_t k = 1 + rng() % std::min<std::size_t>(15, bank.size());
            const auto got = index.classify(std::span<const float>(x), k);
            const auto want = oracle::knn_exhaustive(ys, cs, x, k);
            ASSERT_EQ(static_cast<int>(got.cls), want.cls);
            ASSERT_EQ(got.votes, static_cast<std::size_t>(want.votes));
            const auto nn = index.nearest(std::span<const float>(x), k);
            for (std::size_t i = 0; i < k; ++i) ASSERT_EQ(nn[i].index, want.neighbors[i]);
        }
    }
}

TEST(Segment, AllLandBank) {
    const auto bank = bank_of({proto(Label::Land, std::vector<float>(13, 0.1f)),
                               proto(Label::Land, std::vector<float>(13, 0.3f))});
    auto img = synth::quiet_series({3, 3, 1, 0.01f, 2}).front();
    img.valid[4] = 0;
    const auto seg = segment_image(img, bank, ProviderSpec::identity(), 2);
    for (std::size_t p = 0; p < 9; ++p) {
        if (p == 4) {
            EXPECT_EQ(seg.classes[p], Label::Invalid);
            EXPECT_EQ(seg.confidence[p], 0.0);
        } else {
            EXPECT_EQ(seg.classes[p], Label::Land);
            EXPECT_EQ(seg.confidence[p], 1.0);
        }
    }
}

TEST(Segment, EqualsPixelwiseClassification) {
    std::mt19937_64 rng(8);
    const auto bank = random_bank(rng, 40, 13, false);
    auto img = synth::blank_image(4, 4, 13, "r", "2020-01-01");
    std::uniform_real_distribution<float> u(-1, 1);
    for (auto& x : img.data) x = u(rng);
    const auto seg = segment_image(img, bank, ProviderSpec::identity(), 5);
    for (std::size_t p = 0; p < 16; ++p) {
        const auto c = classify_pixel(img.pixel(p / 4, p % 4), bank, 5);
        EXPECT_EQ(seg.classes[p], c.cls);
        EXPECT_EQ(seg.confidence[p], c.confidence);
    }
    auto bad = bank;
    bad.latent_dim = 3;
    for (auto& p : bad.prototypes) p.latent.resize(3);
    EXPECT_THROW(segment_image(img, bad, ProviderSpec::identity(), 5), InputError);
}

TEST(Explain, SortedConsistentAndTraceable) {
    const auto corpus = training_corpus();
    const auto sets = collect_class_pixels(corpus, ProviderSpec::identity(), 40, 5);
    BankParams p;
    p.method = ClusteringMethod::KMedoids;
    p.per_class = 6;
    const auto bank = build_prototype_bank(sets, p);
    auto img = synth::labeled_scene(6, 6, 99, "query").first;
    img.valid[0] = 0;
    const auto seg = segment_image(img, bank, ProviderSpec::identity(), 10);
    for (std::size_t h = 0; h < 6; ++h)
        for (std::size_t v = 0; v < 6; ++v) {
            if (!img.is_valid(h, v)) {
                EXPECT_THROW(explain_pixel(img, h, v, bank, ProviderSpec::identity(), 10), InputError);
                continue;
            }
            const auto e = explain_pixel(img, h, v, bank, ProviderSpec::identity(), 10);
            ASSERT_EQ(e.neighbors.size(), 10u);
            for (std::size_t i = 1; i < e.neighbors.size(); ++i)
                EXPECT_LE(e.neighbors[i - 1].distance, e.neighbors[i].distance);
            EXPECT_EQ(e.winner, seg.classes(h, v));
            EXPECT_EQ(e.confidence, seg.confidence(h, v));
            for (const auto& n : e.neighbors) {
                ASSERT_TRUE(n.provenance.has_value());
                EXPECT_FALSE(n.provenance->image_id.empty());
            }
        }
    EXPECT_THROW(explain_pixel(img, 6, 0, bank, ProviderSpec::identity(), 10), InputError);
}

TEST(ThresholdConfidence, Examples) {
    ConfidenceMap conf(1, 3);
    conf[0] = 0.8;
    conf[1] = 0.7;
    conf[2] = 0.0;
    const auto hi = threshold_confidence(conf, 0.8);
    EXPECT_EQ(hi[0], 1);
    EXPECT_EQ(hi[1], 0);
    EXPECT_EQ(hi[2], 0);
    ClassMap classes(1, 3, Label::Water);
    classes[2] = Label::Invalid;
    const auto all = threshold_confidence(conf, classes, 0.0);
    EXPECT_EQ(all[0], 1);
    EXPECT_EQ(all[1], 1);
    EXPECT_EQ(all[2], 0);
    EXPECT_THROW(threshold_confidence(conf, 1.5), ConfigError);
}

TEST(BankJson, RoundTripAndStableBytes) {
    const auto sets = collect_class_pixels(training_corpus(), ProviderSpec::identity(), 40, 5);
    BankParams p;
    p.per_class = 5;
    p.iterations = 50;
    p.seed = 4;
    const auto a = build_prototype_bank(sets, p);
    const auto b = build_prototype_bank(sets, p);
    EXPECT_EQ(serialize_bank(a), serialize_bank(b));
    const auto back = bank_from_json(Json::parse(serialize_bank(a)));
    EXPECT_EQ(back, a);
    const auto j = to_json(a);
    EXPECT_EQ(j.at("D"), 13);
    EXPECT_EQ(j.at("n"), 13);
    EXPECT_EQ(j.at("prototypes").size(), a.size());
    EXPECT_THROW(bank_from_json(Json::parse(R"({"method":"kmeans"})")), InputError);
}

TEST(Projection, MatchesCovarianceEigenOracle) {
    std::mt19937_64 rng(31);
    const auto bank = random_bank(rng, 50, 6, false);
    const auto got = project_prototypes_2d(bank);

    const std::size_t n = bank.size(), d = 6;
    std::vector<double> mean(d, 0.0);
    for (const auto& p : bank.prototypes)
        for (std::size_t j = 0; j < d; ++j) mean[j] += p.latent[j] / static_cast<double>(n);
    std::vector<std::vector<double>> cov(d, std::vector<double>(d, 0.0));
    for (const auto& p : bank.prototypes)
        for (std::size_t a = 0; a < d; ++a)
            for (std::size_t b = 0; b < d; ++b)
                cov[a][b] += (p.latent[a] - mean[a]) * (p.latent[b] - mean[b]) / static_cast<double>(n - 1);
    std::vector<double> vals;
    std::vector<std::vector<double>> vecs;
    oracle::jacobi_eigen(cov, vals, vecs);
    std::vector<std::size_t> order(d);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](auto x, auto y) { return vals[x] > vals[y]; });
    for (std::size_t axis = 0; axis < 2; ++axis) {
        std::vector<double> v(d);
        for (std::size_t j = 0; j < d; ++j) v[j] = vecs[j][order[axis]];
        for (std::size_t j = 0; j < d; ++j)
            if (std::abs(v[j]) > 1e-12) {
                if (v[j] < 0)
                    for (auto& x : v) x = -x;
                break;
            }
        for (std::size_t i = 0; i < n; ++i) {
            double c = 0.0;
            for (std::size_t j = 0; j < d; ++j) c += (bank.prototypes[i].latent[j] - mean[j]) * v[j];
            EXPECT_NEAR(got[i][axis], c, 1e-6);
        }
    }
}

TEST(Projection, PlanarBankKeepsDistances) {
    std::mt19937_64 rng(2);
    const auto bank = random_bank(rng, 12, 2, false);
    const auto xy = project_prototypes_2d(bank);
    for (std::size_t i = 0; i < bank.size(); ++i)
        for (std::size_t j = 0; j < bank.size(); ++j) {
            const double dx = bank.prototypes[i].latent[0] - bank.prototypes[j].latent[0];
            const double dy = bank.prototypes[i].latent[1] - bank.prototypes[j].latent[1];
            const double px = xy[i][0] - xy[j][0], py = xy[i][1] - xy[j][1];
            EXPECT_NEAR(std::hypot(dx, dy), std::hypot(px, py), 1e-5);
        }
}

TEST(Projection, CollinearBankHasFlatSecondAxis) {
    std::vector<Prototype> ps;
    for (int i = 0; i < 6; ++i) {
        const float t = static_cast<float>(i);
        ps.push_back(proto(Label::Land, {t, 2 * t, -t}));
    }
    const auto xy = project_prototypes_2d(bank_of(std::move(ps)));
    for (const auto& p : xy) EXPECT_NEAR(p[1], 0.0, 1e-6);
}
