#ifndef IMAFD_IDSS_HPP
#define IMAFD_IDSS_HPP

// Prototype-based interpretable segmentation.
//
// Training clusters the latent features of each class separately and keeps
// one prototype per cluster, each carrying a latent vector, a raw spectrum
// and (for real-pixel prototypes) the location it was taken from. Inference
// votes among the k nearest prototypes of all classes.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "imafd/clustering.hpp"
#include "imafd/error.hpp"
#include "imafd/features.hpp"
#include "imafd/raster.hpp"

namespace imafd::idss {

inline constexpr std::size_t kDefaultPrototypesPerClass = 100;
inline constexpr std::size_t kDefaultNeighbors = 10;
inline constexpr double kDefaultConfidenceThreshold = 0.8;
inline constexpr std::size_t kDefaultCapPerClass = 20000;

struct Provenance {
    std::string image_id;
    std::uint32_t h = 0;
    std::uint32_t v = 0;
    bool operator==(const Provenance&) const = default;
};

/// Per-class training pixels: latent rows, raw rows, and where each came from.
struct SampleSet {
    RowMatrix<float> latent;
    RowMatrix<float> raw;
    std::vector<Provenance> provenance;

    std::size_t size() const noexcept { return provenance.size(); }
};

struct LabeledImage {
    MultispectralImage image;
    ClassMap labels;
};

/// Seeded reservoir sample of at most `cap_per_class` pixels per class
/// (0 = keep all). Pixels invalid in the image or labelled Invalid are skipped.
inline std::map<Label, SampleSet> collect_class_pixels(std::span<const LabeledImage> corpus,
                                                       const ProviderSpec& provider, std::size_t cap_per_class,
                                                       std::uint64_t seed,
                                                       std::span<const Label> classes = kClasses) {
    struct Reservoir {
        Rng rng;
        std::size_t seen = 0;
        std::vector<float> latent, raw;
        std::vector<Provenance> prov;
    };
    std::map<Label, Reservoir> res;
    for (Label c : classes) res.emplace(c, Reservoir{Rng(mix_seed(seed, static_cast<std::uint64_t>(c))), 0, {}, {}, {}});

    std::size_t latent_dim = 0, raw_dim = 0;
    bool have_dims = false;
    for (const auto& item : corpus) {
        const auto& img = item.image;
        if (!item.labels.same_shape(img.height, img.width))
            throw InputError("labels for image '" + img.id + "' do not match its dims");
        const auto feats = features(provider, img);
        if (!have_dims) {
            latent_dim = feats.depth;
            raw_dim = img.bands;
            have_dims = true;
        } else if (feats.depth != latent_dim || img.bands != raw_dim) {
            throw InputError("image '" + img.id + "' has inconsistent feature or band count");
        }
        for (std::size_t p = 0; p < img.pixel_count(); ++p) {
            const Label l = item.labels[p];
            if (l == Label::Invalid || !img.valid[p]) continue;
            auto it = res.find(l);
            if (it == res.end()) continue;
            auto& r = it->second;
            std::size_t slot;
            if (cap_per_class == 0 || r.seen < cap_per_class) {
                slot = r.prov.size();
                r.latent.resize(r.latent.size() + latent_dim);
                r.raw.resize(r.raw.size() + raw_dim);
                r.prov.emplace_back();
            } else {
                slot = r.rng.index(r.seen + 1);
                if (slot >= cap_per_class) {
                    ++r.seen;
                    continue;
                }
            }
            ++r.seen;
            auto f = feats.pixel(p);
            auto x = img.pixel(p / img.width, p % img.width);
            std::copy(f.begin(), f.end(), r.latent.begin() + static_cast<std::ptrdiff_t>(slot * latent_dim));
            std::copy(x.begin(), x.end(), r.raw.begin() + static_cast<std::ptrdiff_t>(slot * raw_dim));
            r.prov[slot] = {img.id, static_cast<std::uint32_t>(p / img.width), static_cast<std::uint32_t>(p % img.width)};
        }
    }

    std::map<Label, SampleSet> out;
    for (auto& [label, r] : res) {
        if (r.prov.empty())
            throw InputError("class " + std::string(label_name(label)) + " has no pixels in the training corpus");
        const std::size_t n = r.prov.size();
        out.emplace(label, SampleSet{RowMatrix<float>(n, latent_dim, std::move(r.latent)),
                                     RowMatrix<float>(n, raw_dim, std::move(r.raw)), std::move(r.prov)});
    }
    return out;
}

enum class ClusteringMethod { MiniBatchKMeans, KMedoids };
enum class PrototypeMode { Centroid, NearestRealPixel };

inline std::string_view to_string(ClusteringMethod m) {
    return m == ClusteringMethod::MiniBatchKMeans ? "minibatch-kmeans" : "kmedoids";
}
inline std::string_view to_string(PrototypeMode m) {
    return m == PrototypeMode::Centroid ? "centroid" : "nearest-real-pixel";
}
inline ClusteringMethod parse_method(std::string_view s) {
    if (s == "minibatch-kmeans" || s == "kmeans") return ClusteringMethod::MiniBatchKMeans;
    if (s == "kmedoids" || s == "k-medoids") return ClusteringMethod::KMedoids;
    throw ConfigError("unknown clustering method '" + std::string(s) + "'");
}
inline PrototypeMode parse_mode(std::string_view s) {
    if (s == "centroid") return PrototypeMode::Centroid;
    if (s == "nearest-real-pixel" || s == "nearest") return PrototypeMode::NearestRealPixel;
    throw ConfigError("unknown prototype mode '" + std::string(s) + "'");
}

struct Prototype {
    Label cls = Label::Invalid;
    std::vector<float> latent;  // y
    std::vector<float> raw;     // x
    std::optional<Provenance> provenance;
    bool operator==(const Prototype&) const = default;
};

struct PrototypeBank {
    ClusteringMethod method = ClusteringMethod::MiniBatchKMeans;
    PrototypeMode mode = PrototypeMode::NearestRealPixel;
    std::uint64_t seed = 0;
    std::size_t latent_dim = 0;
    std::size_t raw_dim = 0;
    std::size_t per_class = kDefaultPrototypesPerClass;
    std::vector<Prototype> prototypes;

    std::size_t size() const noexcept { return prototypes.size(); }
    std::size_t count(Label c) const {
        return static_cast<std::size_t>(
            std::ranges::count_if(prototypes, [c](const Prototype& p) { return p.cls == c; }));
    }
    bool operator==(const PrototypeBank&) const = default;
};

/// Sample closest to `centroid` in latent space; ties go to the lower index.
template <typename C>
std::size_t nearest_real_pixel(std::span<const C> centroid, const SampleSet& samples) {
    if (samples.size() == 0) throw std::invalid_argument("nearest_real_pixel: no samples");
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double d = squared_distance(centroid, samples.latent.row(i));
        if (d < best_d) {
            best_d = d;
            best = i;
        }
    }
    return best;
}

inline Prototype prototype_from_sample(Label cls, const SampleSet& samples, std::size_t i) {
    auto y = samples.latent.row(i);
    auto x = samples.raw.row(i);
    return {cls, {y.begin(), y.end()}, {x.begin(), x.end()}, samples.provenance[i]};
}

struct BankParams {
    ClusteringMethod method = ClusteringMethod::MiniBatchKMeans;
    PrototypeMode mode = PrototypeMode::NearestRealPixel;
    std::size_t per_class = kDefaultPrototypesPerClass;
    std::uint64_t seed = 0;
    std::size_t batch_size = 1024;
    std::size_t iterations = 0;  // 0 = 100 * per_class
};

/// Clusters each class and stores its prototypes. Classes appear in
/// ascending label order.
inline PrototypeBank build_prototype_bank(const std::map<Label, SampleSet>& samples, const BankParams& params) {
    if (params.per_class == 0) throw ConfigError("prototypes per class must be at least 1");
    if (samples.empty()) throw InputError("no classes to build prototypes from");

    PrototypeBank bank;
    bank.method = params.method;
    bank.mode = params.mode;
    bank.seed = params.seed;
    bank.per_class = params.per_class;
    bank.latent_dim = samples.begin()->second.latent.cols;
    bank.raw_dim = samples.begin()->second.raw.cols;

    for (const auto& [cls, set] : samples) {
        if (set.size() == 0)
            throw InputError("class " + std::string(label_name(cls)) + " has no training samples");
        if (set.latent.cols != bank.latent_dim || set.raw.cols != bank.raw_dim)
            throw InputError("class " + std::string(label_name(cls)) + " has inconsistent sample dims");

        if (params.method == ClusteringMethod::KMedoids) {
            const auto res = kmedoids(set.latent, params.per_class);
            if (res.reduced)
                std::cerr << "warning: class " << label_name(cls) << " has only " << res.medoids.size()
                          << " distinct samples; using them all as prototypes\n";
            for (auto i : res.medoids) bank.prototypes.push_back(prototype_from_sample(cls, set, i));
            continue;
        }

        MiniBatchParams mb{params.per_class, params.batch_size, params.iterations,
                           mix_seed(params.seed, static_cast<std::uint64_t>(cls))};
        const auto km = minibatch_kmeans(set.latent, mb);
        if (km.reduced)
            std::cerr << "warning: class " << label_name(cls) << " has only " << km.centroids.rows
                      << " distinct samples; using them all as prototypes\n";
        const auto& centers = km.centroids;

        if (params.mode == PrototypeMode::NearestRealPixel) {
            std::vector<char> taken(set.size(), 0);
            for (std::size_t c = 0; c < centers.rows; ++c) {
                const auto i = nearest_real_pixel(centers.row(c), set);
                if (taken[i]) continue;  // two centroids share a nearest pixel
                taken[i] = 1;
                bank.prototypes.push_back(prototype_from_sample(cls, set, i));
            }
            continue;
        }

        // Centroid mode: raw spectrum is the mean of member raws (synthetic).
        RowMatrix<double> raw_sum(centers.rows, bank.raw_dim);
        std::vector<std::size_t> members(centers.rows, 0);
        for (std::size_t i = 0; i < set.size(); ++i) {
            const auto c = nearest_row(set.latent.row(i), centers);
            ++members[c];
            auto x = set.raw.row(i);
            for (std::size_t d = 0; d < bank.raw_dim; ++d) raw_sum.row(c)[d] += x[d];
        }
        for (std::size_t c = 0; c < centers.rows; ++c) {
            Prototype p;
            p.cls = cls;
            p.latent.assign(centers.row(c).begin(), centers.row(c).end());
            if (members[c]) {
                for (double s : raw_sum.row(c)) p.raw.push_back(static_cast<float>(s / members[c]));
            } else {
                auto x = set.raw.row(nearest_real_pixel(centers.row(c), set));
                p.raw.assign(x.begin(), x.end());
            }
            bank.prototypes.push_back(std::move(p));
        }
    }
    return bank;
}

struct Neighbor {
    std::size_t index = 0;  // into bank.prototypes
    double distance = 0.0;  // Euclidean
};

struct Classification {
    Label cls = Label::Invalid;
    double confidence = 0.0;
    std::size_t votes = 0;
};

/// Exact brute-force kNN over a bank's latent vectors.
class KnnIndex {
public:
    explicit KnnIndex(const PrototypeBank& bank) : bank_(&bank), latent_(bank.size(), bank.latent_dim) {
        for (std::size_t i = 0; i < bank.size(); ++i) {
            if (bank.prototypes[i].latent.size() != bank.latent_dim)
                throw InputError("prototype " + std::to_string(i) + " has latent length " +
                                 std::to_string(bank.prototypes[i].latent.size()) + ", bank D is " +
                                 std::to_string(bank.latent_dim));
            std::ranges::copy(bank.prototypes[i].latent, latent_.row(i).begin());
        }
    }

    const PrototypeBank& bank() const noexcept { return *bank_; }

    /// k nearest prototypes ordered by (distance, index).
    template <typename F>
    std::vector<Neighbor> nearest(std::span<const F> query, std::size_t k) const {
        check(query.size(), k);
        scratch_.resize(latent_.rows);
        for (std::size_t i = 0; i < latent_.rows; ++i) scratch_[i] = {squared_distance(query, latent_.row(i)), i};
        std::partial_sort(scratch_.begin(), scratch_.begin() + static_cast<std::ptrdiff_t>(k), scratch_.end());
        std::vector<Neighbor> out(k);
        for (std::size_t i = 0; i < k; ++i) out[i] = {scratch_[i].second, std::sqrt(scratch_[i].first)};
        return out;
    }

    template <typename F>
    Classification classify(std::span<const F> query, std::size_t k) const {
        return vote(nearest(query, k));
    }

    /// Majority class; ties go to the smaller summed distance, then the lower label.
    Classification vote(std::span<const Neighbor> neighbors) const {
        std::array<std::size_t, 4> count{};
        std::array<double, 4> dist{};
        for (const auto& n : neighbors) {
            const auto c = static_cast<std::size_t>(bank_->prototypes[n.index].cls);
            ++count[c];
            dist[c] += n.distance;
        }
        std::size_t best = 1;
        for (std::size_t c = 2; c < 4; ++c)
            if (count[c] > count[best] || (count[c] == count[best] && dist[c] < dist[best])) best = c;
        return {static_cast<Label>(best), static_cast<double>(count[best]) / static_cast<double>(neighbors.size()),
                count[best]};
    }

private:
    void check(std::size_t dim, std::size_t k) const {
        if (latent_.rows == 0) throw InputError("prototype bank is empty");
        if (k == 0 || k > latent_.rows)
            throw ConfigError("k = " + std::to_string(k) + " must lie in [1, " + std::to_string(latent_.rows) + "]");
        if (dim != latent_.cols)
            throw InputError("feature length " + std::to_string(dim) + " does not match bank D = " +
                             std::to_string(latent_.cols));
    }

    const PrototypeBank* bank_;
    RowMatrix<float> latent_;
    mutable std::vector<std::pair<double, std::size_t>> scratch_;
};

template <typename F>
Classification classify_pixel(std::span<const F> query, const PrototypeBank& bank, std::size_t k = kDefaultNeighbors) {
    return KnnIndex(bank).classify(query, k);
}

struct Segmentation {
    ClassMap classes;
    ConfidenceMap confidence;
};

/// Invalid pixels get label Invalid and confidence 0.
inline Segmentation segment_features(const FeatureMap& feats, std::span<const std::uint8_t> valid,
                                     const KnnIndex& index, std::size_t k) {
    if (feats.depth != index.bank().latent_dim)
        throw InputError("feature depth " + std::to_string(feats.depth) + " does not match bank D = " +
                         std::to_string(index.bank().latent_dim));
    Segmentation seg{ClassMap(feats.height, feats.width, Label::Invalid),
                     ConfidenceMap(feats.height, feats.width, 0.0)};
    for (std::size_t p = 0; p < seg.classes.size(); ++p) {
        if (!valid[p]) continue;
        const auto c = index.classify(feats.pixel(p), k);
        seg.classes[p] = c.cls;
        seg.confidence[p] = c.confidence;
    }
    return seg;
}

inline Segmentation segment_image(const MultispectralImage& image, const PrototypeBank& bank,
                                  const ProviderSpec& provider, std::size_t k = kDefaultNeighbors) {
    const KnnIndex index(bank);
    return segment_features(features(provider, image), image.valid, index, k);
}

struct ExplainedNeighbor {
    std::size_t prototype = 0;
    double distance = 0.0;
    Label cls = Label::Invalid;
    std::vector<float> raw;
    std::optional<Provenance> provenance;
};

struct PixelExplanation {
    std::size_t h = 0;
    std::size_t v = 0;
    std::vector<ExplainedNeighbor> neighbors;  // nondecreasing distance
    Label winner = Label::Invalid;
    double confidence = 0.0;
};

inline PixelExplanation explain_pixel(const MultispectralImage& image, std::size_t h, std::size_t v,
                                      const PrototypeBank& bank, const ProviderSpec& provider,
                                      std::size_t k = kDefaultNeighbors) {
    if (h >= image.height || v >= image.width)
        throw InputError("pixel (" + std::to_string(h) + ", " + std::to_string(v) + ") is outside the image");
    if (!image.is_valid(h, v))
        throw InputError("pixel (" + std::to_string(h) + ", " + std::to_string(v) + ") is invalid");
    const KnnIndex index(bank);
    const auto feats = features(provider, image);
    const auto nn = index.nearest(feats.pixel(h, v), k);
    const auto c = index.vote(nn);
    PixelExplanation e{h, v, {}, c.cls, c.confidence};
    for (const auto& n : nn) {
        const auto& p = bank.prototypes[n.index];
        e.neighbors.push_back({n.index, n.distance, p.cls, p.raw, p.provenance});
    }
    return e;
}

/// High-confidence flags: confidence >= tau (and, given labels, valid).
inline BinaryMap threshold_confidence(const ConfidenceMap& conf, double tau) {
    if (!(tau >= 0.0 && tau <= 1.0)) throw ConfigError("confidence threshold must lie in [0, 1]");
    BinaryMap out(conf.height(), conf.width(), 0);
    for (std::size_t p = 0; p < conf.size(); ++p) out[p] = conf[p] >= tau;
    return out;
}

inline BinaryMap threshold_confidence(const ConfidenceMap& conf, const ClassMap& classes, double tau) {
    if (!conf.same_shape(classes)) throw InputError("confidence and class maps differ in size");
    auto out = threshold_confidence(conf, tau);
    for (std::size_t p = 0; p < out.size(); ++p) out[p] = out[p] && classes[p] != Label::Invalid;
    return out;
}

} // namespace imafd::idss

#endif // IMAFD_IDSS_HPP
