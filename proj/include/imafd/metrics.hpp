#ifndef IMAFD_METRICS_HPP
#define IMAFD_METRICS_HPP

#include <array>
#include <cmath>
#include <cstdio>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "imafd/error.hpp"
#include "imafd/raster.hpp"

namespace imafd::metrics {

/// counts[gt][pred] over pixels whose ground truth is not Invalid.
struct ConfusionMatrix {
    std::array<std::array<std::size_t, 4>, 4> counts{};

    void add(const ClassMap& pred, const ClassMap& gt) {
        if (!pred.same_shape(gt)) throw InputError("prediction and ground truth differ in size");
        for (std::size_t p = 0; p < gt.size(); ++p) {
            if (gt[p] == Label::Invalid) continue;
            ++counts[static_cast<std::size_t>(gt[p])][static_cast<std::size_t>(pred[p])];
        }
    }
    ConfusionMatrix& operator+=(const ConfusionMatrix& o) {
        for (std::size_t i = 0; i < 4; ++i)
            for (std::size_t j = 0; j < 4; ++j) counts[i][j] += o.counts[i][j];
        return *this;
    }
    std::size_t total() const {
        std::size_t n = 0;
        for (const auto& row : counts)
            for (auto c : row) n += c;
        return n;
    }

    /// Empty union gives no value.
    std::optional<double> iou(Label c) const {
        const auto k = static_cast<std::size_t>(c);
        std::size_t tp = counts[k][k], fp = 0, fn = 0;
        for (std::size_t i = 0; i < 4; ++i) {
            if (i == k) continue;
            fp += counts[i][k];
            fn += counts[k][i];
        }
        const std::size_t uni = tp + fp + fn;
        if (uni == 0) return std::nullopt;
        return static_cast<double>(tp) / static_cast<double>(uni);
    }

    /// Unweighted mean of the defined IoUs of Land, Water and Cloud.
    double miou() const {
        std::array<std::optional<double>, 3> ious;
        for (std::size_t i = 0; i < 3; ++i) ious[i] = iou(kClasses[i]);
        return mean_defined(ious);
    }

    static double mean_defined(std::span<const std::optional<double>> values) {
        double sum = 0.0;
        std::size_t n = 0;
        for (const auto& v : values)
            if (v) {
                sum += *v;
                ++n;
            }
        if (n == 0) throw InputError("mIoU undefined: no class present in prediction or ground truth");
        return sum / static_cast<double>(n);
    }
};

inline std::optional<double> iou(const ClassMap& pred, const ClassMap& gt, Label c) {
    ConfusionMatrix m;
    m.add(pred, gt);
    return m.iou(c);
}

inline double miou(const ClassMap& pred, const ClassMap& gt) {
    ConfusionMatrix m;
    m.add(pred, gt);
    return m.miou();
}

struct BinaryCounts {
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
    std::size_t total() const { return tp + fp + fn + tn; }
    void add(bool pred, bool truth) {
        if (pred && truth) ++tp;
        else if (pred) ++fp;
        else if (truth) ++fn;
        else ++tn;
    }
    BinaryCounts& operator+=(const BinaryCounts& o) {
        tp += o.tp;
        fp += o.fp;
        fn += o.fn;
        tn += o.tn;
        return *this;
    }
    /// TP / (TP + FP + FN), 0 when nothing is positive.
    double iou() const {
        const auto d = tp + fp + fn;
        return d ? static_cast<double>(tp) / static_cast<double>(d) : 0.0;
    }
};

struct PrecisionRecall {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

/// Zero denominators give 0.
inline PrecisionRecall precision_recall_f1(const BinaryCounts& c) {
    PrecisionRecall r;
    if (c.tp + c.fp) r.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
    if (c.tp + c.fn) r.recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
    if (r.precision + r.recall > 0.0) r.f1 = 2.0 * r.precision * r.recall / (r.precision + r.recall);
    return r;
}

/// Image-level counts of novelty verdicts against ground-truth flags.
inline BinaryCounts eval_anomaly_series(std::span<const bool> flagged, std::span<const bool> truth) {
    if (flagged.size() != truth.size())
        throw InputError("anomaly evaluation: " + std::to_string(flagged.size()) + " verdicts vs " +
                         std::to_string(truth.size()) + " ground-truth flags");
    BinaryCounts c;
    for (std::size_t i = 0; i < flagged.size(); ++i) c.add(flagged[i], truth[i]);
    return c;
}

/// Pixel-level counts of a predicted change mask against a reference mask.
inline BinaryCounts eval_change(const BinaryMap& pred, const BinaryMap& truth) {
    if (!pred.same_shape(truth)) throw InputError("change masks differ in size");
    BinaryCounts c;
    for (std::size_t p = 0; p < pred.size(); ++p) c.add(pred[p] != 0, truth[p] != 0);
    return c;
}

// ---- NDWI baselines ------------------------------------------------------

enum class NdwiVariant {
    GreenNir = 1,  // (B3 - B8) / (B3 + B8)
    NirSwir = 2,   // (B8 - B11) / (B8 + B11)
};

/// Invalid pixels map to NaN; a zero denominator maps to 0.
inline Raster<double> ndwi(const MultispectralImage& img, NdwiVariant variant) {
    const auto a = static_cast<std::size_t>(variant == NdwiVariant::GreenNir ? Band::B3 : Band::B8);
    const auto b = static_cast<std::size_t>(variant == NdwiVariant::GreenNir ? Band::B8 : Band::B11);
    if (img.bands <= std::max(a, b))
        throw InputError("NDWI variant " + std::to_string(static_cast<int>(variant)) + " needs " +
                         std::to_string(std::max(a, b) + 1) + " bands, image has " + std::to_string(img.bands));
    Raster<double> out(img.height, img.width, std::nan(""));
    for (std::size_t p = 0; p < out.size(); ++p) {
        if (!img.valid[p]) continue;
        const double x = img.data[p * img.bands + a], y = img.data[p * img.bands + b];
        const double den = x + y;
        out[p] = den == 0.0 ? 0.0 : (x - y) / den;
    }
    return out;
}

/// Water where index > threshold; NaN (invalid) is never water.
inline BinaryMap ndwi_water_mask(const Raster<double>& index, double threshold = 0.0) {
    BinaryMap out(index.height(), index.width(), 0);
    for (std::size_t p = 0; p < out.size(); ++p) out[p] = index[p] > threshold;
    return out;
}

/// NDWI water mask as a Land/Water class map (Invalid where the image is).
inline ClassMap ndwi_class_map(const MultispectralImage& img, NdwiVariant variant, double threshold = 0.0) {
    const auto mask = ndwi_water_mask(ndwi(img, variant), threshold);
    ClassMap out(img.height, img.width, Label::Invalid);
    for (std::size_t p = 0; p < out.size(); ++p)
        if (img.valid[p]) out[p] = mask[p] ? Label::Water : Label::Land;
    return out;
}

// ---- table formatting ----------------------------------------------------

inline std::string fixed2(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f", x);
    return buf;
}

inline std::string percent_or_dash(const std::optional<double>& x) { return x ? fixed2(100.0 * *x) : "-"; }

/// Header and rows in the column order of the segmentation table.
inline std::string segmentation_csv_header() { return "name,iou_water,iou_land,iou_cloud,miou"; }
inline std::string segmentation_csv_row(const std::string& name, const ConfusionMatrix& m) {
    std::optional<double> mi;
    try {
        mi = m.miou();
    } catch (const InputError&) {
    }
    return name + "," + percent_or_dash(m.iou(Label::Water)) + "," + percent_or_dash(m.iou(Label::Land)) + "," +
           percent_or_dash(m.iou(Label::Cloud)) + "," + percent_or_dash(mi);
}

inline std::string anomaly_csv_header() { return "name,precision,recall,f1"; }
inline std::string anomaly_csv_row(const std::string& name, const BinaryCounts& c) {
    const auto r = precision_recall_f1(c);
    return name + "," + fixed2(r.precision) + "," + fixed2(r.recall) + "," + fixed2(r.f1);
}

inline std::string change_csv_header() { return "name,precision,recall,f1,iou_water"; }
inline std::string change_csv_row(const std::string& name, const BinaryCounts& c) {
    const auto r = precision_recall_f1(c);
    return name + "," + fixed2(100.0 * r.precision) + "," + fixed2(100.0 * r.recall) + "," + fixed2(100.0 * r.f1) +
           "," + fixed2(100.0 * c.iou());
}

} // namespace imafd::metrics

#endif // IMAFD_METRICS_HPP
