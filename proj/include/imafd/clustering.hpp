#ifndef IMAFD_CLUSTERING_HPP
#define IMAFD_CLUSTERING_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

namespace imafd {

/// Dense row-major matrix; one sample per row.
template <typename T>
struct RowMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<T> data;

    RowMatrix() = default;
    RowMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c) {}
    RowMatrix(std::size_t r, std::size_t c, std::vector<T> values) : rows(r), cols(c), data(std::move(values)) {
        if (data.size() != rows * cols) throw std::invalid_argument("RowMatrix: payload does not match shape");
    }

    std::span<T> row(std::size_t i) { return {data.data() + i * cols, cols}; }
    std::span<const T> row(std::size_t i) const { return {data.data() + i * cols, cols}; }
    bool operator==(const RowMatrix&) const = default;
};

template <typename A, typename B>
double squared_distance(std::span<A> a, std::span<B> b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        acc += d * d;
    }
    return acc;
}

/// Seeded generator whose derived draws do not depend on the standard
/// library's distribution implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform integer in [0, n).
    std::uint64_t index(std::uint64_t n) {
        if (n == 0) throw std::invalid_argument("Rng::index: empty range");
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                    std::numeric_limits<std::uint64_t>::max() % n;
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return x % n;
    }

    /// Uniform double in [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    std::uint64_t next() { return engine_(); }

private:
    std::mt19937_64 engine_;
};

/// splitmix64 finaliser; derives independent sub-seeds.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Row indices of the first occurrence of each distinct row, ascending.
template <typename T>
std::vector<std::size_t> distinct_rows(const RowMatrix<T>& samples) {
    std::vector<std::size_t> order(samples.rows);
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto less = [&](std::size_t a, std::size_t b) {
        auto ra = samples.row(a), rb = samples.row(b);
        if (std::lexicographical_compare(ra.begin(), ra.end(), rb.begin(), rb.end())) return true;
        if (std::lexicographical_compare(rb.begin(), rb.end(), ra.begin(), ra.end())) return false;
        return a < b;
    };
    std::sort(order.begin(), order.end(), less);
    std::vector<std::size_t> firsts;
    for (std::size_t i = 0; i < order.size(); ++i) {
        if (i > 0 && std::ranges::equal(samples.row(order[i]), samples.row(order[i - 1]))) continue;
        firsts.push_back(order[i]);
    }
    std::sort(firsts.begin(), firsts.end());
    return firsts;
}

/// Index of the row of `centers` closest to x; ties go to the lower index.
template <typename X, typename C>
std::size_t nearest_row(std::span<const X> x, const RowMatrix<C>& centers, double* dist_sq = nullptr) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < centers.rows; ++c) {
        const double d = squared_distance(x, centers.row(c));
        if (d < best_d) {
            best_d = d;
            best = c;
        }
    }
    if (dist_sq) *dist_sq = best_d;
    return best;
}

struct MiniBatchParams {
    std::size_t clusters = 100;
    std::size_t batch_size = 1024;
    /// 0 selects 100 * clusters.
    std::size_t iterations = 0;
    std::uint64_t seed = 0;
};

struct KMeansResult {
    RowMatrix<double> centroids;
    /// Set when fewer distinct samples than clusters were available; the
    /// centroids are then the distinct samples themselves.
    bool reduced = false;
};

/// k-means++ seeding over the given rows.
template <typename T>
RowMatrix<double> kmeans_plus_plus(const RowMatrix<T>& samples, std::size_t clusters, Rng& rng) {
    RowMatrix<double> centers(clusters, samples.cols);
    auto copy_row = [&](std::size_t dst, std::size_t src) {
        std::copy(samples.row(src).begin(), samples.row(src).end(), centers.row(dst).begin());
    };
    copy_row(0, rng.index(samples.rows));
    std::vector<double> closest(samples.rows);
    for (std::size_t i = 0; i < samples.rows; ++i) closest[i] = squared_distance(samples.row(i), centers.row(0));
    for (std::size_t c = 1; c < clusters; ++c) {
        const double total = std::accumulate(closest.begin(), closest.end(), 0.0);
        std::size_t pick = samples.rows - 1;
        if (total > 0.0) {
            const double target = rng.uniform() * total;
            double cum = 0.0;
            for (std::size_t i = 0; i < samples.rows; ++i) {
                cum += closest[i];
                if (closest[i] > 0.0 && cum > target) {
                    pick = i;
                    break;
                }
            }
            while (closest[pick] == 0.0) --pick;  // only reachable through rounding in cum
        } else {
            pick = rng.index(samples.rows);
        }
        copy_row(c, pick);
        for (std::size_t i = 0; i < samples.rows; ++i)
            closest[i] = std::min(closest[i], squared_distance(samples.row(i), centers.row(c)));
    }
    return centers;
}

/// Mini-batch k-means with per-centre learning rate 1/count (Sculley 2010).
template <typename T>
KMeansResult minibatch_kmeans(const RowMatrix<T>& samples, const MiniBatchParams& params) {
    if (params.clusters == 0) throw std::invalid_argument("minibatch_kmeans: need at least one cluster");
    if (samples.rows == 0) throw std::invalid_argument("minibatch_kmeans: no samples");
    if (params.batch_size == 0) throw std::invalid_argument("minibatch_kmeans: batch size must be positive");

    KMeansResult result;
    const auto distinct = distinct_rows(samples);
    if (params.clusters > distinct.size()) {
        result.reduced = true;
        result.centroids = RowMatrix<double>(distinct.size(), samples.cols);
        for (std::size_t i = 0; i < distinct.size(); ++i)
            std::copy(samples.row(distinct[i]).begin(), samples.row(distinct[i]).end(),
                      result.centroids.row(i).begin());
        return result;
    }

    Rng rng(params.seed);
    auto centers = kmeans_plus_plus(samples, params.clusters, rng);
    const std::size_t iterations = params.iterations ? params.iterations : 100 * params.clusters;
    const std::size_t batch = std::min(params.batch_size, samples.rows);
    std::vector<std::size_t> counts(params.clusters, 0);
    std::vector<std::size_t> picked(batch), assigned(batch);

    for (std::size_t it = 0; it < iterations; ++it) {
        for (auto& p : picked) p = rng.index(samples.rows);
        for (std::size_t b = 0; b < batch; ++b) assigned[b] = nearest_row(samples.row(picked[b]), centers);
        for (std::size_t b = 0; b < batch; ++b) {
            const std::size_t c = assigned[b];
            const double eta = 1.0 / static_cast<double>(++counts[c]);
            auto center = centers.row(c);
            auto x = samples.row(picked[b]);
            for (std::size_t d = 0; d < samples.cols; ++d) center[d] += eta * (static_cast<double>(x[d]) - center[d]);
        }
    }
    result.centroids = std::move(centers);
    return result;
}

struct KMedoidsResult {
    std::vector<std::size_t> medoids;  // sample indices, ascending
    double cost = 0.0;                 // sum of squared distances to nearest medoid
    bool reduced = false;
};

namespace detail {

template <typename T>
class DistanceTable {
public:
    static constexpr std::size_t kCacheLimit = 2048;

    explicit DistanceTable(const RowMatrix<T>& s) : samples_(s) {
        if (s.rows <= kCacheLimit) {
            cache_.resize(s.rows * s.rows);
            for (std::size_t i = 0; i < s.rows; ++i)
                for (std::size_t j = i; j < s.rows; ++j)
                    cache_[i * s.rows + j] = cache_[j * s.rows + i] = squared_distance(s.row(i), s.row(j));
        }
    }
    double operator()(std::size_t i, std::size_t j) const {
        return cache_.empty() ? squared_distance(samples_.row(i), samples_.row(j)) : cache_[i * samples_.rows + j];
    }

private:
    const RowMatrix<T>& samples_;
    std::vector<double> cache_;
};

} // namespace detail

/// PAM (BUILD then SWAP) under squared Euclidean cost. Each SWAP step applies
/// the single best improving (medoid, candidate) exchange; ties prefer the
/// lower candidate index, then the lower medoid index. The result is a local
/// optimum: no single exchange lowers the cost.
template <typename T>
KMedoidsResult kmedoids(const RowMatrix<T>& samples, std::size_t clusters) {
    if (clusters == 0) throw std::invalid_argument("kmedoids: need at least one cluster");
    if (samples.rows == 0) throw std::invalid_argument("kmedoids: no samples");

    KMedoidsResult result;
    const auto distinct = distinct_rows(samples);
    if (clusters > distinct.size()) {
        result.reduced = true;
        result.medoids = distinct;
        return result;
    }

    const std::size_t n = samples.rows;
    const detail::DistanceTable<T> dist(samples);
    std::vector<char> is_medoid(n, 0);
    std::vector<std::size_t> medoids;

    // BUILD
    std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
    {
        std::size_t best = 0;
        double best_cost = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < n; ++c) {
            double cost = 0.0;
            for (std::size_t j = 0; j < n; ++j) cost += dist(c, j);
            if (cost < best_cost) {
                best_cost = cost;
                best = c;
            }
        }
        medoids.push_back(best);
        is_medoid[best] = 1;
        for (std::size_t j = 0; j < n; ++j) nearest[j] = dist(best, j);
    }
    while (medoids.size() < clusters) {
        std::size_t best = n;
        double best_gain = -1.0;
        for (std::size_t c = 0; c < n; ++c) {
            if (is_medoid[c]) continue;
            double gain = 0.0;
            for (std::size_t j = 0; j < n; ++j) gain += std::max(0.0, nearest[j] - dist(c, j));
            if (gain > best_gain) {
                best_gain = gain;
                best = c;
            }
        }
        medoids.push_back(best);
        is_medoid[best] = 1;
        for (std::size_t j = 0; j < n; ++j) nearest[j] = std::min(nearest[j], dist(best, j));
    }

    // SWAP
    std::vector<std::size_t> owner(n);
    std::vector<double> second(n);
    std::vector<double> local(clusters);
    for (std::size_t round = 0; round < 10000; ++round) {
        std::sort(medoids.begin(), medoids.end());
        double total = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            double d1 = std::numeric_limits<double>::infinity(), d2 = d1;
            std::size_t o = 0;
            for (std::size_t m = 0; m < clusters; ++m) {
                const double d = dist(medoids[m], j);
                if (d < d1) {
                    d2 = d1;
                    d1 = d;
                    o = m;
                } else if (d < d2) {
                    d2 = d;
                }
            }
            nearest[j] = d1;
            second[j] = d2;
            owner[j] = o;
            total += d1;
        }
        result.cost = total;

        // delta(m, h) = shared(h) + local[m]; see FastPAM1 (Schubert & Rousseeuw).
        // Without an improving swap, a zero-cost swap onto a lower sample
        // index is taken so that equal-cost solutions resolve to lower indices.
        const double tol = 1e-12 * (1.0 + total);
        double best_delta = -tol;
        std::size_t best_m = clusters, best_h = n;
        std::size_t tie_m = clusters, tie_h = n;
        for (std::size_t h = 0; h < n; ++h) {
            if (is_medoid[h]) continue;
            double shared = 0.0;
            std::fill(local.begin(), local.end(), 0.0);
            for (std::size_t j = 0; j < n; ++j) {
                const double dhj = dist(h, j);
                if (dhj < nearest[j])
                    shared += dhj - nearest[j];
                else
                    local[owner[j]] += std::min(second[j], dhj) - nearest[j];
            }
            for (std::size_t m = 0; m < clusters; ++m) {
                const double delta = shared + local[m];
                if (delta < best_delta) {
                    best_delta = delta;
                    best_m = m;
                    best_h = h;
                }
            }
            if (tie_h == n)
                for (std::size_t m = clusters; m-- > 0 && medoids[m] > h;)
                    if (std::abs(shared + local[m]) <= tol) {
                        tie_m = m;
                        tie_h = h;
                        break;
                    }
        }
        if (best_h == n) {
            best_m = tie_m;
            best_h = tie_h;
        }
        if (best_h == n) break;
        is_medoid[medoids[best_m]] = 0;
        is_medoid[best_h] = 1;
        medoids[best_m] = best_h;
    }
    std::sort(medoids.begin(), medoids.end());
    result.medoids = std::move(medoids);
    result.cost = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        double d = std::numeric_limits<double>::infinity();
        for (auto m : result.medoids) d = std::min(d, dist(m, j));
        result.cost += d;
    }
    return result;
}

} // namespace imafd

#endif // IMAFD_CLUSTERING_HPP
