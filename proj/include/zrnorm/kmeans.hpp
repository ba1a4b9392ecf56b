#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "zrnorm/matrix.hpp"
#include "zrnorm/parallel.hpp"
#include "zrnorm/random.hpp"

namespace zrnorm {

/// K centroid vectors. `standardized_input` records whether the training frames were standardized.
struct Codebook {
    Matrix centroids; // K x dim
    bool standardized_input = false;
    std::uint64_t seed = 0;

    std::size_t k() const noexcept { return centroids.rows(); }
    std::size_t dim() const noexcept { return centroids.cols(); }
};

struct KMeansOptions {
    std::size_t k = 50;
    std::uint64_t seed = 0;
    std::size_t max_iters = 300;
    double tol = 1e-4; // on the largest centroid shift (Euclidean)
};

struct KMeansResult {
    Codebook codebook;
    std::vector<std::uint32_t> assignments;
    /// Inertia after each assignment step; entry 0 follows initialization.
    std::vector<double> inertia_history;
    std::size_t iterations = 0;
    bool converged = false;
};

/// Index of the nearest centroid; ties go to the lowest index.
inline std::uint32_t nearest_centroid(const Matrix& centroids, std::span<const double> x, double* dist = nullptr) {
    std::uint32_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < centroids.rows(); ++c) {
        const double d = squared_distance(centroids.row(c), x);
        if (d < best_d) {
            best_d = d;
            best = static_cast<std::uint32_t>(c);
        }
    }
    if (dist) *dist = best_d;
    return best;
}

namespace kmeans_detail {

// Fixed chunk size: partial sums are formed per chunk and reduced in chunk order,
// so results are bit-identical for any worker count.
inline constexpr std::size_t chunk = 4096;

struct Partial {
    std::vector<double> sums; // K x dim
    std::vector<std::size_t> counts;
    double inertia = 0.0;
    bool changed = false;
};

inline Matrix plus_plus_init(const Matrix& x, std::size_t k, Rng& rng) {
    const std::size_t n = x.rows();
    Matrix centroids(k, x.cols());
    std::size_t first = uniform_index(rng, n);
    std::copy(x.row(first).begin(), x.row(first).end(), centroids.row(0).begin());
    std::vector<double> d2(n);
    for (std::size_t i = 0; i < n; ++i) d2[i] = squared_distance(x.row(i), centroids.row(0));
    for (std::size_t c = 1; c < k; ++c) {
        double total = 0.0;
        for (double v : d2) total += v;
        std::size_t pick = 0;
        if (total > 0.0) {
            const double target = uniform01(rng) * total;
            double acc = 0.0;
            pick = n - 1;
            for (std::size_t i = 0; i < n; ++i) {
                acc += d2[i];
                if (acc > target && d2[i] > 0.0) {
                    pick = i;
                    break;
                }
            }
        } else {
            pick = uniform_index(rng, n);
        }
        std::copy(x.row(pick).begin(), x.row(pick).end(), centroids.row(c).begin());
        for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], squared_distance(x.row(i), centroids.row(c)));
    }
    return centroids;
}

/// Assigns every point, returning per-chunk partial sums.
inline std::vector<Partial> assign(const Matrix& x, const Matrix& centroids, std::vector<std::uint32_t>& labels,
                                   std::vector<double>& dist) {
    const std::size_t n = x.rows(), k = centroids.rows(), d = x.cols();
    const std::size_t n_chunks = (n + chunk - 1) / chunk;
    std::vector<Partial> parts(n_chunks);
    parallel_for(n_chunks, [&](std::size_t ci) {
        Partial& p = parts[ci];
        p.sums.assign(k * d, 0.0);
        p.counts.assign(k, 0);
        const std::size_t end = std::min(n, (ci + 1) * chunk);
        for (std::size_t i = ci * chunk; i < end; ++i) {
            double di;
            const std::uint32_t c = nearest_centroid(centroids, x.row(i), &di);
            if (c != labels[i]) p.changed = true;
            labels[i] = c;
            dist[i] = di;
            p.inertia += di;
            ++p.counts[c];
            auto r = x.row(i);
            for (std::size_t j = 0; j < d; ++j) p.sums[c * d + j] += r[j];
        }
    });
    return parts;
}

} // namespace kmeans_detail

/// Lloyd's algorithm with k-means++ seeding.
///
/// Stops when assignments no longer change or the largest centroid shift drops below `tol`.
/// Empty clusters are reseeded with the point farthest from its centroid. Final centroids are
/// rounded to float32 so that a codebook file round-trips exactly.
inline KMeansResult kmeans_fit(const Matrix& x, const KMeansOptions& opt) {
    using namespace kmeans_detail;
    const std::size_t n = x.rows(), k = opt.k, d = x.cols();
    if (k < 1) throw InvalidArgument("kmeans_fit: K must be >= 1");
    if (n < k) throw InvalidArgument("kmeans_fit: need at least K=" + std::to_string(k) + " points, got " + std::to_string(n));
    for (double v : x.data())
        if (!std::isfinite(v)) throw InvalidArgument("kmeans_fit: non-finite input");

    Rng rng = make_rng(opt.seed, {0x6B6D65616E73ULL});
    KMeansResult res;
    Matrix centroids = plus_plus_init(x, k, rng);
    std::vector<std::uint32_t> labels(n, std::numeric_limits<std::uint32_t>::max());
    std::vector<double> dist(n, 0.0);

    auto reduce = [&](const std::vector<Partial>& parts, std::vector<double>& sums, std::vector<std::size_t>& counts,
                      bool& changed) {
        sums.assign(k * d, 0.0);
        counts.assign(k, 0);
        double inertia = 0.0;
        changed = false;
        for (const auto& p : parts) {
            for (std::size_t i = 0; i < k * d; ++i) sums[i] += p.sums[i];
            for (std::size_t c = 0; c < k; ++c) counts[c] += p.counts[c];
            inertia += p.inertia;
            changed = changed || p.changed;
        }
        return inertia;
    };

    std::vector<double> sums;
    std::vector<std::size_t> counts;
    bool changed = true;
    res.inertia_history.push_back(reduce(assign(x, centroids, labels, dist), sums, counts, changed));

    for (std::size_t iter = 1; iter <= opt.max_iters; ++iter) {
        // Reseed empty clusters with the farthest points from clusters that can spare one.
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] != 0) continue;
            std::size_t far = n;
            double far_d = -1.0;
            for (std::size_t i = 0; i < n; ++i)
                if (counts[labels[i]] > 1 && dist[i] > far_d) {
                    far_d = dist[i];
                    far = i;
                }
            if (far == n) break;
            const std::uint32_t old = labels[far];
            auto r = x.row(far);
            for (std::size_t j = 0; j < d; ++j) {
                sums[old * d + j] -= r[j];
                sums[c * d + j] = r[j];
            }
            --counts[old];
            counts[c] = 1;
            labels[far] = static_cast<std::uint32_t>(c);
            dist[far] = 0.0;
        }

        double shift = 0.0;
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] == 0) continue;
            auto row = centroids.row(c);
            double s2 = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                const double v = sums[c * d + j] / static_cast<double>(counts[c]);
                s2 += (v - row[j]) * (v - row[j]);
                row[j] = v;
            }
            shift = std::max(shift, std::sqrt(s2));
        }

        const double inertia = reduce(assign(x, centroids, labels, dist), sums, counts, changed);
        assert(inertia <= res.inertia_history.back() * (1.0 + 1e-12) + 1e-12);
        res.inertia_history.push_back(inertia);
        res.iterations = iter;
        if (!changed || shift < opt.tol) {
            res.converged = true;
            break;
        }
    }

    for (double& v : centroids.data()) v = static_cast<double>(static_cast<float>(v));
    res.codebook.centroids = std::move(centroids);
    res.codebook.seed = opt.seed;
    res.assignments = std::move(labels);
    return res;
}

} // namespace zrnorm
