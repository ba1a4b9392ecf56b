#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "zrnorm/error.hpp"
#include "zrnorm/units.hpp"

namespace zrnorm {

struct ClusterMetricsReport {
    double ari = 0.0;
    double ami = 0.0;
    double homogeneity = 0.0;
    double completeness = 0.0;
    std::size_t n_frames = 0;
    std::size_t n_clusters = 0;
    std::size_t n_classes = 0;
};

/// Sparse contingency table between two labelings of the same items.
struct Contingency {
    std::size_t n = 0;
    std::vector<std::size_t> row_sums; // per cluster
    std::vector<std::size_t> col_sums; // per class
    std::map<std::pair<std::size_t, std::size_t>, std::size_t> cells;

    Contingency(std::span<const std::uint32_t> clusters, std::span<const std::uint32_t> classes) {
        if (clusters.size() != classes.size())
            throw InvalidArgument("contingency: labelings differ in length");
        n = clusters.size();
        std::map<std::uint32_t, std::size_t> ri, ci;
        for (auto c : clusters) ri.emplace(c, 0);
        for (auto c : classes) ci.emplace(c, 0);
        std::size_t k = 0;
        for (auto& [key, idx] : ri) idx = k++;
        k = 0;
        for (auto& [key, idx] : ci) idx = k++;
        row_sums.assign(ri.size(), 0);
        col_sums.assign(ci.size(), 0);
        for (std::size_t t = 0; t < n; ++t) {
            const auto r = ri[clusters[t]], c = ci[classes[t]];
            ++row_sums[r];
            ++col_sums[c];
            ++cells[{r, c}];
        }
    }
};

namespace metrics_detail {

inline double comb2(double x) { return x * (x - 1.0) / 2.0; }

inline double entropy(const std::vector<std::size_t>& sums, double n) {
    double h = 0.0;
    for (auto s : sums)
        if (s > 0) {
            const double p = static_cast<double>(s) / n;
            h -= p * std::log(p);
        }
    return h;
}

/// Expected mutual information of two labelings with fixed marginals under the
/// hypergeometric (permutation) model.
inline double expected_mutual_info(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b, std::size_t n_) {
    const double n = static_cast<double>(n_);
    const double lg_n = std::lgamma(n + 1.0);
    double emi = 0.0;
    for (auto ai_ : a) {
        const double ai = static_cast<double>(ai_);
        for (auto bj_ : b) {
            const double bj = static_cast<double>(bj_);
            const std::size_t lo = std::max<std::size_t>(1, ai_ + bj_ > n_ ? ai_ + bj_ - n_ : 0);
            const std::size_t hi = std::min(ai_, bj_);
            const double fixed = std::lgamma(ai + 1) + std::lgamma(bj + 1) + std::lgamma(n - ai + 1) +
                                 std::lgamma(n - bj + 1) - lg_n;
            for (std::size_t nij_ = lo; nij_ <= hi; ++nij_) {
                const double nij = static_cast<double>(nij_);
                const double log_p = fixed - std::lgamma(nij + 1) - std::lgamma(ai - nij + 1) -
                                     std::lgamma(bj - nij + 1) - std::lgamma(n - ai - bj + nij + 1);
                emi += nij / n * std::log(n * nij / (ai * bj)) * std::exp(log_p);
            }
        }
    }
    return emi;
}

} // namespace metrics_detail

/// ARI (pair counting), AMI (arithmetic-mean normalization, exact expected MI),
/// homogeneity and completeness. `clusters` are the discovered units, `classes` the reference
/// phones. Natural logarithms throughout.
///
/// Conventions for degenerate inputs: ARI = 1 when its denominator vanishes (both labelings
/// trivially identical); AMI = 1 when the chance-adjusted denominator vanishes;
/// homogeneity (completeness) = 1 when the class (cluster) entropy is 0.
inline ClusterMetricsReport clustering_metrics(std::span<const std::uint32_t> clusters,
                                               std::span<const std::uint32_t> classes) {
    using namespace metrics_detail;
    if (clusters.empty()) throw InvalidArgument("clustering_metrics: no frames");
    if (clusters.size() < 2) throw InvalidArgument("clustering_metrics: need at least 2 frames");
    const Contingency ct(clusters, classes);
    const double n = static_cast<double>(ct.n);

    ClusterMetricsReport r;
    r.n_frames = ct.n;
    r.n_clusters = ct.row_sums.size();
    r.n_classes = ct.col_sums.size();

    double sum_cells = 0.0, sum_rows = 0.0, sum_cols = 0.0;
    for (const auto& [rc, v] : ct.cells) sum_cells += comb2(static_cast<double>(v));
    for (auto v : ct.row_sums) sum_rows += comb2(static_cast<double>(v));
    for (auto v : ct.col_sums) sum_cols += comb2(static_cast<double>(v));
    const double expected = sum_rows * sum_cols / comb2(n);
    const double max_index = 0.5 * (sum_rows + sum_cols);
    r.ari = max_index == expected ? 1.0 : (sum_cells - expected) / (max_index - expected);

    const double h_clusters = entropy(ct.row_sums, n);
    const double h_classes = entropy(ct.col_sums, n);
    double mi = 0.0, h_class_given_cluster = 0.0, h_cluster_given_class = 0.0;
    for (const auto& [rc, v] : ct.cells) {
        const double nij = static_cast<double>(v);
        const double ai = static_cast<double>(ct.row_sums[rc.first]);
        const double bj = static_cast<double>(ct.col_sums[rc.second]);
        mi += nij / n * std::log(n * nij / (ai * bj));
        h_class_given_cluster -= nij / n * std::log(nij / ai);
        h_cluster_given_class -= nij / n * std::log(nij / bj);
    }

    if (r.n_clusters == 1 && r.n_classes == 1) {
        r.ami = 1.0;
    } else {
        const double emi = expected_mutual_info(ct.row_sums, ct.col_sums, ct.n);
        const double denom = 0.5 * (h_clusters + h_classes) - emi;
        r.ami = std::abs(denom) < 1e-15 ? 1.0 : (mi - emi) / denom;
    }
    r.homogeneity = h_classes == 0.0 ? 1.0 : 1.0 - h_class_given_cluster / h_classes;
    r.completeness = h_clusters == 0.0 ? 1.0 : 1.0 - h_cluster_given_class / h_clusters;
    return r;
}

/// Interns string labels to dense ids in sorted order.
inline std::vector<std::uint32_t> intern_labels(std::span<const std::string> labels) {
    std::map<std::string, std::uint32_t> ids;
    for (const auto& l : labels) ids.emplace(l, 0);
    std::uint32_t k = 0;
    for (auto& [l, id] : ids) id = k++;
    std::vector<std::uint32_t> out;
    out.reserve(labels.size());
    for (const auto& l : labels) out.push_back(ids[l]);
    return out;
}

inline ClusterMetricsReport clustering_metrics(const FramePairs& pairs) {
    const auto classes = intern_labels(pairs.phones);
    return clustering_metrics(pairs.units, classes);
}

} // namespace zrnorm
