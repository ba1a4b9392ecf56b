#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <set>
#include <span>
#include <vector>

#include "zrnorm/corpus.hpp"
#include "zrnorm/matrix.hpp"
#include "zrnorm/parallel.hpp"
#include "zrnorm/random.hpp"

namespace zrnorm {

struct ForestConfig {
    std::size_t n_trees = 100;
    std::size_t max_depth = 12;
    std::size_t features_per_split = 0; // 0 means round(sqrt(d))
    std::size_t min_samples_leaf = 5;
    bool bootstrap = true;
    std::uint64_t seed = 0;

    std::size_t split_features(std::size_t d) const {
        const std::size_t f = features_per_split ? features_per_split
                                                 : static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(d))));
        return std::max<std::size_t>(1, f);
    }

    void validate(std::size_t d) const {
        if (n_trees == 0 || max_depth == 0 || min_samples_leaf == 0)
            throw InvalidArgument("ForestConfig: values must be positive");
        if (split_features(d) > d) throw InvalidArgument("ForestConfig: features_per_split exceeds dimensionality");
    }
};

struct TreeNode {
    int feature = -1; // -1 for leaves
    double threshold = 0.0;
    std::uint32_t left = 0, right = 0;
    std::uint32_t label = 0; // majority class of the node's training samples
};

/// CART classification tree with Gini impurity.
struct DecisionTree {
    std::vector<TreeNode> nodes;
    std::vector<std::size_t> bootstrap; // training sample indices (with repetition)
    std::vector<double> importance;     // impurity decrease per dimension, sample-weighted

    std::uint32_t predict(std::span<const double> x) const {
        std::size_t n = 0;
        while (nodes[n].feature >= 0)
            n = x[static_cast<std::size_t>(nodes[n].feature)] <= nodes[n].threshold ? nodes[n].left : nodes[n].right;
        return nodes[n].label;
    }

    friend bool operator==(const DecisionTree& a, const DecisionTree& b) {
        if (a.nodes.size() != b.nodes.size() || a.bootstrap != b.bootstrap || a.importance != b.importance) return false;
        for (std::size_t i = 0; i < a.nodes.size(); ++i) {
            const auto &x = a.nodes[i], &y = b.nodes[i];
            if (x.feature != y.feature || x.threshold != y.threshold || x.left != y.left || x.right != y.right ||
                x.label != y.label)
                return false;
        }
        return true;
    }
};

namespace forest_detail {

struct Builder {
    const Matrix& x;
    std::span<const std::uint32_t> y;
    std::size_t n_classes;
    const ForestConfig& cfg;
    Rng& rng;
    DecisionTree& tree;
    std::size_t n_split_features;

    static double weighted_gini(const std::vector<double>& counts, double n) {
        if (n <= 0.0) return 0.0;
        double sq = 0.0;
        for (double c : counts) sq += c * c;
        return n - sq / n; // n * gini
    }

    std::uint32_t majority(const std::vector<double>& counts) const {
        return static_cast<std::uint32_t>(std::max_element(counts.begin(), counts.end()) - counts.begin());
    }

    std::uint32_t build(std::vector<std::size_t>& idx, std::size_t depth) {
        const auto node_id = static_cast<std::uint32_t>(tree.nodes.size());
        tree.nodes.emplace_back();
        std::vector<double> counts(n_classes, 0.0);
        for (auto i : idx) counts[y[i]] += 1.0;
        tree.nodes[node_id].label = majority(counts);
        const double n = static_cast<double>(idx.size());
        const double parent = weighted_gini(counts, n);
        if (depth >= cfg.max_depth || idx.size() < 2 * cfg.min_samples_leaf || parent <= 0.0) return node_id;

        // Sample candidate features without replacement.
        std::vector<std::size_t> feats(x.cols());
        std::iota(feats.begin(), feats.end(), std::size_t{0});
        for (std::size_t k = 0; k < n_split_features; ++k)
            std::swap(feats[k], feats[k + uniform_index(rng, feats.size() - k)]);

        double best_child = parent;
        int best_feature = -1;
        double best_threshold = 0.0;
        std::vector<std::pair<double, std::uint32_t>> col(idx.size());
        std::vector<double> left(n_classes), right(n_classes);
        for (std::size_t k = 0; k < n_split_features; ++k) {
            const std::size_t f = feats[k];
            for (std::size_t i = 0; i < idx.size(); ++i) col[i] = {x(idx[i], f), y[idx[i]]};
            std::sort(col.begin(), col.end());
            std::fill(left.begin(), left.end(), 0.0);
            right = counts;
            double sq_l = 0.0, sq_r = 0.0;
            for (double c : right) sq_r += c * c;
            for (std::size_t i = 0; i + 1 < col.size(); ++i) {
                const auto c = col[i].second;
                sq_l += 2.0 * left[c] + 1.0;
                left[c] += 1.0;
                sq_r -= 2.0 * right[c] - 1.0;
                right[c] -= 1.0;
                const std::size_t nl = i + 1, nr = col.size() - nl;
                if (col[i].first == col[i + 1].first) continue;
                if (nl < cfg.min_samples_leaf || nr < cfg.min_samples_leaf) continue;
                const double child = (static_cast<double>(nl) - sq_l / static_cast<double>(nl)) +
                                     (static_cast<double>(nr) - sq_r / static_cast<double>(nr));
                if (child < best_child - 1e-12) {
                    best_child = child;
                    best_feature = static_cast<int>(f);
                    best_threshold = col[i].first + 0.5 * (col[i + 1].first - col[i].first);
                }
            }
        }
        if (best_feature < 0) return node_id;

        tree.importance[static_cast<std::size_t>(best_feature)] += parent - best_child;
        std::vector<std::size_t> li, ri;
        for (auto i : idx) (x(i, static_cast<std::size_t>(best_feature)) <= best_threshold ? li : ri).push_back(i);
        idx.clear();
        idx.shrink_to_fit();
        tree.nodes[node_id].feature = best_feature;
        tree.nodes[node_id].threshold = best_threshold;
        const auto l = build(li, depth + 1);
        const auto r = build(ri, depth + 1);
        tree.nodes[node_id].left = l;
        tree.nodes[node_id].right = r;
        return node_id;
    }
};

} // namespace forest_detail

/// Trains tree `tree_index` of a forest. Its bootstrap sample and split choices come from a
/// substream of cfg.seed keyed by the tree index, so any tree can be rebuilt in isolation.
inline DecisionTree train_tree(const Matrix& x, std::span<const std::uint32_t> y, std::size_t n_classes,
                               const ForestConfig& cfg, std::size_t tree_index) {
    DecisionTree tree;
    tree.importance.assign(x.cols(), 0.0);
    Rng rng = make_rng(cfg.seed, {0x74726565ULL, tree_index});
    const std::size_t n = x.rows();
    tree.bootstrap.resize(n);
    if (cfg.bootstrap)
        for (auto& i : tree.bootstrap) i = uniform_index(rng, n);
    else
        std::iota(tree.bootstrap.begin(), tree.bootstrap.end(), std::size_t{0});
    std::vector<std::size_t> idx = tree.bootstrap;
    forest_detail::Builder b{x, y, n_classes, cfg, rng, tree, cfg.split_features(x.cols())};
    b.build(idx, 0);
    return tree;
}

struct RandomForest {
    std::vector<DecisionTree> trees;
    std::size_t n_classes = 0;

    /// Majority vote of the trees; ties go to the lowest class id.
    std::uint32_t predict(std::span<const double> x) const {
        std::vector<std::size_t> votes(n_classes, 0);
        for (const auto& t : trees) ++votes[t.predict(x)];
        return static_cast<std::uint32_t>(std::max_element(votes.begin(), votes.end()) - votes.begin());
    }
};

inline RandomForest train_forest(const Matrix& x, std::span<const std::uint32_t> y, std::size_t n_classes,
                                 const ForestConfig& cfg) {
    cfg.validate(x.cols());
    if (x.rows() != y.size()) throw InvalidArgument("forest: frames and labels differ in length");
    if (std::set<std::uint32_t>(y.begin(), y.end()).size() < 2)
        throw InvalidArgument("forest: need at least 2 speakers");
    for (auto v : y)
        if (v >= n_classes) throw InvalidArgument("forest: label out of range");
    RandomForest f;
    f.n_classes = n_classes;
    f.trees.resize(cfg.n_trees);
    parallel_for(cfg.n_trees, [&](std::size_t t) { f.trees[t] = train_tree(x, y, n_classes, cfg, t); });
    return f;
}

struct ImportanceRanking {
    std::vector<double> importance; // sums to 1
    std::vector<std::size_t> order; // most to least important; ties by dimension index
};

inline ImportanceRanking ranking_from_importance(std::vector<double> importance) {
    ImportanceRanking r;
    const double total = std::accumulate(importance.begin(), importance.end(), 0.0);
    if (total > 0.0)
        for (double& v : importance) v /= total;
    else
        std::fill(importance.begin(), importance.end(), 1.0 / static_cast<double>(importance.size()));
    r.importance = std::move(importance);
    r.order.resize(r.importance.size());
    std::iota(r.order.begin(), r.order.end(), std::size_t{0});
    std::stable_sort(r.order.begin(), r.order.end(),
                     [&](std::size_t a, std::size_t b) { return r.importance[a] > r.importance[b]; });
    return r;
}

/// Gini importance of each dimension for predicting the speaker, summed over trees and
/// normalized to 1.
inline ImportanceRanking forest_importance(const RandomForest& forest) {
    std::vector<double> total(forest.trees.empty() ? 0 : forest.trees.front().importance.size(), 0.0);
    for (const auto& t : forest.trees)
        for (std::size_t j = 0; j < total.size(); ++j) total[j] += t.importance[j];
    return ranking_from_importance(std::move(total));
}

inline ImportanceRanking forest_importance(const Matrix& x, std::span<const std::uint32_t> speakers,
                                           std::size_t n_speakers, const ForestConfig& cfg) {
    return forest_importance(train_forest(x, speakers, n_speakers, cfg));
}

/// Dimensions kept when dropping the most speaker-predictive ones first, in original order.
inline std::vector<std::size_t> kept_dimensions(const ImportanceRanking& ranking, std::size_t n_keep) {
    const std::size_t d = ranking.order.size();
    if (n_keep < 1 || n_keep > d)
        throw InvalidArgument("prune: n_keep must be in [1, " + std::to_string(d) + "], got " + std::to_string(n_keep));
    std::vector<std::size_t> keep(ranking.order.begin() + static_cast<std::ptrdiff_t>(d - n_keep), ranking.order.end());
    std::sort(keep.begin(), keep.end());
    return keep;
}

inline FeatureArchive prune(const FeatureArchive& archive, const ImportanceRanking& ranking, std::size_t n_keep) {
    if (ranking.order.size() != archive.dim()) throw DimensionMismatch(archive.dim(), ranking.order.size(), "prune");
    const auto keep = kept_dimensions(ranking, n_keep);
    FeatureArchive out(n_keep, archive.frame_period_us());
    for (const auto& u : archive.utterances()) out.add(u.id, u.frames.select_cols(keep));
    out.provenance = archive.provenance;
    return out;
}

} // namespace zrnorm
