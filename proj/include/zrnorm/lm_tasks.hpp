#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "zrnorm/lm_tasks_types.hpp"
#include "zrnorm/matrix.hpp"
#include "zrnorm/ngram.hpp"
#include "zrnorm/parallel.hpp"
#include "zrnorm/units.hpp"

namespace zrnorm {

/// Unit sequences by utterance id.
using UnitIndex = std::map<std::string, std::vector<std::uint32_t>, std::less<>>;

inline UnitIndex index_units(const std::vector<UnitSequence>& seqs) {
    UnitIndex out;
    for (const auto& s : seqs) out[s.utt_id] = s.units;
    return out;
}

struct PairsReport {
    double accuracy = 0.0;
    std::size_t n_pairs = 0;
    bool length_normalized = false;
};

namespace lm_detail {

inline const std::vector<std::uint32_t>& lookup(const UnitIndex& units, const std::string& utt,
                                                const std::string& pair_id) {
    auto it = units.find(utt);
    if (it == units.end())
        throw InvalidArgument("pair '" + pair_id + "': utterance '" + utt + "' has no unit sequence");
    return it->second;
}

inline double score(const UnitLanguageModel& lm, const std::vector<std::uint32_t>& units, bool normalized) {
    const auto lp = token_logprobs(lm, units, lm.scores_end());
    if (lp.empty()) return 0.0;
    const double s = std::accumulate(lp.begin(), lp.end(), 0.0);
    return normalized ? s / static_cast<double>(lp.size()) : s;
}

} // namespace lm_detail

/// Fraction of pairs whose positive stimulus gets the higher log-probability (ties 0.5).
/// With `length_normalized`, the per-token mean log-probability is compared instead.
inline PairsReport pairwise_accuracy(const UnitLanguageModel& lm, const std::vector<TaskPair>& pairs,
                                     const UnitIndex& units, bool length_normalized = false) {
    if (pairs.empty()) throw InvalidArgument("pairwise_accuracy: no pairs");
    for (const auto& p : pairs) {
        lm_detail::lookup(units, p.pos_utt_id, p.pair_id);
        lm_detail::lookup(units, p.neg_utt_id, p.pair_id);
    }
    std::vector<double> outcome(pairs.size());
    parallel_for(pairs.size(), [&](std::size_t i) {
        const double pos = lm_detail::score(lm, units.find(pairs[i].pos_utt_id)->second, length_normalized);
        const double neg = lm_detail::score(lm, units.find(pairs[i].neg_utt_id)->second, length_normalized);
        outcome[i] = pos > neg ? 1.0 : (pos == neg ? 0.5 : 0.0);
    });
    // Sum in sorted order so the result does not depend on the pair file's order.
    std::sort(outcome.begin(), outcome.end());
    PairsReport r;
    r.accuracy = std::accumulate(outcome.begin(), outcome.end(), 0.0) / static_cast<double>(pairs.size());
    r.n_pairs = pairs.size();
    r.length_normalized = length_normalized;
    return r;
}

/// Ranks starting at 1; tied values share the mean of their ranks.
inline std::vector<double> average_ranks(std::span<const double> v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j < idx.size() && v[idx[j]] == v[idx[i]]) ++j;
        const double rank = 0.5 * static_cast<double>(i + j + 1);
        for (std::size_t k = i; k < j; ++k) r[idx[k]] = rank;
        i = j;
    }
    return r;
}

inline double pearson(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw InvalidArgument("pearson: lengths differ");
    if (a.size() < 2) throw InvalidArgument("pearson: need at least 2 values");
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
    const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    if (saa == 0.0 || sbb == 0.0) throw InvalidArgument("correlation undefined: constant input");
    return sab / std::sqrt(saa * sbb);
}

inline double spearman(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw InvalidArgument("spearman: lengths differ");
    const auto ra = average_ranks(a);
    const auto rb = average_ranks(b);
    return pearson(ra, rb);
}

enum class Pooling { min, mean, max };

inline std::string_view to_string(Pooling p) {
    switch (p) {
    case Pooling::min: return "min";
    case Pooling::mean: return "mean";
    case Pooling::max: return "max";
    }
    return "min";
}

inline Pooling parse_pooling(std::string_view s) {
    if (s == "min") return Pooling::min;
    if (s == "mean") return Pooling::mean;
    if (s == "max") return Pooling::max;
    throw InvalidArgument("unknown pooling '" + std::string(s) + "' (expected min, mean or max)");
}

/// Column-wise pooling of a T x d matrix of per-token vectors.
inline std::vector<double> pool(const Matrix& tokens, Pooling p) {
    if (tokens.rows() == 0) throw InvalidArgument("pool: no tokens");
    std::vector<double> out(tokens.row(0).begin(), tokens.row(0).end());
    for (std::size_t t = 1; t < tokens.rows(); ++t)
        for (std::size_t j = 0; j < tokens.cols(); ++j) {
            const double v = tokens(t, j);
            if (p == Pooling::min) out[j] = std::min(out[j], v);
            else if (p == Pooling::max) out[j] = std::max(out[j], v);
            else out[j] += v;
        }
    if (p == Pooling::mean)
        for (double& v : out) v /= static_cast<double>(tokens.rows());
    return out;
}

/// Per-token vectors for an utterance id (T x d), or nullptr when unknown.
using TokenVectorSource = std::function<const Matrix*(std::string_view utt_id)>;

inline TokenVectorSource archive_source(const FeatureArchive& archive) {
    return [&archive](std::string_view id) { return archive.find(id); };
}

struct SimiReport {
    double spearman = 0.0;
    std::size_t n_items = 0;
    Pooling pooling = Pooling::min;
    std::vector<std::string> skipped; // pair ids with a zero-norm pooled vector
};

/// Spearman correlation between cosine similarities of pooled representations and human scores.
inline SimiReport semantic_similarity(const TokenVectorSource& source, const std::vector<SimiItem>& items,
                                      Pooling pooling = Pooling::min) {
    if (items.size() < 3) throw InvalidArgument("semantic_similarity: need at least 3 items");
    auto pooled = [&](const std::string& utt, const std::string& pair_id) {
        const Matrix* m = source(utt);
        if (!m) throw InvalidArgument("item '" + pair_id + "': utterance '" + utt + "' has no representation");
        return pool(*m, pooling);
    };
    SimiReport r;
    r.pooling = pooling;
    std::vector<double> model, human;
    for (const auto& it : items) {
        const auto a = pooled(it.utt_a, it.pair_id);
        const auto b = pooled(it.utt_b, it.pair_id);
        if (a.size() != b.size()) throw DimensionMismatch(a.size(), b.size(), "item '" + it.pair_id + "'");
        const double na = std::sqrt(dot(a, a)), nb = std::sqrt(dot(b, b));
        if (na == 0.0 || nb == 0.0) {
            r.skipped.push_back(it.pair_id);
            continue;
        }
        model.push_back(dot(a, b) / (na * nb));
        human.push_back(it.human_score);
    }
    if (model.size() < 3)
        throw InvalidArgument("semantic_similarity: only " + std::to_string(model.size()) +
                              " usable items after skipping zero-norm representations");
    r.n_items = model.size();
    r.spearman = spearman(model, human);
    return r;
}

} // namespace zrnorm
