#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "zrnorm/corpus.hpp"
#include "zrnorm/dtw.hpp"
#include "zrnorm/parallel.hpp"
#include "zrnorm/random.hpp"
#include "zrnorm/units.hpp"

namespace zrnorm {

/// One triphone token: three consecutive aligned segments of an utterance.
struct AbxItem {
    std::string utt_id;
    std::string speaker_id;
    std::string left, center, right;
    std::size_t begin = 0; // first frame of the left phone
    std::size_t end = 0;   // one past the last frame of the right phone
};

enum class AbxMode { within, across };

inline std::string_view to_string(AbxMode m) { return m == AbxMode::within ? "within" : "across"; }

/// One window per three consecutive segments; windows centred on silence are dropped.
/// Utterances missing from the manifest are skipped.
inline std::vector<AbxItem> extract_items(const Alignment& alignment, const Manifest& manifest,
                                          const std::set<std::string>& silence = default_silence_labels()) {
    std::vector<AbxItem> items;
    for (const auto& u : alignment.utterances()) {
        const auto* rec = manifest.find(u.utt_id);
        if (!rec) continue;
        const auto& s = u.segments;
        for (std::size_t i = 0; i + 2 < s.size(); ++i) {
            if (silence.contains(s[i + 1].phone)) continue;
            items.push_back({u.utt_id, rec->speaker_id, s[i].phone, s[i + 1].phone, s[i + 2].phone, s[i].start, s[i + 2].end});
        }
    }
    return items;
}

struct AbxOptions {
    AbxMode mode = AbxMode::within;
    /// Cap on X instances per across-speaker cell, sampled with `seed`.
    std::size_t max_x = 10;
    std::uint64_t seed = 0;
};

struct AbxCell {
    std::string triphone_a; // "left-center-right"
    std::string triphone_b;
    std::string speaker_ab;
    std::string speaker_x; // equals speaker_ab in within mode
    double error = 0.0;
    std::size_t n_triples = 0;
};

struct AbxReport {
    AbxMode mode = AbxMode::within;
    double error_rate = 0.0;
    std::size_t n_cells = 0;
    std::size_t n_skipped_cells = 0;
    std::size_t n_triples = 0;
    std::size_t n_pairs = 0; // unordered triphone pairs contributing to error_rate
    std::size_t max_x = 0;
    std::uint64_t seed = 0;
    std::vector<AbxCell> cells;
};

/// Aggregates cell errors: mean over speaker contexts per ordered triphone pair, then the two
/// orders of each pair are averaged, then the mean over unordered pairs.
inline double aggregate_abx(const std::vector<AbxCell>& cells, std::size_t* n_pairs = nullptr) {
    std::map<std::pair<std::string, std::string>, std::pair<double, std::size_t>> ordered;
    for (const auto& c : cells) {
        auto& acc = ordered[{c.triphone_a, c.triphone_b}];
        acc.first += c.error;
        ++acc.second;
    }
    std::map<std::pair<std::string, std::string>, std::pair<double, std::size_t>> unordered;
    for (const auto& [key, acc] : ordered) {
        auto k = key.first < key.second ? key : std::make_pair(key.second, key.first);
        auto& u = unordered[k];
        u.first += acc.first / static_cast<double>(acc.second);
        ++u.second;
    }
    double total = 0.0;
    for (const auto& [key, u] : unordered) total += u.first / static_cast<double>(u.second);
    if (n_pairs) *n_pairs = unordered.size();
    return unordered.empty() ? 0.0 : total / static_cast<double>(unordered.size());
}

namespace abx_detail {

inline double triple_score(double d_ax, double d_bx) { return d_ax > d_bx ? 1.0 : (d_ax == d_bx ? 0.5 : 0.0); }

struct Group {
    std::size_t spk_ab;
    std::size_t spk_x;
    std::size_t ta;
    std::vector<std::size_t> tbs; // triphones sharing context with ta, present for spk_ab
};

struct GroupResult {
    std::vector<AbxCell> cells;
    std::size_t skipped = 0;
};

} // namespace abx_detail

/// Minimal-pair ABX error over triphones, with DTW of frame cosine distances as the
/// dissimilarity. Within mode draws A, B, X from one speaker; across mode draws A and B
/// from one speaker and X from another.
///
/// Cells need at least two A instances (within) or one A, B and X instance (across); cells
/// failing this are skipped and counted. Ties between d(A,X) and d(B,X) score 0.5.
inline AbxReport abx_score(const std::vector<AbxItem>& items, const FeatureArchive& features, const AbxOptions& opt) {
    using namespace abx_detail;
    const bool within = opt.mode == AbxMode::within;
    if (!within && opt.max_x == 0) throw InvalidArgument("abx: max_x must be positive");

    // Intern triphones and speakers in sorted order so cell order is canonical.
    std::map<std::tuple<std::string, std::string, std::string>, std::size_t> tri_ids;
    std::map<std::string, std::size_t> spk_ids;
    for (const auto& it : items) {
        tri_ids.emplace(std::make_tuple(it.left, it.center, it.right), 0);
        spk_ids.emplace(it.speaker_id, 0);
    }
    std::vector<std::string> tri_names, spk_names;
    std::vector<std::pair<std::string, std::string>> tri_context;
    for (auto& [k, id] : tri_ids) {
        id = tri_names.size();
        tri_names.push_back(std::get<0>(k) + "-" + std::get<1>(k) + "-" + std::get<2>(k));
        tri_context.emplace_back(std::get<0>(k), std::get<2>(k));
    }
    for (auto& [k, id] : spk_ids) {
        id = spk_names.size();
        spk_names.push_back(k);
    }

    std::vector<FrameView> views(items.size());
    std::map<std::pair<std::size_t, std::size_t>, std::vector<std::size_t>> by_tri_spk;
    for (std::size_t i = 0; i < items.size(); ++i) {
        const auto& it = items[i];
        const Matrix& m = features.frames(it.utt_id);
        if (it.end > m.rows() || it.begin >= it.end)
            throw InvalidArgument("abx: item span [" + std::to_string(it.begin) + ", " + std::to_string(it.end) +
                                  ") outside utterance '" + it.utt_id + "'");
        views[i] = FrameView(m, it.begin, it.end);
        by_tri_spk[{tri_ids.at({it.left, it.center, it.right}), spk_ids.at(it.speaker_id)}].push_back(i);
    }

    // Triphones per (speaker, context).
    std::map<std::tuple<std::size_t, std::string, std::string>, std::vector<std::size_t>> by_spk_ctx;
    for (const auto& [key, idx] : by_tri_spk)
        by_spk_ctx[{key.second, tri_context[key.first].first, tri_context[key.first].second}].push_back(key.first);

    std::vector<Group> groups;
    for (const auto& [key, tris] : by_spk_ctx) {
        if (tris.size() < 2) continue;
        const std::size_t spk = std::get<0>(key);
        for (std::size_t ta : tris) {
            std::vector<std::size_t> tbs;
            for (std::size_t tb : tris)
                if (tb != ta) tbs.push_back(tb);
            if (within) {
                groups.push_back({spk, spk, ta, tbs});
            } else {
                for (std::size_t sx = 0; sx < spk_names.size(); ++sx)
                    if (sx != spk && by_tri_spk.contains({ta, sx})) groups.push_back({spk, sx, ta, tbs});
            }
        }
    }

    std::vector<GroupResult> results(groups.size());
    parallel_for(groups.size(), [&](std::size_t gi) {
        const Group& g = groups[gi];
        GroupResult& out = results[gi];
        const auto& a_items = by_tri_spk.at({g.ta, g.spk_ab});
        if (within && a_items.size() < 2) {
            out.skipped = g.tbs.size();
            return;
        }
        std::vector<std::size_t> x_items = within ? a_items : by_tri_spk.at({g.ta, g.spk_x});
        if (!within && x_items.size() > opt.max_x) {
            Rng rng = make_rng(opt.seed, {0x616278ULL, g.ta, g.spk_ab, g.spk_x});
            shuffle(x_items.begin(), x_items.end(), rng);
            x_items.resize(opt.max_x);
            std::sort(x_items.begin(), x_items.end());
        }
        // d(a, x) for every A and X instance.
        std::vector<double> d_ax(a_items.size() * x_items.size());
        for (std::size_t xi = 0; xi < x_items.size(); ++xi)
            for (std::size_t ai = 0; ai < a_items.size(); ++ai) {
                if (within && a_items[ai] == x_items[xi]) continue;
                if (within && ai < xi) {
                    d_ax[ai * x_items.size() + xi] = d_ax[xi * x_items.size() + ai];
                    continue;
                }
                d_ax[ai * x_items.size() + xi] = dtw_distance(views[a_items[ai]], views[x_items[xi]]);
            }
        for (std::size_t tb : g.tbs) {
            const auto& b_items = by_tri_spk.at({tb, g.spk_ab});
            double sum = 0.0;
            std::size_t n = 0;
            for (std::size_t xi = 0; xi < x_items.size(); ++xi)
                for (std::size_t b : b_items) {
                    const double dbx = dtw_distance(views[b], views[x_items[xi]]);
                    for (std::size_t ai = 0; ai < a_items.size(); ++ai) {
                        if (within && a_items[ai] == x_items[xi]) continue;
                        sum += triple_score(d_ax[ai * x_items.size() + xi], dbx);
                        ++n;
                    }
                }
            if (n == 0) {
                ++out.skipped;
                continue;
            }
            out.cells.push_back({tri_names[g.ta], tri_names[tb], spk_names[g.spk_ab], spk_names[g.spk_x],
                                 sum / static_cast<double>(n), n});
        }
    });

    AbxReport report;
    report.mode = opt.mode;
    report.max_x = within ? 0 : opt.max_x;
    report.seed = opt.seed;
    for (auto& r : results) {
        report.n_skipped_cells += r.skipped;
        for (auto& c : r.cells) {
            report.n_triples += c.n_triples;
            report.cells.push_back(std::move(c));
        }
    }
    report.n_cells = report.cells.size();
    if (report.cells.empty())
        throw Error(std::string("abx (") + std::string(to_string(opt.mode)) + "): no valid cells (" +
                    std::to_string(report.n_skipped_cells) + " skipped)");
    report.error_rate = aggregate_abx(report.cells, &report.n_pairs);
    return report;
}

} // namespace zrnorm
