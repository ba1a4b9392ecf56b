#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "zrnorm/corpus.hpp"
#include "zrnorm/normalize.hpp"
#include "zrnorm/parallel.hpp"
#include "zrnorm/random.hpp"

namespace zrnorm {

struct SpeakerEmbedding {
    std::string speaker_id;
    std::vector<double> embedding;
    std::size_t n_enrolled = 0;
};

struct TestUtterance {
    std::string utt_id;
    std::string speaker_id;
    std::vector<double> mean;
};

struct Enrollment {
    std::vector<SpeakerEmbedding> speakers; // sorted by speaker id
    std::vector<TestUtterance> tests;       // held-out utterances, manifest order
};

/// Per speaker, picks `n_enroll` utterances at random (seeded per speaker) and averages their
/// utterance means into one embedding; the remaining utterances become the test set.
/// Only manifest utterances present in the archive take part.
inline Enrollment enroll(const FeatureArchive& archive, const Manifest& manifest, std::size_t n_enroll,
                         std::uint64_t seed) {
    if (n_enroll == 0) throw InvalidArgument("enroll: n_enroll must be positive");
    auto by_spk = manifest.utterances_by_speaker();
    Enrollment out;
    std::map<std::string, std::vector<std::string>> held_out;
    std::size_t spk_index = 0;
    for (auto& [spk, utts] : by_spk) {
        std::erase_if(utts, [&](const std::string& u) { return archive.find(u) == nullptr; });
        if (utts.size() <= n_enroll)
            throw InvalidArgument("enroll: speaker '" + spk + "' has " + std::to_string(utts.size()) +
                                  " utterances, needs more than n_enroll=" + std::to_string(n_enroll));
        Rng rng = make_rng(seed, {0x656E726FULL, spk_index++});
        std::vector<std::string> order = utts;
        shuffle(order.begin(), order.end(), rng);
        SpeakerEmbedding emb{spk, std::vector<double>(archive.dim(), 0.0), n_enroll};
        for (std::size_t i = 0; i < n_enroll; ++i) {
            const auto m = utterance_mean(archive.frames(order[i]));
            for (std::size_t j = 0; j < m.size(); ++j) emb.embedding[j] += m[j];
        }
        for (double& v : emb.embedding) v /= static_cast<double>(n_enroll);
        out.speakers.push_back(std::move(emb));
        held_out[spk].assign(order.begin() + static_cast<std::ptrdiff_t>(n_enroll), order.end());
    }
    std::set<std::string> test_ids;
    for (const auto& [spk, utts] : held_out) test_ids.insert(utts.begin(), utts.end());
    for (const auto& r : manifest.records())
        if (test_ids.contains(r.utt_id)) out.tests.push_back({r.utt_id, r.speaker_id, utterance_mean(archive.frames(r.utt_id))});
    return out;
}

struct Trial {
    std::string speaker_id; // enrolled speaker
    std::string utt_id;     // test utterance
    double distance = 0.0;
    bool is_target = false;
};

/// One trial per (test utterance, enrolled speaker); Euclidean distance between the utterance
/// mean and the speaker embedding.
inline std::vector<Trial> score_trials(const std::vector<SpeakerEmbedding>& speakers,
                                       const std::vector<TestUtterance>& tests) {
    for (const auto& s : speakers)
        for (const auto& t : tests)
            if (s.embedding.size() != t.mean.size())
                throw DimensionMismatch(s.embedding.size(), t.mean.size(), "score_trials");
    std::vector<Trial> trials(tests.size() * speakers.size());
    parallel_for(tests.size(), [&](std::size_t i) {
        for (std::size_t k = 0; k < speakers.size(); ++k)
            trials[i * speakers.size() + k] = {speakers[k].speaker_id, tests[i].utt_id,
                                               std::sqrt(squared_distance(tests[i].mean, speakers[k].embedding)),
                                               speakers[k].speaker_id == tests[i].speaker_id};
    });
    return trials;
}

/// Fraction of test utterances whose nearest enrolled speaker is their own. Distance ties go
/// to the lexicographically smallest speaker id. Every test utterance must have been scored
/// against the same full speaker set.
inline double closed_set_accuracy(const std::vector<Trial>& trials) {
    std::set<std::string> speakers;
    for (const auto& t : trials) speakers.insert(t.speaker_id);
    struct Best {
        std::string speaker;
        double distance = std::numeric_limits<double>::infinity();
        bool target_seen = false;
        std::string truth;
        std::set<std::string> seen;
    };
    std::map<std::string, Best> per_utt;
    for (const auto& t : trials) {
        auto& b = per_utt[t.utt_id];
        b.seen.insert(t.speaker_id);
        if (t.is_target) {
            b.target_seen = true;
            b.truth = t.speaker_id;
        }
        if (t.distance < b.distance || (t.distance == b.distance && t.speaker_id < b.speaker)) {
            b.distance = t.distance;
            b.speaker = t.speaker_id;
        }
    }
    if (per_utt.empty()) throw InvalidArgument("closed_set_accuracy: no trials");
    std::size_t correct = 0;
    for (const auto& [utt, b] : per_utt) {
        if (b.seen.size() != speakers.size())
            throw InvalidArgument("closed_set_accuracy: utterance '" + utt + "' is missing trials");
        if (!b.target_seen) throw InvalidArgument("closed_set_accuracy: utterance '" + utt + "' has no target trial");
        if (b.speaker == b.truth) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(per_utt.size());
}

struct EerResult {
    double eer = 0.0;
    double threshold = 0.0;
};

/// Equal error rate over a finite threshold sweep. Scores: larger means more likely target.
///
/// Candidate thresholds are -inf, the midpoints of consecutive sorted unique scores, and +inf.
/// At threshold t, FRR = fraction of targets with score < t and FAR = fraction of impostors
/// with score >= t. The EER is (FRR + FAR) / 2 at the threshold minimizing |FRR - FAR|;
/// remaining ties go to the smaller FRR + FAR, then the lower threshold.
inline EerResult compute_eer(std::span<const double> scores, std::span<const std::uint8_t> is_target) {
    if (scores.size() != is_target.size()) throw InvalidArgument("compute_eer: scores and labels differ in length");
    std::vector<std::pair<double, bool>> s;
    s.reserve(scores.size());
    std::size_t n_tar = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (std::isnan(scores[i])) throw InvalidArgument("compute_eer: NaN score");
        s.emplace_back(scores[i], is_target[i]);
        n_tar += is_target[i] ? 1 : 0;
    }
    const std::size_t n_imp = s.size() - n_tar;
    if (n_tar == 0 || n_imp == 0) throw InvalidArgument("compute_eer: need at least one target and one impostor trial");
    std::sort(s.begin(), s.end(), [](const auto& a, const auto& b) { return a.first < b.first; });

    // Sweep upward: below the lowest score nothing is rejected.
    std::size_t tar_below = 0, imp_below = 0;
    EerResult best{0.0, -std::numeric_limits<double>::infinity()};
    double best_gap = std::numeric_limits<double>::infinity();
    double best_sum = std::numeric_limits<double>::infinity();
    auto consider = [&](double threshold) {
        const double frr = static_cast<double>(tar_below) / static_cast<double>(n_tar);
        const double far = static_cast<double>(n_imp - imp_below) / static_cast<double>(n_imp);
        const double gap = std::abs(frr - far);
        const double sum = frr + far;
        if (gap < best_gap || (gap == best_gap && sum < best_sum)) {
            best_gap = gap;
            best_sum = sum;
            best = {0.5 * sum, threshold};
        }
    };
    consider(-std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < s.size();) {
        std::size_t j = i;
        while (j < s.size() && s[j].first == s[i].first) {
            (s[j].second ? tar_below : imp_below)++;
            ++j;
        }
        const double threshold = j < s.size() ? s[i].first + 0.5 * (s[j].first - s[i].first)
                                              : std::numeric_limits<double>::infinity();
        consider(threshold);
        i = j;
    }
    return best;
}

struct VerifyReport {
    double eer = 0.0;
    double eer_threshold = 0.0; // on the score scale (negated distance)
    double accuracy = 0.0;
    std::size_t n_trials = 0;
    std::size_t n_tests = 0;
    std::size_t n_speakers = 0;
    std::size_t n_enroll = 0;
    std::uint64_t seed = 0;
};

/// Enrollment, exhaustive trial scoring, closed-set accuracy and EER (scores = -distance).
inline VerifyReport verify_speakers(const FeatureArchive& archive, const Manifest& manifest, std::size_t n_enroll,
                                    std::uint64_t seed) {
    const auto en = enroll(archive, manifest, n_enroll, seed);
    const auto trials = score_trials(en.speakers, en.tests);
    std::vector<double> scores;
    std::vector<std::uint8_t> labels;
    for (const auto& t : trials) {
        scores.push_back(-t.distance);
        labels.push_back(t.is_target ? 1 : 0);
    }
    const auto eer = compute_eer(scores, labels);
    VerifyReport r;
    r.eer = eer.eer;
    r.eer_threshold = eer.threshold;
    r.accuracy = closed_set_accuracy(trials);
    r.n_trials = trials.size();
    r.n_tests = en.tests.size();
    r.n_speakers = en.speakers.size();
    r.n_enroll = n_enroll;
    r.seed = seed;
    return r;
}

} // namespace zrnorm
