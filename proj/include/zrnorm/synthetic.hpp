#pragma once

#include <algorithm>
#include <cstdint>
#include <iomanip>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "zrnorm/corpus.hpp"
#include "zrnorm/lm_tasks_types.hpp"
#include "zrnorm/parallel.hpp"
#include "zrnorm/random.hpp"

namespace zrnorm {

/// Inclusive integer range.
struct IntRange {
    std::size_t lo = 0;
    std::size_t hi = 0;
};

/// Generator for a corpus with known speaker, gender and phone structure.
///
/// Every frame is speaker_vector + gender_vector + phone_vector + noise. Phone sequences are
/// built from a seeded lexicon of words chained by a sparse word-successor grammar, so that
/// triphones recur (for ABX) and unit sequences carry word-level regularities (for the LM tasks).
struct SynthConfig {
    std::size_t n_speakers = 20;
    std::size_t n_phones = 10;
    std::size_t dim = 16;
    std::size_t utterances_per_speaker = 10;
    std::size_t segments_per_utterance = 40;
    IntRange frames_per_segment{3, 10};
    double sigma_speaker = 1.0;
    double sigma_phone = 1.0;
    double sigma_gender = 0.5;
    double sigma_noise = 0.1;
    std::uint64_t seed = 1;

    std::size_t n_words = 40;
    IntRange word_length{3, 5};
    std::size_t successors_per_word = 3;

    void validate() const {
        auto positive = [](std::size_t v, const char* name) {
            if (v < 1) throw InvalidArgument(std::string("SynthConfig: ") + name + " must be >= 1");
        };
        positive(n_speakers, "n_speakers");
        positive(n_phones, "n_phones");
        positive(dim, "dim");
        positive(utterances_per_speaker, "utterances_per_speaker");
        positive(segments_per_utterance, "segments_per_utterance");
        positive(n_words, "n_words");
        positive(successors_per_word, "successors_per_word");
        if (frames_per_segment.lo < 1 || frames_per_segment.hi < frames_per_segment.lo)
            throw InvalidArgument("SynthConfig: frames_per_segment range must be non-empty with lo >= 1");
        if (word_length.lo < 1 || word_length.hi < word_length.lo)
            throw InvalidArgument("SynthConfig: word_length range must be non-empty with lo >= 1");
        for (double s : {sigma_speaker, sigma_phone, sigma_gender, sigma_noise})
            if (!(s >= 0.0)) throw InvalidArgument("SynthConfig: sigmas must be non-negative");
    }
};

/// Latent vectors the generator used; the test oracle for everything downstream.
struct SynthTruth {
    Matrix speaker_vectors; // n_speakers x dim
    Matrix gender_vectors;  // 2 x dim (row 0 = F, row 1 = M), already scaled
    Matrix phone_vectors;   // n_phones x dim
    std::vector<Gender> speaker_gender;
    std::vector<std::vector<std::size_t>> lexicon;    // word -> phone indices
    std::vector<std::vector<std::size_t>> successors; // word -> allowed next words
};

struct SyntheticCorpus {
    FeatureArchive archive;
    Manifest manifest;
    Alignment alignment;
    SynthTruth truth;
};

namespace synth_detail {

enum Stream : std::uint64_t {
    speaker = 1,
    gender = 2,
    phone = 3,
    lexicon = 4,
    content = 5,
    noise = 6,
    tasks = 7,
};

inline std::string padded(const char* prefix, std::size_t i, std::size_t width) {
    std::ostringstream s;
    s << prefix << std::setw(static_cast<int>(width)) << std::setfill('0') << i;
    return s.str();
}

inline std::size_t digits(std::size_t n) {
    std::size_t d = 1;
    while (n >= 10) {
        n /= 10;
        ++d;
    }
    return d;
}

inline double to_f32(double v) { return static_cast<double>(static_cast<float>(v)); }

inline Matrix gaussian_rows(std::size_t rows, std::size_t dim, double sigma, std::uint64_t seed, Stream stream) {
    Matrix m(rows, dim);
    for (std::size_t r = 0; r < rows; ++r) {
        Rng rng = make_rng(seed, {stream, r});
        for (double& v : m.row(r)) v = sigma * standard_normal(rng);
    }
    return m;
}

inline std::size_t draw_in(Rng& rng, IntRange r) { return r.lo + uniform_index(rng, r.hi - r.lo + 1); }

} // namespace synth_detail

inline std::string synth_speaker_id(const SynthConfig& c, std::size_t spk) {
    return synth_detail::padded("s", spk, std::max<std::size_t>(2, synth_detail::digits(c.n_speakers - 1)));
}

inline std::string synth_phone_name(std::size_t phone) { return "p" + std::to_string(phone); }

inline SynthTruth make_synth_truth(const SynthConfig& c) {
    using namespace synth_detail;
    c.validate();
    SynthTruth t;
    t.speaker_vectors = gaussian_rows(c.n_speakers, c.dim, c.sigma_speaker, c.seed, Stream::speaker);
    t.gender_vectors = gaussian_rows(2, c.dim, c.sigma_gender, c.seed, Stream::gender);
    t.phone_vectors = gaussian_rows(c.n_phones, c.dim, c.sigma_phone, c.seed, Stream::phone);
    for (std::size_t i = 0; i < c.n_speakers; ++i) t.speaker_gender.push_back(i % 2 == 0 ? Gender::F : Gender::M);

    Rng rng = make_rng(c.seed, {Stream::lexicon});
    std::set<std::vector<std::size_t>> seen;
    for (std::size_t w = 0; w < c.n_words; ++w) {
        std::vector<std::size_t> word;
        for (int attempt = 0; attempt < 100; ++attempt) {
            word.assign(draw_in(rng, c.word_length), 0);
            for (auto& p : word) p = uniform_index(rng, c.n_phones);
            if (!seen.contains(word)) break;
        }
        seen.insert(word);
        t.lexicon.push_back(std::move(word));
    }
    for (std::size_t w = 0; w < c.n_words; ++w) {
        std::vector<std::size_t> next;
        for (std::size_t k = 0; k < c.successors_per_word; ++k) next.push_back(uniform_index(rng, c.n_words));
        t.successors.push_back(std::move(next));
    }
    return t;
}

namespace synth_detail {

/// Renders a phone sequence for one speaker: segment durations and per-frame noise from `rng`.
inline std::pair<Matrix, std::vector<Segment>> render(const SynthConfig& c, const SynthTruth& t,
                                                      std::span<const std::size_t> phones, std::size_t spk,
                                                      Rng& duration_rng, Rng& noise_rng) {
    std::vector<Segment> segs;
    std::size_t total = 0;
    for (std::size_t ph : phones) {
        const std::size_t len = draw_in(duration_rng, c.frames_per_segment);
        segs.push_back({synth_phone_name(ph), total, total + len});
        total += len;
    }
    const auto gender_row = t.speaker_gender[spk] == Gender::F ? 0 : 1;
    Matrix frames(total, c.dim);
    for (std::size_t s = 0; s < segs.size(); ++s) {
        const auto base_spk = t.speaker_vectors.row(spk);
        const auto base_gen = t.gender_vectors.row(gender_row);
        const auto base_ph = t.phone_vectors.row(phones[s]);
        for (std::size_t f = segs[s].start; f < segs[s].end; ++f) {
            auto row = frames.row(f);
            for (std::size_t j = 0; j < c.dim; ++j) {
                const double noise = c.sigma_noise > 0.0 ? c.sigma_noise * standard_normal(noise_rng) : 0.0;
                row[j] = to_f32(base_spk[j] + base_gen[j] + base_ph[j] + noise);
            }
        }
    }
    return {std::move(frames), std::move(segs)};
}

/// Phone sequence of exactly `n_segments` phones obtained by walking the word grammar.
inline std::vector<std::size_t> walk_grammar(const SynthTruth& t, std::size_t n_segments, Rng& rng) {
    std::vector<std::size_t> phones;
    std::size_t word = uniform_index(rng, t.lexicon.size());
    while (phones.size() < n_segments) {
        for (std::size_t p : t.lexicon[word]) {
            if (phones.size() == n_segments) break;
            phones.push_back(p);
        }
        const auto& next = t.successors[word];
        word = next[uniform_index(rng, next.size())];
    }
    return phones;
}

} // namespace synth_detail

/// Deterministic in `config.seed`. Utterances are generated in parallel, each from its own
/// substreams keyed by (speaker, utterance), so the output does not depend on the worker count.
inline SyntheticCorpus generate_synthetic(const SynthConfig& config) {
    using namespace synth_detail;
    config.validate();
    SynthTruth truth = make_synth_truth(config);

    const std::size_t n_utts = config.n_speakers * config.utterances_per_speaker;
    std::vector<std::pair<Matrix, std::vector<Segment>>> rendered(n_utts);
    parallel_for(n_utts, [&](std::size_t i) {
        const std::size_t spk = i / config.utterances_per_speaker;
        const std::size_t utt = i % config.utterances_per_speaker;
        Rng content = make_rng(config.seed, {Stream::content, spk, utt});
        Rng noise = make_rng(config.seed, {Stream::noise, spk, utt});
        const auto phones = walk_grammar(truth, config.segments_per_utterance, content);
        rendered[i] = render(config, truth, phones, spk, content, noise);
    });

    SyntheticCorpus out{FeatureArchive(config.dim), Manifest{}, Alignment{}, std::move(truth)};
    const std::size_t uw = std::max<std::size_t>(3, digits(config.utterances_per_speaker - 1));
    for (std::size_t i = 0; i < n_utts; ++i) {
        const std::size_t spk = i / config.utterances_per_speaker;
        const std::string spk_id = synth_speaker_id(config, spk);
        const std::string utt_id = spk_id + padded("_u", i % config.utterances_per_speaker, uw);
        auto& [frames, segs] = rendered[i];
        out.manifest.add({utt_id, spk_id, out.truth.speaker_gender[spk], frames.rows()});
        for (auto& s : segs) out.alignment.append(utt_id, std::move(s));
        out.archive.add(utt_id, std::move(frames));
    }
    return out;
}

struct SynthTaskConfig {
    std::size_t n_lexical = 200;
    std::size_t n_syntactic = 200;
    std::size_t n_similarity = 60;
};

/// Stimuli for the lexical, syntactic and semantic tasks, rendered by the corpus speakers.
struct SyntheticTasks {
    FeatureArchive archive{1};
    Manifest manifest;
    Alignment alignment;
    std::vector<TaskPair> lexical;
    std::vector<TaskPair> syntactic;
    std::vector<SimiItem> similarity;
};

/// Lexical pairs: a lexicon word vs. the same word with one phone substituted (a non-word).
/// Syntactic pairs: three words following the grammar vs. the same words reversed.
/// Similarity items: word pairs scored by phone-multiset overlap (a stand-in human judgment).
inline SyntheticTasks generate_synthetic_tasks(const SynthConfig& config, const SynthTaskConfig& tasks) {
    using namespace synth_detail;
    SynthTruth truth = make_synth_truth(config);
    SyntheticTasks out;
    out.archive = FeatureArchive(config.dim);
    std::set<std::vector<std::size_t>> words(truth.lexicon.begin(), truth.lexicon.end());
    std::uint64_t counter = 0;

    auto add = [&](const std::string& id, const std::vector<std::size_t>& phones) {
        const std::uint64_t k = counter++;
        Rng pick = make_rng(config.seed, {Stream::tasks, 0, k});
        const std::size_t spk = uniform_index(pick, config.n_speakers);
        Rng dur = make_rng(config.seed, {Stream::tasks, 1, k});
        Rng noise = make_rng(config.seed, {Stream::tasks, 2, k});
        auto [frames, segs] = render(config, truth, phones, spk, dur, noise);
        out.manifest.add({id, synth_speaker_id(config, spk), truth.speaker_gender[spk], frames.rows()});
        for (auto& s : segs) out.alignment.append(id, std::move(s));
        out.archive.add(id, std::move(frames));
    };

    Rng rng = make_rng(config.seed, {Stream::tasks, 3});
    for (std::size_t i = 0; i < tasks.n_lexical; ++i) {
        const auto& word = truth.lexicon[uniform_index(rng, truth.lexicon.size())];
        std::vector<std::size_t> nonword = word;
        if (config.n_phones > 1) {
            for (int attempt = 0; attempt < 50; ++attempt) {
                nonword = word;
                const std::size_t pos = uniform_index(rng, word.size());
                nonword[pos] = (word[pos] + 1 + uniform_index(rng, config.n_phones - 1)) % config.n_phones;
                if (!words.contains(nonword)) break;
            }
        }
        const std::string id = padded("lex", i, 4);
        add(id + "_pos", word);
        add(id + "_neg", nonword);
        out.lexical.push_back({id, id + "_pos", id + "_neg"});
    }
    for (std::size_t i = 0; i < tasks.n_syntactic; ++i) {
        std::vector<std::size_t> seq{uniform_index(rng, truth.lexicon.size())};
        while (seq.size() < 3) {
            const auto& next = truth.successors[seq.back()];
            seq.push_back(next[uniform_index(rng, next.size())]);
        }
        std::vector<std::size_t> pos, neg;
        for (std::size_t w : seq) pos.insert(pos.end(), truth.lexicon[w].begin(), truth.lexicon[w].end());
        for (auto it = seq.rbegin(); it != seq.rend(); ++it)
            neg.insert(neg.end(), truth.lexicon[*it].begin(), truth.lexicon[*it].end());
        const std::string id = padded("syn", i, 4);
        add(id + "_pos", pos);
        add(id + "_neg", neg);
        out.syntactic.push_back({id, id + "_pos", id + "_neg"});
    }
    for (std::size_t i = 0; i < tasks.n_similarity; ++i) {
        const std::size_t a = uniform_index(rng, truth.lexicon.size());
        const std::size_t b = uniform_index(rng, truth.lexicon.size());
        std::vector<std::size_t> ca(config.n_phones), cb(config.n_phones);
        for (auto p : truth.lexicon[a]) ++ca[p];
        for (auto p : truth.lexicon[b]) ++cb[p];
        double inter = 0, uni = 0;
        for (std::size_t p = 0; p < config.n_phones; ++p) {
            inter += static_cast<double>(std::min(ca[p], cb[p]));
            uni += static_cast<double>(std::max(ca[p], cb[p]));
        }
        const std::string id = padded("sim", i, 4);
        add(id + "_a", truth.lexicon[a]);
        add(id + "_b", truth.lexicon[b]);
        out.similarity.push_back({id, id + "_a", id + "_b", uni > 0 ? inter / uni : 0.0});
    }
    return out;
}

} // namespace zrnorm
