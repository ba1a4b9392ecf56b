#include <gtest/gtest.h>

#include "zrnorm/corpus_io.hpp"
#include "zrnorm/synthetic.hpp"

using namespace zrnorm;

namespace {

struct WorkerGuard {
    std::size_t saved = worker_count();
    ~WorkerGuard() { set_worker_count(saved); }
};

} // namespace

TEST(Synthetic, ShapesAndConsistency) {
    SynthConfig c;
    c.n_speakers = 4;
    c.utterances_per_speaker = 3;
    const auto corpus = generate_synthetic(c);
    EXPECT_EQ(corpus.archive.size(), 12u);
    EXPECT_EQ(corpus.archive.dim(), c.dim);
    EXPECT_EQ(corpus.manifest.speakers().size(), 4u);
    EXPECT_NO_THROW(corpus.manifest.validate_against(corpus.archive));
    EXPECT_NO_THROW(corpus.alignment.validate_against(corpus.archive));
    EXPECT_NO_THROW(corpus.alignment.validate_against(corpus.manifest));
    for (const auto& u : corpus.alignment.utterances()) {
        EXPECT_EQ(u.segments.size(), c.segments_per_utterance);
        for (const auto& s : u.segments) {
            EXPECT_GE(s.length(), c.frames_per_segment.lo);
            EXPECT_LE(s.length(), c.frames_per_segment.hi);
        }
    }
    EXPECT_EQ(corpus.manifest.at(corpus.archive[0].id).gender, Gender::F);
    EXPECT_EQ(corpus.manifest.at(corpus.archive[3].id).gender, Gender::M);
}

TEST(Synthetic, ZeroNoiseGivesIdenticalFramesWithinSegments) {
    SynthConfig c;
    c.n_speakers = 3;
    c.utterances_per_speaker = 2;
    c.sigma_noise = 0.0;
    const auto corpus = generate_synthetic(c);
    for (const auto& u : corpus.alignment.utterances()) {
        const Matrix& m = corpus.archive.frames(u.utt_id);
        for (const auto& s : u.segments)
            for (std::size_t t = s.start + 1; t < s.end; ++t)
                for (std::size_t j = 0; j < m.cols(); ++j) ASSERT_EQ(m(t, j), m(s.start, j));
    }
}

TEST(Synthetic, FrameIsSumOfLatentVectors) {
    SynthConfig c;
    c.n_speakers = 2;
    c.utterances_per_speaker = 1;
    c.sigma_noise = 0.0;
    const auto corpus = generate_synthetic(c);
    const auto& t = corpus.truth;
    const auto& u = corpus.alignment.utterances()[1]; // speaker 1, male
    const auto& seg = u.segments[0];
    const std::size_t phone = std::stoul(seg.phone.substr(1));
    const Matrix& m = corpus.archive.frames(u.utt_id);
    for (std::size_t j = 0; j < c.dim; ++j) {
        const double expected = t.speaker_vectors(1, j) + t.gender_vectors(1, j) + t.phone_vectors(phone, j);
        EXPECT_NEAR(m(0, j), expected, 1e-5);
    }
}

// Over many long utterances, the utterance mean approaches speaker + gender + the mean of the
// phone vectors. Monte Carlo over 100 utterances.
TEST(Synthetic, UtteranceMeanApproachesSpeakerPlusMeanPhone) {
    SynthConfig c;
    c.n_speakers = 10;
    c.utterances_per_speaker = 10;
    c.segments_per_utterance = 200;
    const auto corpus = generate_synthetic(c);
    const auto& t = corpus.truth;
    std::vector<double> mean_phone(c.dim, 0.0);
    for (std::size_t p = 0; p < c.n_phones; ++p)
        for (std::size_t j = 0; j < c.dim; ++j) mean_phone[j] += t.phone_vectors(p, j) / static_cast<double>(c.n_phones);
    double worst = 0.0, avg = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < corpus.archive.size(); ++i) {
        const std::size_t spk = i / c.utterances_per_speaker;
        const std::size_t g = t.speaker_gender[spk] == Gender::F ? 0 : 1;
        const Matrix& m = corpus.archive[i].frames;
        for (std::size_t j = 0; j < c.dim; ++j) {
            double s = 0.0;
            for (std::size_t r = 0; r < m.rows(); ++r) s += m(r, j);
            const double err = std::abs(s / static_cast<double>(m.rows()) -
                                        (t.speaker_vectors(spk, j) + t.gender_vectors(g, j) + mean_phone[j]));
            worst = std::max(worst, err);
            avg += err;
            ++n;
        }
    }
    EXPECT_LE(avg / static_cast<double>(n), 0.15);
    EXPECT_LE(worst, 0.6);
}

TEST(Synthetic, DeterministicAcrossWorkerCounts) {
    WorkerGuard guard;
    SynthConfig c;
    c.n_speakers = 6;
    c.utterances_per_speaker = 4;
    set_worker_count(1);
    const auto a = generate_synthetic(c);
    set_worker_count(8);
    const auto b = generate_synthetic(c);
    EXPECT_TRUE(a.archive == b.archive);
    c.seed = 2;
    const auto d = generate_synthetic(c);
    EXPECT_FALSE(a.archive == d.archive);
}

TEST(Synthetic, TaskStimuliAreConsistent) {
    SynthConfig c;
    SynthTaskConfig tc{20, 15, 10};
    const auto tasks = generate_synthetic_tasks(c, tc);
    EXPECT_EQ(tasks.lexical.size(), 20u);
    EXPECT_EQ(tasks.syntactic.size(), 15u);
    EXPECT_EQ(tasks.similarity.size(), 10u);
    EXPECT_EQ(tasks.archive.size(), 2u * (20 + 15 + 10));
    EXPECT_NO_THROW(tasks.alignment.validate_against(tasks.archive));
    for (const auto& p : tasks.lexical) {
        const auto& pos = tasks.alignment.at(p.pos_utt_id).segments;
        const auto& neg = tasks.alignment.at(p.neg_utt_id).segments;
        ASSERT_EQ(pos.size(), neg.size());
        std::size_t diff = 0;
        for (std::size_t i = 0; i < pos.size(); ++i) diff += pos[i].phone != neg[i].phone;
        EXPECT_EQ(diff, 1u);
    }
    for (const auto& s : tasks.similarity) {
        EXPECT_GE(s.human_score, 0.0);
        EXPECT_LE(s.human_score, 1.0);
    }
}

TEST(Synthetic, RejectsInvalidConfig) {
    SynthConfig c;
    c.n_speakers = 0;
    EXPECT_THROW(generate_synthetic(c), InvalidArgument);
    c = SynthConfig{};
    c.frames_per_segment = {5, 2};
    EXPECT_THROW(generate_synthetic(c), InvalidArgument);
    c = SynthConfig{};
    c.sigma_noise = -1.0;
    EXPECT_THROW(generate_synthetic(c), InvalidArgument);
}
