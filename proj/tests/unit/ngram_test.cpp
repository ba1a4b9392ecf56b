#include <cmath>

#include <gtest/gtest.h>

#include "zrnorm/ngram.hpp"
#include "zrnorm/random.hpp"

using namespace zrnorm;

namespace {

using Seq = std::vector<std::uint32_t>;

std::vector<Seq> random_corpus(std::size_t k, std::size_t n_seqs, std::size_t max_len, std::uint64_t seed) {
    Rng rng = make_rng(seed, {});
    std::vector<Seq> c(n_seqs);
    for (auto& s : c) {
        s.resize(uniform_index(rng, max_len + 1));
        // Skewed unigram so that many n-grams repeat and others stay unseen.
        for (auto& u : s) u = static_cast<std::uint32_t>(uniform_index(rng, 1 + uniform_index(rng, k)));
    }
    return c;
}

double total_mass(const NgramLm& lm, const Seq& context) {
    double s = 0.0;
    for (std::uint32_t sym = 0; sym <= lm.vocab_size(); ++sym) s += lm.conditional_prob(context, sym);
    return s;
}

// Visits every context over the alphabet {0..K+1} of the given length.
template <typename Fn>
void for_each_context(std::size_t k, std::size_t len, Fn&& fn) {
    Seq ctx(len, 0);
    for (;;) {
        fn(ctx);
        std::size_t i = 0;
        while (i < len && ++ctx[i] == k + 2) ctx[i++] = 0;
        if (i == len) return;
    }
}

} // namespace

TEST(Ngram, DistributionsSumToOneForEveryContext) {
    for (std::size_t k : {1u, 2u, 5u, 17u, 64u})
        for (std::size_t order = 1; order <= 3; ++order) {
            const auto lm = NgramLm::train(random_corpus(k, 40, 30, k * 10 + order), k, order);
            double worst = 0.0;
            for_each_context(k, order - 1, [&](const Seq& ctx) { worst = std::max(worst, std::abs(total_mass(lm, ctx) - 1.0)); });
            EXPECT_LE(worst, 1e-9) << "K=" << k << " order=" << order;
        }
}

TEST(Ngram, DistributionsSumToOneAtHigherOrder) {
    for (std::size_t k : {3u, 8u}) {
        const auto lm = NgramLm::train(random_corpus(k, 60, 40, k), k, 4, 0.5);
        for_each_context(k, 3, [&](const Seq& ctx) { EXPECT_NEAR(total_mass(lm, ctx), 1.0, 1e-9); });
    }
    const auto big = NgramLm::train(random_corpus(64, 200, 50, 9), 64, 5);
    for (const auto& ctx : big.observed_contexts()) EXPECT_NEAR(total_mass(big, ctx), 1.0, 1e-9);
}

TEST(Ngram, TinyUnigramCorpus) {
    const auto lm = NgramLm::train({{0, 0, 1}}, 2, 1);
    EXPECT_NEAR(total_mass(lm, {}), 1.0, 1e-12);
    EXPECT_GT(lm.conditional_prob({}, 0), lm.conditional_prob({}, 1));
}

TEST(Ngram, AlternatingSequenceIsLearned) {
    Seq alt;
    for (int i = 0; i < 50; ++i) alt.push_back(static_cast<std::uint32_t>(i % 2));
    const auto lm = NgramLm::train({alt}, 2, 2);
    EXPECT_GE(lm.conditional_prob(Seq{0}, 1), 0.9);
    EXPECT_GE(lm.conditional_prob(Seq{1}, 0), 0.9);
}

TEST(Ngram, UniformModelLogProb) {
    const UniformLm lm(50);
    EXPECT_NEAR(sequence_logprob(lm, Seq{3, 7, 7, 49}), 4.0 * std::log(1.0 / 50.0), 1e-12);
    EXPECT_THROW(sequence_logprob(lm, Seq{50}), InvalidArgument);
}

TEST(Ngram, ChainRuleIdentity) {
    const std::size_t k = 6, order = 3;
    const auto lm = NgramLm::train(random_corpus(k, 30, 20, 4), k, order);
    const Seq s{1, 4, 0, 0, 5, 2};
    double manual = 0.0;
    Seq padded(order - 1, lm.start_symbol());
    padded.insert(padded.end(), s.begin(), s.end());
    padded.push_back(lm.end_symbol());
    for (std::size_t i = order - 1; i < padded.size(); ++i) {
        const Seq ctx(padded.begin() + static_cast<std::ptrdiff_t>(i - (order - 1)), padded.begin() + static_cast<std::ptrdiff_t>(i));
        manual += std::log(lm.conditional_prob(ctx, padded[i]));
    }
    EXPECT_NEAR(sequence_logprob(lm, s), manual, 1e-12);
    const auto tokens = token_logprobs(lm, s, true);
    EXPECT_EQ(tokens.size(), s.size() + 1);
}

TEST(Ngram, LogProbsAreNonPositiveAndPrefixesMoreLikely) {
    const std::size_t k = 5;
    const auto lm = NgramLm::train(random_corpus(k, 30, 20, 8), k, 3);
    Rng rng = make_rng(1, {});
    for (int trial = 0; trial < 100; ++trial) {
        Seq s(1 + uniform_index(rng, 10)), t(1 + uniform_index(rng, 5));
        for (auto& u : s) u = static_cast<std::uint32_t>(uniform_index(rng, k));
        for (auto& u : t) u = static_cast<std::uint32_t>(uniform_index(rng, k));
        EXPECT_LE(sequence_logprob(lm, s), 0.0);
        Seq st = s;
        st.insert(st.end(), t.begin(), t.end());
        auto prefix = [&](const Seq& q) {
            double v = 0.0;
            for (double x : token_logprobs(lm, q, false)) v += x;
            return v;
        };
        EXPECT_LE(prefix(st), prefix(s) + 1e-12);
    }
}

TEST(Ngram, JsonRoundTripPreservesProbabilities) {
    const std::size_t k = 4;
    const auto lm = NgramLm::train(random_corpus(k, 20, 15, 2), k, 3, 0.6);
    const auto back = NgramLm::from_json(nlohmann::json::parse(lm.to_json().dump()));
    EXPECT_EQ(back.order(), 3u);
    EXPECT_EQ(back.discount(), 0.6);
    for_each_context(k, 2, [&](const Seq& ctx) {
        for (std::uint32_t sym = 0; sym <= k; ++sym) EXPECT_EQ(back.conditional_prob(ctx, sym), lm.conditional_prob(ctx, sym));
    });
    EXPECT_THROW(NgramLm::from_json(nlohmann::json{{"format", "other"}}), ParseError);
}

TEST(Ngram, RejectsInvalidArguments) {
    EXPECT_THROW(NgramLm(0, 2, 0.5), InvalidArgument);
    EXPECT_THROW(NgramLm(3, 0, 0.5), InvalidArgument);
    EXPECT_THROW(NgramLm(3, 2, 0.0), InvalidArgument);
    EXPECT_THROW(NgramLm::train({{0, 3}}, 3, 2), InvalidArgument);
    EXPECT_THROW(NgramLm::train({}, 3, 2), InvalidArgument);
}
