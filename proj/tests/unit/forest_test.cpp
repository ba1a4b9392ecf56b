#include <numeric>

#include <gtest/gtest.h>

#include "zrnorm/forest.hpp"
#include "zrnorm/random.hpp"

using namespace zrnorm;

namespace {

ForestConfig small_forest() {
    ForestConfig c;
    c.n_trees = 30;
    c.max_depth = 8;
    c.seed = 2;
    return c;
}

} // namespace

namespace {

struct Labelled {
    Matrix x;
    std::vector<std::uint32_t> y;
};

// Dim 0 holds the speaker index; every other dim is i.i.d. standard normal noise.
Labelled injective_speaker_dim(std::size_t n, std::size_t d, std::size_t speakers, std::uint64_t seed) {
    Rng rng = make_rng(seed, {});
    Labelled out{Matrix(n, d), std::vector<std::uint32_t>(n)};
    for (std::size_t i = 0; i < n; ++i) {
        out.y[i] = static_cast<std::uint32_t>(uniform_index(rng, speakers));
        for (std::size_t j = 1; j < d; ++j) out.x(i, j) = standard_normal(rng);
        out.x(i, 0) = static_cast<double>(out.y[i]);
    }
    return out;
}

} // namespace

TEST(Forest, InjectiveSpeakerDimensionDominates) {
    const auto data = injective_speaker_dim(1000, 4, 4, 1);
    ForestConfig cfg;
    cfg.seed = 1;
    const auto r = forest_importance(data.x, data.y, 4, cfg);
    EXPECT_EQ(r.order.front(), 0u);
    EXPECT_GE(r.importance[0], 0.9);
    EXPECT_NEAR(std::accumulate(r.importance.begin(), r.importance.end(), 0.0), 1.0, 1e-9);
}

// With sqrt(d) candidate features per split, noise dims collect the impurity decrease of splits
// where the speaker dim was not sampled, so its share shrinks as d and the speaker count grow.
// It is still ranked first.
TEST(Forest, InjectiveSpeakerDimensionRanksFirstInWiderInputs) {
    for (std::size_t d : {8u, 16u})
        for (std::size_t speakers : {10u, 20u}) {
            const auto data = injective_speaker_dim(1000, d, speakers, 2);
            ForestConfig cfg;
            cfg.seed = 1;
            const auto r = forest_importance(data.x, data.y, speakers, cfg);
            EXPECT_EQ(r.order.front(), 0u) << "d=" << d << " speakers=" << speakers;
            EXPECT_GE(r.importance[0], 0.4) << "d=" << d << " speakers=" << speakers;
        }
}

TEST(Forest, PureNoiseSpreadsImportance) {
    Rng rng = make_rng(2, {});
    const std::size_t n = 1000, d = 8;
    Matrix x(n, d);
    std::vector<std::uint32_t> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        y[i] = static_cast<std::uint32_t>(uniform_index(rng, 4));
        for (std::size_t j = 0; j < d; ++j) x(i, j) = standard_normal(rng);
    }
    const auto r = forest_importance(x, y, 4, small_forest());
    const double mean = 1.0 / static_cast<double>(d);
    EXPECT_LE(*std::max_element(r.importance.begin(), r.importance.end()), 3.0 * mean);
    EXPECT_NEAR(std::accumulate(r.importance.begin(), r.importance.end(), 0.0), 1.0, 1e-12);
}

TEST(Forest, DeterministicAcrossWorkerCounts) {
    Rng rng = make_rng(3, {});
    Matrix x(200, 4);
    std::vector<std::uint32_t> y(200);
    for (std::size_t i = 0; i < 200; ++i) {
        y[i] = static_cast<std::uint32_t>(i % 3);
        for (std::size_t j = 0; j < 4; ++j) x(i, j) = standard_normal(rng) + (j == 0 ? y[i] : 0);
    }
    const std::size_t saved = worker_count();
    set_worker_count(1);
    const auto a = forest_importance(x, y, 3, small_forest());
    set_worker_count(4);
    const auto b = forest_importance(x, y, 3, small_forest());
    set_worker_count(saved);
    EXPECT_EQ(a.importance, b.importance);
}

TEST(Forest, PruneDropsMostImportantFirst) {
    ImportanceRanking r;
    r.importance = {0.3, 0.1, 0.4, 0.2};
    r.order = {2, 0, 3, 1};
    EXPECT_EQ(kept_dimensions(r, 2), (std::vector<std::size_t>{1, 3}));
    EXPECT_EQ(kept_dimensions(r, 4), (std::vector<std::size_t>{0, 1, 2, 3}));
    EXPECT_THROW(kept_dimensions(r, 0), InvalidArgument);
    EXPECT_THROW(kept_dimensions(r, 5), InvalidArgument);

    FeatureArchive a(4);
    a.add("u", Matrix{{10, 11, 12, 13}});
    a.provenance.normalization = Provenance::Normalization::utterance;
    const auto p = prune(a, r, 2);
    EXPECT_EQ(p.dim(), 2u);
    EXPECT_TRUE(p.frames("u") == (Matrix{{11, 13}}));
    EXPECT_TRUE(p.provenance.standardized());
}

TEST(Forest, RankingFromImportanceBreaksTiesByIndex) {
    const auto r = ranking_from_importance({1.0, 3.0, 1.0, 3.0});
    EXPECT_EQ(r.order, (std::vector<std::size_t>{1, 3, 0, 2}));
    EXPECT_DOUBLE_EQ(r.importance[1], 0.375);
    const auto zero = ranking_from_importance({0.0, 0.0});
    EXPECT_DOUBLE_EQ(zero.importance[0], 0.5);
}

TEST(Forest, RejectsSingleSpeaker) {
    Matrix x(10, 2, 1.0);
    EXPECT_THROW(train_forest(x, std::vector<std::uint32_t>(10, 0), 1, small_forest()), InvalidArgument);
}
