#include <gtest/gtest.h>

#include "zrnorm/abx.hpp"

using namespace zrnorm;

namespace {

// One utterance per triphone token: three one-frame segments l-c-r, all frames equal to `v`.
struct Builder {
    FeatureArchive archive{2};
    Manifest manifest;
    Alignment alignment;
    int next = 0;

    void token(const std::string& spk, const std::string& center, std::vector<double> v) {
        const std::string id = "utt" + std::to_string(next++);
        Matrix m(3, 2);
        for (std::size_t t = 0; t < 3; ++t) std::copy(v.begin(), v.end(), m.row(t).begin());
        archive.add(id, std::move(m));
        manifest.add({id, spk, Gender::F, 3});
        alignment.append(id, {"l", 0, 1});
        alignment.append(id, {center, 1, 2});
        alignment.append(id, {"r", 2, 3});
    }
};

} // namespace

TEST(Abx, ExtractItemsSkipsSilenceCentres) {
    Alignment ali;
    for (auto [p, s, e] : {std::tuple{"sil", 0, 1}, {"a", 1, 2}, {"sil", 2, 3}, {"b", 3, 4}, {"c", 4, 5}})
        ali.append("u", {p, static_cast<std::size_t>(s), static_cast<std::size_t>(e)});
    Manifest m;
    m.add({"u", "s", Gender::F, 5});
    const auto items = extract_items(ali, m);
    ASSERT_EQ(items.size(), 2u); // sil-a-sil and sil-b-c; a-sil-b is dropped
    EXPECT_EQ(items[0].center, "a");
    EXPECT_EQ(items[1].begin, 2u);
    EXPECT_EQ(items[1].end, 5u);
}

// Hand-computed: A tokens (1,0),(1,0); B tokens (0,1),(1,0). A->B cell: 0.25, B->A cell: 0.75.
TEST(Abx, WithinSpeakerHandComputedExample) {
    Builder b;
    b.token("s", "x", {1, 0});
    b.token("s", "x", {1, 0});
    b.token("s", "y", {0, 1});
    b.token("s", "y", {1, 0});
    const auto items = extract_items(b.alignment, b.manifest);
    const auto r = abx_score(items, b.archive, {AbxMode::within, 10, 0});
    ASSERT_EQ(r.cells.size(), 2u);
    EXPECT_EQ(r.cells[0].triphone_a, "l-x-r");
    EXPECT_DOUBLE_EQ(r.cells[0].error, 0.25);
    EXPECT_DOUBLE_EQ(r.cells[1].error, 0.75);
    EXPECT_EQ(r.cells[0].n_triples, 4u);
    EXPECT_DOUBLE_EQ(r.error_rate, 0.5);
    EXPECT_EQ(r.n_pairs, 1u);
}

TEST(Abx, AcrossSpeakerUsesOtherSpeakerAsX) {
    Builder b;
    b.token("s1", "x", {1, 0});
    b.token("s1", "y", {0, 1});
    b.token("s2", "x", {1, 0.1});
    b.token("s2", "y", {0.1, 1});
    const auto items = extract_items(b.alignment, b.manifest);
    const auto r = abx_score(items, b.archive, {AbxMode::across, 10, 0});
    EXPECT_EQ(r.n_cells, 4u);
    EXPECT_EQ(r.error_rate, 0.0);
    for (const auto& c : r.cells) EXPECT_NE(c.speaker_ab, c.speaker_x);
    // Within mode has no speaker with two A tokens.
    EXPECT_THROW(abx_score(items, b.archive, {AbxMode::within, 10, 0}), Error);
}

TEST(Abx, IndistinguishableTokensScoreOneHalf) {
    Builder b;
    for (int i = 0; i < 3; ++i) {
        b.token("s", "x", {1, 1});
        b.token("s", "y", {1, 1});
    }
    const auto r = abx_score(extract_items(b.alignment, b.manifest), b.archive, {AbxMode::within, 10, 0});
    EXPECT_DOUBLE_EQ(r.error_rate, 0.5);
}

TEST(Abx, AggregationAveragesContextsThenOrdersThenPairs) {
    std::vector<AbxCell> cells{
        {"a", "b", "s1", "s2", 0.0, 1}, {"a", "b", "s2", "s1", 1.0, 1}, // a->b mean 0.5
        {"b", "a", "s1", "s2", 0.1, 1},                                  // b->a 0.1
        {"a", "c", "s1", "s2", 0.2, 1},                                  // a~c 0.2
    };
    std::size_t n = 0;
    EXPECT_NEAR(aggregate_abx(cells, &n), (0.3 + 0.2) / 2.0, 1e-15);
    EXPECT_EQ(n, 2u);
}

TEST(Abx, MaxXCapIsSeededAndDeterministic) {
    Builder b;
    b.token("s1", "x", {1, 0});
    b.token("s1", "y", {0, 1});
    for (int i = 0; i < 20; ++i) b.token("s2", "x", {1.0, 0.05 * i});
    const auto items = extract_items(b.alignment, b.manifest);
    const auto r1 = abx_score(items, b.archive, {AbxMode::across, 5, 9});
    const auto r2 = abx_score(items, b.archive, {AbxMode::across, 5, 9});
    ASSERT_EQ(r1.cells.size(), 1u);
    EXPECT_EQ(r1.cells[0].n_triples, 5u);
    EXPECT_EQ(r1.error_rate, r2.error_rate);
    EXPECT_THROW(abx_score(items, b.archive, {AbxMode::across, 0, 9}), InvalidArgument);
}
