#include <gtest/gtest.h>

#include "zrnorm/normalize.hpp"
#include "zrnorm/random.hpp"

using namespace zrnorm;

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed, double shift, double scale) {
    Rng rng = make_rng(seed, {});
    Matrix m(rows, cols);
    for (double& v : m.data()) v = shift + scale * standard_normal(rng);
    return m;
}

} // namespace

TEST(Normalize, StandardizedColumnsHaveZeroMeanUnitVariance) {
    const auto m = standardize(random_matrix(200, 5, 3, 4.0, 2.5));
    const auto s = fit_stats(m);
    for (std::size_t j = 0; j < 5; ++j) {
        EXPECT_NEAR(s.mean[j], 0.0, 1e-12);
        EXPECT_NEAR(s.std[j], 1.0, 1e-12);
    }
}

TEST(Normalize, ConstantDimensionMapsToZero) {
    Matrix m{{1.0, 5.0}, {2.0, 5.0}, {3.0, 5.0}};
    const auto z = standardize(m);
    for (std::size_t t = 0; t < 3; ++t) EXPECT_EQ(z(t, 1), 0.0);
    EXPECT_NEAR(z(0, 0), -std::sqrt(1.5), 1e-12);
}

TEST(Normalize, RemovesPerUtteranceAffineShift) {
    const auto base = random_matrix(50, 4, 9, 0.0, 1.0);
    Matrix shifted = base;
    for (std::size_t t = 0; t < shifted.rows(); ++t)
        for (std::size_t j = 0; j < 4; ++j) shifted(t, j) = 3.0 * base(t, j) + static_cast<double>(j) - 7.0;
    const auto a = standardize(base), b = standardize(shifted);
    for (std::size_t i = 0; i < a.data().size(); ++i) EXPECT_NEAR(a.data()[i], b.data()[i], 1e-10);
}

TEST(Normalize, PerSpeakerPoolsStatistics) {
    FeatureArchive a(1);
    a.add("u1", Matrix{{0.0}, {2.0}});
    a.add("u2", Matrix{{4.0}, {6.0}});
    a.add("v1", Matrix{{10.0}, {10.0}});
    Manifest m;
    m.add({"u1", "s1", Gender::F, 2});
    m.add({"u2", "s1", Gender::F, 2});
    m.add({"v1", "s2", Gender::M, 2});
    const auto z = standardize_per_speaker(a, m);
    EXPECT_EQ(z.provenance.normalization, Provenance::Normalization::speaker);
    const double sd = std::sqrt(5.0); // pooled over {0, 2, 4, 6}
    EXPECT_NEAR(z.frames("u1")(0, 0), -3.0 / sd, 1e-12);
    EXPECT_NEAR(z.frames("u2")(1, 0), 3.0 / sd, 1e-12);
    EXPECT_EQ(z.frames("v1")(0, 0), 0.0);

    const auto u = standardize_per_utterance(a);
    EXPECT_EQ(u.provenance.normalization, Provenance::Normalization::utterance);
    EXPECT_NEAR(u.frames("u2")(0, 0), -1.0, 1e-12);
}

TEST(Normalize, RejectsMismatches) {
    NormStats s{{0.0}, {1.0}, 1};
    EXPECT_THROW(standardize(Matrix{{1.0, 2.0}}, s), DimensionMismatch);
    EXPECT_THROW(fit_stats(Matrix(0, 2)), InvalidArgument);
}
