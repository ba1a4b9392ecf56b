#include <cmath>

#include <gtest/gtest.h>

#include "zrnorm/probe.hpp"

#include "oracles.hpp"

using namespace zrnorm;

namespace {

struct Data {
    Matrix x;
    std::vector<std::uint32_t> y;
};

Data gaussian_classes(std::size_t per_class, double sigma, std::uint64_t seed) {
    Rng rng = make_rng(seed, {});
    Data d{Matrix(2 * per_class, 2), {}};
    for (std::size_t i = 0; i < 2 * per_class; ++i) {
        const std::uint32_t c = i < per_class ? 0 : 1;
        const double mu = c == 0 ? 3.0 : -3.0;
        d.x(i, 0) = mu + sigma * standard_normal(rng);
        d.x(i, 1) = mu + sigma * standard_normal(rng);
        d.y.push_back(c);
    }
    return d;
}

ProbeConfig quick(std::size_t epochs = 20) {
    ProbeConfig c;
    c.epochs = epochs;
    c.batch_size = 32;
    c.learning_rate = 0.1;
    c.n_runs = 1;
    c.seed = 3;
    return c;
}

} // namespace

TEST(Probe, GradientsMatchCentralDifferences) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        EXPECT_LE(oracle::probe_gradient_error(ProbeKind::linear, 12, 5, 4, seed), 1e-4) << "seed " << seed;
        EXPECT_LE(oracle::probe_gradient_error(ProbeKind::mlp, 12, 5, 4, seed), 1e-4) << "seed " << seed;
    }
}

TEST(Probe, ConstantFeaturesPredictMajorityClass) {
    Matrix x(100, 3, 1.0);
    std::vector<std::uint32_t> y(100, 0);
    for (std::size_t i = 80; i < 100; ++i) y[i] = 1;
    const auto r = run_probe(x, y, x, y, 2, quick());
    EXPECT_NEAR(r.accuracy, 0.8, 1e-12);
}

TEST(Probe, SeparatesWellSeparatedGaussians) {
    const auto train = gaussian_classes(200, 0.5, 1), test = gaussian_classes(200, 0.5, 2);
    EXPECT_GE(run_probe(train.x, train.y, test.x, test.y, 2, quick()).accuracy, 0.99);
    auto mlp = quick(10);
    mlp.kind = ProbeKind::mlp;
    mlp.hidden_units = 16;
    EXPECT_GE(run_probe(train.x, train.y, test.x, test.y, 2, mlp).accuracy, 0.99);
}

TEST(Probe, InvariantToAffineFeatureTransforms) {
    const auto train = gaussian_classes(200, 2.5, 4), test = gaussian_classes(200, 2.5, 5);
    auto affine = [](Matrix m) {
        for (std::size_t i = 0; i < m.rows(); ++i) {
            m(i, 0) = 40.0 * m(i, 0) + 1000.0;
            m(i, 1) = 0.01 * m(i, 1) - 3.0;
        }
        return m;
    };
    const double a = run_probe(train.x, train.y, test.x, test.y, 2, quick()).accuracy;
    const double b = run_probe(affine(train.x), train.y, affine(test.x), test.y, 2, quick()).accuracy;
    EXPECT_LE(std::abs(a - b), 0.01);
}

TEST(Probe, RunsAreSeededAndReproducible) {
    const auto train = gaussian_classes(50, 3.0, 6), test = gaussian_classes(50, 3.0, 7);
    auto cfg = quick(3);
    cfg.n_runs = 3;
    const auto r1 = run_probe(train.x, train.y, test.x, test.y, 2, cfg);
    const auto r2 = run_probe(train.x, train.y, test.x, test.y, 2, cfg);
    EXPECT_EQ(r1.run_accuracies, r2.run_accuracies);
    ASSERT_EQ(r1.run_seeds.size(), 3u);
    EXPECT_NE(r1.run_seeds[0], r1.run_seeds[1]);
}

TEST(Probe, OneHotUnitsProbe) {
    std::vector<std::uint32_t> units{0, 1, 2, 0, 1, 2}, y{0, 1, 1, 0, 1, 1};
    EXPECT_EQ(probe_on_units(units, y, units, y, 3, 2, quick(50)).accuracy, 1.0);
}

TEST(Probe, RejectsBadInputs) {
    Matrix x(4, 2, 0.0);
    std::vector<std::uint32_t> one_class(4, 0), bad(4, 5), short_y(3, 0);
    EXPECT_THROW(run_probe(x, one_class, x, one_class, 2, quick()), InvalidArgument);
    EXPECT_THROW(run_probe(x, std::vector<std::uint32_t>{0, 1, 0, 5}, x, bad, 2, quick()), InvalidArgument);
    EXPECT_THROW(run_probe(x, short_y, x, short_y, 2, quick()), InvalidArgument);
    auto cfg = quick();
    cfg.epochs = 0;
    EXPECT_THROW(run_probe(x, std::vector<std::uint32_t>{0, 1, 0, 1}, x, one_class, 2, cfg), InvalidArgument);
}
