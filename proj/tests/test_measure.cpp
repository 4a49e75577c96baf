#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "mflow/measure.hpp"
#include "mflow/polynomial.hpp"
#include "mflow/rng.hpp"

using namespace mflow;

TEST(Philox, KnownAnswerVectors) {
    auto zero = Philox4x32::apply({0, 0, 0, 0}, {0, 0});
    EXPECT_EQ(zero, (Philox4x32::Counter{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8}));
    auto ones = Philox4x32::apply({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff});
    EXPECT_EQ(ones, (Philox4x32::Counter{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd}));
    auto pi = Philox4x32::apply({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0});
    EXPECT_EQ(pi, (Philox4x32::Counter{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1}));
}

TEST(Philox, StreamsAreReproducibleAndDistinct) {
    ParticleStream a(42, streams::dynamics, 7), b(42, streams::dynamics, 7), c(42, streams::dynamics, 8);
    for (int i = 0; i < 10; ++i) {
        const double x = a.uniform();
        EXPECT_EQ(x, b.uniform());
        EXPECT_NE(x, c.uniform());
        EXPECT_GT(x, 0.0);
        EXPECT_LT(x, 1.0);
    }
}

TEST(Philox, NormalMoments) {
    ParticleStream s(1, streams::initial, 0);
    const int n = 200000;
    double m = 0, v = 0;
    for (int i = 0; i < n; ++i) {
        const double z = s.normal();
        m += z;
        v += z * z;
    }
    m /= n;
    v /= n;
    EXPECT_NEAR(m, 0.0, 5.0 / std::sqrt(n));
    EXPECT_NEAR(v, 1.0, 5.0 * std::sqrt(2.0 / n));
}

TEST(EmpiricalMeasure, Construction) {
    auto mu = empirical_from_samples({{1.0}, {3.0}});
    EXPECT_DOUBLE_EQ(mean_and_variance(mu).mean[0], 2.0);
    auto delta = empirical_from_samples({{0, 0}, {0, 0}});
    EXPECT_EQ(delta.dimension(), 2u);
    EXPECT_EQ(mean_and_variance(delta).variance, 0.0);
    EXPECT_THROW(empirical_from_samples({}), InvalidArgument);
    EXPECT_THROW(empirical_from_samples({{1.0}, {1.0, 2.0}}), InvalidArgument);
    EXPECT_THROW(empirical_from_samples({{NAN}}), InvalidArgument);
    EXPECT_THROW(empirical_from_samples({{INFINITY}}), InvalidArgument);
}

TEST(EmpiricalMeasure, NormalSampleMean) {
    std::vector<double> xs(10000);
    for (std::size_t i = 0; i < xs.size(); ++i) xs[i] = ParticleStream(3, streams::initial, i).normal();
    auto mu = empirical_1d(xs);
    EXPECT_LE(std::abs(mean_and_variance(mu).mean[0]), 5.0 / 100.0);
}

TEST(EmpiricalMeasure, MeanAndVariance) {
    auto a = mean_and_variance(empirical_1d({5.0}));
    EXPECT_EQ(a.mean[0], 5.0);
    EXPECT_EQ(a.variance, 0.0);
    auto b = mean_and_variance(empirical_1d({0.0, 2.0}));
    EXPECT_EQ(b.mean[0], 1.0);
    EXPECT_EQ(b.variance, 1.0);
    auto c = mean_and_variance(empirical_1d({1, 2, 3, 4}));
    EXPECT_DOUBLE_EQ(c.mean[0], 2.5);
    EXPECT_DOUBLE_EQ(c.variance, 1.25);
    // Trace form in d = 2.
    auto d = mean_and_variance(empirical_from_samples({{0, 0}, {2, 4}}));
    EXPECT_DOUBLE_EQ(d.variance, 1.0 + 4.0);
}

TEST(EmpiricalMeasure, VarianceNonnegativeZeroIffCoincident) {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        ParticleStream s(seed, streams::initial, 0);
        const std::size_t n = 1 + seed % 9;
        std::vector<double> xs(n);
        const bool same = seed % 3 == 0;
        const double base = s.normal() * 100;
        for (auto& x : xs) x = same ? base : s.normal();
        const double v = mean_and_variance(empirical_1d(xs)).variance;
        EXPECT_GE(v, 0.0);
        if (same || n == 1)
            EXPECT_EQ(v, 0.0);
        else
            EXPECT_GT(v, 0.0);
    }
}

TEST(PolynomialMoment, Examples) {
    EXPECT_DOUBLE_EQ(polynomial_moment(empirical_1d({2.0}), Polynomial::monomial(1, 3)), 8.0);
    EXPECT_DOUBLE_EQ(polynomial_moment(empirical_1d({1.0, 3.0}), Polynomial::monomial(1, 1)), 2.0);
    EXPECT_DOUBLE_EQ(polynomial_moment(empirical_1d({-1.0, 0.0, 1.0}), Polynomial::monomial(1, 2)), 2.0 / 3.0);
    EXPECT_THROW(polynomial_moment(empirical_1d({1.0}), Polynomial::coordinate(2, 0)), InvalidArgument);
}

TEST(PolynomialMoment, LinearInIntegrand) {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        ParticleStream s(seed, streams::initial, 1);
        std::vector<double> xs(13);
        for (auto& x : xs) x = s.normal();
        auto mu = empirical_1d(xs);
        Polynomial g{1, {{s.normal(), {2}}, {s.normal(), {1}}, {s.normal(), {0}}}};
        Polynomial h{1, {{s.normal(), {3}}, {s.normal(), {1}}}};
        const double a = s.normal();
        const double lhs = polynomial_moment(mu, a * g + h);
        const double rhs = a * polynomial_moment(mu, g) + polynomial_moment(mu, h);
        EXPECT_NEAR(lhs, rhs, 1e-12 * (1 + std::abs(rhs)));
    }
}

TEST(Wasserstein, Examples) {
    EXPECT_DOUBLE_EQ(wasserstein2_1d(empirical_1d({1.5}), empirical_1d({-2.0})), 3.5);
    EXPECT_DOUBLE_EQ(wasserstein2_1d(empirical_1d({0, 2}), empirical_1d({1, 3})), 1.0);
    auto mu = empirical_1d({0.3, -1.0, 2.0});
    EXPECT_EQ(wasserstein2_1d(mu, mu), 0.0);
    EXPECT_THROW(wasserstein2_1d(mu, empirical_1d({1.0})), InvalidArgument);
    EXPECT_THROW(wasserstein2_1d(empirical_from_samples({{0, 0}}), empirical_from_samples({{0, 0}})),
                 InvalidArgument);
}

namespace {
std::vector<double> random_cloud(ParticleStream& s, std::size_t n) {
    std::vector<double> xs(n);
    for (auto& x : xs) x = s.normal() * 2.0;
    return xs;
}

double brute_force_w2(const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<std::size_t> perm(a.size());
    std::iota(perm.begin(), perm.end(), 0);
    double best = INFINITY;
    do {
        double s = 0;
        for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[perm[i]]) * (a[i] - b[perm[i]]);
        best = std::min(best, s);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return std::sqrt(best / static_cast<double>(a.size()));
}
}  // namespace

TEST(Wasserstein, MetricProperties) {
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        ParticleStream s(seed, streams::initial, 2);
        const std::size_t n = 1 + seed % 16;
        auto x = empirical_1d(random_cloud(s, n));
        auto y = empirical_1d(random_cloud(s, n));
        auto z = empirical_1d(random_cloud(s, n));
        const double xy = wasserstein2_1d(x, y), yx = wasserstein2_1d(y, x);
        EXPECT_NEAR(xy, yx, 1e-12);
        EXPECT_EQ(wasserstein2_1d(x, x), 0.0);
        EXPECT_GT(xy, 0.0);
        EXPECT_LE(wasserstein2_1d(x, z), xy + wasserstein2_1d(y, z) + 1e-12);
    }
}

TEST(Wasserstein, MatchesBruteForceSmallN) {
    for (std::uint64_t seed = 0; seed < 60; ++seed) {
        ParticleStream s(seed, streams::initial, 3);
        const std::size_t n = 1 + seed % 6;
        auto a = random_cloud(s, n);
        auto b = random_cloud(s, n);
        EXPECT_NEAR(wasserstein2_1d(empirical_1d(a), empirical_1d(b)), brute_force_w2(a, b), 1e-12);
    }
}

TEST(EmpiricalMeasure, CsvExport) {
    std::ostringstream os;
    write_csv(os, empirical_from_samples({{0.5, -1}, {2, 3.25}}));
    EXPECT_EQ(os.str(), "x1,x2\n0.5,-1\n2,3.25\n");
}
