#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "mflow/functional.hpp"
#include "mflow/rng.hpp"

using namespace mflow;

namespace {

CylindricalFunctional moment_of(int k) { return CylindricalFunctional::linear(Polynomial::monomial(1, k)); }

// <x, mu>^2
CylindricalFunctional mean_squared() {
    return {Polynomial::monomial(1, 2), {Polynomial::monomial(1, 1)}};
}

// Random cylindrical functional with outer degree <= 4 over d variables.
CylindricalFunctional random_functional(ParticleStream& s, std::size_t d, std::size_t n, int max_deg) {
    auto random_poly = [&](std::size_t arity, int deg) {
        std::vector<Polynomial::Term> terms;
        for (int t = 0; t < 4; ++t) {
            Polynomial::Exponents e(arity, 0);
            int budget = static_cast<int>(s.uniform() * (deg + 1));
            for (int b = 0; b < budget; ++b) e[static_cast<std::size_t>(s.uniform() * arity)]++;
            terms.emplace_back(s.uniform(-1, 1), e);
        }
        return Polynomial(arity, terms);
    };
    std::vector<Polynomial> inner;
    for (std::size_t k = 0; k < n; ++k) inner.push_back(random_poly(d, max_deg));
    return {random_poly(n, max_deg), inner};
}

EmpiricalMeasure random_cloud(ParticleStream& s, std::size_t n, std::size_t d) {
    std::vector<double> xs(n * d);
    for (auto& x : xs) x = s.uniform(-1, 1);
    return {xs, d};
}

}  // namespace

TEST(Polynomial, NormalizationAndDerivatives) {
    Polynomial p{2, {{1.0, {1, 0}}, {2.0, {1, 0}}, {0.0, {3, 3}}, {1.0, {0, 2}}, {-1.0, {0, 2}}}};
    EXPECT_EQ(p.term_count(), 1u);
    EXPECT_EQ(p, (Polynomial{2, {{3.0, {1, 0}}}}));
    Polynomial q{2, {{2.0, {2, 1}}, {1.0, {0, 0}}}};
    EXPECT_EQ(q.partial(0), (Polynomial{2, {{4.0, {1, 1}}}}));
    EXPECT_EQ(q.partial(1), (Polynomial{2, {{2.0, {2, 0}}}}));
    EXPECT_TRUE(Polynomial::constant(2, 5).partial(0).is_zero());
    const std::vector<double> x{2.0, 3.0};
    EXPECT_DOUBLE_EQ(q(x), 2 * 4 * 3 + 1);
    EXPECT_THROW((void)q(std::vector<double>{1.0}), InvalidArgument);
}

TEST(Functional, Evaluate) {
    EXPECT_DOUBLE_EQ(mean_squared().evaluate(empirical_1d({0, 2})), 1.0);
    EXPECT_DOUBLE_EQ(moment_of(2).evaluate(empirical_1d({3})), 9.0);
    auto prod = moment_of(1) * moment_of(2);
    EXPECT_DOUBLE_EQ(prod.evaluate(empirical_1d({1, 2})), 3.75);
    EXPECT_THROW((void)moment_of(1).evaluate(empirical_from_samples({{1, 2}})), InvalidArgument);
}

TEST(Functional, LionsDerivative) {
    auto mu = empirical_1d({0.5, 1.5, 4.0});
    const double m = 2.0;
    const std::vector<double> x{0.7};
    // linear: g'(x)
    auto cube = moment_of(3);
    EXPECT_DOUBLE_EQ(cube.lions_derivative(mu, x)[0], 3 * 0.49);
    EXPECT_DOUBLE_EQ(mean_squared().lions_derivative(mu, x)[0], 2 * m);
    EXPECT_DOUBLE_EQ(moment_of(2).lions_derivative(mu, x)[0], 1.4);
}

TEST(Functional, LionsXDerivative) {
    auto mu = empirical_1d({0.5, 1.5, 4.0});
    EXPECT_DOUBLE_EQ(moment_of(2).lions_x_derivative(mu, std::vector<double>{0.3})[0], 2.0);
    EXPECT_DOUBLE_EQ(mean_squared().lions_x_derivative(mu, std::vector<double>{0.3})[0], 0.0);
    EXPECT_DOUBLE_EQ(moment_of(3).lions_x_derivative(mu, std::vector<double>{2.0})[0], 12.0);
}

TEST(Functional, LinearDerivativeDiff) {
    auto mu = empirical_1d({0.5, 1.5, 4.0});
    const std::vector<double> a{1.0}, b{2.0};
    EXPECT_EQ(mean_squared().linear_derivative_diff(mu, a, a), 0.0);
    EXPECT_DOUBLE_EQ(moment_of(2).linear_derivative_diff(mu, b, a), 3.0);
    EXPECT_DOUBLE_EQ(mean_squared().linear_derivative_diff(mu, b, a), 2 * 2.0 * (2.0 - 1.0));
}

TEST(Functional, LinearDerivativeTelescopes) {
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        ParticleStream s(seed, streams::initial, 10);
        const std::size_t d = 1 + seed % 3;
        auto phi = random_functional(s, d, 1 + seed % 3, 4);
        auto mu = random_cloud(s, 7, d);
        std::vector<double> a(d), b(d), c(d);
        for (std::size_t j = 0; j < d; ++j) {
            a[j] = s.uniform(-1, 1);
            b[j] = s.uniform(-1, 1);
            c[j] = s.uniform(-1, 1);
        }
        const double ac = phi.linear_derivative_diff(mu, a, c);
        const double split = phi.linear_derivative_diff(mu, a, b) + phi.linear_derivative_diff(mu, b, c);
        EXPECT_NEAR(ac, split, 1e-12 * (1 + std::abs(ac)));
    }
}

// The x-gradient of sum_k w_k g_k(x) is the Lions derivative, term by term.
TEST(Functional, LinearDerivativeGradientIsLionsDerivativeSymbolically) {
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        ParticleStream s(seed, streams::initial, 11);
        const std::size_t d = 1 + seed % 3;
        auto phi = random_functional(s, d, 1 + seed % 3, 4);
        auto mu = random_cloud(s, 9, d);
        const auto w = phi.outer_gradient(phi.moments(mu));
        Polynomial flat = Polynomial::constant(d, 0.0);
        for (std::size_t k = 0; k < phi.n(); ++k) flat = flat + w[k] * phi.inner()[k];
        for (int probe = 0; probe < 5; ++probe) {
            std::vector<double> x(d);
            for (auto& v : x) v = s.uniform(-2, 2);
            const auto lions = phi.lions_derivative(mu, x);
            for (std::size_t j = 0; j < d; ++j)
                EXPECT_NEAR(flat.partial(j)(x), lions[j], 1e-12 * (1 + std::abs(lions[j])));
        }
    }
}

TEST(Functional, LiftGradientExamples) {
    ParticleStream s(5, streams::direction, 0);
    auto mu = random_cloud(s, 50, 1);
    std::vector<double> v(50);
    for (auto& x : v) x = s.uniform(-1, 1);
    // Linear functional: remainder h * <g'' v^2>/2, tiny for h small.
    const double lin = check_lift_gradient(moment_of(2), mu, v, 1e-4);
    EXPECT_LE(lin, 1e-4 * 1.0 + 1e-9);
    EXPECT_LE(check_lift_gradient(mean_squared(), mu, v, 1e-4), 1e-6);
    std::vector<double> zero(50, 0.0);
    EXPECT_EQ(check_lift_gradient(moment_of(3), mu, zero, 1e-3), 0.0);
    EXPECT_THROW(check_lift_gradient(moment_of(3), mu, v, 0.0), InvalidArgument);
}

TEST(Functional, LiftGradientFirstOrder) {
    // Outer degree 3: Phi = <x,mu>^3 + <x^2,mu>
    CylindricalFunctional phi{Polynomial{2, {{1.0, {3, 0}}, {1.0, {0, 1}}}},
                              {Polynomial::monomial(1, 1), Polynomial::monomial(1, 2)}};
    ParticleStream s(6, streams::direction, 0);
    auto mu = random_cloud(s, 40, 1);
    std::vector<double> v(40);
    for (auto& x : v) x = s.uniform(0, 1);
    double prev = check_lift_gradient(phi, mu, v, 1e-2);
    for (double h : {5e-3, 2.5e-3, 1.25e-3}) {
        const double e = check_lift_gradient(phi, mu, v, h);
        EXPECT_NEAR(prev / e, 2.0, 0.1);
        prev = e;
    }
}

TEST(Functional, LinearDerivativeIdentity) {
    ParticleStream s(7, streams::initial, 0);
    auto mu = random_cloud(s, 11, 1);
    auto nu = random_cloud(s, 17, 1);
    EXPECT_LE(check_linear_derivative_identity(moment_of(3), mu, nu, 1), 1e-14);
    EXPECT_LE(check_linear_derivative_identity(mean_squared(), mu, nu, 2), 1e-14);
    EXPECT_GT(check_linear_derivative_identity(moment_of(1) * moment_of(1) * moment_of(2), mu, nu, 1), 1e-8);
    EXPECT_EQ(check_linear_derivative_identity(mean_squared(), mu, mu, 2), 0.0);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        ParticleStream r(seed, streams::initial, 12);
        auto phi = random_functional(r, 2, 2, 4);
        auto a = random_cloud(r, 6, 2);
        auto b = random_cloud(r, 9, 2);
        // Outer degree <= 4 in h: 3 nodes integrate degree 5 exactly.
        EXPECT_LE(check_linear_derivative_identity(phi, a, b, 3), 1e-12);
    }
}

TEST(Functional, AlgebraClosure) {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        ParticleStream s(seed, streams::initial, 13);
        auto p = random_functional(s, 2, 2, 3);
        auto q = random_functional(s, 2, 1, 3);
        auto mu = random_cloud(s, 10, 2);
        const double a = p.evaluate(mu), b = q.evaluate(mu);
        EXPECT_NEAR((p + q).evaluate(mu), a + b, 1e-12 * (1 + std::abs(a + b)));
        EXPECT_NEAR((p * q).evaluate(mu), a * b, 1e-12 * (1 + std::abs(a * b)));
        std::vector<double> x{0.3, -0.4};
        auto lp = p.lions_derivative(mu, x), lq = q.lions_derivative(mu, x);
        auto ls = (p * q).lions_derivative(mu, x);
        for (std::size_t j = 0; j < 2; ++j)
            EXPECT_NEAR(ls[j], lp[j] * b + a * lq[j], 1e-12 * (1 + std::abs(ls[j])));
    }
}

TEST(Quadrature, GaussLegendre) {
    for (std::size_t m = 1; m <= 8; ++m) {
        auto q = gauss_legendre_01(m);
        for (int k = 0; k < static_cast<int>(2 * m); ++k) {
            double s = 0;
            for (std::size_t i = 0; i < m; ++i) s += q.weights[i] * std::pow(q.nodes[i], k);
            EXPECT_NEAR(s, 1.0 / (k + 1), 1e-14);
        }
    }
}
