#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "mflow/ito.hpp"
#include "mflow/laws.hpp"

using namespace mflow;

namespace {

CylindricalFunctional moment(int k) { return CylindricalFunctional::linear(Polynomial::monomial(1, k)); }

JumpDiffusionSpec scalar_spec(double b, double sigma, double rate, ScalarLaw init = ScalarLaw::dirac(0.0)) {
    JumpDiffusionSpec s;
    s.dimension = 1;
    s.initial = [init](ParticleStream& st, double* x) { x[0] = init.sample(st); };
    if (b != 0.0) s.drift = [b](double, const double*, const double*, const MeasureFeatures&, double* o) { o[0] = b; };
    if (sigma != 0.0)
        s.diffusion = [sigma](double, const double*, const double*, const MeasureFeatures&, double* o) { o[0] = sigma; };
    if (rate > 0.0) {
        s.jump_rate = rate;
        s.jump = [](double, const double*, const double*, const MeasureFeatures&, const double*, double* o) { o[0] = 1.0; };
    }
    return s;
}

JumpDiffusionSpec uniform_mark_spec(double rate) {
    auto s = scalar_spec(0, 0, 0);
    s.jump_rate = rate;
    s.marks = {ScalarLaw::uniform(0, 1)};
    s.jump = [](double, const double*, const double*, const MeasureFeatures&, const double* th, double* o) { o[0] = th[0]; };
    return s;
}

std::size_t last(const PathBundle& b) { return b.node_count() - 1; }

}  // namespace

TEST(Ito, LinearDeterministic) {
    auto b = simulate_jump_diffusion(scalar_spec(0.7, 0, 0, ScalarLaw::normal(0, 1)), 50, TimeGrid(0, 1, 20), 1);
    auto r = verify_general(moment(1), b, 4, 16);
    EXPECT_NEAR(r.lhs, 0.7 * (b.grid().time(16) - b.grid().time(4)), 1e-12);
    EXPECT_LE(std::abs(r.residual), 1e-12);
    EXPECT_EQ(r.terms.quadratic_variation_term, 0.0);
    EXPECT_EQ(r.terms.law_jump_term, 0.0);
    EXPECT_EQ(r.terms.lions_jump_compensator, 0.0);
    EXPECT_EQ(r.terms.linear_derivative_jump_term, 0.0);
}

TEST(Ito, BrownianSecondMoment) {
    auto b = simulate_jump_diffusion(scalar_spec(0, 1, 0), 20000, TimeGrid(0, 1, 100), 2);
    auto r = verify_general(moment(2), b, 0, last(b));
    EXPECT_DOUBLE_EQ(r.terms.quadratic_variation_term, 1.0);
    EXPECT_LE(std::abs(r.residual), 3 * r.residual_se + 5 * 0.01);
    EXPECT_NEAR(r.lhs, 1.0, 3 * r.lhs_se);
    EXPECT_EQ(r.terms.lions_jump_compensator, 0.0);
    EXPECT_EQ(r.terms.linear_derivative_jump_term, 0.0);
}

TEST(Ito, CompoundPoissonMean) {
    const double rate = 1.5;
    auto b = simulate_jump_diffusion(scalar_spec(0, 0, rate), 20000, TimeGrid(0, 1, 50), 3);
    auto r = verify_general(moment(1), b, 0, last(b));
    EXPECT_NEAR(r.lhs, rate, 3 * r.lhs_se);
    // Linear functional: jump parts of (i) and (iv) cancel, (v) carries the jumps.
    EXPECT_NEAR(r.terms.drift_diffusion_integral + r.terms.lions_jump_compensator, 0.0, 1e-12);
    EXPECT_LE(std::abs(r.residual), 3 * r.residual_se + 1e-12);
    EXPECT_EQ(r.terms.quadratic_variation_term, 0.0);
    EXPECT_EQ(r.terms.law_jump_term, 0.0);
}

TEST(Ito, JumpCorollaryUniformMarks) {
    auto s = uniform_mark_spec(1.0);
    auto b = simulate_jump_diffusion(s, 20000, TimeGrid(0, 1, 50), 4);
    auto r = verify_jump_corollary(moment(1), s, b, 0, last(b), 4);
    EXPECT_NEAR(r.terms.linear_derivative_jump_term, 0.5, 0.02);
    EXPECT_NEAR(r.lhs, 0.5, 3 * r.lhs_se);
    EXPECT_LE(std::abs(r.residual), 3 * r.residual_se);
    auto g = verify_general(moment(1), b, 0, last(b));
    const auto agree = compare_pathways(g, r);
    EXPECT_LE(std::abs(agree.difference), 3 * agree.combined_se);
}

TEST(Ito, JumpCorollaryNoJumpsIsContinuousCase) {
    auto s = scalar_spec(0, 1, 0);
    auto b = simulate_jump_diffusion(s, 2000, TimeGrid(0, 1, 20), 5);
    auto r = verify_jump_corollary(moment(2), s, b, 0, last(b), 3);
    EXPECT_EQ(r.terms.linear_derivative_jump_term, 0.0);
    EXPECT_DOUBLE_EQ(r.terms.quadratic_variation_term, 1.0);
}

TEST(Ito, JumpCorollarySecondMoment) {
    const double rate = 1.0, T = 1.0;
    auto s = scalar_spec(0, 0, rate);
    auto b = simulate_jump_diffusion(s, 20000, TimeGrid(0, T, 100), 6);
    auto r = verify_jump_corollary(moment(2), s, b, 0, last(b), 1);
    EXPECT_NEAR(r.lhs, rate * rate * T * T + rate * T, 3 * r.lhs_se);
    EXPECT_LE(std::abs(r.residual), 3 * r.residual_se + 5 * 0.01);
}

TEST(Ito, SingularCommonJumpDeterministic) {
    SingularSpec s;
    s.initial = [](ParticleStream&, double* x) { x[0] = 0.0; };
    s.lambda = {1.0};
    s.common = {{0.5, {1.0}}};
    auto b = simulate_singular(s, 100, TimeGrid(0, 1, 10), 7);
    auto r = verify_singular_corollary(moment(2), s, b, 0, last(b));
    EXPECT_EQ(r.lhs, 1.0);
    EXPECT_EQ(r.terms.law_jump_term, 1.0);
    EXPECT_LE(std::abs(r.residual), 1e-10);
    EXPECT_EQ(r.law_jump_nodes, 1u);
    EXPECT_EQ(r.law_jump_bound_violations, 0u);
    auto g = verify_general(moment(2), b, 0, last(b));
    EXPECT_LE(std::abs(g.residual), 1e-10);
}

TEST(Ito, SingularIdiosyncratic) {
    SingularSpec s;
    s.initial = [](ParticleStream&, double* x) { x[0] = 0.0; };
    s.lambda = {1.0};
    s.idiosyncratic = IdiosyncraticEta::uniform_time;
    s.idiosyncratic_delta = {1.0};
    auto b = simulate_singular(s, 5000, TimeGrid(0, 1, 20), 8);
    auto r = verify_singular_corollary(moment(2), s, b, 0, last(b));
    EXPECT_EQ(r.terms.law_jump_term, 0.0);
    EXPECT_EQ(r.lhs, 1.0);
    EXPECT_LE(std::abs(r.residual), 3 * r.residual_se);
}

TEST(Ito, SingularZeroEta) {
    SingularSpec s;
    s.initial = [](ParticleStream& st, double* x) { x[0] = st.normal(); };
    s.diffusion = [](double, const double*, const double*, const MeasureFeatures&, double* o) { o[0] = 0.5; };
    s.lambda = {1.0};
    auto b = simulate_singular(s, 1000, TimeGrid(0, 1, 20), 9);
    auto r = verify_singular_corollary(moment(2), s, b, 0, last(b));
    EXPECT_EQ(r.terms.singular_control_integral, 0.0);
    EXPECT_EQ(r.terms.law_jump_term, 0.0);
    EXPECT_EQ(r.terms.lions_jump_compensator, 0.0);
    EXPECT_EQ(r.terms.linear_derivative_jump_term, 0.0);
}

TEST(Ito, TelescopingAcrossWindows) {
    auto s = uniform_mark_spec(1.0);
    s.diffusion = [](double, const double*, const double*, const MeasureFeatures&, double* o) { o[0] = 0.4; };
    CylindricalFunctional phi{Polynomial{2, {{1.0, {2, 0}}, {-0.5, {0, 1}}}},
                              {Polynomial::monomial(1, 1), Polynomial::monomial(1, 2)}};
    phi = phi + moment(3);
    auto b = simulate_jump_diffusion(s, 500, TimeGrid(0, 1, 30), 10);
    auto whole = verify_general(phi, b, 3, 27);
    auto a = verify_general(phi, b, 3, 12);
    auto c = verify_general(phi, b, 12, 27);
    auto close = [](double x, double y) { return std::abs(x - y) <= 1e-12 * (1 + std::abs(x)); };
    EXPECT_TRUE(close(whole.lhs, a.lhs + c.lhs));
    EXPECT_TRUE(close(whole.terms.drift_diffusion_integral,
                      a.terms.drift_diffusion_integral + c.terms.drift_diffusion_integral));
    EXPECT_TRUE(close(whole.terms.quadratic_variation_term,
                      a.terms.quadratic_variation_term + c.terms.quadratic_variation_term));
    EXPECT_TRUE(close(whole.terms.lions_jump_compensator, a.terms.lions_jump_compensator + c.terms.lions_jump_compensator));
    EXPECT_TRUE(close(whole.terms.linear_derivative_jump_term,
                      a.terms.linear_derivative_jump_term + c.terms.linear_derivative_jump_term));
    EXPECT_TRUE(close(whole.residual, a.residual + c.residual));
}

TEST(Ito, ExactZeroStructureRandomScenarios) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const double sigma = (seed % 2) ? 0.0 : 0.5;
        const double rate = (seed % 3 == 0) ? 0.0 : 1.0;
        auto s = scalar_spec(0.1 * static_cast<double>(seed), sigma, rate, ScalarLaw::uniform(-1, 1));
        auto b = simulate_jump_diffusion(s, 200, TimeGrid(0, 1, 10), seed);
        auto r = verify_general(moment(1) * moment(2), b, 0, last(b));
        EXPECT_EQ(r.terms.law_jump_term, 0.0);
        if (sigma == 0.0) EXPECT_EQ(r.terms.quadratic_variation_term, 0.0);
        if (rate == 0.0) {
            EXPECT_EQ(r.terms.lions_jump_compensator, 0.0);
            EXPECT_EQ(r.terms.linear_derivative_jump_term, 0.0);
        }
    }
}

TEST(Ito, LawJumpBoundHoldsAtCommonNodes) {
    SingularSpec s;
    s.initial = [](ParticleStream& st, double* x) { x[0] = st.normal(); };
    s.diffusion = [](double, const double*, const double*, const MeasureFeatures&, double* o) { o[0] = 0.3; };
    s.lambda = {1.5};
    s.common = {{0.2, {0.5}}, {0.6, {1.0}}, {0.9, {0.25}}};
    auto b = simulate_singular(s, 400, TimeGrid(0, 1, 20), 12);
    auto r = verify_general(moment(1) * moment(1) + moment(3), b, 0, last(b));
    EXPECT_EQ(r.law_jump_nodes, 3u);
    EXPECT_EQ(r.law_jump_bound_violations, 0u);
}

TEST(Ito, Errors) {
    auto b = simulate_jump_diffusion(scalar_spec(0, 0, 0), 10, TimeGrid(0, 1, 5), 1);
    EXPECT_THROW(verify_general(moment(1), b, 3, 3), InvalidArgument);
    EXPECT_THROW(verify_general(moment(1), b, 0, 9), InvalidArgument);
    CylindricalFunctional two_d = CylindricalFunctional::linear(Polynomial::coordinate(2, 0));
    EXPECT_THROW(verify_general(two_d, b, 0, 5), InvalidArgument);
    auto s = scalar_spec(0, 0, 0);
    EXPECT_THROW(verify_jump_corollary(moment(1), s, b, 0, 5, 0), InvalidArgument);
}

TEST(ConvergenceSweep, DeterministicScenarioMachinePrecision) {
    auto s = scalar_spec(0.5, 0, 0, ScalarLaw::uniform(0, 1));
    auto run = [&](std::size_t n, std::size_t steps, std::uint64_t seed) {
        auto b = simulate_jump_diffusion(s, n, TimeGrid(0, 1, steps), seed);
        return verify_general(moment(1), b, 0, last(b));
    };
    auto res = convergence_sweep(run, {10, 100}, {10, 20}, {1, 2});
    EXPECT_EQ(res.rows.size(), 8u);
    for (const auto& r : res.rows) EXPECT_LE(std::abs(r.residual), 1e-12);
    EXPECT_THROW(convergence_sweep(run, {}, {10}, {1}), InvalidArgument);
}

TEST(ConvergenceSweep, LoglogSlope) {
    EXPECT_NEAR(loglog_slope({1, 10, 100}, {1, 0.1, 0.01}), -1.0, 1e-12);
    EXPECT_NEAR(loglog_slope({1, 4, 16}, {1, 0.5, 0.25}), -0.5, 1e-12);
}
