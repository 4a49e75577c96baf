#include <cmath>

#include <gtest/gtest.h>

#include "mflow/mv.hpp"

using namespace mflow;

namespace {

MVParams planned(double gamma) { return {0.03, 0.2, 0.25, 2.0, 1.0, gamma, 1.0}; }

InitialFn cloud(double m, double s) {
    return [m, s](ParticleStream& st, double* x) { x[0] = m + s * st.normal(); };
}

}  // namespace

TEST(MeanVariance, ClosedFormsSolveTheirOdes) {
    const std::vector<MVParams> ps{planned(2.0), {0.1, 0.5, 0.3, 1.0, 0.5, 3.0, 2.0}, {-0.05, 0.3, 0.3, 4.0, 0, 1, 0.5}};
    for (const auto& p : ps) {
        const MVValue v(p);
        for (int i = 0; i <= 20; ++i) {
            const double t = p.T * i / 20.0;
            for (double r : v.ode_residuals(t)) EXPECT_LE(std::abs(r), 1e-10) << "t=" << t;
        }
        for (double r : v.terminal_residuals()) EXPECT_EQ(r, 0.0);
    }
}

TEST(MeanVariance, ValueExamples) {
    const auto p = planned(2.0);
    EXPECT_DOUBLE_EQ(closed_form_value(p, p.T, empirical_1d({0.7})), -0.7);
    // beta = 2 and r = k/2 make A constant.
    MVParams q{0.32, 0.4, 0.5, 2.0, 0.0, 0.0, 1.0};
    for (double t : {0.0, 0.3, 1.0}) EXPECT_NEAR(MVValue(q).A(t), 1.0, 1e-15);
    // rho = sigma, T = 1: D(0) = -(e - 1) / (2 beta).
    MVParams u{0.0, 0.3, 0.3, 2.0, 0.0, 0.0, 1.0};
    EXPECT_NEAR(MVValue(u).D(0.0), -(std::exp(1.0) - 1.0) / 4.0, 1e-15);
    EXPECT_THROW(closed_form_value(p, 1.5, empirical_1d({0.0})), InvalidArgument);
    EXPECT_THROW(closed_form_value(p, 0.5, EmpiricalMeasure({0.0, 1.0}, 2)), InvalidArgument);
}

TEST(MeanVariance, RegionExamples) {
    MVParams idle = planned(0.5);
    idle.lambda = 0.0;
    EXPECT_EQ(region_classify(idle, 0.2, 0.0, -100.0, 1e-9), Region::continuation);
    const auto p = planned(2.0);
    EXPECT_EQ(region_classify(p, 0.2, 1.0, 50.0, 1e-9), Region::continuation);
    const MVValue v(p);
    const double root = 1.0 + v.boundary_offset(0.2);
    EXPECT_EQ(region_classify(p, 0.2, 1.0, root, 1e-9), Region::boundary);
    EXPECT_EQ(region_classify(p, 0.2, 1.0, root - 0.01, 1e-9), Region::violation);
    EXPECT_THROW(region_classify(p, 0.2, 1.0, root, 0.0), InvalidArgument);
    EXPECT_STREQ(region_name(Region::boundary), "boundary");
}

TEST(MeanVariance, Errors) {
    MVParams bad = planned(2.0);
    bad.sigma = 0.0;
    EXPECT_THROW(bad.validate(), InvalidArgument);
    bad = planned(2.0);
    bad.beta = -1;
    EXPECT_THROW(MVValue{bad}, InvalidArgument);
    bad = planned(2.0);
    bad.T = 0;
    EXPECT_THROW(bad.validate(), InvalidArgument);
    // gamma / lambda below exp(rT).
    EXPECT_THROW(simulate_optimal(planned(1.0), cloud(1, 0.1), 10, TimeGrid(0, 1, 10), 1), InvalidArgument);
    MVParams no_push = planned(-1.0);
    no_push.lambda = 0.0;
    EXPECT_THROW(simulate_optimal(no_push, cloud(1, 0.1), 10, TimeGrid(0, 1, 10), 1), SimulationError);
    EXPECT_THROW(simulate_optimal(planned(2.0), cloud(1, 0.1), 10, TimeGrid(0, 0.5, 10), 1), InvalidArgument);
    // Initial cloud outside the continuation region.
    EXPECT_THROW(mc_value_check(planned(1.5), cloud(1, 1.0), 200, TimeGrid(0, 1, 10), 1), InvalidArgument);
}

TEST(MeanVariance, ProjectionLandsOnBoundary) {
    const auto p = planned(1.8);
    const MVValue v(p);
    std::vector<double> x(999), push(999, 0.0);
    ParticleStream s(5, streams::initial, 0);
    for (double& xi : x) xi = s.normal();
    const auto before = x;
    mv_project(v, 0.4, x, push, 1e-6);
    const double m = pairwise_mean(std::span<const double>(x));
    const double tol = 1e-6 * v.scale(0.4);
    std::size_t moved = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        EXPECT_GE(push[i], 0.0);
        EXPECT_GE(v.switching(0.4, m, x[i]), -tol);
        if (push[i] > 0.0) {
            ++moved;
            EXPECT_EQ(region_classify(p, 0.4, m, x[i], tol), Region::boundary);
            EXPECT_NEAR(x[i] - before[i], p.lambda * push[i], 1e-12);
        } else {
            EXPECT_EQ(x[i], before[i]);
        }
    }
    EXPECT_GT(moved, 0u);
}

TEST(MeanVariance, GammaLargeMatchesUnreflectedLoop) {
    const auto p = planned(50.0);
    const TimeGrid g(0, 1, 200);
    const auto b = simulate_optimal_bundle(p, cloud(1, 0.2), 500, g, 9);
    const auto u = simulate_jump_diffusion(mv_unreflected_spec(p, cloud(1, 0.2)), 500, g, 9);
    for (std::size_t k = 0; k < b.node_count(); ++k) {
        EXPECT_FALSE(b.has_node_event(k));
        ASSERT_EQ(b.states(k), u.states(k)) << "node " << k;
    }
    const auto run = simulate_optimal(p, cloud(1, 0.2), 500, g, 9);
    EXPECT_EQ(run.eta_increments, 0u);
    for (double e : run.eta_total) EXPECT_EQ(e, 0.0);
}

TEST(MeanVariance, UnreflectedMeanFollowsOde) {
    const auto p = planned(50.0);
    const MVValue v(p);
    const TimeGrid g(0, 1, 1000);
    const auto b = simulate_jump_diffusion(mv_unreflected_spec(p, cloud(1, 0.2)), 4000, g, 3);
    const double m0 = pairwise_mean(std::span<const double>(b.states(0)));
    for (std::size_t k : {std::size_t{250}, std::size_t{1000}}) {
        const double m = pairwise_mean(std::span<const double>(b.states(k)));
        // Mean drift is exact in the feedback; only Euler bias and MC noise remain.
        EXPECT_NEAR(m, v.unreflected_mean(m0, g.time(k)), 0.03);
    }
}

namespace {

// Particles placed on the boundary by the initial projection, and which of
// them are pushed again at the first node.
class FirstPush : public StepObserver {
public:
    void on_start(const StartView& v) override {
        if (v.node_event) start_.assign(v.node_eta.begin(), v.node_eta.end());
    }
    void on_step(const StepView& v) override {
        if (v.k != 0) return;
        for (std::size_t i = 0; i < start_.size(); ++i) {
            if (!(start_[i] > 0.0)) continue;
            ++on_boundary;
            if (v.node_event && v.node_eta[i] > 0.0) ++pushed_again;
        }
    }
    std::size_t on_boundary = 0, pushed_again = 0;

private:
    std::vector<double> start_;
};

}  // namespace

TEST(MeanVariance, BoundaryStartPushesAboutHalf) {
    FirstPush fp;
    const auto run = simulate_optimal(planned(2.0), cloud(1, 0.5), 20000, TimeGrid(0, 1, 1000), 11, {&fp});
    EXPECT_EQ(run.initial_pushed, fp.on_boundary);
    ASSERT_GT(fp.on_boundary, 300u);
    const double frac = static_cast<double>(fp.pushed_again) / static_cast<double>(fp.on_boundary);
    EXPECT_GT(frac, 0.4) << fp.pushed_again << "/" << fp.on_boundary;
    EXPECT_LT(frac, 0.6) << fp.pushed_again << "/" << fp.on_boundary;
    EXPECT_EQ(run.region_violations, 0u);
}

TEST(MeanVariance, DegenerateBoundaryAborts) {
    // gamma = lambda exp(rT) leaves almost no room below the mean; the
    // projection cannot settle within its pass cap.
    auto p = planned(0.0);
    p.gamma = std::exp(p.r * p.T);
    try {
        simulate_optimal(p, [](ParticleStream&, double* x) { x[0] = 1.0; }, 4000, TimeGrid(0, 1, 100), 11);
        FAIL() << "expected projection failure";
    } catch (const SimulationError& e) {
        EXPECT_NE(std::string(e.what()).find("did not settle"), std::string::npos) << e.what();
    }
}

TEST(MeanVariance, ValueCheckWithoutReflection) {
    const auto r = mc_value_check(planned(50.0), cloud(1, 0.2), 5000, TimeGrid(0, 1, 200), 21);
    EXPECT_EQ(r.eta_increments, 0u);
    EXPECT_TRUE(r.within()) << r.gap << " vs " << r.band;
}

TEST(MeanVariance, ValueCheckWithActiveReflection) {
    const auto r = mc_value_check(planned(2.0), cloud(1, 0.2), 5000, TimeGrid(0, 1, 200), 22);
    EXPECT_GT(r.eta_increments, 1000u);
    EXPECT_GT(r.mean_eta, 0.0);
    EXPECT_EQ(r.region_violations, 0u);
    EXPECT_GE(r.min_switching, -1e-6);
    EXPECT_TRUE(r.within()) << r.gap << " vs " << r.band;
}

TEST(MeanVariance, AdjointAlongPath) {
    const auto p = planned(2.0);
    const auto b = simulate_optimal_bundle(p, cloud(1, 0.2), 2000, TimeGrid(0, 1, 200), 4);
    const auto a = adjoint_along_path(p, b);
    EXPECT_EQ(a.coefficient_residual, 0.0);
    EXPECT_LE(a.terminal_residual, 1e-10);
    EXPECT_LE(a.mean_particle_residual, 1e-12);
    EXPECT_TRUE(a.drift_within()) << a.drift_mean << " band " << a.drift_band;
    EXPECT_EQ(a.p.size(), b.node_count());
}

TEST(MeanVariance, PerturbedFeedbackDoesNotWin) {
    const auto r = mv_value_dominance(planned(2.0), cloud(1, 0.2), 4, 0.2, 2000, TimeGrid(0, 1, 100), 8);
    EXPECT_EQ(r.violations, 0u);
    for (double g : r.gaps) EXPECT_GT(g, -3 * r.paired_se.front() - 1e-3);
}

TEST(MeanVariance, ThreadCountDoesNotChangeResults) {
    set_thread_count(1);
    const auto a = simulate_optimal(planned(2.0), cloud(1, 0.2), 3000, TimeGrid(0, 1, 50), 2);
    set_thread_count(8);
    const auto b = simulate_optimal(planned(2.0), cloud(1, 0.2), 3000, TimeGrid(0, 1, 50), 2);
    set_thread_count(0);
    EXPECT_EQ(a.terminal_cost, b.terminal_cost);
    EXPECT_EQ(a.eta_total, b.eta_total);
}
