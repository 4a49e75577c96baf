#include <cmath>

#include <gtest/gtest.h>

#include "mflow/fokker_planck.hpp"

using namespace mflow;

namespace {

CylindricalFunctional moment(int k) { return CylindricalFunctional::linear(Polynomial::monomial(1, k)); }

JumpDiffusionSpec base() {
    JumpDiffusionSpec s;
    s.dimension = 1;
    s.initial = [](ParticleStream&, double* x) { x[0] = 0.0; };
    return s;
}

}  // namespace

TEST(FokkerPlanck, FrozenDensity) {
    auto s = base();
    const auto init = ScalarLaw::biweight(0.0, 1.0);
    auto r = fokker_planck_consistency(s, init, moment(2), TimeGrid(0, 0.5, 50), SpaceGrid{}, 200, 1);
    EXPECT_EQ(r.pde_rate, 0.0);
    EXPECT_EQ(r.mc_rate, 0.0);
    EXPECT_EQ(r.mass_drift, 0.0);
}

TEST(FokkerPlanck, HeatSecondMoment) {
    auto s = base();
    s.diffusion = [](double, const double*, const double*, const MeasureFeatures&, double* o) { o[0] = 1.0; };
    auto r = fokker_planck_consistency(s, ScalarLaw::biweight(0, 1), moment(2), TimeGrid(0, 0.5, 1000), SpaceGrid{},
                                       2000, 2);
    EXPECT_NEAR(r.pde_rate, 1.0, 1e-3);
    EXPECT_NEAR(r.mc_rate, 1.0, 1e-12);
    EXPECT_TRUE(r.within(0.05));
    EXPECT_LE(r.mass_drift, 1e-12);
}

TEST(FokkerPlanck, UniformJumpsMean) {
    auto s = base();
    s.jump_rate = 1.0;
    s.marks = {ScalarLaw::uniform(0, 1)};
    s.jump = [](double, const double*, const double*, const MeasureFeatures&, const double* th, double* o) { o[0] = th[0]; };
    auto r = fokker_planck_consistency(s, ScalarLaw::biweight(0, 1), moment(1), TimeGrid(0, 0.5, 200), SpaceGrid{},
                                       5000, 3);
    EXPECT_NEAR(r.pde_rate, 0.5, 1e-5);  // kernel weights carry cdf rounding at dx = 0.025
    EXPECT_NEAR(r.mc_rate, 0.5, 4 * r.mc_se + 1e-12);
    EXPECT_TRUE(r.within(0.05));
}

TEST(FokkerPlanck, MeanFieldDriftConservesMass) {
    auto s = base();
    s.drift = [](double, const double* x, const double*, const MeasureFeatures& f, double* o) { o[0] = -(x[0] - 0.5 * f.mean[0]); };
    s.diffusion = [](double, const double*, const double*, const MeasureFeatures&, double* o) { o[0] = 0.5; };
    FokkerPlanck1D fp(s, ScalarLaw::biweight(1.0, 1.0), SpaceGrid{});
    const double m0 = fp.mass();
    for (int k = 0; k < 100; ++k) fp.step(0.001 * k, 0.001);
    EXPECT_NEAR(fp.mass(), m0, 1e-12);
    for (double p : fp.density()) EXPECT_GE(p, 0.0);
}

TEST(FokkerPlanck, Errors) {
    auto s = base();
    s.diffusion = [](double, const double*, const double*, const MeasureFeatures&, double* o) { o[0] = 1.0; };
    try {
        fokker_planck_consistency(s, ScalarLaw::biweight(0, 1), moment(2), TimeGrid(0, 0.5, 10), SpaceGrid{}, 10, 1);
        FAIL() << "expected CFL failure";
    } catch (const SimulationError& e) {
        EXPECT_NE(std::string(e.what()).find("CFL"), std::string::npos);
    }
    EXPECT_THROW(FokkerPlanck1D(s, ScalarLaw::dirac(0), SpaceGrid{}), InvalidArgument);
    auto j = base();
    j.jump_rate = 1.0;
    j.marks = {ScalarLaw::uniform(0, 1)};
    j.jump = [](double, const double*, const double*, const MeasureFeatures&, const double* th, double* o) { o[0] = th[0]; };
    // Mass pushed past the right wall.
    EXPECT_THROW(fokker_planck_consistency(j, ScalarLaw::biweight(4.5, 0.4), moment(1), TimeGrid(0, 0.5, 50),
                                           SpaceGrid{}, 10, 1),
                 SimulationError);
}
