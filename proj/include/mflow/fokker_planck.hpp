#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "mflow/error.hpp"
#include "mflow/functional.hpp"
#include "mflow/ito.hpp"
#include "mflow/laws.hpp"
#include "mflow/simulation.hpp"

namespace mflow {

struct SpaceGrid {
    double lo = -5.0, hi = 5.0;
    std::size_t nodes = 401;

    [[nodiscard]] double dx() const { return (hi - lo) / static_cast<double>(nodes - 1); }
    [[nodiscard]] double x(std::size_t i) const { return lo + dx() * static_cast<double>(i); }
};

struct FokkerPlanckReport {
    double window = 0.0;
    double pde_rate = 0.0;  ///< (Phi(p_s) - Phi(p_t)) / (s - t) from the density
    double mc_rate = 0.0;   ///< generator estimate per unit time
    double mc_se = 0.0;
    double relative_error = 0.0;
    double mass_drift = 0.0;
    double cfl_number = 0.0;
    std::vector<double> times, pde_phi;  ///< Phi along the PDE solution
    [[nodiscard]] bool within(double rel_tol) const { return relative_error <= rel_tol; }
};

namespace detail {

inline MeasureFeatures density_features(const std::vector<double>& p, const SpaceGrid& g,
                                        const std::vector<Polynomial>& polys) {
    const double dx = g.dx();
    const std::size_t n = p.size();
    MeasureFeatures f;
    const double mass = pairwise_sum(0, n, [&](std::size_t i) { return p[i]; }) * dx;
    const double mean = pairwise_sum(0, n, [&](std::size_t i) { return g.x(i) * p[i]; }) * dx / mass;
    f.mean = {mean};
    f.variance = pairwise_sum(0, n, [&](std::size_t i) {
                     const double c = g.x(i) - mean;
                     return c * c * p[i];
                 }) *
                 dx / mass;
    for (const auto& q : polys)
        f.moments.push_back(pairwise_sum(0, n, [&](std::size_t i) {
                                const double xi = g.x(i);
                                return q.eval_unchecked(&xi) * p[i];
                            }) *
                            dx / mass);
    return f;
}

inline double density_phi(const CylindricalFunctional& phi, const std::vector<double>& p, const SpaceGrid& g) {
    const double dx = g.dx();
    std::vector<double> m(phi.n());
    for (std::size_t k = 0; k < phi.n(); ++k)
        m[k] = pairwise_sum(0, p.size(), [&](std::size_t i) {
                   const double xi = g.x(i);
                   return phi.inner()[k].eval_unchecked(&xi) * p[i];
               }) *
               dx;
    return phi.value_at(m);
}

}  // namespace detail

/// Explicit finite-volume solver for the one-dimensional forward equation
/// with drift, diffusion and a compound-Poisson jump term with additive
/// marks. Zero-flux walls; jump mass leaving the domain is lost and counted
/// in the mass drift.
class FokkerPlanck1D {
public:
    FokkerPlanck1D(const JumpDiffusionSpec& spec, const ScalarLaw& initial, SpaceGrid grid)
        : spec_(spec), g_(grid) {
        if (spec.dimension != 1) throw InvalidArgument("Fokker-Planck solver needs dimension 1");
        if (g_.nodes < 3 || !(g_.lo < g_.hi)) throw InvalidArgument("space grid needs at least 3 nodes and lo < hi");
        if (!initial.has_density()) throw InvalidArgument("initial law needs a density");
        if (spec.jump_rate > 0.0) {
            if (spec.marks.size() != 1 || !spec.marks[0].has_density())
                throw InvalidArgument("jump term needs a single mark with a density");
        }
        const double dx = g_.dx();
        p_.resize(g_.nodes);
        for (std::size_t i = 0; i < g_.nodes; ++i) p_[i] = initial.pdf(g_.x(i));
        const double mass = pairwise_sum(p_) * dx;
        require(mass > 0.0, "initial density has no mass on the space grid");
        for (double& v : p_) v /= mass;
        if (spec.jump_rate > 0.0) {
            // Cell-averaged kernel: w[m] = P(theta in [(m - 1/2) dx, (m + 1/2) dx]).
            const auto& law = spec.marks[0];
            const auto span = static_cast<std::ptrdiff_t>(g_.nodes);
            for (std::ptrdiff_t m = -span; m <= span; ++m) {
                const double w = law.cdf((static_cast<double>(m) + 0.5) * dx) - law.cdf((static_cast<double>(m) - 0.5) * dx);
                if (w > 0.0) kernel_.emplace_back(m, w);
            }
        }
    }

    [[nodiscard]] const std::vector<double>& density() const noexcept { return p_; }
    [[nodiscard]] const SpaceGrid& grid() const noexcept { return g_; }
    [[nodiscard]] double mass() const { return pairwise_sum(p_) * g_.dx(); }

    /// Largest dt (|b|/dx + sigma^2/dx^2 + lambda) seen so far.
    [[nodiscard]] double cfl_number() const noexcept { return cfl_; }

    void step(double t, double dt) {
        const std::size_t n = g_.nodes;
        const double dx = g_.dx();
        const auto feat = detail::density_features(p_, g_, spec_.features);
        std::vector<double> b(n, 0.0), D(n, 0.0);
        double bmax = 0.0, dmax = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double xi = g_.x(i);
            double a[max_dimension] = {};
            if (spec_.feedback) spec_.feedback(t, &xi, feat, a);
            if (spec_.drift) spec_.drift(t, &xi, a, feat, &b[i]);
            if (spec_.diffusion) {
                double s = 0.0;
                spec_.diffusion(t, &xi, a, feat, &s);
                D[i] = s * s;
            }
            bmax = std::max(bmax, std::abs(b[i]));
            dmax = std::max(dmax, D[i]);
        }
        const double cfl = dt * (dmax / (dx * dx) + bmax / dx + spec_.jump_rate);
        cfl_ = std::max(cfl_, cfl);
        if (cfl > 1.0)
            throw SimulationError(fmt::format(
                "CFL violated at t={}: dt*(sigma^2/dx^2 + |b|/dx + lambda) = {} > 1 (dt={}, dx={})", t, cfl, dt, dx));
        std::vector<double> flux(n + 1, 0.0);  // flux[i] at interface i-1/2
        for (std::size_t i = 0; i + 1 < n; ++i) {
            const double bf = 0.5 * (b[i] + b[i + 1]);
            const double adv = bf > 0.0 ? bf * p_[i] : bf * p_[i + 1];
            const double dif = -0.5 * (D[i + 1] * p_[i + 1] - D[i] * p_[i]) / dx;
            flux[i + 1] = adv + dif;
        }
        std::vector<double> next(n);
        for (std::size_t i = 0; i < n; ++i) next[i] = p_[i] - dt / dx * (flux[i + 1] - flux[i]);
        if (spec_.jump_rate > 0.0) {
            const double ld = spec_.jump_rate * dt;
            for (std::size_t i = 0; i < n; ++i) {
                double gain = 0.0;
                for (const auto& [m, w] : kernel_) {
                    const auto j = static_cast<std::ptrdiff_t>(i) - m;
                    if (j >= 0 && j < static_cast<std::ptrdiff_t>(n)) gain += w * p_[static_cast<std::size_t>(j)];
                }
                next[i] += ld * (gain - p_[i]);
            }
        }
        p_.swap(next);
    }

private:
    const JumpDiffusionSpec& spec_;
    SpaceGrid g_;
    std::vector<double> p_;
    std::vector<std::pair<std::ptrdiff_t, double>> kernel_;
    double cfl_ = 0.0;
};

/// Compares dPhi/dt of the PDE density with the Monte Carlo generator
/// estimate over [grid.t0, grid.T].
inline FokkerPlanckReport fokker_planck_consistency(const JumpDiffusionSpec& spec, const ScalarLaw& initial,
                                                    const CylindricalFunctional& phi, const TimeGrid& grid,
                                                    const SpaceGrid& space, std::size_t particles, std::uint64_t seed,
                                                    std::size_t mark_mc = 1) {
    if (phi.dimension() != 1) throw InvalidArgument("Fokker-Planck check needs a one-dimensional functional");
    FokkerPlanck1D fp(spec, initial, space);
    FokkerPlanckReport r;
    r.window = grid.T() - grid.t0();
    const double m0 = fp.mass();
    r.times.push_back(grid.t0());
    r.pde_phi.push_back(detail::density_phi(phi, fp.density(), space));
    for (std::size_t k = 0; k + 1 < grid.node_count(); ++k) {
        fp.step(grid.time(k), grid.time(k + 1) - grid.time(k));
        r.times.push_back(grid.time(k + 1));
        r.pde_phi.push_back(detail::density_phi(phi, fp.density(), space));
    }
    r.mass_drift = std::abs(fp.mass() - m0);
    r.cfl_number = fp.cfl_number();
    if (r.mass_drift > 1e-3)
        throw SimulationError(fmt::format("density mass drift {} exceeds 1e-3", r.mass_drift));
    r.pde_rate = (r.pde_phi.back() - r.pde_phi.front()) / r.window;

    JumpDiffusionSpec mc = spec;
    mc.initial = [initial](ParticleStream& s, double* x) { x[0] = initial.sample(s); };
    JumpCorollaryAccumulator acc(phi, mc, 0, grid.step_count(), mark_mc, seed);
    simulate_streaming(mc, particles, grid, seed, {&acc});
    const auto& rep = acc.report();
    const double gen = rep.terms.sum();
    r.mc_rate = gen / r.window;
    r.mc_se = rep.terms_se / r.window;
    const double scale = std::max(std::abs(r.pde_rate), std::abs(r.mc_rate));
    r.relative_error = scale > 0.0 ? std::abs(r.pde_rate - r.mc_rate) / scale : 0.0;
    return r;
}

}  // namespace mflow
