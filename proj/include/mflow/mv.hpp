#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "mflow/bundle.hpp"
#include "mflow/error.hpp"
#include "mflow/measure.hpp"
#include "mflow/parallel.hpp"
#include "mflow/rng.hpp"
#include "mflow/simulation.hpp"
#include "mflow/summation.hpp"

namespace mflow {

// ---------------------------------------------------------------------------
// Mean-variance problem with a singular push
//
//   dX = (r X + rho a) dt + sigma a dW + lambda d eta,
//   cost E[beta/2 (X_T - E X_T)^2 - X_T] + gamma E[eta_T].

struct MVParams {
    double r = 0.0, rho = 0.0, sigma = 1.0, beta = 1.0, lambda = 0.0, gamma = 0.0, T = 1.0;

    void validate() const {
        const std::array<std::pair<const char*, double>, 7> f{
            {{"r", r}, {"rho", rho}, {"sigma", sigma}, {"beta", beta}, {"lambda", lambda}, {"gamma", gamma}, {"T", T}}};
        for (const auto& [name, v] : f)
            if (!std::isfinite(v)) throw InvalidArgument(fmt::format("MV parameter {} is not finite", name));
        if (!(sigma > 0.0)) throw InvalidArgument("MV parameter sigma must be > 0");
        if (!(beta > 0.0)) throw InvalidArgument("MV parameter beta must be > 0");
        if (!(T > 0.0)) throw InvalidArgument("MV parameter T must be > 0");
        if (!(lambda >= 0.0)) throw InvalidArgument("MV parameter lambda must be >= 0");
    }

    [[nodiscard]] double k() const noexcept { return rho * rho / (sigma * sigma); }

    /// gamma + lambda C(t) >= 0 on [0, T]: the ensemble mean itself sits in
    /// the closed continuation region, otherwise no law satisfies s >= 0.
    [[nodiscard]] bool feasible() const noexcept {
        return gamma >= lambda * std::max(1.0, std::exp(r * T));
    }
};

/// Closed-form coefficients of V(t, mu) = A Var + B mean^2 + C mean + D.
struct MVValue {
    explicit MVValue(MVParams p) : p_(p) { p_.validate(); }

    [[nodiscard]] const MVParams& params() const noexcept { return p_; }

    [[nodiscard]] double A(double t) const { return 0.5 * p_.beta * std::exp((2 * p_.r - p_.k()) * tau(t)); }
    [[nodiscard]] double B(double t) const { return (check(t), 0.0); }
    [[nodiscard]] double C(double t) const { return -std::exp(p_.r * tau(t)); }
    // Integrates dD/dt = k C^2 / (4A) from D(T) = 0.
    [[nodiscard]] double D(double t) const { return -std::expm1(p_.k() * tau(t)) / (2 * p_.beta); }

    [[nodiscard]] double dA(double t) const { return -(2 * p_.r - p_.k()) * A(t); }
    [[nodiscard]] double dB(double t) const { return (check(t), 0.0); }
    [[nodiscard]] double dC(double t) const { return p_.r * std::exp(p_.r * tau(t)); }
    [[nodiscard]] double dD(double t) const { return p_.k() * std::exp(p_.k() * tau(t)) / (2 * p_.beta); }

    /// Residuals of the four coefficient ODEs at t.
    [[nodiscard]] std::array<double, 4> ode_residuals(double t) const {
        const double k = p_.k(), a = A(t), b = B(t), c = C(t);
        return {dA(t) - (k - 2 * p_.r) * a, dB(t) - k * b * b / a + 2 * p_.r * b, dC(t) + p_.r * c - k * b / a,
                dD(t) - k * c * c / (4 * a)};
    }

    [[nodiscard]] std::array<double, 4> terminal_residuals() const {
        return {A(p_.T) - 0.5 * p_.beta, B(p_.T), C(p_.T) + 1.0, D(p_.T)};
    }

    /// Lions derivative d_mu V(t, mu)(x) = 2A (x - mean) + C.
    [[nodiscard]] double lions(double t, double x, double xbar) const { return 2 * A(t) * (x - xbar) + C(t); }

    /// s = gamma + lambda d_mu V; the continuation region is s > 0.
    [[nodiscard]] double switching(double t, double xbar, double x) const {
        return p_.gamma + p_.lambda * lions(t, x, xbar);
    }

    /// Offset c(t) with boundary x = xbar + c(t); needs lambda > 0.
    [[nodiscard]] double boundary_offset(double t) const {
        return -(p_.gamma / p_.lambda + C(t)) / (2 * A(t));
    }

    /// Scale used for relative region tolerances.
    [[nodiscard]] double scale(double t) const { return std::abs(p_.gamma) + p_.lambda * std::abs(C(t)); }

    [[nodiscard]] double feedback(double t, double x, double xbar) const {
        const double s2 = p_.sigma * p_.sigma;
        return -p_.rho / s2 * (x - xbar) + p_.rho / (p_.beta * s2) * std::exp((p_.k() - p_.r) * tau(t));
    }

    /// Terminal cost g(x, mu) = beta/2 (x - mean)^2 - x.
    [[nodiscard]] double terminal(double x, double xbar) const {
        const double y = x - xbar;
        return 0.5 * p_.beta * y * y - x;
    }

    /// Mean of the unreflected closed loop started from xbar0 at time 0.
    [[nodiscard]] double unreflected_mean(double xbar0, double t) const {
        check(t);
        const double k = p_.k();
        return std::exp(p_.r * t) * (xbar0 + std::exp((k - p_.r) * p_.T) / p_.beta * (-std::expm1(-k * t)));
    }

private:
    void check(double t) const {
        if (!(t >= 0.0 && t <= p_.T))
            throw InvalidArgument(fmt::format("time {} outside [0, {}]", t, p_.T));
    }
    [[nodiscard]] double tau(double t) const { return (check(t), p_.T - t); }

    MVParams p_;
};

inline double closed_form_value(const MVParams& p, double t, double mean, double variance) {
    const MVValue v(p);
    return v.A(t) * variance + v.B(t) * mean * mean + v.C(t) * mean + v.D(t);
}

/// Population mean and variance of the cloud.
inline double closed_form_value(const MVParams& p, double t, const EmpiricalMeasure& mu) {
    if (mu.dimension() != 1) throw InvalidArgument("MV value needs a one-dimensional measure");
    const auto x = mu.data();
    const double m = pairwise_mean(x);
    const double var = pairwise_sum(0, x.size(), [&](std::size_t i) { return (x[i] - m) * (x[i] - m); }) /
                       static_cast<double>(x.size());
    return closed_form_value(p, t, m, var);
}

/// `boundary` is the action set {s = 0} within tolerance; `violation` is
/// s < -tol, which the optimal state never visits.
enum class Region { continuation, boundary, violation };

inline const char* region_name(Region r) {
    switch (r) {
        case Region::continuation: return "continuation";
        case Region::boundary: return "boundary";
        default: return "violation";
    }
}

inline Region region_classify(const MVParams& p, double t, double xbar, double x, double tol) {
    if (!(tol > 0.0)) throw InvalidArgument("region tolerance must be positive");
    const double s = MVValue(p).switching(t, xbar, x);
    if (s > tol) return Region::continuation;
    if (s >= -tol) return Region::boundary;
    return Region::violation;
}

// ---------------------------------------------------------------------------
// Reflection

inline constexpr int mv_projection_cap = 5;

/// Pushes every particle with x < mean + c up to mean + c, where the mean is
/// the post-projection one. Newton on m = mean(max(x_i, m + c)), at most
/// `mv_projection_cap` passes; leftover violators beyond tol abort.
inline void mv_project(const MVValue& v, double t, std::span<double> x, std::span<double> push, double rel_tol) {
    const auto& p = v.params();
    const std::size_t n = x.size();
    const double c = v.boundary_offset(t);
    double m = pairwise_mean(std::span<const double>(x.data(), n));
    std::vector<char> below(n, 0);
    std::size_t count = 0;
    for (int it = 0; it < mv_projection_cap; ++it) {
        std::size_t nb = 0;
        for (std::size_t i = 0; i < n; ++i) {
            below[i] = x[i] < m + c ? 1 : 0;
            nb += below[i];
        }
        if (nb == 0) return;
        if (nb == n)
            throw SimulationError(fmt::format("projection at t={} pushes every particle; boundary offset {} admits no spread", t, c));
        const double rest = pairwise_sum(0, n, [&](std::size_t i) { return below[i] ? 0.0 : x[i]; });
        const double next = (rest + static_cast<double>(nb) * c) / static_cast<double>(n - nb);
        const bool done = nb == count;
        count = nb;
        m = next;
        if (done) break;
    }
    const double b = m + c;
    for (std::size_t i = 0; i < n; ++i)
        if (x[i] < b) {
            push[i] = (b - x[i]) / p.lambda;
            x[i] = b;
        }
    const double mp = pairwise_mean(std::span<const double>(x.data(), n));
    const double tol = rel_tol * v.scale(t);
    for (std::size_t i = 0; i < n; ++i)
        if (v.switching(t, mp, x[i]) < -tol)
            throw SimulationError(fmt::format(
                "projection fixed point did not settle within {} passes at t={}: particle {} has s={}",
                mv_projection_cap, t, i, v.switching(t, mp, x[i])));
}

/// Optional feedback perturbation a = a* + extra(t, x, xbar).
using MVPerturbation = std::function<double(double t, double x, double xbar)>;

inline constexpr double mv_region_rel_tol = 1e-6;

inline SingularSpec mv_spec(const MVParams& p, InitialFn initial, MVPerturbation extra = {}) {
    p.validate();
    SingularSpec s;
    s.dimension = 1;
    s.control_dimension = 1;
    s.initial = std::move(initial);
    const MVValue v(p);
    s.feedback = [v, extra = std::move(extra)](double t, const double* x, const MeasureFeatures& f, double* a) {
        a[0] = v.feedback(t, x[0], f.mean[0]);
        if (extra) a[0] += extra(t, x[0], f.mean[0]);
    };
    s.drift = [p](double, const double* x, const double* a, const MeasureFeatures&, double* o) {
        o[0] = p.r * x[0] + p.rho * a[0];
    };
    s.diffusion = [p](double, const double*, const double* a, const MeasureFeatures&, double* o) {
        o[0] = p.sigma * a[0];
    };
    s.lambda = {p.lambda};
    s.eta_rate = {0.0};
    if (p.lambda > 0.0) {
        s.projection = [v](double t, std::span<double> x, std::span<double> push) {
            mv_project(v, t, x, push, mv_region_rel_tol);
        };
        s.project_initial = true;
    }
    return s;
}

/// The same closed loop without the singular part.
inline JumpDiffusionSpec mv_unreflected_spec(const MVParams& p, InitialFn initial) {
    const auto s = mv_spec(p, std::move(initial));
    JumpDiffusionSpec j;
    j.dimension = 1;
    j.control_dimension = 1;
    j.initial = s.initial;
    j.feedback = s.feedback;
    j.drift = s.drift;
    j.diffusion = s.diffusion;
    return j;
}

// ---------------------------------------------------------------------------
// Streaming statistics of the reflected run

struct MVActivityRow {
    double t = 0.0;
    double eta_mass = 0.0;     ///< mean eta increment at the node
    std::size_t pushed = 0;    ///< particles moved
    std::size_t continuation = 0, boundary = 0, violation = 0;
};

struct MVRun {
    std::size_t particles = 0;
    double initial_mean = 0.0, initial_variance = 0.0;
    std::size_t initial_pushed = 0;
    std::vector<double> terminal_cost;  ///< g(X_T, mu_T) per particle
    std::vector<double> eta_total;      ///< eta_T per particle
    std::vector<MVActivityRow> activity;
    std::size_t region_violations = 0;   ///< eta increments at states not classified boundary
    std::size_t eta_increments = 0;
    double min_switching = 0.0;          ///< min over visited states of s / scale
};

class MVObserver : public StepObserver {
public:
    explicit MVObserver(const MVParams& p) : v_(p) {}

    void on_start(const StartView& sv) override {
        run_ = MVRun{};
        run_.particles = sv.n;
        const auto x0 = sv.x_minus;
        run_.initial_mean = pairwise_mean(x0);
        const double m = run_.initial_mean;
        run_.initial_variance =
            pairwise_sum(0, sv.n, [&](std::size_t i) { return (x0[i] - m) * (x0[i] - m); }) / static_cast<double>(sv.n);
        run_.eta_total.assign(sv.n, 0.0);
        run_.min_switching = std::numeric_limits<double>::infinity();
        if (sv.node_event) add_eta(sv.node_eta, sv.x, sv.t, &run_.initial_pushed);
        record(sv.t, sv.x, sv.node_event ? sv.node_eta : std::span<const double>{});
    }

    void on_step(const StepView& v) override {
        if (v.node_event) add_eta(v.node_eta, v.x_end, v.t_next, nullptr);
        record(v.t_next, v.x_end, v.node_event ? v.node_eta : std::span<const double>{});
        last_.assign(v.x_end.begin(), v.x_end.end());
    }

    void on_finish() override {
        const double m = pairwise_mean(std::span<const double>(last_));
        run_.terminal_cost.resize(last_.size());
        for (std::size_t i = 0; i < last_.size(); ++i) run_.terminal_cost[i] = v_.terminal(last_[i], m);
    }

    [[nodiscard]] const MVRun& run() const noexcept { return run_; }
    MVRun take() { return std::move(run_); }

private:
    void add_eta(std::span<const double> eta, std::span<const double> x, double t, std::size_t* pushed) {
        const double m = pairwise_mean(x);
        const double tol = mv_region_rel_tol * v_.scale(t);
        const MVParams& p = v_.params();
        for (std::size_t i = 0; i < eta.size(); ++i) {
            if (!(eta[i] > 0.0)) continue;
            run_.eta_total[i] += eta[i];
            ++run_.eta_increments;
            if (pushed) ++*pushed;
            if (region_classify(p, t, m, x[i], tol) != Region::boundary) ++run_.region_violations;
        }
    }

    void record(double t, std::span<const double> x, std::span<const double> eta) {
        MVActivityRow row;
        row.t = t;
        const double m = pairwise_mean(x);
        const double sc = v_.scale(t);
        const double tol = mv_region_rel_tol * sc;
        const MVParams& p = v_.params();
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double s = v_.switching(t, m, x[i]);
            if (sc > 0.0) run_.min_switching = std::min(run_.min_switching, s / sc);
            switch (region_classify(p, t, m, x[i], tol)) {
                case Region::continuation: ++row.continuation; break;
                case Region::boundary: ++row.boundary; break;
                default: ++row.violation; break;
            }
        }
        if (!eta.empty()) {
            row.eta_mass = pairwise_mean(eta);
            for (double e : eta) row.pushed += e > 0.0 ? 1 : 0;
        }
        run_.activity.push_back(row);
    }

    MVValue v_;
    MVRun run_;
    std::vector<double> last_;
};

inline void mv_check_authority(const MVParams& p) {
    if (p.lambda == 0.0) {
        if (p.gamma < 0.0)
            throw SimulationError("lambda = 0 with gamma < 0: every state is in the action region and the push has no control authority");
        return;
    }
    if (!p.feasible())
        throw InvalidArgument(fmt::format(
            "gamma/lambda = {} is below max(1, exp(rT)) = {}: the mean state violates gamma + lambda C(t) >= 0",
            p.gamma / p.lambda, std::max(1.0, std::exp(p.r * p.T))));
}

/// Streams the reflected optimal dynamics; extra observers receive the same views.
inline MVRun simulate_optimal(const MVParams& p, const InitialFn& initial, std::size_t n, const TimeGrid& grid,
                              std::uint64_t seed, const std::vector<StepObserver*>& extra = {},
                              const MVPerturbation& perturbation = {}) {
    mv_check_authority(p);
    if (grid.t0() != 0.0 || std::abs(grid.T() - p.T) > 1e-12 * p.T)
        throw InvalidArgument(fmt::format("grid must span [0, {}]", p.T));
    MVObserver obs(p);
    std::vector<StepObserver*> all{&obs};
    all.insert(all.end(), extra.begin(), extra.end());
    simulate_streaming(mv_spec(p, initial, perturbation), n, grid, seed, all);
    return obs.take();
}

/// Full path record, for adjoint checks on small ensembles.
inline PathBundle simulate_optimal_bundle(const MVParams& p, const InitialFn& initial, std::size_t n,
                                          const TimeGrid& grid, std::uint64_t seed) {
    mv_check_authority(p);
    return simulate_singular(mv_spec(p, initial), n, grid, seed);
}

// ---------------------------------------------------------------------------
// Value check

struct MVValueReport {
    double estimate = 0.0;  ///< E g(X_T) + gamma E eta_T
    double se = 0.0;
    double closed_form = 0.0;  ///< V(0, empirical initial cloud)
    double gap = 0.0;
    double band = 0.0;  ///< 3 SE + 10 dt
    double mean_eta = 0.0;
    std::size_t eta_increments = 0, region_violations = 0;
    double min_switching = 0.0;
    double dt = 0.0;
    [[nodiscard]] bool within() const { return std::abs(gap) <= band; }
};

inline std::vector<double> mv_total_cost(const MVParams& p, const MVRun& run) {
    std::vector<double> j(run.particles);
    for (std::size_t i = 0; i < j.size(); ++i) j[i] = run.terminal_cost[i] + p.gamma * run.eta_total[i];
    return j;
}

inline MVValueReport mc_value_check(const MVParams& p, const InitialFn& initial, std::size_t n, const TimeGrid& grid,
                                    std::uint64_t seed, MVRun* keep = nullptr) {
    MVRun run = simulate_optimal(p, initial, n, grid, seed);
    if (run.initial_pushed > 0)
        throw InvalidArgument(fmt::format("{} initial particles lie outside the continuation region", run.initial_pushed));
    MVValueReport r;
    const auto j = mv_total_cost(p, run);
    const auto ms = mean_and_standard_error(j);
    r.estimate = ms.mean;
    r.se = ms.se;
    r.closed_form = closed_form_value(p, 0.0, run.initial_mean, run.initial_variance);
    r.gap = r.estimate - r.closed_form;
    r.dt = grid.base_dt();
    r.band = 3 * r.se + 10 * r.dt;
    r.mean_eta = pairwise_mean(std::span<const double>(run.eta_total));
    r.eta_increments = run.eta_increments;
    r.region_violations = run.region_violations;
    r.min_switching = run.min_switching;
    if (keep) *keep = std::move(run);
    return r;
}

// ---------------------------------------------------------------------------
// Value dominance over perturbed feedbacks (same reflection rule)

struct MVDominanceReport {
    double optimal = 0.0, optimal_se = 0.0;
    std::vector<std::array<double, 2>> directions;
    std::vector<double> costs, gaps, combined_se, paired_se;
    std::size_t violations = 0;
};

/// a = a* + eps (c0 + c1 (x - xbar)), standard normal (c0, c1) per k.
inline MVDominanceReport mv_value_dominance(const MVParams& p, const InitialFn& initial, std::size_t K, double eps,
                                            std::size_t n, const TimeGrid& grid, std::uint64_t seed) {
    if (K == 0) throw InvalidArgument("need at least one perturbation");
    MVDominanceReport r;
    const auto base = mv_total_cost(p, simulate_optimal(p, initial, n, grid, seed));
    const auto b = mean_and_standard_error(base);
    r.optimal = b.mean;
    r.optimal_se = b.se;
    for (std::size_t k = 0; k < K; ++k) {
        ParticleStream s(seed, streams::perturbation, k);
        const std::array<double, 2> c{s.normal(), s.normal()};
        r.directions.push_back(c);
        MVPerturbation pert = [c, eps](double, double x, double m) { return eps * (c[0] + c[1] * (x - m)); };
        const auto j = mv_total_cost(p, simulate_optimal(p, initial, n, grid, seed, {}, pert));
        const auto e = mean_and_standard_error(j);
        std::vector<double> diff(n);
        for (std::size_t i = 0; i < n; ++i) diff[i] = j[i] - base[i];
        r.costs.push_back(e.mean);
        r.gaps.push_back(e.mean - b.mean);
        r.combined_se.push_back(std::hypot(e.se, b.se));
        r.paired_se.push_back(mean_and_standard_error(diff).se);
        if (b.mean > e.mean + 3 * r.combined_se.back()) ++r.violations;
    }
    return r;
}

// ---------------------------------------------------------------------------
// Adjoint along the optimal path

struct MVAdjointReport {
    std::vector<std::vector<double>> p;  ///< per node, per particle
    double terminal_residual = 0.0;      ///< max |p_T - (beta (X_T - mean) - 1)|
    double coefficient_residual = 0.0;   ///< |2A(T) - beta| + |C(T) + 1|
    double mean_particle_residual = 0.0; ///< max over nodes of |p(t, mean) - C(t)|
    double drift_mean = 0.0, drift_se = 0.0, drift_band = 0.0;  ///< sum of dp + r p dt on continuous parts
    [[nodiscard]] bool drift_within() const { return std::abs(drift_mean) <= drift_band; }
};

inline MVAdjointReport adjoint_along_path(const MVParams& p, const PathBundle& bundle) {
    if (bundle.dimension() != 1) throw InvalidArgument("adjoint check needs a one-dimensional bundle");
    const MVValue v(p);
    const auto& g = bundle.grid();
    const std::size_t n = bundle.particles(), nodes = bundle.node_count();
    MVAdjointReport r;
    r.p.resize(nodes);
    auto eval = [&](double t, const std::vector<double>& x, std::vector<double>& out) {
        const double m = pairwise_mean(std::span<const double>(x));
        out.resize(n);
        for (std::size_t i = 0; i < n; ++i) out[i] = v.lions(t, x[i], m);
        return m;
    };
    for (std::size_t k = 0; k < nodes; ++k) {
        const double t = g.time(k);
        const double m = eval(t, bundle.states(k), r.p[k]);
        r.mean_particle_residual = std::max(r.mean_particle_residual, std::abs(v.lions(t, m, m) - v.C(t)));
    }
    const auto& xT = bundle.states(nodes - 1);
    const double mT = pairwise_mean(std::span<const double>(xT));
    for (std::size_t i = 0; i < n; ++i)
        r.terminal_residual =
            std::max(r.terminal_residual, std::abs(r.p[nodes - 1][i] - (p.beta * (xT[i] - mT) - 1.0)));
    r.coefficient_residual = std::abs(2 * v.A(p.T) - p.beta) + std::abs(v.C(p.T) + 1.0);

    // Continuous part of each increment: left limit at k+1 against node k.
    std::vector<double> drift(n, 0.0), left;
    double dtmax = 0.0;
    for (std::size_t k = 0; k + 1 < nodes; ++k) {
        const double t = g.time(k), t1 = g.time(k + 1), h = t1 - t;
        dtmax = std::max(dtmax, h);
        eval(t1, bundle.left_states(k + 1), left);
        for (std::size_t i = 0; i < n; ++i) drift[i] += left[i] - r.p[k][i] + p.r * r.p[k][i] * h;
    }
    const auto ms = mean_and_standard_error(drift);
    r.drift_mean = ms.mean;
    r.drift_se = ms.se;
    r.drift_band = 3 * ms.se + 10 * dtmax;
    return r;
}

}  // namespace mflow
