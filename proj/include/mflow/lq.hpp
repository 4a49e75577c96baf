#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include <fmt/format.h>

#include "mflow/error.hpp"
#include "mflow/laws.hpp"
#include "mflow/measure.hpp"
#include "mflow/parallel.hpp"
#include "mflow/simulation.hpp"
#include "mflow/summation.hpp"

namespace mflow {

/// Jump coefficient of the form c + d*theta.
struct JumpCoef {
    double c = 0.0, d = 0.0;
    [[nodiscard]] double operator()(double theta) const noexcept { return c + d * theta; }
};

/// Scalar LQ problem: b = b0 + b1 x + bb1 m + b2 a, sigma likewise,
/// beta(theta) = beta0 + beta1 x + bbeta1 m + beta2 a, f = f1 x^2 + fb1 m^2 + f2 a^2,
/// g = g1 x^2 + gb1 m^2, with m the population mean.
struct LQCoefficients {
    double b0 = 0, b1 = 0, bb1 = 0, b2 = 0;
    double s0 = 0, s1 = 0, sb1 = 0, s2 = 0;
    double f1 = 0, fb1 = 0, f2 = 0;
    double g1 = 0, gb1 = 0;
    JumpCoef beta0, beta1, bbeta1, beta2;
    double jump_rate = 0.0;
    ScalarLaw marks = ScalarLaw::dirac(0.0);
};

/// The nu-integrals consumed by the ODE system (nu = jump_rate x mark law).
struct NuMoments {
    double two_b1_plus_b1sq = 0;  ///< <2 beta1 + beta1^2>
    double b1bb1_plus_bb1 = 0;    ///< <beta1 bbeta1 + bbeta1>
    double b1 = 0, bb1 = 0;       ///< <beta1>, <bbeta1>
    double bb1sq = 0;             ///< <bbeta1^2>
    double b0b1_plus_b0 = 0;      ///< <beta0 beta1 + beta0>
    double b0bb1 = 0;             ///< <beta0 bbeta1>
    double b0 = 0, b0sq = 0;      ///< <beta0>, <beta0^2>
    double b2sq = 0;              ///< <beta2^2>
    double b1b2_plus_b2 = 0;      ///< <beta1 beta2 + beta2>
    double b1bb1_b2 = 0;          ///< <(beta1 + bbeta1) beta2>
    double b2 = 0;                ///< <beta2>
    double b0b2 = 0;              ///< <beta0 beta2>
    double b1bb1sq = 0;           ///< <(beta1 + bbeta1)^2>
    double b0_b1bb1 = 0;          ///< <beta0 (beta1 + bbeta1)>

    static NuMoments closed_form(const LQCoefficients& q) {
        const double lam = q.jump_rate;
        const double m1 = q.marks.mean(), m2 = q.marks.second_moment();
        auto e1 = [&](const JumpCoef& f) { return lam * (f.c + f.d * m1); };
        auto e2 = [&](const JumpCoef& f, const JumpCoef& g) {
            return lam * (f.c * g.c + (f.c * g.d + f.d * g.c) * m1 + f.d * g.d * m2);
        };
        const JumpCoef s{q.beta1.c + q.bbeta1.c, q.beta1.d + q.bbeta1.d};
        NuMoments n;
        n.two_b1_plus_b1sq = 2 * e1(q.beta1) + e2(q.beta1, q.beta1);
        n.b1bb1_plus_bb1 = e2(q.beta1, q.bbeta1) + e1(q.bbeta1);
        n.b1 = e1(q.beta1);
        n.bb1 = e1(q.bbeta1);
        n.bb1sq = e2(q.bbeta1, q.bbeta1);
        n.b0b1_plus_b0 = e2(q.beta0, q.beta1) + e1(q.beta0);
        n.b0bb1 = e2(q.beta0, q.bbeta1);
        n.b0 = e1(q.beta0);
        n.b0sq = e2(q.beta0, q.beta0);
        n.b2sq = e2(q.beta2, q.beta2);
        n.b1b2_plus_b2 = e2(q.beta1, q.beta2) + e1(q.beta2);
        n.b1bb1_b2 = e2(s, q.beta2);
        n.b2 = e1(q.beta2);
        n.b0b2 = e2(q.beta0, q.beta2);
        n.b1bb1sq = e2(s, s);
        n.b0_b1bb1 = e2(q.beta0, s);
        return n;
    }

    [[nodiscard]] std::array<double, 16> as_array() const {
        return {two_b1_plus_b1sq, b1bb1_plus_bb1, b1,    bb1,  bb1sq,   b0b1_plus_b0, b0bb1,   b0,
                b0sq,             b2sq,           b1b2_plus_b2, b1bb1_b2, b2, b0b2, b1bb1sq, b0_b1bb1};
    }
};

/// Largest |z| over the 16 moments when each is re-estimated from `samples`
/// fresh marks (z = (mc - closed form) / SE). Entries with zero SE must match exactly.
inline double nu_moments_mc_check(const LQCoefficients& q, std::size_t samples, std::uint64_t seed) {
    require(samples >= 2, "need at least two mark samples");
    ParticleStream s(seed, streams::marks_resample, 0);
    const double lam = q.jump_rate;
    std::vector<std::array<double, 16>> rows(samples);
    for (auto& r : rows) {
        const double th = q.marks.sample(s);
        const double a0 = q.beta0(th), a1 = q.beta1(th), ab = q.bbeta1(th), a2 = q.beta2(th);
        r = {2 * a1 + a1 * a1, a1 * ab + ab, a1,  ab,        ab * ab,  a0 * a1 + a0,    a0 * ab,
             a0,               a0 * a0,     a2 * a2, a1 * a2 + a2, (a1 + ab) * a2, a2, a0 * a2, (a1 + ab) * (a1 + ab),
             a0 * (a1 + ab)};
    }
    const auto exact = NuMoments::closed_form(q).as_array();
    double worst = 0.0;
    for (std::size_t j = 0; j < 16; ++j) {
        std::vector<double> col(samples);
        for (std::size_t i = 0; i < samples; ++i) col[i] = lam * rows[i][j];
        const auto ms = mean_and_standard_error(col);
        const double diff = std::abs(ms.mean - exact[j]);
        if (ms.se <= 1e-12 * (1 + std::abs(exact[j]))) {
            if (diff > 1e-12 * (1 + std::abs(exact[j]))) return INFINITY;
            continue;
        }
        worst = std::max(worst, diff / ms.se);
    }
    return worst;
}

struct RiccatiPoint {
    double A = 0, B = 0, C = 0, D = 0;
    double dA = 0, dB = 0, dC = 0, dD = 0;
    double U = 0, S = 0, Z = 0, Y = 0;
};

namespace detail {

struct Aux {
    double U, S, Z, Y;
};

inline Aux lq_aux(const LQCoefficients& q, const NuMoments& n, double A, double B, double C) {
    Aux x;
    x.U = q.f2 + (q.s2 * q.s2 + n.b2sq) * A;
    x.S = q.b2 * A + q.s1 * q.s2 * A + n.b1b2_plus_b2 * A;
    x.Z = q.b2 * B + (q.s1 + q.sb1) * q.s2 * A + n.b1bb1_b2 * A + n.b2 * B;
    x.Y = q.b2 * C + 2 * q.s0 * q.s2 * A + 2 * n.b0b2 * A + n.b2 * C;
    return x;
}

/// Time derivatives (dA, dB, dC, dD) of the coupled system.
inline std::array<double, 4> lq_rhs(const LQCoefficients& q, const NuMoments& n, const std::array<double, 4>& y,
                                    double t) {
    const double A = y[0], B = y[1], C = y[2];
    const Aux x = lq_aux(q, n, A, B, C);
    if (!(x.U > 0.0))
        throw SimulationError(fmt::format("Riccati blow-up: U(t) = {} <= 0 at t = {}", x.U, t));
    const double k1 = q.b1 + q.bb1;
    const double dA = -(q.f1 + 2 * q.b1 * A + q.s1 * q.s1 * A + n.two_b1_plus_b1sq * A - x.S * x.S / x.U);
    const double dB = -(q.f1 + q.fb1 + 2 * k1 * B + (q.s1 + q.sb1) * (q.s1 + q.sb1) * A + n.b1bb1sq * A +
                        2 * (n.b1 + n.bb1) * B - x.Z * x.Z / x.U);
    const double dC = -(k1 * C + 2 * q.b0 * B + 2 * q.s0 * (q.s1 + q.sb1) * A + 2 * n.b0_b1bb1 * A + 2 * n.b0 * B +
                        (n.b1 + n.bb1) * C - x.Z * x.Y / x.U);
    const double dD = -(q.b0 * C + q.s0 * q.s0 * A + n.b0sq * A + n.b0 * C - x.Y * x.Y / (4 * x.U));
    return {dA, dB, dC, dD};
}

}  // namespace detail

/// Backward RK4 solution of the Riccati system on a uniform grid over [0, T],
/// with cubic Hermite interpolation from the stored derivatives.
class RiccatiSolution {
public:
    RiccatiSolution(LQCoefficients q, double T, std::size_t steps)
        : q_(std::move(q)), nu_(NuMoments::closed_form(q_)), T_(T), steps_(steps) {
        solve();
    }
    RiccatiSolution(LQCoefficients q, NuMoments nu, double T, std::size_t steps)
        : q_(std::move(q)), nu_(nu), T_(T), steps_(steps) {
        solve();
    }

    [[nodiscard]] const LQCoefficients& coefficients() const noexcept { return q_; }
    [[nodiscard]] const NuMoments& moments() const noexcept { return nu_; }
    [[nodiscard]] double horizon() const noexcept { return T_; }
    [[nodiscard]] std::size_t steps() const noexcept { return steps_; }
    [[nodiscard]] double time(std::size_t k) const { return T_ * static_cast<double>(k) / static_cast<double>(steps_); }
    [[nodiscard]] const std::array<double, 4>& node(std::size_t k) const { return y_.at(k); }
    [[nodiscard]] const std::array<double, 4>& node_derivative(std::size_t k) const { return dy_.at(k); }

    [[nodiscard]] RiccatiPoint at(double t) const {
        if (!(t >= 0.0 && t <= T_)) throw InvalidArgument(fmt::format("t = {} outside [0, {}]", t, T_));
        const double h = T_ / static_cast<double>(steps_);
        auto k = static_cast<std::size_t>(t / h);
        if (k >= steps_) k = steps_ - 1;
        const double s = (t - time(k)) / h;
        const double h00 = (1 + 2 * s) * (1 - s) * (1 - s), h10 = s * (1 - s) * (1 - s);
        const double h01 = s * s * (3 - 2 * s), h11 = s * s * (s - 1);
        // Derivative basis (with respect to t).
        const double g00 = 6 * s * s - 6 * s, g10 = 3 * s * s - 4 * s + 1;
        const double g01 = -6 * s * s + 6 * s, g11 = 3 * s * s - 2 * s;
        std::array<double, 4> v{}, dv{};
        for (std::size_t j = 0; j < 4; ++j) {
            const double y0 = y_[k][j], y1 = y_[k + 1][j], d0 = dy_[k][j], d1 = dy_[k + 1][j];
            v[j] = h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1;
            dv[j] = (g00 * y0 + g01 * y1) / h + g10 * d0 + g11 * d1;
        }
        if (s == 0.0) {
            v = y_[k];
            dv = dy_[k];
        }
        RiccatiPoint p{v[0], v[1], v[2], v[3], dv[0], dv[1], dv[2], dv[3]};
        const auto aux = detail::lq_aux(q_, nu_, p.A, p.B, p.C);
        p.U = aux.U;
        p.S = aux.S;
        p.Z = aux.Z;
        p.Y = aux.Y;
        return p;
    }

    /// Minimum of U over the grid nodes.
    [[nodiscard]] double min_u() const {
        double m = INFINITY;
        for (const auto& y : y_) m = std::min(m, detail::lq_aux(q_, nu_, y[0], y[1], y[2]).U);
        return m;
    }

private:
    void solve() {
        if (steps_ < 10) throw InvalidArgument("Riccati solve needs at least 10 steps");
        if (!(T_ > 0.0)) throw InvalidArgument("horizon must be positive");
        if (!(q_.f2 > 0.0)) throw InvalidArgument("f2 must be positive");
        y_.assign(steps_ + 1, {});
        dy_.assign(steps_ + 1, {});
        y_[steps_] = {q_.g1, q_.g1 + q_.gb1, 0.0, 0.0};
        const double h = T_ / static_cast<double>(steps_);
        auto f = [&](const std::array<double, 4>& y, double t) { return detail::lq_rhs(q_, nu_, y, t); };
        auto axpy = [](const std::array<double, 4>& y, double a, const std::array<double, 4>& k) {
            std::array<double, 4> r{};
            for (std::size_t j = 0; j < 4; ++j) r[j] = y[j] + a * k[j];
            return r;
        };
        for (std::size_t k = steps_; k > 0; --k) {
            const double t = time(k);
            const auto& y = y_[k];
            const auto k1 = f(y, t);
            const auto k2 = f(axpy(y, -0.5 * h, k1), t - 0.5 * h);
            const auto k3 = f(axpy(y, -0.5 * h, k2), t - 0.5 * h);
            const auto k4 = f(axpy(y, -h, k3), t - h);
            for (std::size_t j = 0; j < 4; ++j) {
                y_[k - 1][j] = y[j] - h / 6.0 * (k1[j] + 2 * k2[j] + 2 * k3[j] + k4[j]);
                if (!std::isfinite(y_[k - 1][j]))
                    throw SimulationError(fmt::format("non-finite Riccati state at t = {}", time(k - 1)));
            }
        }
        for (std::size_t k = 0; k <= steps_; ++k) dy_[k] = f(y_[k], time(k));
    }

    LQCoefficients q_;
    NuMoments nu_;
    double T_;
    std::size_t steps_;
    std::vector<std::array<double, 4>> y_, dy_;
};

inline RiccatiSolution solve_riccati(const LQCoefficients& q, double T, std::size_t steps) { return {q, T, steps}; }

inline double optimal_feedback(const RiccatiSolution& sol, double t, double x, double xbar) {
    const auto p = sol.at(t);
    return -p.S / p.U * (x - xbar) - p.Z / p.U * xbar - p.Y / (2 * p.U);
}

inline double value_function(const RiccatiSolution& sol, double t, const EmpiricalMeasure& mu) {
    if (mu.dimension() != 1) throw InvalidArgument("LQ value function needs a one-dimensional measure");
    const auto mv = mean_and_variance(mu);
    const auto p = sol.at(t);
    const double m = mv.mean[0];
    return p.A * mv.variance + p.B * m * m + p.C * m + p.D;
}

/// RK4 of dm/dt = R(t) m + Q(t) on the nodes of `grid`.
inline std::vector<double> mean_dynamics(const RiccatiSolution& sol, double xbar0, const TimeGrid& grid) {
    const auto& q = sol.coefficients();
    const auto& n = sol.moments();
    auto rhs = [&](double t, double m) {
        const auto p = sol.at(t);
        const double gain = q.b2 + n.b2;
        const double R = q.b1 + q.bb1 + n.b1 + n.bb1 - p.Z / p.U * gain;
        const double Q = q.b0 + n.b0 - p.Y / (2 * p.U) * gain;
        return R * m + Q;
    };
    std::vector<double> out{xbar0};
    double m = xbar0;
    for (std::size_t k = 0; k + 1 < grid.node_count(); ++k) {
        const double t = grid.time(k), h = grid.time(k + 1) - t;
        const double k1 = rhs(t, m), k2 = rhs(t + h / 2, m + h / 2 * k1), k3 = rhs(t + h / 2, m + h / 2 * k2),
                     k4 = rhs(t + h, m + h * k3);
        m += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
        out.push_back(m);
    }
    return out;
}

/// Hamiltonian plus time derivative of the quadratic value function at
/// (t, mu), with the argmin control. Evaluated point by point: the jump
/// integral uses a two-point rule exact for integrands quadratic in theta.
inline double hjb_residual(const RiccatiSolution& sol, double t, const EmpiricalMeasure& mu) {
    const auto& q = sol.coefficients();
    const auto p = sol.at(t);
    const auto mv = mean_and_variance(mu);
    const double m = mv.mean[0];
    const double mt = q.marks.mean(), sd = std::sqrt(q.marks.variance());
    const double dv_time = p.dA * mv.variance + p.dB * m * m + p.dC * m + p.dD;
    auto flat = [&](double y) { return p.A * y * y + 2 * (p.B - p.A) * m * y + p.C * y; };
    const double h = pairwise_sum(0, mu.size(), [&](std::size_t i) {
        const double x = mu.point(i)[0];
        const double a = -p.S / p.U * (x - m) - p.Z / p.U * m - p.Y / (2 * p.U);
        const double b = q.b0 + q.b1 * x + q.bb1 * m + q.b2 * a;
        const double s = q.s0 + q.s1 * x + q.sb1 * m + q.s2 * a;
        const double lions = 2 * p.A * x + 2 * (p.B - p.A) * m + p.C;
        double jump = 0.0;
        if (q.jump_rate > 0.0) {
            for (double th : {mt - sd, mt + sd}) {
                const double beta = q.beta0(th) + q.beta1(th) * x + q.bbeta1(th) * m + q.beta2(th) * a;
                jump += 0.5 * (flat(x + beta) - flat(x));
            }
            jump *= q.jump_rate;
        }
        const double f = q.f1 * x * x + q.fb1 * m * m + q.f2 * a * a;
        return b * lions + p.A * s * s + jump + f;
    }) / static_cast<double>(mu.size());
    return dv_time + h;
}

// ---------------------------------------------------------------------------
// Simulation-based cost evaluation

/// Closed-loop jump-diffusion spec for a feedback policy a(t, x, m).
using LQPolicy = std::function<double(double t, double x, double xbar)>;

inline JumpDiffusionSpec lq_spec(const LQCoefficients& q, LQPolicy policy, InitialFn initial) {
    JumpDiffusionSpec s;
    s.dimension = 1;
    s.control_dimension = 1;
    s.initial = std::move(initial);
    s.feedback = [policy = std::move(policy)](double t, const double* x, const MeasureFeatures& f, double* a) {
        a[0] = policy(t, x[0], f.mean[0]);
    };
    s.drift = [q](double, const double* x, const double* a, const MeasureFeatures& f, double* o) {
        o[0] = q.b0 + q.b1 * x[0] + q.bb1 * f.mean[0] + q.b2 * a[0];
    };
    s.diffusion = [q](double, const double* x, const double* a, const MeasureFeatures& f, double* o) {
        o[0] = q.s0 + q.s1 * x[0] + q.sb1 * f.mean[0] + q.s2 * a[0];
    };
    if (q.jump_rate > 0.0) {
        s.jump_rate = q.jump_rate;
        s.marks = {q.marks};
        s.jump = [q](double, const double* x, const double* a, const MeasureFeatures& f, const double* th, double* o) {
            o[0] = q.beta0(th[0]) + q.beta1(th[0]) * x[0] + q.bbeta1(th[0]) * f.mean[0] + q.beta2(th[0]) * a[0];
        };
    }
    return s;
}

struct CostEstimate {
    double mean = 0.0, se = 0.0;
    std::vector<double> per_particle;
};

/// Trapezoidal running cost over the nodes plus terminal cost, per particle.
class CostObserver : public StepObserver {
public:
    CostObserver(const LQCoefficients& q, LQPolicy policy) : q_(q), policy_(std::move(policy)) {}

    void on_start(const StartView& v) override {
        cost_.assign(v.n, 0.0);
        prev_.assign(v.n, 0.0);
        running(v.t, v.x, prev_);
    }

    void on_step(const StepView& v) override {
        std::vector<double> cur(v.n);
        running(v.t_next, v.x_end, cur);
        const double h = v.dt();
        for (std::size_t i = 0; i < v.n; ++i) cost_[i] += 0.5 * h * (prev_[i] + cur[i]);
        prev_.swap(cur);
        last_.assign(v.x_end.begin(), v.x_end.end());
    }

    void on_finish() override {
        const double m = pairwise_mean(std::span<const double>(last_));
        for (std::size_t i = 0; i < cost_.size(); ++i)
            cost_[i] += q_.g1 * last_[i] * last_[i] + q_.gb1 * m * m;
    }

    [[nodiscard]] CostEstimate estimate() const {
        const auto ms = mean_and_standard_error(cost_);
        return {ms.mean, ms.se, cost_};
    }

private:
    void running(double t, std::span<const double> x, std::vector<double>& out) {
        const double m = pairwise_mean(x);
        parallel_for(x.size(), [&](std::size_t i) {
            const double a = policy_(t, x[i], m);
            out[i] = q_.f1 * x[i] * x[i] + q_.fb1 * m * m + q_.f2 * a * a;
        });
    }

    const LQCoefficients& q_;
    LQPolicy policy_;
    std::vector<double> cost_, prev_, last_;
};

inline CostEstimate evaluate_cost(const LQCoefficients& q, const LQPolicy& policy, const InitialFn& initial,
                                  std::size_t n, const TimeGrid& grid, std::uint64_t seed) {
    auto spec = lq_spec(q, policy, initial);
    CostObserver obs(q, policy);
    simulate_streaming(spec, n, grid, seed, {&obs});
    return obs.estimate();
}

inline LQPolicy optimal_policy(const RiccatiSolution& sol) {
    return [&sol](double t, double x, double m) { return optimal_feedback(sol, t, x, m); };
}

struct OptimalityReport {
    CostEstimate optimal;
    std::vector<std::array<double, 3>> directions;  ///< (c1, c2, c3) per perturbation
    std::vector<double> costs, gaps, combined_se, paired_se;
    std::size_t violations = 0;  ///< perturbations with J* > J_k + 3 combined SE
    double mean_gap = 0.0;
};

/// Perturbed policies a* + eps (c1 x + c2 m + c3) with standard normal
/// directions from the perturbation stream; common random numbers via the seed.
inline OptimalityReport verify_optimality(const RiccatiSolution& sol, std::size_t K, double eps,
                                          const InitialFn& initial, std::size_t n, const TimeGrid& grid,
                                          std::uint64_t seed) {
    if (K == 0) throw InvalidArgument("need at least one perturbation");
    const auto& q = sol.coefficients();
    OptimalityReport r;
    r.optimal = evaluate_cost(q, optimal_policy(sol), initial, n, grid, seed);
    for (std::size_t k = 0; k < K; ++k) {
        ParticleStream s(seed, streams::perturbation, k);
        const std::array<double, 3> c{s.normal(), s.normal(), s.normal()};
        r.directions.push_back(c);
        LQPolicy pol = [&sol, c, eps](double t, double x, double m) {
            return optimal_feedback(sol, t, x, m) + eps * (c[0] * x + c[1] * m + c[2]);
        };
        const auto est = evaluate_cost(q, pol, initial, n, grid, seed);
        std::vector<double> diff(n);
        for (std::size_t i = 0; i < n; ++i) diff[i] = est.per_particle[i] - r.optimal.per_particle[i];
        r.costs.push_back(est.mean);
        r.gaps.push_back(est.mean - r.optimal.mean);
        r.combined_se.push_back(std::sqrt(est.se * est.se + r.optimal.se * r.optimal.se));
        r.paired_se.push_back(mean_and_standard_error(diff).se);
        if (r.optimal.mean > est.mean + 3 * r.combined_se.back()) ++r.violations;
    }
    r.mean_gap = pairwise_mean(std::span<const double>(r.gaps));
    return r;
}

// ---------------------------------------------------------------------------
// Oracles

/// Functions of tau = T - t written as sums of c tau^p e^{k tau}.
class ExpPoly {
public:
    struct Term {
        double c;
        int p;
        double k;
    };

    ExpPoly() = default;
    static ExpPoly constant(double c) { return ExpPoly({{c, 0, 0.0}}); }
    static ExpPoly exp(double c, double k) { return ExpPoly({{c, 0, k}}); }

    [[nodiscard]] double operator()(double tau) const {
        double s = 0;
        for (const auto& t : terms_) s += t.c * std::pow(tau, t.p) * std::exp(t.k * tau);
        return s;
    }

    ExpPoly operator+(const ExpPoly& o) const {
        ExpPoly r = *this;
        r.terms_.insert(r.terms_.end(), o.terms_.begin(), o.terms_.end());
        return r;
    }
    ExpPoly operator*(double a) const {
        ExpPoly r = *this;
        for (auto& t : r.terms_) t.c *= a;
        return r;
    }

    /// Solution of y' = K y + f(tau), y(0) = y0.
    static ExpPoly solve_linear(double K, double y0, const ExpPoly& f) {
        ExpPoly y = exp(y0, K);
        for (const auto& t : f.terms_) y = y + convolve(K, t);
        return y;
    }

private:
    explicit ExpPoly(std::vector<Term> t) : terms_(std::move(t)) {}

    // e^{K tau} * int_0^tau s^p e^{(k-K) s} ds * c
    static ExpPoly convolve(double K, const Term& t) {
        const double r = t.k - K;
        if (std::abs(r) < 1e-14) return ExpPoly({{t.c / (t.p + 1), t.p + 1, K}});
        // I_p = tau^p e^{r tau}/r - (p/r) I_{p-1};  I_0 = (e^{r tau} - 1)/r.
        std::vector<Term> out;
        double coef = t.c;
        for (int p = t.p; p >= 0; --p) {
            out.push_back({coef / r, p, t.k});
            if (p == 0) out.push_back({-coef / r, 0, K});
            coef *= -static_cast<double>(p) / r;
        }
        return ExpPoly(std::move(out));
    }

    std::vector<Term> terms_;
};

/// Closed-form (A, B, C, D) for the decoupled case b2 = s2 = 0, beta2 = 0,
/// where the system is linear and triangular.
struct DecoupledOracle {
    ExpPoly A, B, C, D;

    explicit DecoupledOracle(const LQCoefficients& q) {
        if (q.b2 != 0.0 || q.s2 != 0.0 || q.beta2.c != 0.0 || q.beta2.d != 0.0)
            throw InvalidArgument("decoupled oracle needs b2 = s2 = 0 and beta2 = 0");
        const auto n = NuMoments::closed_form(q);
        const double kA = 2 * q.b1 + q.s1 * q.s1 + n.two_b1_plus_b1sq;
        A = ExpPoly::solve_linear(kA, q.g1, ExpPoly::constant(q.f1));
        const double kB = 2 * (q.b1 + q.bb1) + 2 * (n.b1 + n.bb1);
        const double cBA = (q.s1 + q.sb1) * (q.s1 + q.sb1) + n.b1bb1sq;
        B = ExpPoly::solve_linear(kB, q.g1 + q.gb1, A * cBA + ExpPoly::constant(q.f1 + q.fb1));
        const double kC = q.b1 + q.bb1 + n.b1 + n.bb1;
        C = ExpPoly::solve_linear(kC, 0.0,
                                  A * (2 * q.s0 * (q.s1 + q.sb1) + 2 * n.b0_b1bb1) + B * (2 * q.b0 + 2 * n.b0));
        D = ExpPoly::solve_linear(0.0, 0.0, C * (q.b0 + n.b0) + A * (q.s0 * q.s0 + n.b0sq));
    }

    [[nodiscard]] std::array<double, 4> at_tau(double tau) const { return {A(tau), B(tau), C(tau), D(tau)}; }
};

/// Max |RK4 - oracle| over all nodes and all four functions.
inline double riccati_oracle_error(const RiccatiSolution& sol, const DecoupledOracle& o) {
    double e = 0;
    for (std::size_t k = 0; k <= sol.steps(); ++k) {
        const auto ex = o.at_tau(sol.horizon() - sol.time(k));
        for (std::size_t j = 0; j < 4; ++j) e = std::max(e, std::abs(sol.node(k)[j] - ex[j]));
    }
    return e;
}

/// Deterministic closed loop (no noise, no jumps, Dirac start): fine RK4 of
/// the state and accumulated running cost under `policy`, plus terminal cost.
inline double deterministic_cost(const LQCoefficients& q, const LQPolicy& policy, double x0, double T,
                                 std::size_t steps) {
    auto rhs = [&](double t, const std::array<double, 2>& y) {
        const double x = y[0];
        const double a = policy(t, x, x);
        return std::array<double, 2>{q.b0 + (q.b1 + q.bb1) * x + q.b2 * a,
                                     (q.f1 + q.fb1) * x * x + q.f2 * a * a};
    };
    std::array<double, 2> y{x0, 0.0};
    const double h = T / static_cast<double>(steps);
    for (std::size_t k = 0; k < steps; ++k) {
        const double t = h * static_cast<double>(k);
        const auto k1 = rhs(t, y);
        const auto k2 = rhs(t + h / 2, {y[0] + h / 2 * k1[0], y[1] + h / 2 * k1[1]});
        const auto k3 = rhs(t + h / 2, {y[0] + h / 2 * k2[0], y[1] + h / 2 * k2[1]});
        const auto k4 = rhs(t + h, {y[0] + h * k3[0], y[1] + h * k3[1]});
        for (std::size_t j = 0; j < 2; ++j) y[j] += h / 6 * (k1[j] + 2 * k2[j] + 2 * k3[j] + k4[j]);
    }
    return y[1] + (q.g1 + q.gb1) * y[0] * y[0];
}

}  // namespace mflow
