#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "mflow/bundle.hpp"
#include "mflow/error.hpp"
#include "mflow/functional.hpp"
#include "mflow/parallel.hpp"
#include "mflow/simulation.hpp"
#include "mflow/summation.hpp"

namespace mflow {

struct ItoTerms {
    double drift_diffusion_integral = 0.0;
    double quadratic_variation_term = 0.0;
    double law_jump_term = 0.0;
    double lions_jump_compensator = 0.0;
    double linear_derivative_jump_term = 0.0;
    double singular_control_integral = 0.0;

    [[nodiscard]] double sum() const noexcept {
        return drift_diffusion_integral + quadratic_variation_term + law_jump_term + lions_jump_compensator +
               linear_derivative_jump_term + singular_control_integral;
    }
};

struct ItoStepRow {
    std::size_t k = 0;
    double t = 0.0;
    double dlhs = 0.0;
    ItoTerms terms;
};

struct ItoReport {
    std::string method;  ///< "general", "jump_corollary" or "singular_corollary"
    std::size_t t_index = 0, s_index = 0;
    double t = 0.0, s = 0.0;
    std::size_t particles = 0;
    double lhs = 0.0, lhs_se = 0.0;
    ItoTerms terms;
    double residual = 0.0, residual_se = 0.0;
    double terms_se = 0.0;  ///< standard error of the summed right-hand side
    std::size_t law_jump_nodes = 0;
    std::size_t law_jump_bound_violations = 0;  ///< nodes where the first-order jump bound failed
    std::vector<ItoStepRow> rows;
    std::vector<double> residual_influence;  ///< per-particle residual contributions (not exported)
};

namespace detail {

inline double dot(const double* a, const double* b, std::size_t d) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += a[j] * b[j];
    return s;
}

inline double half_trace(const double* h, const double* q, std::size_t d) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j)
        for (std::size_t l = 0; l < d; ++l) s += h[j * d + l] * q[l * d + j];
    return 0.5 * s;
}

/// Shared bookkeeping: window, lhs, per-particle influence totals.
class WindowAccumulator : public StepObserver {
public:
    WindowAccumulator(const CylindricalFunctional& phi, std::size_t t_index, std::size_t s_index, std::string method)
        : phi_(phi), t_index_(t_index), s_index_(s_index) {
        if (!(t_index < s_index)) throw InvalidArgument("Ito window needs t_index < s_index");
        report_.method = std::move(method);
        report_.t_index = t_index;
        report_.s_index = s_index;
    }

    void on_start(const StartView& v) override {
        if (v.d != phi_.dimension())
            throw InvalidArgument(fmt::format("functional dimension {} does not match state dimension {}",
                                              phi_.dimension(), v.d));
        n_ = v.n;
        d_ = v.d;
        report_.particles = n_;
        for (auto* a : {&lhs_i_, &t1_, &t2_, &t3_, &t4_, &t5_, &t6_}) a->assign(n_, 0.0);
        for (auto* a : {&s1_, &s2_, &s4_, &s5_, &s6_, &s3inf_}) a->assign(n_, 0.0);
        if (t_index_ == 0) open_window(v.t, v.x);
    }

    void on_step(const StepView& v) override {
        if (v.k + 1 == t_index_) open_window(v.t_next, v.x_end);
        if (v.k < t_index_ || v.k >= s_index_) return;
        for (auto* a : {&s1_, &s2_, &s4_, &s5_, &s6_, &s3inf_}) std::fill(a->begin(), a->end(), 0.0);
        double law = 0.0;
        accumulate_step(v, law);
        ItoStepRow row;
        row.k = v.k;
        row.t = v.t;
        const double inv = 1.0 / static_cast<double>(n_);
        row.terms.drift_diffusion_integral = pairwise_sum(s1_) * inv;
        row.terms.quadratic_variation_term = pairwise_sum(s2_) * inv;
        row.terms.law_jump_term = law;
        row.terms.lions_jump_compensator = pairwise_sum(s4_) * inv;
        row.terms.linear_derivative_jump_term = pairwise_sum(s5_) * inv;
        row.terms.singular_control_integral = pairwise_sum(s6_) * inv;
        const double phi_next = phi_.value_at(phi_.moments_flat(v.x_end));
        row.dlhs = phi_next - phi_prev_;
        phi_prev_ = phi_next;
        report_.rows.push_back(row);
        law_sum_ += law;
        for (std::size_t i = 0; i < n_; ++i) {
            t1_[i] += s1_[i];
            t2_[i] += s2_[i];
            t3_[i] += s3inf_[i];
            t4_[i] += s4_[i];
            t5_[i] += s5_[i];
            t6_[i] += s6_[i];
        }
        if (v.k + 1 == s_index_) close_window(v.t_next, v.x_end);
    }

    [[nodiscard]] const ItoReport& report() const {
        if (!closed_) throw InvalidArgument("Ito window was not reached by the simulation");
        return report_;
    }

protected:
    /// Fills per-particle step contributions s1..s6 (and s3inf) and the ensemble law-jump term.
    virtual void accumulate_step(const StepView& v, double& law) = 0;

    /// Law-jump bookkeeping at a node event, shared by the pathwise decompositions.
    void node_event_terms(const StepView& v, double& law, bool compensate_into_singular) {
        const std::size_t d = d_;
        const auto m_minus = phi_.moments_flat(v.x_end_minus);
        const auto m_plus = phi_.moments_flat(v.x_end);
        law = phi_.value_at(m_plus) - phi_.value_at(m_minus);
        ++report_.law_jump_nodes;
        const auto dm = phi_.derivatives_at(m_minus);
        const auto wm = phi_.outer_gradient(m_minus);
        const auto wp = phi_.outer_gradient(m_plus);
        parallel_for(n_, [&](std::size_t i) {
            const double* xm = v.x_end_minus.data() + i * d;
            const double* xp = v.x_end.data() + i * d;
            std::array<double, max_dimension> g{}, dx{};
            for (std::size_t j = 0; j < d; ++j) dx[j] = xp[j] - xm[j];
            dm.lions(xm, g.data());
            const double gd = dot(g.data(), dx.data(), d);
            if (compensate_into_singular)
                s6_[i] += gd;
            else
                s1_[i] += gd;
            s4_[i] -= gd;
            double inf = 0.0;
            for (std::size_t k = 0; k < phi_.n(); ++k)
                inf += wp[k] * phi_.inner()[k].eval_unchecked(xp) - wm[k] * phi_.inner()[k].eval_unchecked(xm);
            s3inf_[i] = inf;
        });
        // First-order bound |Phi(mu+) - Phi(mu-)| <= sup|dPhi| E|dX| along the straight-line path.
        double sup = 0.0;
        for (int h = 0; h <= 10; ++h) {
            const double a = h / 10.0;
            std::vector<double> mid(v.x_end_minus.size());
            for (std::size_t i = 0; i < mid.size(); ++i)
                mid[i] = v.x_end_minus[i] + a * (v.x_end[i] - v.x_end_minus[i]);
            const auto dh = phi_.derivatives_at(phi_.moments_flat(mid));
            std::array<double, max_dimension> g{};
            for (std::size_t i = 0; i < n_; ++i) {
                dh.lions(mid.data() + i * d, g.data());
                double norm = 0.0;
                for (std::size_t j = 0; j < d; ++j) norm += g[j] * g[j];
                sup = std::max(sup, std::sqrt(norm));
            }
        }
        const double mean_abs = pairwise_sum(0, n_, [&](std::size_t i) {
                                    double s = 0.0;
                                    for (std::size_t j = 0; j < d; ++j) {
                                        const double c = v.x_end[i * d + j] - v.x_end_minus[i * d + j];
                                        s += c * c;
                                    }
                                    return std::sqrt(s);
                                }) /
                                static_cast<double>(n_);
        if (std::abs(law) > sup * mean_abs * (1.0 + 1e-12) + 1e-300) ++report_.law_jump_bound_violations;
    }

    const CylindricalFunctional& phi_;
    std::size_t t_index_, s_index_;
    std::size_t n_ = 0, d_ = 0;
    // Per-step per-particle contributions and running per-particle totals.
    std::vector<double> s1_, s2_, s4_, s5_, s6_, s3inf_;
    std::vector<double> t1_, t2_, t3_, t4_, t5_, t6_, lhs_i_;

private:
    void open_window(double t, std::span<const double> x) {
        const auto m = phi_.moments_flat(x);
        phi_t_ = phi_prev_ = phi_.value_at(m);
        report_.t = t;
        const auto w = phi_.outer_gradient(m);
        for (std::size_t i = 0; i < n_; ++i) {
            double g = 0.0;
            for (std::size_t k = 0; k < phi_.n(); ++k) g += w[k] * phi_.inner()[k].eval_unchecked(x.data() + i * d_);
            lhs_i_[i] -= g;
        }
    }

    void close_window(double s, std::span<const double> x) {
        const auto m = phi_.moments_flat(x);
        report_.s = s;
        report_.lhs = phi_.value_at(m) - phi_t_;
        const auto w = phi_.outer_gradient(m);
        for (std::size_t i = 0; i < n_; ++i) {
            double g = 0.0;
            for (std::size_t k = 0; k < phi_.n(); ++k) g += w[k] * phi_.inner()[k].eval_unchecked(x.data() + i * d_);
            lhs_i_[i] += g;
        }
        const double inv = 1.0 / static_cast<double>(n_);
        auto& T = report_.terms;
        T.drift_diffusion_integral = pairwise_sum(t1_) * inv;
        T.quadratic_variation_term = pairwise_sum(t2_) * inv;
        T.law_jump_term = law_sum_.value();
        T.lions_jump_compensator = pairwise_sum(t4_) * inv;
        T.linear_derivative_jump_term = pairwise_sum(t5_) * inv;
        T.singular_control_integral = pairwise_sum(t6_) * inv;
        report_.residual = report_.lhs - T.sum();
        std::vector<double> r(n_), rhs(n_);
        for (std::size_t i = 0; i < n_; ++i) {
            rhs[i] = t1_[i] + t2_[i] + t3_[i] + t4_[i] + t5_[i] + t6_[i];
            r[i] = lhs_i_[i] - rhs[i];
        }
        report_.terms_se = mean_and_standard_error(rhs).se;
        report_.residual_se = mean_and_standard_error(r).se;
        report_.lhs_se = mean_and_standard_error(lhs_i_).se;
        report_.residual_influence = std::move(r);
        closed_ = true;
    }

    ItoReport report_;
    double phi_t_ = 0.0, phi_prev_ = 0.0;
    CompensatedSum law_sum_;
    bool closed_ = false;
};

}  // namespace detail

/// Pathwise decomposition: predictable integral against dX, continuous
/// quadratic variation, law jumps at common-jump nodes, and the jump
/// compensator / linear-derivative pair at idiosyncratic jumps.
class GeneralItoAccumulator : public detail::WindowAccumulator {
public:
    GeneralItoAccumulator(const CylindricalFunctional& phi, std::size_t t_index, std::size_t s_index)
        : WindowAccumulator(phi, t_index, s_index, "general") {}

protected:
    void accumulate_step(const StepView& v, double& law) override {
        const std::size_t d = d_;
        const auto der = phi_.derivatives_at(phi_.moments_flat(v.x_start));
        const EventLayout lay = v.layout();
        parallel_for(n_, [&](std::size_t i) {
            std::array<double, max_dimension> seg{}, g{}, inc{}, xp{};
            std::array<double, max_dimension * max_dimension> h{}, qtail{};
            const double* x0 = v.x_start.data() + i * d;
            std::copy(x0, x0 + d, seg.begin());
            const double* qv = v.qv.data() + i * d * d;
            std::copy(qv, qv + d * d, qtail.begin());
            double a1 = 0.0, a2 = 0.0, a4 = 0.0, a5 = 0.0;
            const auto& ev = (*v.events)[i];
            for (std::size_t e = 0; e < lay.count(ev); ++e) {
                const double* r = ev.data() + e * lay.stride();
                const double* xm = EventLayout::x_minus(r);
                const double* dx = lay.dx(r);
                const double* qb = lay.qv_before(r);
                der.lions(seg.data(), g.data());
                for (std::size_t j = 0; j < d; ++j) inc[j] = xm[j] - seg[j];
                a1 += detail::dot(g.data(), inc.data(), d);
                der.lions_x(seg.data(), h.data());
                a2 += detail::half_trace(h.data(), qb, d);
                for (std::size_t j = 0; j < d * d; ++j) qtail[j] -= qb[j];
                der.lions(xm, g.data());
                const double gd = detail::dot(g.data(), dx, d);
                a1 += gd;
                a4 -= gd;
                for (std::size_t j = 0; j < d; ++j) xp[j] = xm[j] + dx[j];
                a5 += der.linear_diff(xp.data(), xm);
                std::copy(xp.begin(), xp.begin() + static_cast<std::ptrdiff_t>(d), seg.begin());
            }
            const double* xe = v.x_end_minus.data() + i * d;
            der.lions(seg.data(), g.data());
            for (std::size_t j = 0; j < d; ++j) inc[j] = xe[j] - seg[j];
            a1 += detail::dot(g.data(), inc.data(), d);
            der.lions_x(seg.data(), h.data());
            a2 += detail::half_trace(h.data(), qtail.data(), d);
            s1_[i] = a1;
            s2_[i] = a2;
            s4_[i] = a4;
            s5_[i] = a5;
        });
        if (v.node_event) node_event_terms(v, law, false);
    }
};

/// Generator form for jump-diffusions: drift and diffusion terms at the left
/// point plus the nu-integral of the linear-derivative difference, estimated
/// with freshly resampled marks.
class JumpCorollaryAccumulator : public detail::WindowAccumulator {
public:
    JumpCorollaryAccumulator(const CylindricalFunctional& phi, const JumpDiffusionSpec& spec, std::size_t t_index,
                             std::size_t s_index, std::size_t mark_mc, std::uint64_t seed)
        : WindowAccumulator(phi, t_index, s_index, "jump_corollary"), spec_(spec), mark_mc_(mark_mc), seed_(seed) {
        if (mark_mc == 0) throw InvalidArgument("mark_mc must be at least 1");
    }

    void on_start(const StartView& v) override {
        WindowAccumulator::on_start(v);
        marks_.clear();
        marks_.reserve(n_);
        for (std::size_t i = 0; i < n_; ++i) marks_.emplace_back(seed_, streams::marks_resample, i);
    }

protected:
    void accumulate_step(const StepView& v, double& law) override {
        const std::size_t d = d_;
        const auto feat = compute_features(v.x_start, d, spec_.features);
        const auto der = phi_.derivatives_at(phi_.moments_flat(v.x_start));
        const double dt = v.dt();
        const bool jumps = spec_.jump_rate > 0.0 && spec_.jump;
        parallel_for(n_, [&](std::size_t i) {
            std::array<double, max_dimension> a{}, b{}, g{}, theta{}, beta{}, xp{};
            std::array<double, max_dimension * max_dimension> sig{}, h{}, q{};
            const double* x = v.x_start.data() + i * d;
            if (spec_.feedback) spec_.feedback(v.t, x, feat, a.data());
            if (spec_.drift) spec_.drift(v.t, x, a.data(), feat, b.data());
            der.lions(x, g.data());
            s1_[i] = detail::dot(g.data(), b.data(), d) * dt;
            if (spec_.diffusion) {
                spec_.diffusion(v.t, x, a.data(), feat, sig.data());
                for (std::size_t j = 0; j < d; ++j)
                    for (std::size_t l = 0; l < d; ++l) {
                        double c = 0.0;
                        for (std::size_t r = 0; r < d; ++r) c += sig[j * d + r] * sig[l * d + r];
                        q[j * d + l] = c;
                    }
                der.lions_x(x, h.data());
                s2_[i] = detail::half_trace(h.data(), q.data(), d) * dt;
            }
            if (jumps) {
                double acc = 0.0;
                for (std::size_t m = 0; m < mark_mc_; ++m) {
                    for (std::size_t r = 0; r < spec_.marks.size(); ++r) theta[r] = spec_.marks[r].sample(marks_[i]);
                    spec_.jump(v.t, x, a.data(), feat, theta.data(), beta.data());
                    for (std::size_t j = 0; j < d; ++j) xp[j] = x[j] + beta[j];
                    acc += der.linear_diff(xp.data(), x);
                }
                s5_[i] = spec_.jump_rate * dt * acc / static_cast<double>(mark_mc_);
            }
        });
        if (v.node_event) law = phi_.value_at(phi_.moments_flat(v.x_end)) - phi_.value_at(phi_.moments_flat(v.x_end_minus));
    }

private:
    const JumpDiffusionSpec& spec_;
    std::size_t mark_mc_;
    std::uint64_t seed_;
    std::vector<ParticleStream> marks_;
};

/// Singular decomposition: generator drift and diffusion terms, the
/// predictable integral against lambda d(eta), law jumps at common nodes,
/// the matching compensator and the idiosyncratic linear-derivative term.
class SingularCorollaryAccumulator : public detail::WindowAccumulator {
public:
    SingularCorollaryAccumulator(const CylindricalFunctional& phi, const SingularSpec& spec, std::size_t t_index,
                                 std::size_t s_index)
        : WindowAccumulator(phi, t_index, s_index, "singular_corollary"), spec_(spec) {
        lambda_ = spec.lambda.empty() ? std::vector<double>(spec.dimension, 0.0) : spec.lambda;
    }

protected:
    void accumulate_step(const StepView& v, double& law) override {
        const std::size_t d = d_;
        const auto feat = compute_features(v.x_start, d, spec_.features);
        const auto der = phi_.derivatives_at(phi_.moments_flat(v.x_start));
        const double dt = v.dt();
        const EventLayout lay = v.layout();
        parallel_for(n_, [&](std::size_t i) {
            std::array<double, max_dimension> a{}, b{}, g{}, inc{}, xp{};
            std::array<double, max_dimension * max_dimension> sig{}, h{}, q{};
            const double* x = v.x_start.data() + i * d;
            if (spec_.feedback) spec_.feedback(v.t, x, feat, a.data());
            if (spec_.drift) spec_.drift(v.t, x, a.data(), feat, b.data());
            der.lions(x, g.data());
            s1_[i] = detail::dot(g.data(), b.data(), d) * dt;
            if (!v.eta_cont.empty()) {
                for (std::size_t j = 0; j < d; ++j) inc[j] = lambda_[j] * v.eta_cont[i * d + j];
                s6_[i] = detail::dot(g.data(), inc.data(), d);
            }
            if (spec_.diffusion) {
                spec_.diffusion(v.t, x, a.data(), feat, sig.data());
                for (std::size_t j = 0; j < d; ++j)
                    for (std::size_t l = 0; l < d; ++l) {
                        double c = 0.0;
                        for (std::size_t r = 0; r < d; ++r) c += sig[j * d + r] * sig[l * d + r];
                        q[j * d + l] = c;
                    }
                der.lions_x(x, h.data());
                s2_[i] = detail::half_trace(h.data(), q.data(), d) * dt;
            }
            const auto& ev = (*v.events)[i];
            for (std::size_t e = 0; e < lay.count(ev); ++e) {
                const double* r = ev.data() + e * lay.stride();
                const double* xm = EventLayout::x_minus(r);
                const double* dx = lay.dx(r);
                der.lions(xm, g.data());
                const double gd = detail::dot(g.data(), dx, d);
                s6_[i] += gd;
                s4_[i] -= gd;
                for (std::size_t j = 0; j < d; ++j) xp[j] = xm[j] + dx[j];
                s5_[i] += der.linear_diff(xp.data(), xm);
            }
        });
        if (v.node_event) node_event_terms(v, law, true);
    }

private:
    const SingularSpec& spec_;
    std::vector<double> lambda_;
};

inline ItoReport verify_general(const CylindricalFunctional& phi, const PathBundle& bundle, std::size_t t_index,
                                std::size_t s_index) {
    if (phi.dimension() != bundle.dimension()) throw InvalidArgument("bundle and functional dimensions differ");
    if (s_index >= bundle.node_count()) throw InvalidArgument("s_index beyond the last node");
    GeneralItoAccumulator acc(phi, t_index, s_index);
    bundle.replay(acc);
    return acc.report();
}

inline ItoReport verify_jump_corollary(const CylindricalFunctional& phi, const JumpDiffusionSpec& spec,
                                       const PathBundle& bundle, std::size_t t_index, std::size_t s_index,
                                       std::size_t mark_mc) {
    if (phi.dimension() != bundle.dimension()) throw InvalidArgument("bundle and functional dimensions differ");
    if (s_index >= bundle.node_count()) throw InvalidArgument("s_index beyond the last node");
    JumpCorollaryAccumulator acc(phi, spec, t_index, s_index, mark_mc, bundle.seed());
    bundle.replay(acc);
    return acc.report();
}

inline ItoReport verify_singular_corollary(const CylindricalFunctional& phi, const SingularSpec& spec,
                                           const PathBundle& bundle, std::size_t t_index, std::size_t s_index) {
    if (phi.dimension() != bundle.dimension()) throw InvalidArgument("bundle and functional dimensions differ");
    if (s_index >= bundle.node_count()) throw InvalidArgument("s_index beyond the last node");
    SingularCorollaryAccumulator acc(phi, spec, t_index, s_index);
    bundle.replay(acc);
    return acc.report();
}

/// Acceptance band for a residual: 3 standard errors plus a weak-error allowance.
inline bool within_band(const ItoReport& r, double weak_allowance) {
    return std::abs(r.residual) <= 3.0 * r.residual_se + weak_allowance;
}

/// Difference of the residuals of two decompositions of the same lhs, with
/// both the combined and the paired standard error.
struct PathwayAgreement {
    double difference = 0.0;
    double combined_se = 0.0;
    double paired_se = 0.0;
};

inline PathwayAgreement compare_pathways(const ItoReport& a, const ItoReport& b) {
    PathwayAgreement out;
    out.difference = a.residual - b.residual;
    out.combined_se = std::sqrt(a.residual_se * a.residual_se + b.residual_se * b.residual_se);
    if (a.residual_influence.size() == b.residual_influence.size() && !a.residual_influence.empty()) {
        std::vector<double> diff(a.residual_influence.size());
        for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = a.residual_influence[i] - b.residual_influence[i];
        out.paired_se = mean_and_standard_error(diff).se;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Convergence sweep

struct SweepRow {
    std::size_t n = 0, steps = 0;
    std::uint64_t seed = 0;
    double residual = 0.0, residual_se = 0.0;
};

struct SweepResult {
    std::vector<SweepRow> rows;
    double slope_n = std::numeric_limits<double>::quiet_NaN();   ///< d log|res| / d log N at the finest steps
    double slope_dt = std::numeric_limits<double>::quiet_NaN();  ///< d log|res| / d log dt at the largest N
};

/// Least-squares slope of log y against log x.
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    if (n < 2) return std::numeric_limits<double>::quiet_NaN();
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += std::log(x[i]);
        my += std::log(y[i]);
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = std::log(x[i]) - mx;
        sxy += dx * (std::log(y[i]) - my);
        sxx += dx * dx;
    }
    return sxy / sxx;
}

/// Runs `run(N, steps, seed)` over the full grid and fits the mean-|residual| slopes.
inline SweepResult convergence_sweep(const std::function<ItoReport(std::size_t, std::size_t, std::uint64_t)>& run,
                                     const std::vector<std::size_t>& n_list,
                                     const std::vector<std::size_t>& steps_list,
                                     const std::vector<std::uint64_t>& seeds) {
    if (n_list.empty() || steps_list.empty() || seeds.empty())
        throw InvalidArgument("convergence sweep needs non-empty N, steps and seed lists");
    SweepResult out;
    for (std::size_t n : n_list)
        for (std::size_t steps : steps_list)
            for (std::uint64_t seed : seeds) {
                const auto r = run(n, steps, seed);
                out.rows.push_back({n, steps, seed, r.residual, r.residual_se});
            }
    auto mean_abs = [&](std::size_t n, std::size_t steps) {
        double s = 0;
        for (const auto& r : out.rows)
            if (r.n == n && r.steps == steps) s += std::abs(r.residual);
        return s / static_cast<double>(seeds.size());
    };
    {
        std::vector<double> x, y;
        for (std::size_t n : n_list) {
            x.push_back(static_cast<double>(n));
            y.push_back(mean_abs(n, steps_list.back()));
        }
        out.slope_n = loglog_slope(x, y);
    }
    {
        std::vector<double> x, y;
        for (std::size_t steps : steps_list) {
            x.push_back(1.0 / static_cast<double>(steps));
            y.push_back(mean_abs(n_list.back(), steps));
        }
        out.slope_dt = loglog_slope(x, y);
    }
    return out;
}

}  // namespace mflow
