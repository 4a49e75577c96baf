#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include <fmt/format.h>

#include "mflow/error.hpp"
#include "mflow/laws.hpp"
#include "mflow/parallel.hpp"
#include "mflow/polynomial.hpp"
#include "mflow/rng.hpp"
#include "mflow/summation.hpp"

namespace mflow {

// ---------------------------------------------------------------------------
// Time grid

/// Uniform grid on [t0, T] refined so that every mandatory time is a node.
class TimeGrid {
public:
    TimeGrid(double t0, double T, std::size_t steps, std::vector<double> mandatory = {})
        : t0_(t0), T_(T), steps_(steps), mandatory_(std::move(mandatory)) {
        if (!(t0 < T)) throw InvalidArgument("time grid needs t0 < T");
        if (steps == 0) throw InvalidArgument("time grid needs at least one step");
        std::sort(mandatory_.begin(), mandatory_.end());
        for (double m : mandatory_)
            if (!(m > t0 && m <= T))
                throw InvalidArgument(fmt::format("mandatory time {} outside ({}, {}]", m, t0, T));
        nodes_.resize(steps + 1);
        for (std::size_t k = 0; k <= steps; ++k)
            nodes_[k] = t0 + (T - t0) * static_cast<double>(k) / static_cast<double>(steps);
        nodes_.back() = T;
        const double snap = 1e-9 * (T - t0);
        for (double m : mandatory_) {
            auto it = std::lower_bound(nodes_.begin(), nodes_.end(), m);
            if (it != nodes_.end() && std::abs(*it - m) <= snap) {
                *it = m;
            } else if (it != nodes_.begin() && std::abs(*(it - 1) - m) <= snap && it - 1 != nodes_.begin()) {
                *(it - 1) = m;
            } else {
                nodes_.insert(it, m);
            }
        }
    }

    [[nodiscard]] double t0() const noexcept { return t0_; }
    [[nodiscard]] double T() const noexcept { return T_; }
    [[nodiscard]] std::size_t base_steps() const noexcept { return steps_; }
    [[nodiscard]] double base_dt() const noexcept { return (T_ - t0_) / static_cast<double>(steps_); }
    [[nodiscard]] const std::vector<double>& mandatory_times() const noexcept { return mandatory_; }
    [[nodiscard]] const std::vector<double>& nodes() const noexcept { return nodes_; }
    [[nodiscard]] std::size_t node_count() const noexcept { return nodes_.size(); }
    [[nodiscard]] std::size_t step_count() const noexcept { return nodes_.size() - 1; }
    [[nodiscard]] double time(std::size_t k) const { return nodes_.at(k); }

    /// Node index whose time equals t exactly, if any.
    [[nodiscard]] std::optional<std::size_t> index_of(double t) const {
        auto it = std::lower_bound(nodes_.begin(), nodes_.end(), t);
        if (it != nodes_.end() && *it == t) return static_cast<std::size_t>(it - nodes_.begin());
        return std::nullopt;
    }

    /// Same base grid with extra mandatory times merged in.
    [[nodiscard]] TimeGrid with_mandatory(const std::vector<double>& extra) const {
        auto all = mandatory_;
        for (double m : extra)
            if (std::find(all.begin(), all.end(), m) == all.end()) all.push_back(m);
        return {t0_, T_, steps_, all};
    }

private:
    double t0_, T_;
    std::size_t steps_;
    std::vector<double> mandatory_;
    std::vector<double> nodes_;
};

// ---------------------------------------------------------------------------
// Measure features

/// The only channel through which coefficients see the law.
struct MeasureFeatures {
    std::vector<double> mean;     ///< d-vector
    double variance = 0.0;        ///< trace form
    std::vector<double> moments;  ///< one per declared feature polynomial
};

inline MeasureFeatures compute_features(std::span<const double> states, std::size_t d,
                                        const std::vector<Polynomial>& polys) {
    const std::size_t n = states.size() / d;
    const double inv = 1.0 / static_cast<double>(n);
    MeasureFeatures f;
    f.mean.resize(d);
    for (std::size_t j = 0; j < d; ++j)
        f.mean[j] = pairwise_sum(0, n, [&](std::size_t i) { return states[i * d + j]; }) * inv;
    for (std::size_t j = 0; j < d; ++j) {
        const double m = f.mean[j];
        f.variance += pairwise_sum(0, n, [&](std::size_t i) {
                          const double c = states[i * d + j] - m;
                          return c * c;
                      }) *
                      inv;
    }
    for (const auto& p : polys)
        f.moments.push_back(
            pairwise_sum(0, n, [&](std::size_t i) { return p.eval_unchecked(states.data() + i * d); }) * inv);
    return f;
}

// ---------------------------------------------------------------------------
// Specifications

/// Coefficient callbacks. `x` has d entries, `a` has m entries (control
/// dimension, possibly 0), `theta` has q entries. Diffusion output is a
/// row-major d x d matrix driving a d-dimensional Brownian motion.
using DriftFn = std::function<void(double t, const double* x, const double* a, const MeasureFeatures& f, double* out)>;
using DiffusionFn = DriftFn;
using JumpFn = std::function<void(double t, const double* x, const double* a, const MeasureFeatures& f,
                                  const double* theta, double* out)>;
using FeedbackFn = std::function<void(double t, const double* x, const MeasureFeatures& f, double* a)>;
using InitialFn = std::function<void(ParticleStream& s, double* x)>;
/// Post-step projection: may move particles; must write the nonnegative
/// per-particle eta increments (N x d, in eta units) it applied.
using ProjectionFn = std::function<void(double t, std::span<double> states, std::span<double> eta_push)>;

inline constexpr std::size_t max_dimension = 8;

/// McKean-Vlasov jump-diffusion dX = b dt + sigma dW + int beta N(dt, dtheta).
struct JumpDiffusionSpec {
    std::size_t dimension = 1;
    std::size_t control_dimension = 0;
    DriftFn drift;
    DiffusionFn diffusion;
    JumpFn jump;
    double jump_rate = 0.0;          ///< total intensity of nu
    std::vector<ScalarLaw> marks;    ///< independent mark components; q = marks.size()
    FeedbackFn feedback;             ///< optional closed-loop control
    InitialFn initial;
    std::vector<Polynomial> features;  ///< polynomial moments exposed to the coefficients
};

struct CommonEtaJump {
    double time;
    std::vector<double> delta;  ///< eta increment, identical for every particle
};

enum class IdiosyncraticEta { none, uniform_time, poisson };

/// Mixed regular-singular dynamics dX = b dt + sigma dW + lambda d eta.
struct SingularSpec {
    std::size_t dimension = 1;
    std::size_t control_dimension = 0;
    DriftFn drift;
    DiffusionFn diffusion;
    FeedbackFn feedback;
    InitialFn initial;
    std::vector<Polynomial> features;
    std::vector<double> lambda;            ///< diagonal of the loading matrix
    std::vector<double> eta_rate;          ///< absolutely continuous part, per coordinate
    std::vector<CommonEtaJump> common;     ///< deterministic schedule, shared by all particles
    IdiosyncraticEta idiosyncratic = IdiosyncraticEta::none;
    double idiosyncratic_rate = 0.0;       ///< poisson mode
    std::vector<double> idiosyncratic_delta;
    ProjectionFn projection;               ///< reflection policy, applied after every step
    bool project_initial = false;
};

// ---------------------------------------------------------------------------
// Step views handed to observers

enum class JumpKind : std::uint8_t { idiosyncratic = 0, common = 1 };
enum class EventSource : std::uint8_t { jump = 0, eta = 1 };

/// Per-particle event record inside one step, stored flat:
/// [time, source, x_minus(d), dx(d), qv_before(d*d)], where qv_before is the
/// continuous quadratic variation accumulated since the previous event.
struct EventLayout {
    std::size_t d;
    [[nodiscard]] std::size_t stride() const noexcept { return 2 + 2 * d + d * d; }
    [[nodiscard]] std::size_t count(const std::vector<double>& v) const noexcept { return v.size() / stride(); }
    static double time(const double* e) noexcept { return e[0]; }
    static EventSource source(const double* e) noexcept { return static_cast<EventSource>(static_cast<int>(e[1])); }
    static const double* x_minus(const double* e) noexcept { return e + 2; }
    [[nodiscard]] const double* dx(const double* e) const noexcept { return e + 2 + d; }
    [[nodiscard]] const double* qv_before(const double* e) const noexcept { return e + 2 + 2 * d; }
};

struct StartView {
    double t = 0.0;
    std::size_t n = 0, d = 0;
    std::span<const double> x_minus;  ///< sampled initial cloud
    std::span<const double> x;        ///< after the optional initial projection
    bool node_event = false;
    std::span<const double> node_eta;  ///< N x d, empty without event
};

struct StepView {
    std::size_t k = 0;  ///< step from node k to node k+1
    double t = 0.0, t_next = 0.0;
    std::size_t n = 0, d = 0;
    std::span<const double> x_start;      ///< node k, post-event values
    std::span<const double> x_end_minus;  ///< node k+1 left limits
    std::span<const double> x_end;        ///< node k+1 values
    std::span<const double> qv;           ///< N x d x d continuous quadratic variation over the step
    const std::vector<std::vector<double>>* events = nullptr;  ///< per particle, see EventLayout
    std::span<const double> eta_cont;     ///< N x d, continuous eta increments; empty if not singular
    bool node_event = false;              ///< common jump or projection at node k+1
    bool common_scheduled = false;        ///< scheduled common eta jump at node k+1
    bool projected = false;               ///< projection moved at least one particle at node k+1
    std::span<const double> node_eta;     ///< N x d eta increments at node k+1; empty without event

    [[nodiscard]] EventLayout layout() const noexcept { return {d}; }
    [[nodiscard]] double dt() const noexcept { return t_next - t; }
};

class StepObserver {
public:
    virtual ~StepObserver() = default;
    virtual void on_start(const StartView&) {}
    virtual void on_step(const StepView&) = 0;
    virtual void on_finish() {}
};

// ---------------------------------------------------------------------------
// Engine

namespace detail {

struct EngineSpec {
    std::size_t d = 1, m = 0, q = 0;
    DriftFn drift;
    DiffusionFn diffusion;
    JumpFn jump;
    double jump_rate = 0.0;
    std::vector<ScalarLaw> marks;
    FeedbackFn feedback;
    InitialFn initial;
    std::vector<Polynomial> features;
    bool singular = false;
    std::vector<double> lambda, eta_rate;
    std::vector<CommonEtaJump> common;
    IdiosyncraticEta idio = IdiosyncraticEta::none;
    double idio_rate = 0.0;
    std::vector<double> idio_delta;
    ProjectionFn projection;
    bool project_initial = false;
};

inline void check_dims(std::size_t d, std::size_t m, std::size_t q) {
    if (d == 0 || d > max_dimension) throw InvalidArgument(fmt::format("state dimension must be in [1, {}]", max_dimension));
    if (m > max_dimension) throw InvalidArgument("control dimension too large");
    if (q > max_dimension) throw InvalidArgument("mark dimension too large");
}

inline EngineSpec to_engine(const JumpDiffusionSpec& s) {
    check_dims(s.dimension, s.control_dimension, s.marks.size());
    if (!(s.jump_rate >= 0.0)) throw InvalidArgument("jump intensity must be nonnegative");
    if (!s.initial) throw InvalidArgument("initial law sampler missing");
    if (s.jump_rate > 0.0 && !s.jump) throw InvalidArgument("positive jump intensity without a jump map");
    if (s.control_dimension > 0 && !s.feedback) throw InvalidArgument("control dimension set without a feedback map");
    EngineSpec e;
    e.d = s.dimension;
    e.m = s.control_dimension;
    e.q = s.marks.size();
    e.drift = s.drift;
    e.diffusion = s.diffusion;
    e.jump = s.jump;
    e.jump_rate = s.jump_rate;
    e.marks = s.marks;
    e.feedback = s.feedback;
    e.initial = s.initial;
    e.features = s.features;
    return e;
}

inline EngineSpec to_engine(const SingularSpec& s) {
    check_dims(s.dimension, s.control_dimension, 0);
    const std::size_t d = s.dimension;
    if (!s.initial) throw InvalidArgument("initial law sampler missing");
    if (s.control_dimension > 0 && !s.feedback) throw InvalidArgument("control dimension set without a feedback map");
    auto fill = [d](const std::vector<double>& v, const char* name) {
        if (v.empty()) return std::vector<double>(d, 0.0);
        if (v.size() != d) throw InvalidArgument(fmt::format("{} must have {} entries", name, d));
        return v;
    };
    EngineSpec e;
    e.d = d;
    e.m = s.control_dimension;
    e.drift = s.drift;
    e.diffusion = s.diffusion;
    e.feedback = s.feedback;
    e.initial = s.initial;
    e.features = s.features;
    e.singular = true;
    e.lambda = fill(s.lambda, "lambda");
    e.eta_rate = fill(s.eta_rate, "eta_rate");
    for (double l : e.lambda)
        if (!(l >= 0.0)) throw InvalidArgument("lambda must be nonnegative");
    for (double r : e.eta_rate)
        if (!(r >= 0.0)) throw SimulationError("decreasing eta: negative continuous eta rate");
    e.common = s.common;
    for (const auto& c : e.common) {
        if (c.delta.size() != d) throw InvalidArgument("common eta jump has wrong dimension");
        for (double v : c.delta)
            if (!(v >= 0.0)) throw SimulationError(fmt::format("decreasing eta: negative common jump at t={}", c.time));
    }
    e.idio = s.idiosyncratic;
    e.idio_rate = s.idiosyncratic_rate;
    e.idio_delta = fill(s.idiosyncratic_delta, "idiosyncratic_delta");
    for (double v : e.idio_delta)
        if (!(v >= 0.0)) throw SimulationError("decreasing eta: negative idiosyncratic jump");
    if (e.idio == IdiosyncraticEta::poisson && !(e.idio_rate >= 0.0))
        throw InvalidArgument("idiosyncratic eta rate must be nonnegative");
    e.projection = s.projection;
    e.project_initial = s.project_initial;
    return e;
}

inline constexpr std::uint32_t jump_stream = 7;

}  // namespace detail

/// Particle engine shared by both dynamics classes.
///
/// Each step: features of the node-k cloud are computed once, then every
/// particle advances independently (Euler-Maruyama split at exact event
/// times), then node events (scheduled common jumps, projection) are applied.
class Engine {
public:
    Engine(detail::EngineSpec spec, std::size_t n, TimeGrid grid, std::uint64_t seed)
        : spec_(std::move(spec)), n_(n), grid_(std::move(grid)), seed_(seed) {
        if (n_ == 0) throw InvalidArgument("particle count must be at least 1");
        std::vector<double> extra;
        for (const auto& c : spec_.common) extra.push_back(c.time);
        if (!extra.empty()) grid_ = grid_.with_mandatory(extra);
    }

    [[nodiscard]] const TimeGrid& grid() const noexcept { return grid_; }

    void run(const std::vector<StepObserver*>& observers) {
        const std::size_t d = spec_.d;
        const std::size_t nd = n_ * d;
        std::vector<double> cur(nd), minus(nd), next(nd), qv(nd * d), eta_cont, node_eta;
        std::vector<std::vector<double>> events(n_);
        if (spec_.singular) eta_cont.assign(nd, 0.0);

        dyn_.clear();
        jmp_.clear();
        dyn_.reserve(n_);
        jmp_.reserve(n_);
        for (std::size_t i = 0; i < n_; ++i) {
            dyn_.emplace_back(seed_, streams::dynamics, i);
            jmp_.emplace_back(seed_, detail::jump_stream, i);
        }
        next_jump_.assign(n_, INFINITY);
        next_eta_.assign(n_, INFINITY);

        // Initial cloud and clocks.
        parallel_for(n_, [&](std::size_t i) {
            ParticleStream s(seed_, streams::initial, i);
            spec_.initial(s, cur.data() + i * d);
            check_finite(cur.data() + i * d, 0, i);
            if (spec_.jump_rate > 0.0) next_jump_[i] = grid_.t0() + jmp_[i].exponential(spec_.jump_rate);
            if (spec_.idio == IdiosyncraticEta::uniform_time) {
                ParticleStream e(seed_, streams::idiosyncratic_eta, i);
                next_eta_[i] = e.uniform(grid_.t0(), grid_.T());
            }
        });
        eta_stream_.clear();
        if (spec_.idio == IdiosyncraticEta::poisson && spec_.idio_rate > 0.0) {
            eta_stream_.reserve(n_);
            for (std::size_t i = 0; i < n_; ++i) {
                eta_stream_.emplace_back(seed_, streams::idiosyncratic_eta, i);
                next_eta_[i] = grid_.t0() + eta_stream_[i].exponential(spec_.idio_rate);
            }
        }

        StartView sv;
        sv.t = grid_.t0();
        sv.n = n_;
        sv.d = d;
        minus = cur;
        if (spec_.singular && spec_.projection && spec_.project_initial) {
            node_eta.assign(nd, 0.0);
            spec_.projection(grid_.t0(), cur, node_eta);
            validate_push(node_eta, cur, 0);
            if (std::any_of(node_eta.begin(), node_eta.end(), [](double e) { return e != 0.0; })) {
                sv.node_event = true;
                sv.node_eta = node_eta;
            }
        }
        sv.x_minus = minus;
        sv.x = cur;
        for (auto* o : observers) o->on_start(sv);

        const auto& nodes = grid_.nodes();
        std::size_t common_pos = 0;
        std::vector<CommonEtaJump> common = spec_.common;
        std::sort(common.begin(), common.end(), [](const auto& a, const auto& b) { return a.time < b.time; });

        for (std::size_t k = 0; k + 1 < nodes.size(); ++k) {
            const double t = nodes[k], t1 = nodes[k + 1];
            const MeasureFeatures feat = compute_features(cur, d, spec_.features);
            parallel_for(n_, [&](std::size_t i) {
                advance(i, k, t, t1, feat, cur.data() + i * d, minus.data() + i * d, qv.data() + i * d * d,
                        spec_.singular ? eta_cont.data() + i * d : nullptr, events[i]);
            });

            next = minus;
            bool node_event = false, scheduled = false, moved = false;
            node_eta.clear();
            while (common_pos < common.size() && common[common_pos].time <= t1) {
                if (common[common_pos].time == t1) {
                    if (!node_event) node_eta.assign(nd, 0.0);
                    node_event = scheduled = true;
                    const auto& c = common[common_pos];
                    parallel_for(n_, [&](std::size_t i) {
                        for (std::size_t j = 0; j < d; ++j) {
                            next[i * d + j] += spec_.lambda[j] * c.delta[j];
                            node_eta[i * d + j] += c.delta[j];
                        }
                    });
                }
                ++common_pos;
            }
            if (spec_.singular && spec_.projection) {
                std::vector<double> push(nd, 0.0);
                spec_.projection(t1, next, push);
                validate_push(push, next, k + 1);
                for (double p : push)
                    if (p != 0.0) {
                        moved = true;
                        break;
                    }
                if (moved) {
                    if (!node_event) node_eta.assign(nd, 0.0);
                    node_event = true;
                    for (std::size_t i = 0; i < nd; ++i) node_eta[i] += push[i];
                }
            }

            StepView v;
            v.k = k;
            v.t = t;
            v.t_next = t1;
            v.n = n_;
            v.d = d;
            v.x_start = cur;
            v.x_end_minus = minus;
            v.x_end = next;
            v.qv = qv;
            v.events = &events;
            v.eta_cont = eta_cont;
            v.node_event = node_event;
            v.common_scheduled = scheduled;
            v.projected = moved;
            if (node_event) v.node_eta = node_eta;
            for (auto* o : observers) o->on_step(v);
            cur.swap(next);
        }
        for (auto* o : observers) o->on_finish();
    }

private:
    void check_finite(const double* x, std::size_t k, std::size_t i) const {
        for (std::size_t j = 0; j < spec_.d; ++j)
            if (!std::isfinite(x[j]))
                throw SimulationError(fmt::format("non-finite state at step {} for particle {}", k, i));
    }

    void validate_push(std::span<const double> push, std::span<const double> states, std::size_t node) const {
        for (std::size_t i = 0; i < push.size(); ++i) {
            if (!(push[i] >= 0.0))
                throw SimulationError(fmt::format("decreasing eta: projection push {} at node {} for particle {}",
                                                  push[i], node, i / spec_.d));
            if (!std::isfinite(states[i]))
                throw SimulationError(fmt::format("non-finite state after projection at node {} for particle {}", node,
                                                  i / spec_.d));
        }
    }

    void euler(double t, double h, const MeasureFeatures& f, double* x, double* qv, double* qv_seg, double* eta,
               ParticleStream& s) const {
        const std::size_t d = spec_.d;
        std::array<double, max_dimension> a{}, b{}, z{};
        std::array<double, max_dimension * max_dimension> sig{};
        if (spec_.feedback) spec_.feedback(t, x, f, a.data());
        if (spec_.drift) spec_.drift(t, x, a.data(), f, b.data());
        if (spec_.diffusion) spec_.diffusion(t, x, a.data(), f, sig.data());
        const double sh = std::sqrt(h);
        if (spec_.diffusion)
            for (std::size_t j = 0; j < d; ++j) z[j] = s.normal();
        for (std::size_t j = 0; j < d; ++j) {
            double dx = b[j] * h;
            if (spec_.diffusion) {
                double w = 0.0;
                for (std::size_t l = 0; l < d; ++l) w += sig[j * d + l] * z[l];
                dx += w * sh;
            }
            if (spec_.singular) {
                const double de = spec_.eta_rate[j] * h;
                dx += spec_.lambda[j] * de;
                eta[j] += de;
            }
            x[j] += dx;
        }
        if (spec_.diffusion)
            for (std::size_t j = 0; j < d; ++j)
                for (std::size_t l = 0; l < d; ++l) {
                    double c = 0.0;
                    for (std::size_t r = 0; r < d; ++r) c += sig[j * d + r] * sig[l * d + r];
                    qv[j * d + l] += c * h;
                    qv_seg[j * d + l] += c * h;
                }
    }

    void advance(std::size_t i, std::size_t k, double t, double t1, const MeasureFeatures& f, const double* x0,
                 double* x, double* qv, double* eta, std::vector<double>& ev) {
        const std::size_t d = spec_.d;
        const EventLayout lay{d};
        std::copy(x0, x0 + d, x);
        std::fill(qv, qv + d * d, 0.0);
        if (eta) std::fill(eta, eta + d, 0.0);
        std::array<double, max_dimension * max_dimension> seg{};
        ev.clear();
        double s = t;
        while (true) {
            const bool jump_first = next_jump_[i] <= next_eta_[i];
            const double te = std::min(next_jump_[i], next_eta_[i]);
            const double stop = std::min(te, t1);
            if (stop > s) euler(s, stop - s, f, x, qv, seg.data(), eta, dyn_[i]);
            if (te > t1) break;
            s = te;
            // Event at the left limit x.
            std::array<double, max_dimension> a{}, dx{};
            EventSource src;
            if (jump_first) {
                src = EventSource::jump;
                std::array<double, max_dimension> theta{};
                for (std::size_t r = 0; r < spec_.q; ++r) theta[r] = spec_.marks[r].sample(jmp_[i]);
                if (spec_.feedback) spec_.feedback(te, x, f, a.data());
                spec_.jump(te, x, a.data(), f, theta.data(), dx.data());
                next_jump_[i] = te + jmp_[i].exponential(spec_.jump_rate);
            } else {
                src = EventSource::eta;
                for (std::size_t j = 0; j < d; ++j) dx[j] = spec_.lambda[j] * spec_.idio_delta[j];
                if (spec_.idio == IdiosyncraticEta::poisson)
                    next_eta_[i] = te + eta_stream_[i].exponential(spec_.idio_rate);
                else
                    next_eta_[i] = INFINITY;
            }
            const std::size_t base = ev.size();
            ev.resize(base + lay.stride());
            double* e = ev.data() + base;
            e[0] = te;
            e[1] = static_cast<double>(src);
            for (std::size_t j = 0; j < d; ++j) {
                e[2 + j] = x[j];
                e[2 + d + j] = dx[j];
            }
            for (std::size_t j = 0; j < d * d; ++j) {
                e[2 + 2 * d + j] = seg[j];
                seg[j] = 0.0;
            }
            for (std::size_t j = 0; j < d; ++j) x[j] += dx[j];
        }
        check_finite(x, k, i);
    }

    detail::EngineSpec spec_;
    std::size_t n_;
    TimeGrid grid_;
    std::uint64_t seed_;
    std::vector<ParticleStream> dyn_, jmp_, eta_stream_;
    std::vector<double> next_jump_, next_eta_;
};

inline void simulate_streaming(const JumpDiffusionSpec& spec, std::size_t n, const TimeGrid& grid, std::uint64_t seed,
                               const std::vector<StepObserver*>& observers) {
    Engine(detail::to_engine(spec), n, grid, seed).run(observers);
}

inline void simulate_streaming(const SingularSpec& spec, std::size_t n, const TimeGrid& grid, std::uint64_t seed,
                               const std::vector<StepObserver*>& observers) {
    Engine(detail::to_engine(spec), n, grid, seed).run(observers);
}

/// Effective grid used for a singular spec (scheduled jump times merged in).
inline TimeGrid effective_grid(const SingularSpec& spec, const TimeGrid& grid) {
    std::vector<double> extra;
    for (const auto& c : spec.common) extra.push_back(c.time);
    return extra.empty() ? grid : grid.with_mandatory(extra);
}

}  // namespace mflow
