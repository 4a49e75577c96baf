#pragma once

#include <cstdint>
#include <cstring>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "mflow/measure.hpp"
#include "mflow/simulation.hpp"

namespace mflow {

enum class Side { left, right };

struct JumpLogEntry {
    static constexpr std::int64_t all = -1;

    std::size_t step;          ///< idiosyncratic: step k with time in (t_k, t_{k+1}]; common: step ending at the node
    double time;
    std::int64_t particle;     ///< particle index, or `all` for a scheduled common jump
    std::vector<double> dx;
    JumpKind kind;
};

/// Fully stored simulation output. Suitable for small and moderate N; large
/// runs should attach observers to the engine directly.
class PathBundle {
public:
    PathBundle(TimeGrid grid, std::size_t n, std::size_t d, std::uint64_t seed, bool singular)
        : grid_(std::move(grid)), n_(n), d_(d), seed_(seed), singular_(singular) {}

    [[nodiscard]] const TimeGrid& grid() const noexcept { return grid_; }
    [[nodiscard]] std::size_t particles() const noexcept { return n_; }
    [[nodiscard]] std::size_t dimension() const noexcept { return d_; }
    [[nodiscard]] std::uint64_t seed() const noexcept { return seed_; }
    [[nodiscard]] bool singular() const noexcept { return singular_; }
    [[nodiscard]] std::size_t node_count() const noexcept { return states_.size(); }

    [[nodiscard]] const std::vector<double>& states(std::size_t node) const { return states_.at(node); }
    [[nodiscard]] const std::vector<double>& left_states(std::size_t node) const {
        auto it = left_.find(node);
        return it == left_.end() ? states_.at(node) : it->second;
    }
    [[nodiscard]] bool has_node_event(std::size_t node) const { return node_eta_.count(node) != 0; }
    [[nodiscard]] bool has_common_schedule(std::size_t node) const { return scheduled_.count(node) != 0; }
    [[nodiscard]] const std::vector<double>& step_qv(std::size_t k) const { return qv_.at(k); }
    [[nodiscard]] const std::vector<std::vector<double>>& step_events(std::size_t k) const { return events_.at(k); }

    [[nodiscard]] EmpiricalMeasure marginal(std::size_t node, Side side) const {
        if (node >= states_.size())
            throw InvalidArgument(fmt::format("node index {} out of range (nodes = {})", node, states_.size()));
        return {side == Side::left ? left_states(node) : states_[node], d_};
    }

    /// Total eta per particle (continuous part, idiosyncratic jumps, node pushes), N x d.
    [[nodiscard]] std::vector<double> eta_totals(const std::vector<double>& lambda) const {
        std::vector<double> tot(n_ * d_, 0.0);
        if (!singular_) return tot;
        for (const auto& [node, push] : node_eta_)
            for (std::size_t i = 0; i < tot.size(); ++i) tot[i] += push[i];
        for (std::size_t k = 0; k < eta_cont_.size(); ++k) {
            for (std::size_t i = 0; i < tot.size(); ++i) tot[i] += eta_cont_[k][i];
            const EventLayout lay{d_};
            for (std::size_t i = 0; i < n_; ++i) {
                const auto& ev = events_[k][i];
                for (std::size_t e = 0; e < lay.count(ev); ++e) {
                    const double* r = ev.data() + e * lay.stride();
                    if (EventLayout::source(r) != EventSource::eta) continue;
                    for (std::size_t j = 0; j < d_; ++j)
                        if (lambda[j] > 0.0) tot[i * d_ + j] += lay.dx(r)[j] / lambda[j];
                }
            }
        }
        return tot;
    }

    [[nodiscard]] std::vector<JumpLogEntry> jump_log() const {
        std::vector<JumpLogEntry> log;
        const EventLayout lay{d_};
        for (std::size_t k = 0; k < events_.size(); ++k) {
            for (std::size_t i = 0; i < n_; ++i) {
                const auto& ev = events_[k][i];
                for (std::size_t e = 0; e < lay.count(ev); ++e) {
                    const double* r = ev.data() + e * lay.stride();
                    log.push_back({k, EventLayout::time(r), static_cast<std::int64_t>(i),
                                   std::vector<double>(lay.dx(r), lay.dx(r) + d_), JumpKind::idiosyncratic});
                }
            }
            const std::size_t node = k + 1;
            auto it = node_eta_.find(node);
            if (it == node_eta_.end()) continue;
            const auto& left = left_.at(node);
            const auto& right = states_[node];
            if (scheduled_.count(node) && !projected_.count(node)) {
                std::vector<double> dx(right.begin(), right.begin() + static_cast<std::ptrdiff_t>(d_));
                for (std::size_t j = 0; j < d_; ++j) dx[j] -= left[j];
                log.push_back({k, grid_.time(node), JumpLogEntry::all, dx, JumpKind::common});
            } else {
                for (std::size_t i = 0; i < n_; ++i) {
                    std::vector<double> dx(d_);
                    bool moved = false;
                    for (std::size_t j = 0; j < d_; ++j) {
                        dx[j] = right[i * d_ + j] - left[i * d_ + j];
                        moved = moved || dx[j] != 0.0;
                    }
                    if (moved) log.push_back({k, grid_.time(node), static_cast<std::int64_t>(i), dx, JumpKind::common});
                }
            }
        }
        return log;
    }

    /// Feeds the stored run to an observer exactly as the engine did.
    void replay(StepObserver& obs) const {
        StartView sv;
        sv.t = grid_.t0();
        sv.n = n_;
        sv.d = d_;
        sv.x_minus = left_states(0);
        sv.x = states_[0];
        if (auto it = node_eta_.find(0); it != node_eta_.end()) {
            sv.node_event = true;
            sv.node_eta = it->second;
        }
        obs.on_start(sv);
        for (std::size_t k = 0; k + 1 < states_.size(); ++k) {
            StepView v;
            v.k = k;
            v.t = grid_.time(k);
            v.t_next = grid_.time(k + 1);
            v.n = n_;
            v.d = d_;
            v.x_start = states_[k];
            v.x_end_minus = left_states(k + 1);
            v.x_end = states_[k + 1];
            v.qv = qv_[k];
            v.events = &events_[k];
            if (singular_) v.eta_cont = eta_cont_[k];
            if (auto it = node_eta_.find(k + 1); it != node_eta_.end()) {
                v.node_event = true;
                v.node_eta = it->second;
            }
            v.common_scheduled = scheduled_.count(k + 1) != 0;
            v.projected = projected_.count(k + 1) != 0;
            obs.on_step(v);
        }
        obs.on_finish();
    }

    /// Binary columnar export. Layout (little-endian):
    ///   "MFLOWPB1", u64 N, u64 d, u64 nodes, u64 seed,
    ///   f64 times[nodes],
    ///   f64 states[nodes][N*d]        (one column per node, particle-major),
    ///   u64 left_count, then per block: u64 node, f64 left[N*d],
    ///   u64 event_count, then per event: u64 step, i64 particle, f64 time, u8 kind, f64 dx[d].
    void write_binary(std::ostream& os) const {
        auto put_u64 = [&](std::uint64_t v) { os.write(reinterpret_cast<const char*>(&v), sizeof v); };
        auto put_f64 = [&](double v) { os.write(reinterpret_cast<const char*>(&v), sizeof v); };
        os.write("MFLOWPB1", 8);
        put_u64(n_);
        put_u64(d_);
        put_u64(states_.size());
        put_u64(seed_);
        for (double t : grid_.nodes()) put_f64(t);
        for (const auto& s : states_)
            for (double v : s) put_f64(v);
        put_u64(left_.size());
        for (const auto& [node, block] : left_) {
            put_u64(node);
            for (double v : block) put_f64(v);
        }
        const auto log = jump_log();
        put_u64(log.size());
        for (const auto& e : log) {
            put_u64(e.step);
            put_u64(static_cast<std::uint64_t>(e.particle));
            put_f64(e.time);
            const auto kind = static_cast<std::uint8_t>(e.kind);
            os.write(reinterpret_cast<const char*>(&kind), 1);
            for (double v : e.dx) put_f64(v);
        }
    }

    /// Per-node ensemble summary: node, t, mean_j, variance, idiosyncratic jumps in the step ending here, common flag.
    void write_summary_csv(std::ostream& os) const {
        os << "node,t";
        for (std::size_t j = 0; j < d_; ++j) os << ",mean_" << (j + 1);
        os << ",variance,idiosyncratic_jumps,common_event\n";
        const EventLayout lay{d_};
        for (std::size_t node = 0; node < states_.size(); ++node) {
            const auto f = compute_features(states_[node], d_, {});
            std::size_t jumps = 0;
            if (node > 0)
                for (const auto& ev : events_[node - 1]) jumps += lay.count(ev);
            std::string line = fmt::format("{},{:.17g}", node, grid_.time(node));
            for (double m : f.mean) line += fmt::format(",{:.17g}", m);
            line += fmt::format(",{:.17g},{},{}\n", f.variance, jumps, has_node_event(node) ? 1 : 0);
            os << line;
        }
    }

private:
    friend class BundleRecorder;

    TimeGrid grid_;
    std::size_t n_, d_;
    std::uint64_t seed_;
    bool singular_;
    std::vector<std::vector<double>> states_;
    std::map<std::size_t, std::vector<double>> left_;
    std::map<std::size_t, std::vector<double>> node_eta_;
    std::map<std::size_t, bool> scheduled_, projected_;
    std::vector<std::vector<double>> qv_, eta_cont_;
    std::vector<std::vector<std::vector<double>>> events_;
};

/// Observer that stores everything into a PathBundle.
class BundleRecorder : public StepObserver {
public:
    explicit BundleRecorder(PathBundle& b) : b_(b) {}

    void on_start(const StartView& v) override {
        b_.states_.assign(1, std::vector<double>(v.x.begin(), v.x.end()));
        if (v.node_event) {
            b_.left_[0] = std::vector<double>(v.x_minus.begin(), v.x_minus.end());
            b_.node_eta_[0] = std::vector<double>(v.node_eta.begin(), v.node_eta.end());
            b_.projected_[0] = true;
        }
    }

    void on_step(const StepView& v) override {
        b_.states_.emplace_back(v.x_end.begin(), v.x_end.end());
        b_.qv_.emplace_back(v.qv.begin(), v.qv.end());
        b_.events_.push_back(*v.events);
        if (b_.singular_) b_.eta_cont_.emplace_back(v.eta_cont.begin(), v.eta_cont.end());
        if (v.node_event) {
            const std::size_t node = v.k + 1;
            b_.left_[node] = std::vector<double>(v.x_end_minus.begin(), v.x_end_minus.end());
            b_.node_eta_[node] = std::vector<double>(v.node_eta.begin(), v.node_eta.end());
            if (v.common_scheduled) b_.scheduled_[node] = true;
            if (v.projected) b_.projected_[node] = true;
        }
    }

private:
    PathBundle& b_;
};

inline PathBundle simulate_jump_diffusion(const JumpDiffusionSpec& spec, std::size_t n, const TimeGrid& grid,
                                          std::uint64_t seed) {
    Engine eng(detail::to_engine(spec), n, grid, seed);
    PathBundle b(eng.grid(), n, spec.dimension, seed, false);
    BundleRecorder rec(b);
    eng.run({&rec});
    return b;
}

inline PathBundle simulate_singular(const SingularSpec& spec, std::size_t n, const TimeGrid& grid,
                                    std::uint64_t seed) {
    Engine eng(detail::to_engine(spec), n, grid, seed);
    PathBundle b(eng.grid(), n, spec.dimension, seed, true);
    BundleRecorder rec(b);
    eng.run({&rec});
    return b;
}

}  // namespace mflow
