#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <fmt/format.h>
#include "json.hpp"

#include "mflow/functional.hpp"
#include "mflow/laws.hpp"
#include "mflow/lq.hpp"
#include "mflow/mv.hpp"
#include "mflow/polynomial.hpp"
#include "mflow/simulation.hpp"

namespace mflow::cli {

using json = nlohmann::ordered_json;

/// Scenario content that does not match the schema; `path` names the field.
class SchemaError : public std::runtime_error {
public:
    SchemaError(std::string path, const std::string& what)
        : std::runtime_error(fmt::format("{}: {}", path, what)), path_(std::move(path)) {}
    [[nodiscard]] const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

/// A JSON value plus its location, for error messages.
class Node {
public:
    Node(const json& j, std::string path) : j_(&j), path_(std::move(path)) {}

    [[nodiscard]] const json& value() const { return *j_; }
    [[nodiscard]] const std::string& path() const { return path_; }
    [[nodiscard]] std::string child_path(const std::string& key) const {
        return path_.empty() ? key : path_ + "." + key;
    }

    [[nodiscard]] bool has(const std::string& key) const { return j_->is_object() && j_->contains(key); }

    [[nodiscard]] Node at(const std::string& key) const {
        if (!j_->is_object()) throw SchemaError(path_.empty() ? "<root>" : path_, "expected an object");
        if (!j_->contains(key)) throw SchemaError(child_path(key), "missing required field");
        return {(*j_)[key], child_path(key)};
    }

    [[nodiscard]] Node at(std::size_t i) const {
        return {(*j_)[i], fmt::format("{}[{}]", path_, i)};
    }

    [[nodiscard]] Node object(const std::string& key) const {
        auto n = at(key);
        if (!n.value().is_object()) throw SchemaError(n.path(), "expected an object");
        return n;
    }

    [[nodiscard]] Node array(const std::string& key) const {
        auto n = at(key);
        if (!n.value().is_array()) throw SchemaError(n.path(), "expected an array");
        return n;
    }

    [[nodiscard]] std::size_t size() const { return j_->size(); }

    [[nodiscard]] double number() const {
        if (!j_->is_number()) throw SchemaError(path_, "expected a number");
        const double v = j_->get<double>();
        if (!std::isfinite(v)) throw SchemaError(path_, "expected a finite number");
        return v;
    }

    [[nodiscard]] double number(const std::string& key) const { return at(key).number(); }
    [[nodiscard]] double number(const std::string& key, double fallback) const {
        return has(key) ? at(key).number() : fallback;
    }

    [[nodiscard]] std::uint64_t unsigned_integer() const {
        if (!j_->is_number_integer() || j_->get<std::int64_t>() < 0)
            throw SchemaError(path_, "expected a nonnegative integer");
        return j_->get<std::uint64_t>();
    }

    [[nodiscard]] std::size_t count(const std::string& key) const {
        const auto v = at(key).unsigned_integer();
        if (v == 0) throw SchemaError(child_path(key), "must be positive");
        return static_cast<std::size_t>(v);
    }
    [[nodiscard]] std::size_t count(const std::string& key, std::size_t fallback) const {
        return has(key) ? count(key) : fallback;
    }

    [[nodiscard]] std::string string(const std::string& key) const {
        auto n = at(key);
        if (!n.value().is_string()) throw SchemaError(n.path(), "expected a string");
        return n.value().get<std::string>();
    }

    [[nodiscard]] bool boolean(const std::string& key, bool fallback) const {
        if (!has(key)) return fallback;
        auto n = at(key);
        if (!n.value().is_boolean()) throw SchemaError(n.path(), "expected true or false");
        return n.value().get<bool>();
    }

    [[nodiscard]] std::vector<std::size_t> counts(const std::string& key) const {
        auto n = array(key);
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < n.size(); ++i) {
            const auto v = n.at(i).unsigned_integer();
            if (v == 0) throw SchemaError(n.at(i).path(), "must be positive");
            out.push_back(static_cast<std::size_t>(v));
        }
        if (out.empty()) throw SchemaError(n.path(), "must not be empty");
        return out;
    }

private:
    const json* j_;
    std::string path_;
};

// ---------------------------------------------------------------------------
// Building blocks

inline ScalarLaw parse_law(const Node& n) {
    const auto type = n.string("type");
    if (type == "dirac") return ScalarLaw::dirac(n.number("value"));
    if (type == "normal") {
        const double sd = n.number("sd");
        if (sd < 0) throw SchemaError(n.child_path("sd"), "must be >= 0");
        return ScalarLaw::normal(n.number("mean"), sd);
    }
    if (type == "uniform") {
        const double lo = n.number("lo"), hi = n.number("hi");
        if (!(lo < hi)) throw SchemaError(n.child_path("hi"), "must exceed lo");
        return ScalarLaw::uniform(lo, hi);
    }
    if (type == "biweight") {
        const double w = n.number("half_width");
        if (!(w > 0)) throw SchemaError(n.child_path("half_width"), "must be > 0");
        return ScalarLaw::biweight(n.number("center"), w);
    }
    throw SchemaError(n.child_path("type"), fmt::format("unknown law '{}' (dirac, normal, uniform, biweight)", type));
}

inline InitialFn sampler(const ScalarLaw& law) {
    return [law](ParticleStream& s, double* x) { x[0] = law.sample(s); };
}

/// c + s x + m mean (+ k theta for jump sizes).
struct Affine {
    double constant = 0, state = 0, mean = 0, mark = 0;
    [[nodiscard]] double operator()(double x, double m, double theta = 0) const {
        return constant + state * x + mean * m + mark * theta;
    }
    [[nodiscard]] bool zero() const { return constant == 0 && state == 0 && mean == 0 && mark == 0; }
};

inline Affine parse_affine(const Node& n, bool allow_mark) {
    static const std::vector<std::string> keys{"constant", "state", "mean", "mark"};
    for (const auto& [k, v] : n.value().items()) {
        (void)v;
        if (std::find(keys.begin(), keys.end(), k) == keys.end() || (!allow_mark && k == "mark"))
            throw SchemaError(n.child_path(k), "unknown coefficient");
    }
    return {n.number("constant", 0), n.number("state", 0), n.number("mean", 0), allow_mark ? n.number("mark", 0) : 0};
}

/// One-dimensional coefficients: drift, diffusion and jump sizes affine in
/// (x, mean, theta).
struct Dynamics {
    Affine drift, diffusion, jump;
    double jump_rate = 0;
    ScalarLaw marks = ScalarLaw::dirac(0);
    ScalarLaw initial = ScalarLaw::dirac(0);
};

inline Dynamics parse_dynamics(const Node& n) {
    Dynamics d;
    if (n.has("drift")) d.drift = parse_affine(n.object("drift"), false);
    if (n.has("diffusion")) d.diffusion = parse_affine(n.object("diffusion"), false);
    if (n.has("jump")) {
        const auto j = n.object("jump");
        d.jump_rate = j.number("rate");
        if (d.jump_rate < 0) throw SchemaError(j.child_path("rate"), "must be >= 0");
        d.marks = parse_law(j.object("marks"));
        d.jump = parse_affine(j.object("size"), true);
    }
    d.initial = parse_law(n.object("initial"));
    return d;
}

inline JumpDiffusionSpec jump_diffusion_spec(const Dynamics& d) {
    JumpDiffusionSpec s;
    s.dimension = 1;
    s.initial = sampler(d.initial);
    if (!d.drift.zero())
        s.drift = [a = d.drift](double, const double* x, const double*, const MeasureFeatures& f, double* o) {
            o[0] = a(x[0], f.mean[0]);
        };
    if (!d.diffusion.zero())
        s.diffusion = [a = d.diffusion](double, const double* x, const double*, const MeasureFeatures& f, double* o) {
            o[0] = a(x[0], f.mean[0]);
        };
    if (d.jump_rate > 0) {
        s.jump_rate = d.jump_rate;
        s.marks = {d.marks};
        s.jump = [a = d.jump](double, const double* x, const double*, const MeasureFeatures& f, const double* th,
                              double* o) { o[0] = a(x[0], f.mean[0], th[0]); };
    }
    return s;
}

inline SingularSpec singular_spec(const Dynamics& d, const Node& n) {
    if (d.jump_rate > 0) throw SchemaError(n.path(), "singular scenarios carry no Poisson jumps");
    const auto j = jump_diffusion_spec(d);
    SingularSpec s;
    s.dimension = 1;
    s.initial = j.initial;
    s.drift = j.drift;
    s.diffusion = j.diffusion;
    s.lambda = {n.number("lambda")};
    if (s.lambda[0] < 0) throw SchemaError(n.child_path("lambda"), "must be >= 0");
    s.eta_rate = {n.number("eta_rate", 0)};
    if (n.has("common")) {
        const auto c = n.array("common");
        for (std::size_t i = 0; i < c.size(); ++i)
            s.common.push_back({c.at(i).number("time"), {c.at(i).number("delta")}});
    }
    const std::string idio = n.has("idiosyncratic") ? n.string("idiosyncratic") : "none";
    if (idio == "none") {
        s.idiosyncratic = IdiosyncraticEta::none;
    } else if (idio == "uniform_time") {
        s.idiosyncratic = IdiosyncraticEta::uniform_time;
    } else if (idio == "poisson") {
        s.idiosyncratic = IdiosyncraticEta::poisson;
        s.idiosyncratic_rate = n.number("idiosyncratic_rate");
    } else {
        throw SchemaError(n.child_path("idiosyncratic"), "expected none, uniform_time or poisson");
    }
    if (idio != "none") s.idiosyncratic_delta = {n.number("idiosyncratic_delta")};
    return s;
}

/// {"moment": k} or {"inner": [[[c, k], ...], ...], "outer": [[c, [e1, ...]], ...]}.
inline CylindricalFunctional parse_functional(const Node& n) {
    if (n.has("moment")) {
        const auto k = n.at("moment").unsigned_integer();
        return CylindricalFunctional::linear(Polynomial::monomial(1.0, static_cast<int>(k)));
    }
    const auto inner = n.array("inner");
    if (inner.size() == 0) throw SchemaError(inner.path(), "must not be empty");
    std::vector<Polynomial> gs;
    for (std::size_t k = 0; k < inner.size(); ++k) {
        const auto g = inner.at(k);
        if (!g.value().is_array()) throw SchemaError(g.path(), "expected a list of [coefficient, power]");
        std::vector<Polynomial::Term> terms;
        for (std::size_t i = 0; i < g.size(); ++i) {
            const auto t = g.at(i);
            if (!t.value().is_array() || t.size() != 2) throw SchemaError(t.path(), "expected [coefficient, power]");
            terms.push_back({t.at(0).number(), {static_cast<int>(t.at(1).unsigned_integer())}});
        }
        gs.emplace_back(1, terms);
    }
    const auto outer = n.array("outer");
    std::vector<Polynomial::Term> terms;
    for (std::size_t i = 0; i < outer.size(); ++i) {
        const auto t = outer.at(i);
        if (!t.value().is_array() || t.size() != 2 || !t.value()[1].is_array() || t.value()[1].size() != gs.size())
            throw SchemaError(t.path(), fmt::format("expected [coefficient, [{} exponents]]", gs.size()));
        std::vector<int> e;
        for (std::size_t j = 0; j < gs.size(); ++j) e.push_back(static_cast<int>(t.at(1).at(j).unsigned_integer()));
        terms.push_back({t.at(0).number(), e});
    }
    return {Polynomial(gs.size(), terms), gs};
}

inline JumpCoef parse_jump_coef(const Node& n, const std::string& key) {
    if (!n.has(key)) return {};
    const auto c = n.object(key);
    return {c.number("c", 0), c.number("d", 0)};
}

inline LQCoefficients parse_lq(const Node& n) {
    LQCoefficients q;
    const std::vector<std::pair<const char*, double*>> scalars{
        {"b0", &q.b0}, {"b1", &q.b1}, {"bb1", &q.bb1}, {"b2", &q.b2}, {"s0", &q.s0}, {"s1", &q.s1},
        {"sb1", &q.sb1}, {"s2", &q.s2}, {"f1", &q.f1}, {"fb1", &q.fb1}, {"f2", &q.f2}, {"g1", &q.g1},
        {"gb1", &q.gb1}};
    for (const auto& [k, p] : scalars) *p = n.number(k, 0.0);
    if (!(q.f2 > 0)) throw SchemaError(n.child_path("f2"), "must be > 0");
    if (n.has("jump")) {
        const auto j = n.object("jump");
        q.jump_rate = j.number("rate");
        if (q.jump_rate < 0) throw SchemaError(j.child_path("rate"), "must be >= 0");
        q.marks = parse_law(j.object("marks"));
        q.beta0 = parse_jump_coef(j, "beta0");
        q.beta1 = parse_jump_coef(j, "beta1");
        q.bbeta1 = parse_jump_coef(j, "bbeta1");
        q.beta2 = parse_jump_coef(j, "beta2");
    }
    return q;
}

inline MVParams parse_mv(const Node& n) {
    MVParams p;
    p.r = n.number("r");
    p.rho = n.number("rho");
    p.sigma = n.number("sigma");
    p.beta = n.number("beta");
    p.lambda = n.number("lambda");
    p.gamma = n.number("gamma");
    p.T = n.number("T");
    if (!(p.sigma > 0)) throw SchemaError(n.child_path("sigma"), "must be > 0");
    if (!(p.beta > 0)) throw SchemaError(n.child_path("beta"), "must be > 0");
    if (!(p.T > 0)) throw SchemaError(n.child_path("T"), "must be > 0");
    if (p.lambda < 0) throw SchemaError(n.child_path("lambda"), "must be >= 0");
    return p;
}

/// Window [t, s] in time units, mapped to node indices of `g`.
inline std::pair<std::size_t, std::size_t> parse_window(const Node& root, const TimeGrid& g) {
    if (!root.has("window")) return {0, g.node_count() - 1};
    const auto w = root.object("window");
    const double t = w.number("t"), s = w.number("s");
    const auto ti = g.index_of(t), si = g.index_of(s);
    if (!ti) throw SchemaError(w.child_path("t"), "not a grid node");
    if (!si) throw SchemaError(w.child_path("s"), "not a grid node");
    if (!(*ti < *si)) throw SchemaError(w.child_path("s"), "must exceed t");
    return {*ti, *si};
}

// ---------------------------------------------------------------------------
// Overrides: key.path=value, value parsed as JSON when possible.

inline void apply_override(json& config, const std::string& spec) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0) throw SchemaError(spec, "override must look like key.path=value");
    const std::string key = spec.substr(0, eq), raw = spec.substr(eq + 1);
    json value;
    try {
        value = json::parse(raw);
    } catch (const json::parse_error&) {
        value = raw;
    }
    json* cur = &config;
    std::size_t start = 0;
    while (true) {
        const auto dot = key.find('.', start);
        const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (part.empty()) throw SchemaError(key, "empty path component in override");
        if (!cur->is_object()) throw SchemaError(key.substr(0, start ? start - 1 : 0), "override descends into a non-object");
        if (dot == std::string::npos) {
            (*cur)[part] = value;
            return;
        }
        cur = &(*cur)[part];
        start = dot + 1;
    }
}

}  // namespace mflow::cli
