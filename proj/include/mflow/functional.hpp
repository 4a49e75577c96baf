#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <utility>
#include <vector>

#include <fmt/format.h>

#include "mflow/error.hpp"
#include "mflow/measure.hpp"
#include "mflow/polynomial.hpp"
#include "mflow/summation.hpp"

namespace mflow {

class CylindricalFunctional;

/// Exact derivatives of a cylindrical functional with the measure argument
/// frozen. Only the outer gradient depends on the measure, so once it is
/// fixed every per-particle query costs a handful of polynomial evaluations.
class DerivativeBundle {
public:
    DerivativeBundle(const CylindricalFunctional& phi, std::vector<double> outer_gradient)
        : phi_(&phi), w_(std::move(outer_gradient)) {}

    [[nodiscard]] std::span<const double> outer_gradient() const noexcept { return w_; }

    /// Lions derivative at x, written into out (size d).
    void lions(const double* x, double* out) const;
    /// x-Jacobian of the Lions derivative at x, written row-major into out (size d*d).
    void lions_x(const double* x, double* out) const;
    /// dPhi/dmu(x_new) - dPhi/dmu(x_old).
    [[nodiscard]] double linear_diff(const double* x_new, const double* x_old) const;

private:
    const CylindricalFunctional* phi_;
    std::vector<double> w_;
};

/// Phi(mu) = f(<g_1,mu>, ..., <g_n,mu>) with polynomial f and g_k.
class CylindricalFunctional {
public:
    CylindricalFunctional(Polynomial outer, std::vector<Polynomial> inner)
        : outer_(std::move(outer)), inner_(std::move(inner)) {
        if (inner_.empty()) throw InvalidArgument("cylindrical functional needs at least one inner polynomial");
        if (outer_.arity() != inner_.size())
            throw InvalidArgument(fmt::format("outer arity {} does not match {} inner polynomials",
                                              outer_.arity(), inner_.size()));
        d_ = inner_.front().arity();
        for (std::size_t k = 0; k < inner_.size(); ++k)
            if (inner_[k].arity() != d_)
                throw InvalidArgument(fmt::format("inner polynomial {} has arity {}, expected {}", k,
                                                  inner_[k].arity(), d_));
        const std::size_t n = inner_.size();
        for (std::size_t k = 0; k < n; ++k) outer_grad_.push_back(outer_.partial(k));
        inner_grad_.resize(n);
        inner_hess_.resize(n);
        for (std::size_t k = 0; k < n; ++k)
            for (std::size_t j = 0; j < d_; ++j) {
                inner_grad_[k].push_back(inner_[k].partial(j));
                for (std::size_t l = 0; l < d_; ++l)
                    inner_hess_[k].push_back(inner_grad_[k][j].partial(l));
            }
    }

    /// Phi(mu) = <g, mu> for a single polynomial g.
    static CylindricalFunctional linear(Polynomial g) {
        return {Polynomial::coordinate(1, 0), {std::move(g)}};
    }

    [[nodiscard]] std::size_t n() const noexcept { return inner_.size(); }
    [[nodiscard]] std::size_t dimension() const noexcept { return d_; }
    [[nodiscard]] const Polynomial& outer() const noexcept { return outer_; }
    [[nodiscard]] const std::vector<Polynomial>& inner() const noexcept { return inner_; }

    [[nodiscard]] std::vector<double> moments(const EmpiricalMeasure& mu) const {
        check_dim(mu.dimension());
        return moments_flat(mu.data());
    }

    /// Moments of a row-major N x d state array.
    [[nodiscard]] std::vector<double> moments_flat(std::span<const double> states) const {
        const std::size_t np = states.size() / d_;
        std::vector<double> m(n());
        for (std::size_t k = 0; k < n(); ++k)
            m[k] = pairwise_sum(0, np,
                                [&](std::size_t i) { return inner_[k].eval_unchecked(states.data() + i * d_); }) /
                   static_cast<double>(np);
        return m;
    }

    [[nodiscard]] double value_at(std::span<const double> moments) const { return outer_(moments); }

    [[nodiscard]] double evaluate(const EmpiricalMeasure& mu) const { return value_at(moments(mu)); }

    [[nodiscard]] std::vector<double> outer_gradient(std::span<const double> moments) const {
        std::vector<double> w(n());
        for (std::size_t k = 0; k < n(); ++k) w[k] = outer_grad_[k](moments);
        return w;
    }

    [[nodiscard]] DerivativeBundle derivatives_at(std::span<const double> moments) const {
        return {*this, outer_gradient(moments)};
    }

    [[nodiscard]] DerivativeBundle derivatives(const EmpiricalMeasure& mu) const {
        return derivatives_at(moments(mu));
    }

    [[nodiscard]] std::vector<double> lions_derivative(const EmpiricalMeasure& mu,
                                                       std::span<const double> x) const {
        check_dim(x.size());
        std::vector<double> out(d_);
        derivatives(mu).lions(x.data(), out.data());
        return out;
    }

    [[nodiscard]] std::vector<double> lions_x_derivative(const EmpiricalMeasure& mu,
                                                         std::span<const double> x) const {
        check_dim(x.size());
        std::vector<double> out(d_ * d_);
        derivatives(mu).lions_x(x.data(), out.data());
        return out;
    }

    [[nodiscard]] double linear_derivative_diff(const EmpiricalMeasure& mu, std::span<const double> x_new,
                                                std::span<const double> x_old) const {
        check_dim(x_new.size());
        check_dim(x_old.size());
        return derivatives(mu).linear_diff(x_new.data(), x_old.data());
    }

    /// Phi1 + Phi2 as a single cylindrical functional over the concatenated inner list.
    friend CylindricalFunctional operator+(const CylindricalFunctional& a, const CylindricalFunctional& b) {
        return combine(a, b, false);
    }
    /// Phi1 * Phi2, likewise.
    friend CylindricalFunctional operator*(const CylindricalFunctional& a, const CylindricalFunctional& b) {
        return combine(a, b, true);
    }

private:
    friend class DerivativeBundle;

    void check_dim(std::size_t d) const {
        if (d != d_)
            throw InvalidArgument(fmt::format("functional of dimension {} applied to dimension {}", d_, d));
    }

    static CylindricalFunctional combine(const CylindricalFunctional& a, const CylindricalFunctional& b,
                                         bool product) {
        if (a.d_ != b.d_) throw InvalidArgument("functionals of different dimension");
        const std::size_t n = a.n() + b.n();
        Polynomial fa = a.outer_.embed(n, 0);
        Polynomial fb = b.outer_.embed(n, a.n());
        std::vector<Polynomial> inner = a.inner_;
        inner.insert(inner.end(), b.inner_.begin(), b.inner_.end());
        return {product ? fa * fb : fa + fb, std::move(inner)};
    }

    Polynomial outer_;
    std::vector<Polynomial> inner_;
    std::size_t d_ = 0;
    std::vector<Polynomial> outer_grad_;
    std::vector<std::vector<Polynomial>> inner_grad_;  // [k][j]
    std::vector<std::vector<Polynomial>> inner_hess_;  // [k][j*d + l]
};

inline void DerivativeBundle::lions(const double* x, double* out) const {
    const std::size_t d = phi_->d_;
    for (std::size_t j = 0; j < d; ++j) out[j] = 0.0;
    for (std::size_t k = 0; k < w_.size(); ++k) {
        if (w_[k] == 0.0) continue;
        for (std::size_t j = 0; j < d; ++j) out[j] += w_[k] * phi_->inner_grad_[k][j].eval_unchecked(x);
    }
}

inline void DerivativeBundle::lions_x(const double* x, double* out) const {
    const std::size_t d = phi_->d_;
    for (std::size_t j = 0; j < d * d; ++j) out[j] = 0.0;
    for (std::size_t k = 0; k < w_.size(); ++k) {
        if (w_[k] == 0.0) continue;
        for (std::size_t j = 0; j < d * d; ++j) out[j] += w_[k] * phi_->inner_hess_[k][j].eval_unchecked(x);
    }
}

inline double DerivativeBundle::linear_diff(const double* x_new, const double* x_old) const {
    double s = 0.0;
    for (std::size_t k = 0; k < w_.size(); ++k) {
        if (w_[k] == 0.0) continue;
        s += w_[k] * (phi_->inner_[k].eval_unchecked(x_new) - phi_->inner_[k].eval_unchecked(x_old));
    }
    return s;
}

/// Gauss-Legendre nodes and weights on [0, 1].
struct Quadrature {
    std::vector<double> nodes;
    std::vector<double> weights;
};

inline Quadrature gauss_legendre_01(std::size_t m) {
    require(m >= 1, "quadrature needs at least one node");
    Quadrature q;
    q.nodes.resize(m);
    q.weights.resize(m);
    const double dm = static_cast<double>(m);
    for (std::size_t i = 0; i < m; ++i) {
        double z = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) / (dm + 0.5));
        double dp = 1.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = z;
            for (std::size_t k = 2; k <= m; ++k) {
                const double dk = static_cast<double>(k);
                const double p2 = ((2.0 * dk - 1.0) * z * p1 - (dk - 1.0) * p0) / dk;
                p0 = p1;
                p1 = p2;
            }
            dp = dm * (z * p1 - p0) / (z * z - 1.0);
            const double dz = p1 / dp;
            z -= dz;
            if (std::abs(dz) < 1e-16) break;
        }
        q.nodes[m - 1 - i] = 0.5 * (z + 1.0);
        q.weights[m - 1 - i] = 1.0 / ((1.0 - z * z) * dp * dp);
    }
    return q;
}

/// Relative first-order check of the Lions derivative through the L2 lift:
/// | (Phi(mu_h) - Phi(mu))/h - (1/N) sum dPhi(mu, x_i).v_i |, with x_i -> x_i + h v_i.
inline double check_lift_gradient(const CylindricalFunctional& phi, const EmpiricalMeasure& mu,
                                  std::span<const double> directions, double h) {
    if (!(h > 0.0)) throw InvalidArgument("step h must be positive");
    if (directions.size() != mu.data().size())
        throw InvalidArgument("direction field must have one d-vector per particle");
    const std::size_t d = mu.dimension();
    if (d != phi.dimension()) throw InvalidArgument("functional and measure dimensions differ");
    std::vector<double> moved(mu.data().begin(), mu.data().end());
    for (std::size_t i = 0; i < moved.size(); ++i) moved[i] += h * directions[i];
    const EmpiricalMeasure mu_h(std::move(moved), d);
    const double fd = (phi.evaluate(mu_h) - phi.evaluate(mu)) / h;
    const auto der = phi.derivatives(mu);
    std::vector<double> buf(d);
    const double lin = pairwise_sum(0, mu.size(),
                                    [&](std::size_t i) {
                                        der.lions(mu.point(i).data(), buf.data());
                                        double s = 0.0;
                                        for (std::size_t j = 0; j < d; ++j) s += buf[j] * directions[i * d + j];
                                        return s;
                                    }) /
                       static_cast<double>(mu.size());
    return std::abs(fd - lin);
}

namespace detail {

/// Two-group weighted cloud representing h*mu + (1-h)*nu.
struct MixtureCloud {
    const EmpiricalMeasure* mu;
    const EmpiricalMeasure* nu;
    double h;

    [[nodiscard]] double moment(const Polynomial& g) const {
        const double wm = h / static_cast<double>(mu->size());
        const double wn = (1.0 - h) / static_cast<double>(nu->size());
        const std::size_t nm = mu->size();
        return pairwise_sum(0, nm + nu->size(), [&](std::size_t i) {
            return i < nm ? wm * g.eval_unchecked(mu->point(i).data())
                          : wn * g.eval_unchecked(nu->point(i - nm).data());
        });
    }
};

}  // namespace detail

/// |Phi(mu) - Phi(nu) - int_0^1 int dPhi/dmu(h mu + (1-h) nu, x)(mu - nu)(dx) dh|
/// with Gauss-Legendre quadrature in h.
inline double check_linear_derivative_identity(const CylindricalFunctional& phi, const EmpiricalMeasure& mu,
                                               const EmpiricalMeasure& nu, std::size_t quadrature_nodes) {
    if (mu.dimension() != nu.dimension() || mu.dimension() != phi.dimension())
        throw InvalidArgument("dimension mismatch in linear derivative identity");
    const auto q = gauss_legendre_01(quadrature_nodes);
    const auto mm = phi.moments(mu);
    const auto mn = phi.moments(nu);
    double rhs = 0.0;
    for (std::size_t a = 0; a < q.nodes.size(); ++a) {
        const detail::MixtureCloud mix{&mu, &nu, q.nodes[a]};
        std::vector<double> m(phi.n());
        for (std::size_t k = 0; k < phi.n(); ++k) m[k] = mix.moment(phi.inner()[k]);
        const auto w = phi.outer_gradient(m);
        double inner = 0.0;
        for (std::size_t k = 0; k < phi.n(); ++k) inner += w[k] * (mm[k] - mn[k]);
        rhs += q.weights[a] * inner;
    }
    const double lhs = phi.value_at(mm) - phi.value_at(mn);
    return std::abs(lhs - rhs);
}

}  // namespace mflow
