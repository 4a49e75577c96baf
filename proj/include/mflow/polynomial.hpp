#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <fmt/format.h>

#include "mflow/error.hpp"
#include "mflow/measure.hpp"

namespace mflow {

/// Sparse multivariate polynomial with real coefficients.
///
/// Terms are kept sorted by exponent multi-index with duplicates merged and
/// zero coefficients dropped, so two equal polynomials compare equal.
class Polynomial {
public:
    using Exponents = std::vector<int>;
    using Term = std::pair<double, Exponents>;

    Polynomial() = default;

    Polynomial(std::size_t arity, const std::vector<Term>& terms) : arity_(arity) {
        if (arity_ == 0) throw InvalidArgument("polynomial arity must be positive");
        std::map<Exponents, double> acc;
        for (const auto& [c, e] : terms) {
            if (e.size() != arity_)
                throw InvalidArgument(
                    fmt::format("exponent length {} does not match arity {}", e.size(), arity_));
            for (int k : e)
                if (k < 0) throw InvalidArgument("negative exponent");
            acc[e] += c;
        }
        for (const auto& [e, c] : acc) {
            if (c == 0.0) continue;
            coef_.push_back(c);
            exps_.insert(exps_.end(), e.begin(), e.end());
        }
    }

    static Polynomial constant(std::size_t arity, double c) {
        return {arity, {{c, Exponents(arity, 0)}}};
    }

    /// The coordinate function x_j.
    static Polynomial coordinate(std::size_t arity, std::size_t j) {
        Exponents e(arity, 0);
        e.at(j) = 1;
        return {arity, {{1.0, e}}};
    }

    /// c * x^k in one variable.
    static Polynomial monomial(double c, int k) { return {1, {{c, {k}}}}; }

    [[nodiscard]] std::size_t arity() const noexcept { return arity_; }
    [[nodiscard]] std::size_t term_count() const noexcept { return coef_.size(); }
    [[nodiscard]] bool is_zero() const noexcept { return coef_.empty(); }
    [[nodiscard]] double coefficient(std::size_t t) const { return coef_[t]; }
    [[nodiscard]] std::span<const int> exponents(std::size_t t) const {
        return {exps_.data() + t * arity_, arity_};
    }

    [[nodiscard]] std::vector<Term> terms() const {
        std::vector<Term> out;
        for (std::size_t t = 0; t < coef_.size(); ++t) {
            auto e = exponents(t);
            out.emplace_back(coef_[t], Exponents(e.begin(), e.end()));
        }
        return out;
    }

    [[nodiscard]] int degree() const noexcept {
        int best = 0;
        for (std::size_t t = 0; t < coef_.size(); ++t) {
            int s = 0;
            for (int k : exponents(t)) s += k;
            best = std::max(best, s);
        }
        return best;
    }

    [[nodiscard]] double operator()(std::span<const double> x) const {
        if (x.size() != arity_)
            throw InvalidArgument(
                fmt::format("polynomial of arity {} evaluated at a {}-vector", arity_, x.size()));
        return eval_unchecked(x.data());
    }

    /// Evaluation without the arity check, for inner loops.
    [[nodiscard]] double eval_unchecked(const double* x) const noexcept {
        double s = 0.0;
        const int* e = exps_.data();
        for (std::size_t t = 0; t < coef_.size(); ++t) {
            double m = coef_[t];
            for (std::size_t j = 0; j < arity_; ++j, ++e)
                for (int k = 0; k < *e; ++k) m *= x[j];
            s += m;
        }
        return s;
    }

    [[nodiscard]] Polynomial partial(std::size_t j) const {
        require(j < arity_, "partial derivative index out of range");
        std::vector<Term> out;
        for (std::size_t t = 0; t < coef_.size(); ++t) {
            auto e = exponents(t);
            if (e[j] == 0) continue;
            Exponents f(e.begin(), e.end());
            const double c = coef_[t] * f[j];
            --f[j];
            out.emplace_back(c, std::move(f));
        }
        return {arity_, out};
    }

    /// Re-expresses this polynomial in `new_arity` variables, mapping
    /// variable j to variable offset + j.
    [[nodiscard]] Polynomial embed(std::size_t new_arity, std::size_t offset) const {
        require(offset + arity_ <= new_arity, "embedding does not fit");
        std::vector<Term> out;
        for (std::size_t t = 0; t < coef_.size(); ++t) {
            Exponents f(new_arity, 0);
            auto e = exponents(t);
            std::copy(e.begin(), e.end(), f.begin() + static_cast<std::ptrdiff_t>(offset));
            out.emplace_back(coef_[t], std::move(f));
        }
        return {new_arity, out};
    }

    friend Polynomial operator+(const Polynomial& a, const Polynomial& b) {
        require(a.arity_ == b.arity_, "arity mismatch in polynomial sum");
        auto ta = a.terms();
        auto tb = b.terms();
        ta.insert(ta.end(), tb.begin(), tb.end());
        return {a.arity_, ta};
    }

    friend Polynomial operator*(double s, const Polynomial& p) {
        auto t = p.terms();
        for (auto& term : t) term.first *= s;
        return {p.arity_, t};
    }

    friend Polynomial operator*(const Polynomial& a, const Polynomial& b) {
        require(a.arity_ == b.arity_, "arity mismatch in polynomial product");
        std::vector<Term> out;
        for (std::size_t i = 0; i < a.term_count(); ++i)
            for (std::size_t j = 0; j < b.term_count(); ++j) {
                auto ea = a.exponents(i);
                auto eb = b.exponents(j);
                Exponents e(a.arity_);
                for (std::size_t k = 0; k < a.arity_; ++k) e[k] = ea[k] + eb[k];
                out.emplace_back(a.coef_[i] * b.coef_[j], std::move(e));
            }
        return {a.arity_, out};
    }

    friend bool operator==(const Polynomial&, const Polynomial&) = default;

    [[nodiscard]] std::string to_string() const {
        if (coef_.empty()) return "0";
        std::string s;
        for (std::size_t t = 0; t < coef_.size(); ++t) {
            s += fmt::format("{}{:.17g}", t ? " + " : "", coef_[t]);
            auto e = exponents(t);
            for (std::size_t j = 0; j < arity_; ++j)
                if (e[j] > 0) s += fmt::format("*x{}^{}", j + 1, e[j]);
        }
        return s;
    }

private:
    std::size_t arity_ = 0;
    std::vector<double> coef_;
    std::vector<int> exps_;
};

/// <g, mu> = (1/N) sum g(x_i).
inline double polynomial_moment(const EmpiricalMeasure& mu, const Polynomial& g) {
    if (g.arity() != mu.dimension())
        throw InvalidArgument(fmt::format("polynomial arity {} does not match measure dimension {}",
                                          g.arity(), mu.dimension()));
    return integrate(mu, [&](std::span<const double> x) { return g.eval_unchecked(x.data()); });
}

}  // namespace mflow
