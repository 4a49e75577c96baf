#pragma once

#include <cmath>
#include <numbers>
#include <string>

#include <fmt/format.h>

#include "mflow/error.hpp"
#include "mflow/rng.hpp"

namespace mflow {

/// One-dimensional distributions used for marks and initial laws.
struct ScalarLaw {
    enum class Kind { dirac, uniform, normal, biweight };

    Kind kind = Kind::dirac;
    double a = 0.0;  ///< dirac: location; uniform: lower; normal: mean; biweight: center
    double b = 0.0;  ///< uniform: upper; normal: sd; biweight: half-width

    static ScalarLaw dirac(double v) { return {Kind::dirac, v, 0.0}; }
    static ScalarLaw uniform(double lo, double hi) {
        require(lo < hi, "uniform law needs lower < upper");
        return {Kind::uniform, lo, hi};
    }
    static ScalarLaw normal(double mean, double sd) {
        require(sd >= 0.0, "normal law needs sd >= 0");
        return {Kind::normal, mean, sd};
    }
    /// Density proportional to (1 - ((x-c)/s)^2)^2 on [c-s, c+s].
    static ScalarLaw biweight(double center, double half_width) {
        require(half_width > 0.0, "biweight law needs positive half-width");
        return {Kind::biweight, center, half_width};
    }

    double sample(ParticleStream& s) const {
        switch (kind) {
            case Kind::dirac: return a;
            case Kind::uniform: return s.uniform(a, b);
            case Kind::normal: return a + b * s.normal();
            case Kind::biweight: {
                // Median of five uniforms is Beta(3,3).
                double u[5];
                for (double& v : u) v = s.uniform();
                for (int i = 0; i < 3; ++i)
                    for (int j = i + 1; j < 5; ++j)
                        if (u[j] < u[i]) std::swap(u[i], u[j]);
                return a + b * (2.0 * u[2] - 1.0);
            }
        }
        return a;
    }

    [[nodiscard]] double mean() const { return (kind == Kind::uniform) ? 0.5 * (a + b) : a; }

    [[nodiscard]] double variance() const {
        switch (kind) {
            case Kind::dirac: return 0.0;
            case Kind::uniform: return (b - a) * (b - a) / 12.0;
            case Kind::normal: return b * b;
            case Kind::biweight: return b * b / 7.0;
        }
        return 0.0;
    }

    [[nodiscard]] double second_moment() const { return variance() + mean() * mean(); }

    [[nodiscard]] bool has_density() const { return kind != Kind::dirac && !(kind == Kind::normal && b == 0.0); }

    [[nodiscard]] double pdf(double x) const {
        switch (kind) {
            case Kind::dirac: return 0.0;
            case Kind::uniform: return (x >= a && x <= b) ? 1.0 / (b - a) : 0.0;
            case Kind::normal: {
                const double z = (x - a) / b;
                return std::exp(-0.5 * z * z) / (b * std::sqrt(2.0 * std::numbers::pi));
            }
            case Kind::biweight: {
                const double z = (x - a) / b;
                return std::abs(z) <= 1.0 ? 15.0 / 16.0 * (1 - z * z) * (1 - z * z) / b : 0.0;
            }
        }
        return 0.0;
    }

    [[nodiscard]] double cdf(double x) const {
        switch (kind) {
            case Kind::dirac: return x >= a ? 1.0 : 0.0;
            case Kind::uniform: return x <= a ? 0.0 : (x >= b ? 1.0 : (x - a) / (b - a));
            case Kind::normal:
                if (b == 0.0) return x >= a ? 1.0 : 0.0;
                return 0.5 * std::erfc(-(x - a) / (b * std::numbers::sqrt2));
            case Kind::biweight: {
                const double z = (x - a) / b;
                if (z <= -1.0) return 0.0;
                if (z >= 1.0) return 1.0;
                return 0.5 + 15.0 / 16.0 * (z - 2.0 * z * z * z / 3.0 + z * z * z * z * z / 5.0);
            }
        }
        return 0.0;
    }

    [[nodiscard]] std::string describe() const {
        switch (kind) {
            case Kind::dirac: return fmt::format("dirac({})", a);
            case Kind::uniform: return fmt::format("uniform({}, {})", a, b);
            case Kind::normal: return fmt::format("normal({}, {})", a, b);
            case Kind::biweight: return fmt::format("biweight({}, {})", a, b);
        }
        return "?";
    }
};

}  // namespace mflow
