#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "mflow/error.hpp"
#include "mflow/summation.hpp"

namespace mflow {

/// Equally weighted particle cloud in R^d. Immutable after construction.
/// Points are stored row-major: particle i occupies [i*d, (i+1)*d).
class EmpiricalMeasure {
public:
    /// Flat row-major storage of `data.size()/dim` particles.
    EmpiricalMeasure(std::vector<double> data, std::size_t dim) : data_(std::move(data)), dim_(dim) {
        if (dim_ == 0) throw InvalidArgument("measure dimension must be positive");
        if (data_.empty()) throw InvalidArgument("empty sample list");
        if (data_.size() % dim_ != 0) throw InvalidArgument("dimension mismatch in flat sample data");
        for (std::size_t i = 0; i < data_.size(); ++i)
            if (!std::isfinite(data_[i]))
                throw InvalidArgument(fmt::format("non-finite entry in sample {}", i / dim_));
    }

    [[nodiscard]] std::size_t size() const noexcept { return data_.size() / dim_; }
    [[nodiscard]] std::size_t dimension() const noexcept { return dim_; }
    [[nodiscard]] std::span<const double> point(std::size_t i) const {
        return {data_.data() + i * dim_, dim_};
    }
    [[nodiscard]] std::span<const double> data() const noexcept { return data_; }

private:
    std::vector<double> data_;
    std::size_t dim_;
};

inline EmpiricalMeasure empirical_from_samples(const std::vector<std::vector<double>>& samples) {
    if (samples.empty()) throw InvalidArgument("empty sample list");
    const std::size_t d = samples.front().size();
    if (d == 0) throw InvalidArgument("samples must have positive dimension");
    std::vector<double> flat;
    flat.reserve(samples.size() * d);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (samples[i].size() != d)
            throw InvalidArgument(fmt::format("dimension mismatch at sample {}: {} vs {}", i,
                                              samples[i].size(), d));
        flat.insert(flat.end(), samples[i].begin(), samples[i].end());
    }
    return {std::move(flat), d};
}

/// Convenience for one-dimensional clouds.
inline EmpiricalMeasure empirical_1d(std::vector<double> xs) { return {std::move(xs), 1}; }

/// (1/N) sum of g over particles for any callable g(span<const double>).
template <class G>
double integrate(const EmpiricalMeasure& mu, G&& g) {
    const std::size_t n = mu.size();
    return pairwise_sum(0, n, [&](std::size_t i) { return g(mu.point(i)); }) /
           static_cast<double>(n);
}

struct MeanVariance {
    std::vector<double> mean;
    double variance = 0.0;  ///< trace form: sum of coordinate variances
};

inline MeanVariance mean_and_variance(const EmpiricalMeasure& mu) {
    const std::size_t n = mu.size();
    const std::size_t d = mu.dimension();
    MeanVariance out;
    out.mean.resize(d);
    for (std::size_t j = 0; j < d; ++j)
        out.mean[j] = pairwise_sum(0, n, [&](std::size_t i) { return mu.point(i)[j]; }) /
                      static_cast<double>(n);
    // Shifting by the first point makes the result exactly zero for a coincident cloud.
    for (std::size_t j = 0; j < d; ++j) {
        const double x0 = mu.point(0)[j];
        const double ms = pairwise_sum(0, n, [&](std::size_t i) { return mu.point(i)[j] - x0; }) /
                          static_cast<double>(n);
        out.variance += pairwise_sum(0, n, [&](std::size_t i) {
                            const double c = (mu.point(i)[j] - x0) - ms;
                            return c * c;
                        }) /
                        static_cast<double>(n);
    }
    return out;
}

/// W2 between equal-size 1-d clouds via the monotone coupling.
inline double wasserstein2_1d(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu) {
    if (mu.dimension() != 1 || nu.dimension() != 1)
        throw InvalidArgument("wasserstein2_1d requires one-dimensional measures");
    if (mu.size() != nu.size())
        throw InvalidArgument(
            fmt::format("wasserstein2_1d requires equal particle counts ({} vs {})", mu.size(), nu.size()));
    std::vector<double> a(mu.data().begin(), mu.data().end());
    std::vector<double> b(nu.data().begin(), nu.data().end());
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double s = pairwise_sum(0, a.size(), [&](std::size_t i) {
        const double c = a[i] - b[i];
        return c * c;
    });
    return std::sqrt(s / static_cast<double>(a.size()));
}

/// One row per particle, columns x1..xd; locale-independent formatting.
inline void write_csv(std::ostream& os, const EmpiricalMeasure& mu) {
    const std::size_t d = mu.dimension();
    for (std::size_t j = 0; j < d; ++j) os << (j ? "," : "") << "x" << (j + 1);
    os << '\n';
    for (std::size_t i = 0; i < mu.size(); ++i) {
        const auto p = mu.point(i);
        std::string line;
        for (std::size_t j = 0; j < d; ++j) line += fmt::format("{}{:.17g}", j ? "," : "", p[j]);
        os << line << '\n';
    }
}

}  // namespace mflow
