#pragma once

#include <cmath>
#include <cstddef>
#include <span>

namespace mflow {

/// Pairwise (cascade) summation of `value(i)` for i in [begin, end).
///
/// The split points depend only on the range, never on how work was
/// scheduled, so the result is identical for any thread count.
template <class F>
double pairwise_sum(std::size_t begin, std::size_t end, F&& value) {
    constexpr std::size_t block = 32;
    const std::size_t n = end - begin;
    if (n <= block) {
        double s = 0.0;
        for (std::size_t i = begin; i < end; ++i) s += value(i);
        return s;
    }
    const std::size_t mid = begin + n / 2;
    return pairwise_sum(begin, mid, value) + pairwise_sum(mid, end, value);
}

inline double pairwise_sum(std::span<const double> xs) {
    return pairwise_sum(0, xs.size(), [&](std::size_t i) { return xs[i]; });
}

inline double pairwise_mean(std::span<const double> xs) {
    return xs.empty() ? 0.0 : pairwise_sum(xs) / static_cast<double>(xs.size());
}

/// Neumaier-compensated running sum for sequential accumulation over time steps.
class CompensatedSum {
public:
    void add(double x) noexcept {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x))
            comp_ += (sum_ - t) + x;
        else
            comp_ += (x - t) + sum_;
        sum_ = t;
    }
    CompensatedSum& operator+=(double x) noexcept {
        add(x);
        return *this;
    }
    [[nodiscard]] double value() const noexcept { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

/// Sample mean and standard error of the mean (pairwise reductions).
struct MeanSE {
    double mean = 0.0;
    double se = 0.0;
};

inline MeanSE mean_and_standard_error(std::span<const double> xs) {
    const std::size_t n = xs.size();
    if (n == 0) return {};
    const double m = pairwise_mean(xs);
    if (n == 1) return {m, 0.0};
    const double ss = pairwise_sum(0, n, [&](std::size_t i) {
        const double d = xs[i] - m;
        return d * d;
    });
    const double var = ss / static_cast<double>(n - 1);
    return {m, std::sqrt(var / static_cast<double>(n))};
}

}  // namespace mflow
