#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace mflow {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
///
/// Known-answer vectors (counter, key -> output):
///   {0,0,0,0}, {0,0}                    -> 6627e8d5 e169c58d bc57ac4c 9b00dbd8
///   {ffffffff x4}, {ffffffff x2}        -> 408f276d 41c83b0e a20bc7c6 6d5451fd
///   {243f6a88 85a308d3 13198a2e 03707344}, {a4093822 299f31d0}
///                                       -> d16cfe09 94fdcceb 5001e420 24126ea1
struct Philox4x32 {
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static constexpr std::uint32_t M0 = 0xD2511F53u;
    static constexpr std::uint32_t M1 = 0xCD9E8D57u;
    static constexpr std::uint32_t W0 = 0x9E3779B9u;
    static constexpr std::uint32_t W1 = 0xBB67AE85u;

    static constexpr Counter round(const Counter& c, const Key& k) noexcept {
        const std::uint64_t p0 = static_cast<std::uint64_t>(M0) * c[0];
        const std::uint64_t p1 = static_cast<std::uint64_t>(M1) * c[2];
        const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
        const auto lo0 = static_cast<std::uint32_t>(p0);
        const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
        const auto lo1 = static_cast<std::uint32_t>(p1);
        return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
    }

    static constexpr Counter apply(Counter c, Key k) noexcept {
        for (int r = 0; r < 10; ++r) {
            if (r > 0) {
                k[0] += W0;
                k[1] += W1;
            }
            c = round(c, k);
        }
        return c;
    }
};

/// Independent stream for one (seed, stream, particle) triple.
///
/// Key = 64-bit seed. Counter words 0,1 = block index, word 2 = low 32 bits of
/// the particle index, word 3 = (stream << 24) | high bits of the particle index.
/// Streams are independent of scheduling, which makes parallel runs reproducible.
class ParticleStream {
public:
    ParticleStream(std::uint64_t seed, std::uint32_t stream, std::uint64_t particle) noexcept
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
          w2_(static_cast<std::uint32_t>(particle)),
          w3_((stream << 24) | (static_cast<std::uint32_t>(particle >> 32) & 0xFFFFFFu)) {}

    std::uint32_t next_u32() noexcept {
        if (pos_ == 4) refill();
        return buf_[pos_++];
    }

    /// Uniform on (0,1), 53-bit resolution, never 0 or 1.
    double uniform() noexcept {
        const std::uint64_t hi = next_u32();
        const std::uint64_t lo = next_u32();
        const std::uint64_t bits = ((hi << 32) | lo) >> 11;
        return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
    }

    double uniform(double a, double b) noexcept { return a + (b - a) * uniform(); }

    /// Standard normal by Box-Muller; the second variate is cached.
    double normal() noexcept {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    double exponential(double rate) noexcept { return -std::log(uniform()) / rate; }

private:
    void refill() noexcept {
        const Philox4x32::Counter c{static_cast<std::uint32_t>(block_),
                                    static_cast<std::uint32_t>(block_ >> 32), w2_, w3_};
        buf_ = Philox4x32::apply(c, key_);
        ++block_;
        pos_ = 0;
    }

    Philox4x32::Key key_;
    std::uint32_t w2_;
    std::uint32_t w3_;
    std::uint64_t block_ = 0;
    Philox4x32::Counter buf_{};
    int pos_ = 4;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

/// Stream identifiers used across the library.
namespace streams {
inline constexpr std::uint32_t initial = 1;
inline constexpr std::uint32_t dynamics = 2;
inline constexpr std::uint32_t marks_resample = 3;
inline constexpr std::uint32_t perturbation = 4;
inline constexpr std::uint32_t idiosyncratic_eta = 5;
inline constexpr std::uint32_t direction = 6;
}  // namespace streams

}  // namespace mflow
