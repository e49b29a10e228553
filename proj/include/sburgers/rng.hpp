#pragma once

// Counter-based normal variates. Every draw is a pure function of
// (seed, stream, a, b), so any increment can be addressed directly
// without replaying a sequential stream.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace sburgers::rng {

/// Philox4x32-10 (Salmon et al., SC'11).
class Philox4x32 {
public:
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static Counter generate(Counter ctr, Key key) {
        for (int r = 0; r < 10; ++r) {
            ctr = round(ctr, key);
            key[0] += kW0;
            key[1] += kW1;
        }
        return ctr;
    }

private:
    static constexpr std::uint32_t kM0 = 0xD2511F53u;
    static constexpr std::uint32_t kM1 = 0xCD9E8D57u;
    static constexpr std::uint32_t kW0 = 0x9E3779B9u;
    static constexpr std::uint32_t kW1 = 0xBB67AE85u;

    static Counter round(const Counter& c, const Key& k) {
        const std::uint64_t p0 = static_cast<std::uint64_t>(kM0) * c[0];
        const std::uint64_t p1 = static_cast<std::uint64_t>(kM1) * c[2];
        const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
        const auto lo0 = static_cast<std::uint32_t>(p0);
        const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
        const auto lo1 = static_cast<std::uint32_t>(p1);
        return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
    }
};

/// Stream tags keep independent uses of one seed apart.
enum class Stream : std::uint32_t {
    brownian = 0,
    feynman_kac = 0x666b0000u, // "fk"
    initial_data = 0x69640000u,
    bootstrap = 0x62730000u,
};

/// Uniform in the open interval (0, 1) from two 32-bit words (53 bits).
inline double unit_open(std::uint32_t hi, std::uint32_t lo) {
    const std::uint64_t bits = ((static_cast<std::uint64_t>(hi) << 32) | lo) >> 11;
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

inline Philox4x32::Counter raw(std::uint64_t seed, Stream stream, std::uint64_t a,
                               std::int64_t b) {
    const auto ub = static_cast<std::uint64_t>(b);
    const Philox4x32::Counter ctr{static_cast<std::uint32_t>(a) ^ static_cast<std::uint32_t>(stream),
                                  static_cast<std::uint32_t>(a >> 32),
                                  static_cast<std::uint32_t>(ub),
                                  static_cast<std::uint32_t>(ub >> 32)};
    const Philox4x32::Key key{static_cast<std::uint32_t>(seed),
                              static_cast<std::uint32_t>(seed >> 32) ^ static_cast<std::uint32_t>(stream)};
    return Philox4x32::generate(ctr, key);
}

/// Standard normal keyed by (seed, stream, a, b); Box-Muller on one block.
inline double normal(std::uint64_t seed, Stream stream, std::uint64_t a, std::int64_t b) {
    const auto w = raw(seed, stream, a, b);
    const double u1 = unit_open(w[0], w[1]);
    const double u2 = unit_open(w[2], w[3]);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

/// Uniform (0,1) keyed the same way.
inline double uniform(std::uint64_t seed, Stream stream, std::uint64_t a, std::int64_t b) {
    const auto w = raw(seed, stream, a, b);
    return unit_open(w[0], w[1]);
}

} // namespace sburgers::rng
