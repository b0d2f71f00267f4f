#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>

namespace ecnn {

/// xoshiro256** seeded through SplitMix64.
///
/// Both algorithms are fully specified by their reference implementations
/// (Blackman & Vigna), so a seed maps to the same stream on every platform.
/// Derived quantities (floats, bounded integers) are built from raw 64-bit
/// outputs with fixed bit manipulations rather than <random> distributions,
/// whose algorithms are implementation-defined.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0);

    std::uint64_t seed() const { return seed_; }

    std::uint64_t next_u64();

    /// Uniform in [0, 1) with 53 random bits.
    double next_double();

    /// Uniform in [0, 1) with 24 random bits, exactly representable as float.
    float next_float();

    /// Uniform in [lo, hi); lo < hi required.
    double uniform(double lo, double hi);

    /// Uniform integer in [0, bound), bound > 0. Rejection sampling, unbiased.
    std::uint64_t below(std::uint64_t bound);

    /// Fisher-Yates shuffle driven by below().
    template <typename T>
    void shuffle(std::span<T> items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

    /// Independent child stream; the parent advances by one draw.
    Rng split();

private:
    std::uint64_t seed_;
    std::array<std::uint64_t, 4> state_{};
};

}  // namespace ecnn
