#include "ecnn/rng.hpp"

#include <cmath>
#include <limits>

#include "ecnn/error.hpp"

namespace ecnn {

namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
    std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
}

}  // namespace

Rng::Rng(std::uint64_t seed) : seed_(seed) {
    std::uint64_t sm = seed;
    for (auto& s : state_) {
        s = splitmix64(sm);
    }
}

std::uint64_t Rng::next_u64() {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
}

double Rng::next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

float Rng::next_float() {
    return static_cast<float>(next_u64() >> 40) * 0x1.0p-24f;
}

double Rng::uniform(double lo, double hi) {
    if (!(lo < hi)) {
        throw NumericError("Rng::uniform requires lo < hi");
    }
    const double v = lo + (hi - lo) * next_double();
    // lo + (hi - lo) * u can round up to hi for u close to 1.
    return v < hi ? v : std::nextafter(hi, lo);
}

std::uint64_t Rng::below(std::uint64_t bound) {
    if (bound == 0) {
        throw Error("Rng::below requires bound > 0");
    }
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t x = next_u64();
    while (x >= limit) {
        x = next_u64();
    }
    return x % bound;
}

Rng Rng::split() {
    return Rng(next_u64());
}

}  // namespace ecnn
