#pragma once

#include <cstdint>
#include <random>

namespace permrank {

// Explicit, seedable RNG stream. Every stochastic operation takes one of
// these; there is no global generator. Children derived with child(tag) are
// statistically independent streams keyed off the parent's root seed, so the
// draw order inside one stream never affects another.
//
// All draws are implemented directly on top of mt19937_64 output (which the
// standard fixes bit-for-bit); std::*_distribution is avoided because its
// output is implementation-defined and byte reproducibility is promised.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed) : root_(seed), gen_(mix(seed)) {}

    RngStream child(std::uint64_t tag) const {
        return RngStream(mix(root_ ^ (0x9e3779b97f4a7c15ULL + tag)));
    }

    std::uint64_t raw() { return gen_(); }

    // Uniform in [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(raw() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Unbiased uniform integer in [0, n); n must be positive.
    std::uint64_t uniform_int(std::uint64_t n) {
        const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
        std::uint64_t x;
        do {
            x = raw();
        } while (x >= limit);
        return x % n;
    }

private:
    static std::uint64_t mix(std::uint64_t x) {
        // splitmix64 finalizer
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

    std::uint64_t root_;
    std::mt19937_64 gen_;
};

}  // namespace permrank
