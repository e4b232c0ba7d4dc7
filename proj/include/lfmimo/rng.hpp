// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>

namespace lfmimo {

inline std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

// Stateless stream derivation: every (master seed, index path) pair maps to an
// independent substream seed, so draw i never depends on how draws are
// scheduled across threads.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t i0, std::uint64_t i1 = 0,
                                 std::uint64_t i2 = 0) {
    std::uint64_t s = mix64(master + 0x9e3779b97f4a7c15ull);
    s = mix64(s ^ (i0 + 0x9e3779b97f4a7c15ull));
    s = mix64(s ^ (i1 + 0xbf58476d1ce4e5b9ull));
    s = mix64(s ^ (i2 + 0x94d049bb133111ebull));
    return s;
}

// splitmix64 core; small state, full 64-bit period per stream.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // [0, 1)
    double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

    // (0, 1); safe under log()
    double uniform_pos() { return (double(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

    std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

    bool bit() { return (next_u64() >> 63) != 0; }

    // N(0, 1), Box-Muller, one value per call (no pair caching so the draw
    // count stays predictable)
    double normal() {
        double r = std::sqrt(-2.0 * std::log(uniform_pos()));
        return r * std::cos(2.0 * std::numbers::pi * uniform());
    }

    // CN(0, 1): real and imaginary parts N(0, 1/2)
    std::complex<double> cnormal() {
        double r = std::sqrt(-std::log(uniform_pos()));
        double th = 2.0 * std::numbers::pi * uniform();
        return {r * std::cos(th), r * std::sin(th)};
    }

  private:
    std::uint64_t state_;
};

}  // namespace lfmimo
