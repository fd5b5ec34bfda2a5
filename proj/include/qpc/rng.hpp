#pragma once

#include <cstdint>
#include <random>

namespace qpc {

/// Deterministic random source. Draws are built from raw mt19937_64 output
/// only, so a seed reproduces the same stream on every standard library.
class SeededRng {
public:
    explicit SeededRng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

    /// Independent stream keyed by (seed, stream index).
    static SeededRng derive(std::uint64_t seed, std::uint64_t stream) {
        return SeededRng(mix(seed ^ mix(stream + 0x632be59bd9b4e019ULL)));
    }

    std::uint64_t seed() const { return seed_; }

    std::uint64_t next() { return engine_(); }

    bool bit() { return (engine_() >> 63) != 0; }

    /// Uniform integer in [0, n). Rejection sampling, no modulo bias.
    std::uint64_t below(std::uint64_t n) {
        if (n <= 1) return 0;
        const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % n);
        std::uint64_t x = engine_();
        while (x >= limit) x = engine_();
        return x % n;
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// splitmix64 finalizer.
    static std::uint64_t mix(std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
};

}  // namespace qpc
