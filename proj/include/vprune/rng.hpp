#pragma once

#include <cstdint>

#include "vprune/types.hpp"

namespace vprune {

// SplitMix64-based generator. Hand-rolled so sequences are identical across
// platforms and standard-library versions; std::*_distribution is not.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1) with 53-bit resolution.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Unbiased integer in [0, n).
    std::uint64_t below(std::uint64_t n);

    // Standard normal via Marsaglia polar method (caches the spare draw).
    double normal();

    Vec3 unit_vector();

private:
    std::uint64_t state_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// Counter-based seed splitter: one global seed fans out to per-stage,
// per-scene streams without overlap in practice.
std::uint64_t split_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t counter = 0);

}  // namespace vprune
