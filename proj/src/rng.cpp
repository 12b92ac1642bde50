#include "vprune/rng.hpp"

#include <cmath>

namespace vprune {

std::uint64_t Rng::below(std::uint64_t n) {
    if (n == 0) return 0;
    // rejection sampling to avoid modulo bias
    const std::uint64_t limit = ~0ULL - (~0ULL % n);
    std::uint64_t v;
    do {
        v = next_u64();
    } while (v >= limit);
    return v % n;
}

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u, v, s;
    do {
        u = uniform(-1.0, 1.0);
        v = uniform(-1.0, 1.0);
        s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * m;
    has_spare_ = true;
    return u * m;
}

Vec3 Rng::unit_vector() {
    // rejection from the cube keeps the distribution exactly isotropic
    for (;;) {
        const Vec3 p(uniform(-1.0, 1.0), uniform(-1.0, 1.0), uniform(-1.0, 1.0));
        const double n2 = p.squaredNorm();
        if (n2 > 1e-12 && n2 <= 1.0) return p / std::sqrt(n2);
    }
}

std::uint64_t split_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t counter) {
    // one splitmix64 scramble per word, chained
    auto mix = [](std::uint64_t x) {
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    };
    std::uint64_t h = mix(base + 0x9e3779b97f4a7c15ULL);
    h = mix(h ^ (stream + 0x9e3779b97f4a7c15ULL));
    h = mix(h ^ (counter + 0x9e3779b97f4a7c15ULL));
    return h;
}

}  // namespace vprune
