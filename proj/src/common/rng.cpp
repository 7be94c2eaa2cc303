#include "common/rng.hpp"

#include <cmath>

namespace cfe {

double Rng::normal() {
    // u1 in (0,1] so log() stays finite
    double u1 = 1.0 - uniform();
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

std::uint64_t Rng::below(std::uint64_t n) {
    if (n == 0)
        return 0;
    // rejection sampling on the top range to remove modulo bias
    std::uint64_t limit = ~0ULL - (~0ULL % n);
    std::uint64_t v;
    do {
        v = next_u64();
    } while (v >= limit);
    return v % n;
}

std::vector<std::size_t> Rng::permutation(std::size_t n) {
    std::vector<std::size_t> p(n);
    for (std::size_t i = 0; i < n; ++i)
        p[i] = i;
    for (std::size_t i = n; i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(below(i));
        std::swap(p[i - 1], p[j]);
    }
    return p;
}

Rng Rng::derive(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    Rng mix(seed);
    std::uint64_t s = mix.next_u64();
    s ^= (a + 0x9e3779b97f4a7c15ULL) * 0xff51afd7ed558ccdULL;
    s ^= (b + 0xc4ceb9fe1a85ec53ULL) * 0xc2b2ae3d27d4eb4fULL;
    return Rng(s);
}

} // namespace cfe
