#pragma once

#include <cstdint>
#include <vector>

namespace cfe {

// splitmix64-based generator. Self-contained so that streams are identical
// across platforms and standard library versions.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1) with 53 bits of mantissa
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // standard normal via Box-Muller (one value per call; the pair's twin is dropped
    // to keep the stream position independent of call parity)
    double normal();

    std::uint64_t below(std::uint64_t n); // unbiased integer in [0, n)

    // Fisher-Yates permutation of 0..n-1
    std::vector<std::size_t> permutation(std::size_t n);

    // Derive an independent stream from (seed, stream ids). Used for per-epoch
    // shuffles so determinism survives restart from a checkpoint.
    static Rng derive(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

private:
    std::uint64_t state_;
};

} // namespace cfe
