#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "plab/error.hpp"

namespace plab {

// Deterministic random stream. Algorithm: std::mt19937_64 (bit-exact by the
// C++ standard) seeded through splitmix64, with all distribution transforms
// implemented here so the value sequence does not depend on the standard
// library's unspecified distribution algorithms.
//
// Substreams: derive(purpose, a, b) mixes the parent seed with the keys and
// returns an independent stream. Same (seed, keys) -> same sequence, always.
class RngStream {
public:
    static constexpr const char* kAlgorithm = "mt19937_64/splitmix64-derive/polar-normal";

    explicit RngStream(std::uint64_t seed) : seed_(seed), engine_(splitmix64(seed)) {}

    RngStream(std::uint64_t seed, std::uint64_t stream)
        : RngStream(mix(seed, 0x8c89'5d1f'7062'33f1ull, stream, 0)) {}

    std::uint64_t seed() const { return seed_; }

    RngStream derive(std::uint64_t purpose, std::uint64_t a = 0, std::uint64_t b = 0) const {
        return RngStream(mix(seed_, purpose, a, b));
    }

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n). Rejection sampling, exact and unbiased.
    std::uint64_t uniform_index(std::uint64_t n) {
        if (n == 0) raise(ErrorCode::InvalidArgument, "uniform_index: n must be positive");
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t r;
        do {
            r = next_u64();
        } while (r >= limit);
        return r % n;
    }

    // Standard normal via the polar (Marsaglia) method; pairs are cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double f = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * f;
        has_spare_ = true;
        return u * f;
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    // In-place Fisher-Yates shuffle.
    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(uniform_index(i));
            std::swap(items[i - 1], items[j]);
        }
    }

    // Random permutation of {0, .., n-1}.
    std::vector<std::size_t> permutation(std::size_t n) {
        std::vector<std::size_t> p(n);
        for (std::size_t i = 0; i < n; ++i) p[i] = i;
        shuffle(p);
        return p;
    }

private:
    static std::uint64_t splitmix64(std::uint64_t x) {
        x += 0x9e37'79b9'7f4a'7c15ull;
        x = (x ^ (x >> 30)) * 0xbf58'476d'1ce4'e5b9ull;
        x = (x ^ (x >> 27)) * 0x94d0'49bb'1331'11ebull;
        return x ^ (x >> 31);
    }

    static std::uint64_t mix(std::uint64_t seed, std::uint64_t purpose, std::uint64_t a,
                             std::uint64_t b) {
        std::uint64_t h = splitmix64(seed ^ 0x2545'f491'4f6c'dd1dull);
        h = splitmix64(h ^ purpose);
        h = splitmix64(h ^ a);
        h = splitmix64(h ^ b);
        return h;
    }

    std::uint64_t seed_;
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// Substream purposes used by the experiment runners. Fixed numbers: they are
// part of the reproducibility contract.
namespace rng_purpose {
constexpr std::uint64_t kModelInit = 1;
constexpr std::uint64_t kShuffle = 2;
constexpr std::uint64_t kPermutation = 3;
constexpr std::uint64_t kSplit = 4;
constexpr std::uint64_t kShrinkPerturb = 5;
constexpr std::uint64_t kSynthesis = 6;
} // namespace rng_purpose

} // namespace plab
