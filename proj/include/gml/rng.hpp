#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

namespace gml {

// splitmix64 finalizer; used to derive independent seeds from (base, tags).
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0) {
    return mix64(mix64(mix64(base) ^ a) ^ b);
}

// Stream tags so that unrelated consumers of the same master seed never share
// a generator state.
namespace seed_tag {
inline constexpr std::uint64_t kSite = 0x5349'5445;          // per-site training stream
inline constexpr std::uint64_t kPairing = 0x5041'4952;       // gossip pairing stream
inline constexpr std::uint64_t kSplit = 0x53'504C'54;        // dataset split shuffle
inline constexpr std::uint64_t kCase = 0x43'4153'45;         // per-case synthesis
inline constexpr std::uint64_t kPooled = 0x50'4F4F'4C;       // pooled baseline
inline constexpr std::uint64_t kIndividual = 0x49'4E44'56;   // individual baseline
inline constexpr std::uint64_t kFedavg = 0x46'4544'41;       // fedavg global init
inline constexpr std::uint64_t kFedavgSite = 0x46'4544'53;   // fedavg per-site stream
inline constexpr std::uint64_t kDataset = 0x44'4154'41;      // per-site dataset seed
} // namespace seed_tag

// Deterministic random stream. mt19937_64 output is pinned by the standard and
// all sampling here is hand-rolled on top of it, so sequences are identical
// across platforms and standard libraries.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed) : gen_(seed) {}

    // Uniform in [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Unbiased integer in [0, n); n must be > 0.
    std::uint64_t uniform_index(std::uint64_t n) {
        std::uint64_t x, r;
        do {
            x = gen_();
            r = x % n;
        } while (x - r > std::uint64_t(0) - n);
        return r;
    }

    // Box-Muller; two uniforms per draw, no cached spare.
    double normal(double mean = 0.0, double stddev = 1.0) {
        double u1 = 1.0 - uniform01();
        double u2 = uniform01();
        double radius = std::sqrt(-2.0 * std::log(u1));
        return mean + stddev * radius * std::cos(6.28318530717958647692 * u2);
    }

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(uniform_index(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 gen_;
};

} // namespace gml
