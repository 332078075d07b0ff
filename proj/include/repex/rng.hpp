#pragma once

#include <cmath>
#include <cstdint>

namespace repex {

// splitmix64 (Vigna); used both as a generator and as a seed mixer so that
// every stream in a run is a pure function of (global seed, context).
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    std::uint64_t state = a;
    std::uint64_t h = splitmix64(state);
    state = h ^ b;
    return splitmix64(state);
}

template <typename... Rest>
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, Rest... rest) {
    return mix_seed(mix_seed(a, b), static_cast<std::uint64_t>(rest)...);
}

// xoshiro256** — small, fast, and identical on every platform/stdlib, which
// keeps run artifacts byte-reproducible.
class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t sm = seed;
        for (auto& word : state_) word = splitmix64(sm);
        have_gauss_ = false;
        gauss_ = 0.0;
    }

    std::uint64_t next_u64() {
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

    // Uniform in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Marsaglia polar method; explicit so the stream is stdlib-independent.
    double gaussian() {
        if (have_gauss_) {
            have_gauss_ = false;
            return gauss_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double factor = std::sqrt(-2.0 * std::log(s) / s);
        gauss_ = v * factor;
        have_gauss_ = true;
        return u * factor;
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    std::uint64_t state_[4];
    bool have_gauss_;
    double gauss_;
};

// Context tags keeping unrelated streams (dynamics, exchange draws, faults,
// durations) statistically independent under one global seed.
namespace stream {
inline constexpr std::uint64_t kReplica = 0x7265706c69636131ULL;
inline constexpr std::uint64_t kExchange = 0x65786368616e6765ULL;
inline constexpr std::uint64_t kFault = 0x6661756c74737421ULL;
inline constexpr std::uint64_t kDuration = 0x6475726174696f6eULL;
}  // namespace stream

}  // namespace repex
