#pragma once

#include <cstdint>
#include <cmath>
#include <string_view>

namespace moesim {

// Stable 64-bit mixing/hashing primitives. Placement, block keys and the
// workload generator all depend on these being identical on every platform,
// so only fixed-width integer arithmetic is used.

constexpr std::uint64_t kGolden64 = 0x9e3779b97f4a7c15ULL;

constexpr std::uint64_t mix64(std::uint64_t x) {
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebULL;
    x ^= x >> 31;
    return x;
}

constexpr std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t value) {
    return mix64(seed ^ (value + kGolden64 + (seed << 6) + (seed >> 2)));
}

inline std::uint64_t hash_bytes(std::string_view bytes, std::uint64_t seed = 0) {
    // FNV-1a core with a final mix; good enough for placement and dedup keys.
    std::uint64_t h = 0xcbf29ce484222325ULL ^ seed;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return mix64(h);
}

// splitmix64: the documented workload generator. Streams are derived with
// fork(), so each request gets an independent, replayable substream.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        state_ += kGolden64;
        return mix64(state_);
    }

    Rng fork(std::uint64_t stream_id) const {
        return Rng(mix64(state_ ^ hash_combine(0x5851f42d4c957f2dULL, stream_id)));
    }

    // Uniform in [0, n); n > 0. Modulo bias is negligible for n << 2^64 and
    // keeps the generator branch-free and portable.
    std::uint64_t next_below(std::uint64_t n) { return next_u64() % n; }

    std::int64_t next_in(std::int64_t lo, std::int64_t hi) {  // inclusive bounds
        return lo + static_cast<std::int64_t>(next_below(static_cast<std::uint64_t>(hi - lo + 1)));
    }

    double next_double() {  // [0, 1)
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    bool bernoulli(double p) { return next_double() < p; }

    double next_normal() {  // Box-Muller, one value per call
        double u1 = next_double();
        double u2 = next_double();
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    double next_exponential(double rate) {
        double u = next_double();
        if (u <= 0.0) u = 0x1.0p-53;
        return -std::log(u) / rate;
    }

private:
    std::uint64_t state_;
};

}  // namespace moesim
