#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace tetrasim {

/// Thrown when an operation receives an out-of-domain argument.
class ParamError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Seeded, splittable random stream (PCG32). One stream per (entity, purpose)
/// pair: distinct stream_ids select distinct PCG increments, which is the
/// generator's native notion of independent streams. The draw sequence is
/// reproducible across platforms, unlike the std:: distributions.
class RngStream {
public:
    RngStream() : RngStream(0, 0) {}

    RngStream(std::uint64_t seed, std::uint64_t stream_id) {
        inc_ = (stream_id << 1u) | 1u;
        state_ = 0;
        next_u32();
        state_ += splitmix64(seed ^ splitmix64(stream_id));
        next_u32();
    }

    std::uint32_t next_u32() {
        std::uint64_t old = state_;
        state_ = old * 6364136223846793005ULL + inc_;
        auto xorshifted = static_cast<std::uint32_t>(((old >> 18u) ^ old) >> 27u);
        auto rot = static_cast<std::uint32_t>(old >> 59u);
        return (xorshifted >> rot) | (xorshifted << ((32u - rot) & 31u));
    }

    std::uint64_t next_u64() {
        std::uint64_t hi = next_u32();
        return (hi << 32) | next_u32();
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform01() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    bool bernoulli(double p) { return uniform01() < p; }

    /// Uniform integer in [0, n). n must be > 0.
    std::uint32_t uniform_below(std::uint32_t n) {
        if (n == 0) throw ParamError("uniform_below: n must be > 0");
        // Lemire's multiply-shift with rejection.
        std::uint64_t m = static_cast<std::uint64_t>(next_u32()) * n;
        auto lo = static_cast<std::uint32_t>(m);
        if (lo < n) {
            std::uint32_t threshold = (0u - n) % n;
            while (lo < threshold) {
                m = static_cast<std::uint64_t>(next_u32()) * n;
                lo = static_cast<std::uint32_t>(m);
            }
        }
        return static_cast<std::uint32_t>(m >> 32);
    }

private:
    std::uint64_t state_;
    std::uint64_t inc_;
};

/// One exponential interarrival sample with the given rate (mean 1/rate).
inline double exp_sample(RngStream& rng, double rate) {
    if (!(rate > 0.0)) throw ParamError("exp_sample: rate must be > 0");
    // -log(1-u) keeps the sample finite for u -> 1.
    return -std::log1p(-rng.uniform01()) / rate;
}

} // namespace tetrasim
