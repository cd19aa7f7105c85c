#pragma once

#include <cmath>
#include <cstdint>

#include "stepfb/complex_vec.hpp"
#include "stepfb/errors.hpp"

namespace stepfb {

namespace detail {

// splitmix64 finalizer, used to spread (seed, stream-id) pairs over 64 bits
// and to expand a key into the engine state.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t mix_key(std::uint64_t seed, std::uint64_t stream_id) {
    std::uint64_t a = seed;
    const std::uint64_t ha = splitmix64(a);
    std::uint64_t b = stream_id * 0xda942042e4dd58b5ULL + 1;
    return ha ^ splitmix64(b);
}

inline std::uint64_t rotl64(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace detail

// Deterministic random stream: the sample sequence is a pure function of
// (seed, stream-id, call sequence). Parallel code derives one child stream
// per unit of work instead of sharing; derivation depends only on the keys,
// never on how much of the parent stream has been consumed.
//
// The engine is xoshiro256** seeded through splitmix64 (cheap to construct,
// so per-trial child streams cost nanoseconds); uniforms and the Box-Muller
// normals are generated locally, keeping every draw implementation-defined
// behavior free.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed, std::uint64_t stream_id = 0)
        : key_(detail::mix_key(seed, stream_id)) {
        std::uint64_t sm = key_;
        for (auto& word : s_) word = detail::splitmix64(sm);
    }

    // Child stream for an independent unit of work.
    RngStream derive(std::uint64_t stream_id) const { return RngStream(key_, stream_id); }

    // xoshiro256** step
    std::uint64_t bits() {
        const std::uint64_t result = detail::rotl64(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = detail::rotl64(s_[3], 45);
        return result;
    }

    // One uniformly random bit.
    unsigned bit() { return static_cast<unsigned>(bits() >> 63); }

    // Uniform in [0, 1), 53-bit resolution.
    double uniform01() { return static_cast<double>(bits() >> 11) * 0x1.0p-53; }

    // N(mean, stddev^2) via Box-Muller; the second sample of each pair is
    // cached in unit form and scaled on return.
    double normal(double mean = 0.0, double stddev = 1.0) {
        if (has_spare_) {
            has_spare_ = false;
            return mean + stddev * spare_;
        }
        const double u1 = static_cast<double>((bits() >> 11) + 1) * 0x1.0p-53;  // (0,1]
        const double u2 = static_cast<double>(bits() >> 11) * 0x1.0p-53;        // [0,1)
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * M_PI * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return mean + stddev * r * std::cos(a);
    }

    // Circularly-symmetric complex Gaussian with E|z|^2 = variance
    // (independent real/imag parts of variance variance/2).
    ComplexSample complex_normal(double variance) {
        const double s = std::sqrt(variance * 0.5);
        const double re = normal(0.0, s);
        const double im = normal(0.0, s);
        return {re, im};
    }

private:
    std::uint64_t key_;
    std::uint64_t s_[4];
    double spare_ = 0.0;
    bool has_spare_ = false;
};

// n i.i.d. CN(0, variance) samples.
inline ChannelVector draw_complex_gaussian(RngStream& rng, std::size_t n, double variance) {
    if (n < 1) throw ParameterError("draw_complex_gaussian: n must be >= 1");
    if (!(variance > 0.0) || !std::isfinite(variance))
        throw ParameterError("draw_complex_gaussian: variance must be positive");
    ChannelVector out(n);
    for (auto& z : out) z = rng.complex_normal(variance);
    return out;
}

}  // namespace stepfb
