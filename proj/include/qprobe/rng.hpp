#pragma once

#include <cstdint>

namespace qprobe {

/// SplitMix64: a counter-based generator whose k-th output is a fixed mix of
/// seed + k * golden_gamma. Same seed, same sequence, on every platform.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    /// Independent stream keyed by (seed, stream_id).
    static SplitMix64 stream(std::uint64_t seed, std::uint64_t stream_id);

    std::uint64_t next();
    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

private:
    std::uint64_t state_;
};

std::uint64_t splitmix64_mix(std::uint64_t z);

/// Binomial(n, p) draw. Inversion for n <= 64, summed Bernoulli trials above.
/// p is clamped to [0, 1].
std::uint64_t binomial(SplitMix64& rng, std::uint64_t n, double p);

}  // namespace qprobe
