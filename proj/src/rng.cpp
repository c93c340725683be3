#include "qprobe/rng.hpp"

#include <algorithm>
#include <cmath>

namespace qprobe {

namespace {
constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;
}

std::uint64_t splitmix64_mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

SplitMix64 SplitMix64::stream(std::uint64_t seed, std::uint64_t stream_id) {
    return SplitMix64(splitmix64_mix(seed + kGolden) ^ splitmix64_mix(stream_id * kGolden + 0x632be59bd9b4e019ULL));
}

std::uint64_t SplitMix64::next() {
    state_ += kGolden;
    return splitmix64_mix(state_);
}

std::uint64_t binomial(SplitMix64& rng, std::uint64_t n, double p) {
    if (std::isnan(p)) p = 0.0;
    p = std::clamp(p, 0.0, 1.0);
    if (n == 0 || p == 0.0) return 0;
    if (p == 1.0) return n;
    if (n <= 64) {
        if (p > 0.5) return n - binomial(rng, n, 1.0 - p);
        const double q = 1.0 - p;
        const double ratio = p / q;
        double pmf = std::pow(q, static_cast<double>(n));
        double cdf = pmf;
        const double u = rng.uniform();
        std::uint64_t k = 0;
        while (u >= cdf && k < n) {
            pmf *= ratio * static_cast<double>(n - k) / static_cast<double>(k + 1);
            ++k;
            cdf += pmf;
        }
        return k;
    }
    std::uint64_t count = 0;
    for (std::uint64_t i = 0; i < n; ++i) count += rng.uniform() < p ? 1 : 0;
    return count;
}

}  // namespace qprobe
