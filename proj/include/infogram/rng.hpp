#pragma once

#include <cmath>
#include <cstdint>

namespace infogram {

// Deterministic counter-based generator built on the SplitMix64 finalizer.
// The k-th output of a stream is a pure function of (seed, stream, k), so
// results are bit-identical across runs and platforms regardless of how
// many values other streams have consumed.  Every normal() draw consumes
// exactly two raw outputs (Box-Muller, cosine branch, no caching).
class CounterRng {
public:
    explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0)
        : state_(mix(seed + kGolden) ^ mix(stream + 2 * kGolden)) {}

    std::uint64_t next_u64() {
        state_ += kGolden;
        return mix(state_);
    }

    /// Uniform in [0, 1), 53 random bits.
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Uniform in [lo, hi).
    double uniform(double lo, double hi) {
        return lo + (hi - lo) * uniform();
    }

    /// Standard normal via Box-Muller.  The first uniform is offset into
    /// (0, 1) so the logarithm is always finite.
    double normal() {
        double u1 = (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
        double u2 = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

private:
    static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

    static std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    std::uint64_t state_;
};

// Stream ids used by the training harness.  Per-step data streams use the
// step index itself, so named streams sit far above any realistic step
// count to avoid overlap.
inline constexpr std::uint64_t kStreamRelationInit = 0x72656C70; // "relp"
inline constexpr std::uint64_t kStreamAdapterInit  = 0x61646170; // "adap"
inline constexpr std::uint64_t kStreamProbe        = 0x70726F62; // "prob"

} // namespace infogram
