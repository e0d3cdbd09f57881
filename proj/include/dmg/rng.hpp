#pragma once

#include <cstdint>
#include <vector>

namespace dmg {

/// SplitMix64 finalizer: a bijective 64-bit mix with full avalanche.
inline std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// SplitMix64 stream.
struct SplitMix64 {
    std::uint64_t state = 0;

    std::uint64_t next() {
        state += 0x9E3779B97F4A7C15ULL;
        return mix64(state);
    }

    /// Uniform in [0, 1) with 53 random bits.
    double next_unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    /// Uniform in [-1, 1).
    double next_symmetric() { return 2.0 * next_unit() - 1.0; }

    double next_sign() { return (next() & 1ULL) ? 1.0 : -1.0; }
};

/// Counter-based Rademacher source. Draws are pure functions of
/// (seed, iteration, index), so batches are reproducible regardless of
/// evaluation order.
class RademacherSampler {
public:
    explicit RademacherSampler(std::uint64_t seed) : seed_(seed) {}

    std::uint64_t seed() const { return seed_; }

    /// Vector of n independent +-1 entries from substream (iteration, index).
    std::vector<double> draw(std::size_t n, std::uint64_t iteration = 0,
                             std::uint64_t index = 0) const {
        SplitMix64 g{substream_state(iteration, index)};
        std::vector<double> z(n);
        for (auto& v : z) v = g.next_sign();
        return z;
    }

private:
    std::uint64_t substream_state(std::uint64_t iteration, std::uint64_t index) const {
        std::uint64_t s = mix64(seed_ ^ 0x6A09E667F3BCC909ULL);
        s = mix64(s ^ (iteration * 0xA24BAED4963EE407ULL));
        s = mix64(s ^ (index * 0x9FB21C651E98DF25ULL));
        return s;
    }

    std::uint64_t seed_;
};

inline std::vector<double> sample_rademacher(const RademacherSampler& sampler, std::size_t n,
                                             std::uint64_t iteration = 0, std::uint64_t index = 0) {
    return sampler.draw(n, iteration, index);
}

}  // namespace dmg
