#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

namespace nar {

/// Seeded generator with platform-independent distributions.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the standard. The
/// standard distributions are not, so the conversions to reals and bounded integers are done
/// here to keep datasets and checkpoints bit-identical across toolchains.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    /// Uniform in (0, 1].
    double uniform_open_closed() { return 1.0 - uniform(); }

    bool bernoulli(double p) { return uniform() < p; }

    /// Uniform integer in [0, n). Unbiased (rejection sampling). n must be positive.
    std::size_t below(std::size_t n) {
        const std::uint64_t bound = static_cast<std::uint64_t>(n);
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
        std::uint64_t x = next();
        while (x >= limit) x = next();
        return static_cast<std::size_t>(x % bound);
    }

    /// Independent generator for sub-stream `stream`; does not advance this generator.
    static Rng derived(std::uint64_t seed, std::uint64_t stream) { return Rng(mix(seed, stream)); }

    static std::uint64_t mix(std::uint64_t seed, std::uint64_t stream) {
        std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    /// Fisher-Yates with this generator's bounded integers.
    template <class It>
    void shuffle(It first, It last) {
        const auto n = static_cast<std::size_t>(last - first);
        for (std::size_t i = n; i > 1; --i) {
            std::swap(first[i - 1], first[below(i)]);
        }
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace nar
