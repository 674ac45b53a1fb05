#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace sleepctl {

/// SplitMix64 finalizer; used to derive independent child seeds.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Seedable, splittable random stream.
///
/// A stream is identified by its seed; `split(key)` yields a child whose seed
/// depends only on (seed, key), so per-cell and per-replication streams can be
/// derived from one master seed in any order.
class RngStream {
public:
    using engine_type = std::mt19937_64;

    explicit RngStream(std::uint64_t seed = 0) : seed_(seed), engine_(mix64(seed)) {}

    std::uint64_t seed() const noexcept { return seed_; }

    RngStream split(std::uint64_t key) const { return RngStream(mix64(seed_ ^ mix64(key + 1))); }

    std::uint64_t next() { return engine_(); }

    /// Uniform on [0, 1) with 53 random bits; platform independent.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double exponential(double mean) {
        // 1 - u lies in (0, 1], so the log is finite.
        return -mean * std::log1p(-uniform());
    }

    int poisson(double mean) {
        if (!(mean > 0.0))
            return 0;
        std::poisson_distribution<int> dist(mean);
        return dist(engine_);
    }

    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        // reject the incomplete top block so every residue is equally likely
        const std::uint64_t limit = n ? (~std::uint64_t{0} - (~std::uint64_t{0} % n)) : 0;
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return x % n;
    }

    engine_type& engine() noexcept { return engine_; }

private:
    std::uint64_t seed_;
    engine_type engine_;
};

} // namespace sleepctl
