#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <utility>

namespace marc {

/// SplitMix64, used for seeding and for deriving child streams.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// xoshiro256** generator.
///
/// Streams are split with `split(tag)`: the child state is seeded from
/// splitmix64(seed ^ hash(tag)) so a component's draws never depend on how
/// many numbers other components consumed. Every distribution here is
/// implemented locally so results are identical across standard libraries.
class Rng {
public:
    using result_type = std::uint64_t;

    explicit Rng(std::uint64_t seed = 0) : seed_(seed) {
        std::uint64_t sm = seed;
        for (auto& s : state_) s = splitmix64(sm);
    }

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() {
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

    std::uint64_t seed() const { return seed_; }

    /// Independent child stream identified by `tag`.
    Rng split(std::uint64_t tag) const {
        std::uint64_t sm = seed_ ^ (tag * 0xd1342543de82ef95ULL + 0x632be59bd9b4e019ULL);
        return Rng(splitmix64(sm));
    }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal via Box-Muller (cached second value).
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * M_PI * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

    /// Uniform integer in [0, n). Lemire's nearly-divisionless method.
    std::uint64_t below(std::uint64_t n) {
        __uint128_t m = static_cast<__uint128_t>((*this)()) * n;
        auto low = static_cast<std::uint64_t>(m);
        if (low < n) {
            const std::uint64_t threshold = (0 - n) % n;
            while (low < threshold) {
                m = static_cast<__uint128_t>((*this)()) * n;
                low = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    bool bernoulli(double p) { return uniform() < p; }

    template <typename T>
    void shuffle(std::span<T> items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::swap(items[i - 1], items[below(i)]);
        }
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    std::uint64_t seed_;
    std::uint64_t state_[4];
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// Stream tags, one per component that draws randomness.
namespace streams {
inline constexpr std::uint64_t kSynthetic = 1;
inline constexpr std::uint64_t kSplit = 2;
inline constexpr std::uint64_t kBackbone = 3;
inline constexpr std::uint64_t kCompression = 4;
inline constexpr std::uint64_t kMatching = 5;
inline constexpr std::uint64_t kHeads = 6;
inline constexpr std::uint64_t kDecoder = 7;
inline constexpr std::uint64_t kTrainOrder = 8;
inline constexpr std::uint64_t kProbe = 9;
inline constexpr std::uint64_t kProbeAdapters = 10;
inline constexpr std::uint64_t kProbeOrder = 11;
inline constexpr std::uint64_t kSample = 12;
inline constexpr std::uint64_t kProbeValidation = 13;
}  // namespace streams

}  // namespace marc
