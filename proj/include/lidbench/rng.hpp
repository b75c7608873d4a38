#pragma once

#include <cstdint>
#include <array>
#include <span>
#include <string_view>
#include <utility>

namespace lidbench {

std::uint64_t splitmix64(std::uint64_t x);

/// Combines two 64-bit values into a well-mixed seed. Not commutative.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

/// FNV-1a over the bytes of `label`; used to derive stream ids from names.
std::uint64_t hash_label(std::string_view label);

// Deterministic, splittable generator: xoshiro256** with its state filled
// from a splitmix64 sequence. Every derived quantity (uniform doubles, bounded
// integers, shuffles) is computed here rather than through <random>
// distributions, which are implementation-defined.
class Rng {
public:
    static constexpr std::string_view kAlgorithm = "xoshiro256**+splitmix64";
    static constexpr int kVersion = 1;

    explicit Rng(std::uint64_t seed);

    std::uint64_t seed() const { return seed_; }

    std::uint64_t next() {
        const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    /// Uniform in [0, 1) with 53 bits of resolution.
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, bound); bound must be positive.
    std::uint64_t below(std::uint64_t bound);

    bool bernoulli(double p) { return uniform() < p; }

    /// Child stream that depends only on this generator's seed and `stream`,
    /// never on how many values have been drawn.
    Rng split(std::uint64_t stream) const { return Rng(mix_seed(seed_, stream)); }

    template <class T>
    void shuffle(std::span<T> items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    std::uint64_t seed_;
    std::array<std::uint64_t, 4> s_{};
};

}  // namespace lidbench
