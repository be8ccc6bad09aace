#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace fracsim {

// xoshiro256** with splitmix64 seeding. We roll our own generator instead of
// using <random> distributions because identical seeds must reproduce
// byte-identical outputs regardless of the standard library in use.
namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& x) {
    x += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t rotl(std::uint64_t v, int k) {
    return (v << k) | (v >> (64 - k));
}

}  // namespace detail

// Derives an independent stream seed from a base seed and stream labels.
inline std::uint64_t derive_seed(std::uint64_t seed) { return seed; }

template <typename... Rest>
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t label, Rest... rest) {
    std::uint64_t x = seed ^ (0x9e3779b97f4a7c15ULL + (label << 1));
    std::uint64_t mixed = detail::splitmix64(x);
    return derive_seed(mixed, static_cast<std::uint64_t>(rest)...);
}

class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) {
        std::uint64_t x = seed;
        for (auto& word : state_) word = detail::splitmix64(x);
    }

    std::uint64_t next() {
        const std::uint64_t result = detail::rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = detail::rotl(state_[3], 45);
        return result;
    }

    // Uniform integer in [lo, hi], inclusive. Rejection keeps it unbiased.
    long long uniform_int(long long lo, long long hi) {
        if (lo > hi) throw std::invalid_argument("uniform_int: empty range");
        const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
        if (span == 0) return static_cast<long long>(next());  // full 64-bit range
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
        std::uint64_t draw;
        do {
            draw = next();
        } while (draw >= limit);
        return lo + static_cast<long long>(draw % span);
    }

    std::size_t index(std::size_t size) {
        if (size == 0) throw std::invalid_argument("index: empty collection");
        return static_cast<std::size_t>(uniform_int(0, static_cast<long long>(size) - 1));
    }

    // Uniform double in [0, 1).
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    bool bernoulli(double p) { return uniform() < p; }

    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::size_t j = index(i);
            std::swap(items[i - 1], items[j]);
        }
    }

    std::array<std::uint64_t, 4> state() const { return state_; }
    void restore(const std::array<std::uint64_t, 4>& s) { state_ = s; }

private:
    std::array<std::uint64_t, 4> state_{};
};

}  // namespace fracsim
