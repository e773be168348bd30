#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace causalscore {

// Deterministic random source. The engine is std::mt19937_64, whose output
// sequence is fixed by the C++ standard, and every distribution below is
// derived from raw engine words with the exact recipes documented here, so
// two builds with the same seed produce bit-identical streams:
//
//   u64       : one engine word
//   uniform   : (u64 >> 11) * 2^-53, in [0, 1)
//   normal    : Box-Muller, consumes exactly two words:
//               r = sqrt(-2 ln(1 - u1)), angle = 2*pi*u2,
//               value = mean + sd * r * cos(angle)
//   bernoulli : uniform() < p
//   below(n)  : rejection sampling on u64 % n (consumes >= 1 word)
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t u64() { return engine_(); }

    double uniform() {
        return static_cast<double>(u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * uniform();
    }

    double normal(double mean = 0.0, double sd = 1.0) {
        const double u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log1p(-u1));
        constexpr double two_pi = 6.283185307179586476925286766559;
        return mean + sd * r * std::cos(two_pi * u2);
    }

    double bernoulli(double p) { return uniform() < p ? 1.0 : 0.0; }

    // Uniform integer in [0, n). Modulo rejection keeps the draw unbiased
    // without platform-dependent shortcuts.
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t v = u64();
        while (v >= limit) v = u64();
        return v % n;
    }

    // Fisher-Yates, descending index, swap target drawn via below().
    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    std::mt19937_64 engine_;
};

// splitmix64 step; used to derive independent child seeds (per trial, per
// subsample) from a run seed without sharing stream state.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace causalscore
