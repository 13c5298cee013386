#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace canids {

// All randomness in the toolkit flows through this wrapper. Draws are built
// directly on the mt19937_64 word stream, so streams depend only on the seed
// and not on the standard library's distribution implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    // Uniform in [0, 1) with 53-bit resolution.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n), n > 0. Rejection sampling keeps it unbiased.
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t bound = UINT64_MAX / n * n;
        std::uint64_t v = next_u64();
        while (v >= bound) v = next_u64();
        return v % n;
    }

    std::uint8_t byte() { return static_cast<std::uint8_t>(below(256)); }

    // Signed integer in [lo, hi], inclusive.
    std::int64_t range(std::int64_t lo, std::int64_t hi) {
        return lo + static_cast<std::int64_t>(below(static_cast<std::uint64_t>(hi - lo) + 1));
    }

    // Exponential inter-arrival with the given mean, strictly positive.
    double exponential(double mean) {
        double u = uniform();  // [0, 1)
        return -mean * std::log1p(-u);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        // Fisher-Yates over our own index draws.
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 gen_;
};

}  // namespace canids
