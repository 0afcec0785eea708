#pragma once

#include <cmath>
#include <cstdint>

#include "downscale/core/tensor.hpp"

namespace downscale {

// splitmix64-based generator. Self-contained so that seeded runs are
// reproducible regardless of the standard library's distribution internals.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {
        // decorrelate trivially related seeds
        next_u64();
        next_u64();
    }

    // Independent stream derived from (seed, stream, index); used to make
    // noise draws a pure function of their logical position.
    static Rng keyed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index = 0) {
        std::uint64_t h = seed;
        h = mix(h ^ (0x9e3779b97f4a7c15ULL + stream));
        h = mix(h ^ (0xbf58476d1ce4e5b9ULL + index));
        return Rng(h);
    }

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        return mix(z);
    }

    std::uint32_t next_u32() { return static_cast<std::uint32_t>(next_u64() >> 32); }

    // [0, 1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // [0, n)
    std::int64_t uniform_int(std::int64_t n) {
        return static_cast<std::int64_t>(next_u64() % static_cast<std::uint64_t>(n));
    }

    double normal() {
        if (has_cached_) {
            has_cached_ = false;
            return cached_;
        }
        double u1 = 0.0;
        while (u1 <= 1e-300) u1 = uniform();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        cached_ = r * std::sin(a);
        has_cached_ = true;
        return r * std::cos(a);
    }

    template <typename T>
    void fill_normal(Tensor<T>& t, double mean = 0.0, double std = 1.0) {
        for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<T>(mean + std * normal());
    }

    template <typename T>
    void fill_uniform(Tensor<T>& t, double lo, double hi) {
        for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<T>(uniform(lo, hi));
    }

    template <typename T>
    Tensor<T> normal_tensor(std::vector<std::int64_t> shape, double mean = 0.0, double std = 1.0) {
        Tensor<T> t(std::move(shape));
        fill_normal(t, mean, std);
        return t;
    }

private:
    static std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::uint64_t state_;
    bool has_cached_ = false;
    double cached_ = 0.0;
};

}  // namespace downscale
