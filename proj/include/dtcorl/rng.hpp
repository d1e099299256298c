#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

namespace dtcorl {

/// Seeded random stream with portable, implementation-independent draws.
/// All stochastic code in the library goes through this class so that a fixed
/// seed reproduces the same numbers regardless of the standard library's
/// distribution internals.
class Rng {
  public:
    explicit Rng(uint64_t seed) : gen_(seed ? seed : 0x9e3779b97f4a7c15ull) {}

    uint64_t next_u64() { return gen_(); }

    /// Uniform double in [0, 1) with 53 bits of randomness.
    double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Uniform integer in [0, n). Rejection sampling, no modulo bias.
    int uniform_int(int n) {
        if (n <= 0) throw std::invalid_argument("uniform_int: n must be positive");
        const uint64_t un = static_cast<uint64_t>(n);
        const uint64_t limit = UINT64_MAX - UINT64_MAX % un;
        uint64_t x;
        do {
            x = gen_();
        } while (x >= limit);
        return static_cast<int>(x % un);
    }

    /// Standard normal via Box-Muller (one spare cached).
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        while (u1 <= 0.0) u1 = uniform01();
        const double u2 = uniform01();
        const double mag = std::sqrt(-2.0 * std::log(u1));
        spare_ = mag * std::sin(6.283185307179586476925286766559 * u2);
        has_spare_ = true;
        return mag * std::cos(6.283185307179586476925286766559 * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    double exponential(double rate) {
        double u = 0.0;
        while (u <= 0.0) u = uniform01();
        return -std::log(u) / rate;
    }

    /// Index drawn from a probability vector (CDF scan; final bucket absorbs
    /// any floating-point slack).
    int categorical(const std::vector<double>& probs) {
        const double u = uniform01();
        double acc = 0.0;
        for (size_t i = 0; i < probs.size(); ++i) {
            acc += probs[i];
            if (u < acc) return static_cast<int>(i);
        }
        return static_cast<int>(probs.size()) - 1;
    }

    /// Dirichlet(1,...,1) draw: uniform over the simplex.
    std::vector<double> dirichlet_uniform(int n) {
        std::vector<double> x(static_cast<size_t>(n));
        double sum = 0.0;
        for (auto& v : x) {
            v = exponential(1.0);
            sum += v;
        }
        for (auto& v : x) v /= sum;
        return x;
    }

    /// Derived independent stream, stable under the parent's draw order.
    Rng child(uint64_t tag) {
        uint64_t z = seed_mix_ ^ (tag + 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        seed_mix_ = z;
        return Rng(z ^ (z >> 31));
    }

  private:
    std::mt19937_64 gen_;
    uint64_t seed_mix_ = 0x243f6a8885a308d3ull;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace dtcorl
