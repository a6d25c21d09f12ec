#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace gridrl {

/// Seeded random stream. Every stochastic component draws from its own
/// stream forked by a stable label, so adding a consumer never perturbs
/// the draws seen by another.
class Rng {
public:
    Rng() : engine_(0) {}
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Derive an independent stream from (seed, label). FNV-1a over the
    /// label keeps forks stable across runs and platforms.
    static Rng fork(std::uint64_t seed, std::string_view label) {
        std::uint64_t h = 14695981039346656037ull;
        for (char c : label) {
            h ^= static_cast<std::uint64_t>(static_cast<unsigned char>(c));
            h *= 1099511628211ull;
        }
        h ^= seed + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
        return Rng(h);
    }

    double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
    double uniform(double lo, double hi) {
        return std::uniform_real_distribution<double>(lo, hi)(engine_);
    }
    double normal(double mean = 0.0, double stddev = 1.0) {
        return std::normal_distribution<double>(mean, stddev)(engine_);
    }
    /// Uniform integer in [0, n).
    int index(int n) { return static_cast<int>(std::uniform_int_distribution<long>(0, n - 1)(engine_)); }

    std::mt19937_64& engine() { return engine_; }

private:
    explicit Rng(std::mt19937_64 eng) : engine_(eng) {}
    std::mt19937_64 engine_;
};

} // namespace gridrl
