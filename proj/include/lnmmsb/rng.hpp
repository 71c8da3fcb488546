#pragma once

#include <cstdint>
#include <random>

#include "lnmmsb/types.hpp"

namespace lnmmsb {

/// Seedable, splittable random source. Child streams are derived from the
/// parent seed and a stream id, so independent consumers never share state
/// and results do not depend on evaluation order.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : seed_(seed), engine_(mix(seed)) {}

    std::uint64_t seed() const { return seed_; }

    Rng split(std::uint64_t stream) const { return Rng(mix(seed_ ^ mix(stream + 0x632be59bd9b4e019ULL))); }

    std::mt19937_64& engine() { return engine_; }

    double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
    double normal() { return std::normal_distribution<double>(0.0, 1.0)(engine_); }
    bool bernoulli(double p) { return uniform() < p; }

    /// Index drawn from a discrete distribution given by nonnegative weights.
    std::size_t categorical(const Vector& p) {
        const double u = uniform() * p.sum();
        double acc = 0.0;
        for (Eigen::Index k = 0; k < p.size(); ++k) {
            acc += p[k];
            if (u < acc) return static_cast<std::size_t>(k);
        }
        return static_cast<std::size_t>(p.size() - 1);
    }

    Vector standard_normal(Eigen::Index n) {
        Vector v(n);
        for (Eigen::Index i = 0; i < n; ++i) v[i] = normal();
        return v;
    }

private:
    // SplitMix64 finalizer.
    static std::uint64_t mix(std::uint64_t x) {
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

    std::uint64_t seed_;
    std::mt19937_64 engine_;
};

}  // namespace lnmmsb
