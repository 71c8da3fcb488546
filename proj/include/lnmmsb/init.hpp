#pragma once

// Data-driven starting points for q(gamma). Each node is described by its
// out- and in-adjacency profile; k-means with randomized k-means++ seeding
// groups stochastically equivalent nodes, and every node's initial gamma~
// favors its cluster's role.

#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "lnmmsb/rng.hpp"
#include "lnmmsb/types.hpp"

namespace lnmmsb {

enum class InitMethod { random, kmeans };

namespace detail {

inline Matrix adjacency_profiles(const Adjacency& adj) {
    const auto n = static_cast<Eigen::Index>(adj.size());
    Matrix x = Matrix::Zero(n, 2 * n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) {
            if (i == j) continue;
            if (adj(static_cast<std::size_t>(i), static_cast<std::size_t>(j))) {
                x(i, j) = 1.0;
                x(j, n + i) = 1.0;
            }
        }
    return x;
}

}  // namespace detail

/// Hard cluster labels in [0, k) from k-means on adjacency profiles.
inline std::vector<std::size_t> kmeans_roles(const Adjacency& adj, std::size_t k, Rng& rng, int iterations = 25) {
    const Matrix x = detail::adjacency_profiles(adj);
    const auto n = static_cast<std::size_t>(x.rows());
    std::vector<std::size_t> label(n, 0);
    if (k <= 1 || n == 0) return label;

    // k-means++ seeding
    Matrix centers(static_cast<Eigen::Index>(k), x.cols());
    centers.row(0) = x.row(static_cast<Eigen::Index>(rng.engine()() % n));
    Vector dist = Vector::Constant(static_cast<Eigen::Index>(n), std::numeric_limits<double>::infinity());
    for (std::size_t c = 1; c < k; ++c) {
        for (std::size_t i = 0; i < n; ++i)
            dist[static_cast<Eigen::Index>(i)] =
                std::min(dist[static_cast<Eigen::Index>(i)],
                         (x.row(static_cast<Eigen::Index>(i)) - centers.row(static_cast<Eigen::Index>(c - 1))).squaredNorm());
        const std::size_t pick = dist.sum() > 0.0 ? rng.categorical(dist) : rng.engine()() % n;
        centers.row(static_cast<Eigen::Index>(c)) = x.row(static_cast<Eigen::Index>(pick));
    }

    for (int it = 0; it < iterations; ++it) {
        bool changed = it == 0;
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t best = 0;
            double best_d = std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < k; ++c) {
                const double d =
                    (x.row(static_cast<Eigen::Index>(i)) - centers.row(static_cast<Eigen::Index>(c))).squaredNorm();
                if (d < best_d) {
                    best_d = d;
                    best = c;
                }
            }
            if (label[i] != best) changed = true;
            label[i] = best;
        }
        if (!changed) break;
        Matrix sums = Matrix::Zero(centers.rows(), centers.cols());
        std::vector<double> counts(k, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            sums.row(static_cast<Eigen::Index>(label[i])) += x.row(static_cast<Eigen::Index>(i));
            counts[label[i]] += 1.0;
        }
        for (std::size_t c = 0; c < k; ++c)
            if (counts[c] > 0.0) centers.row(static_cast<Eigen::Index>(c)) = sums.row(static_cast<Eigen::Index>(c)) / counts[c];
    }
    return label;
}

/// gamma~ whose softmax puts `weight` on role `r` and spreads the rest
/// evenly; last coordinate pinned to 0.
inline Vector role_favoring_gamma(std::size_t k, std::size_t r, double weight) {
    const auto kk = static_cast<Eigen::Index>(k);
    Vector p = Vector::Constant(kk, (1.0 - weight) / static_cast<double>(k - 1));
    p[static_cast<Eigen::Index>(r)] = weight;
    Vector g = p.array().log() - std::log(p[kk - 1]);
    g[kk - 1] = 0.0;
    return g;
}

}  // namespace lnmmsb
