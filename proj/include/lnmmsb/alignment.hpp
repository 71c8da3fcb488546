#pragma once

// Role alignment and membership recovery error. Role indices are only
// identified up to permutation, so estimates are compared to truth after
// relabeling the estimated roles.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "lnmmsb/types.hpp"

namespace lnmmsb {

/// perm[k] is the estimated role matched to true role k, so the aligned
/// estimate of node i is (est_i[perm[0]], ..., est_i[perm[K-1]]).
struct Alignment {
    std::vector<std::size_t> perm;
    double cost = 0.0;  // total l2 distance over nodes after alignment
};

enum class Norm { l1, l2 };

namespace detail {

inline void require_same_shape(const std::vector<Vector>& a, const std::vector<Vector>& b) {
    if (a.size() != b.size()) throw std::invalid_argument("membership sets differ in node count");
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i].size() != b[i].size() || (i > 0 && a[i].size() != a[0].size()))
            throw std::invalid_argument("membership vectors differ in K");
}

inline double aligned_cost(const std::vector<Vector>& truth, const std::vector<Vector>& est,
                           const std::vector<std::size_t>& perm) {
    double total = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        double s = 0.0;
        for (std::size_t k = 0; k < perm.size(); ++k) {
            const double d = truth[i][static_cast<Eigen::Index>(k)] - est[i][static_cast<Eigen::Index>(perm[k])];
            s += d * d;
        }
        total += std::sqrt(s);
    }
    return total;
}

/// Minimum-cost perfect assignment (Hungarian method, O(n^3)). Returns
/// row -> column.
inline std::vector<std::size_t> solve_assignment(const Matrix& cost) {
    const auto n = static_cast<std::size_t>(cost.rows());
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
    std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
    std::vector<char> used(n + 1);
    for (std::size_t i = 1; i <= n; ++i) {
        p[0] = i;
        std::size_t j0 = 0;
        std::fill(minv.begin(), minv.end(), inf);
        std::fill(used.begin(), used.end(), 0);
        do {
            used[j0] = 1;
            const std::size_t i0 = p[j0];
            double delta = inf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost(static_cast<Eigen::Index>(i0 - 1), static_cast<Eigen::Index>(j - 1)) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<std::size_t> row_to_col(n);
    for (std::size_t j = 1; j <= n; ++j) row_to_col[p[j] - 1] = j - 1;
    return row_to_col;
}

}  // namespace detail

/// Role permutation minimizing the total l2 distance between truth and the
/// relabeled estimates. Exhaustive over K! for K <= 8; above that the
/// assignment problem on summed squared differences is solved instead.
inline Alignment align_roles(const std::vector<Vector>& pi_true, const std::vector<Vector>& pi_est) {
    detail::require_same_shape(pi_true, pi_est);
    if (pi_true.empty()) return {};
    const auto k = static_cast<std::size_t>(pi_true.front().size());
    std::vector<std::size_t> perm(k);
    std::iota(perm.begin(), perm.end(), 0);
    if (k <= 8) {
        Alignment best{perm, detail::aligned_cost(pi_true, pi_est, perm)};
        while (std::next_permutation(perm.begin(), perm.end())) {
            const double c = detail::aligned_cost(pi_true, pi_est, perm);
            if (c < best.cost) best = {perm, c};
        }
        return best;
    }
    const auto kk = static_cast<Eigen::Index>(k);
    Matrix cost = Matrix::Zero(kk, kk);
    for (std::size_t i = 0; i < pi_true.size(); ++i)
        for (Eigen::Index a = 0; a < kk; ++a)
            for (Eigen::Index b = 0; b < kk; ++b) cost(a, b) += std::pow(pi_true[i][a] - pi_est[i][b], 2);
    perm = detail::solve_assignment(cost);
    return {perm, detail::aligned_cost(pi_true, pi_est, perm)};
}

/// Applies an alignment to estimated membership vectors.
inline std::vector<Vector> apply_alignment(const std::vector<Vector>& pi_est, const Alignment& al) {
    std::vector<Vector> out;
    out.reserve(pi_est.size());
    for (const auto& p : pi_est) {
        Vector q(p.size());
        for (std::size_t k = 0; k < al.perm.size(); ++k)
            q[static_cast<Eigen::Index>(k)] = p[static_cast<Eigen::Index>(al.perm[k])];
        out.push_back(std::move(q));
    }
    return out;
}

/// Relabels an estimated compatibility matrix: out(k, l) = B(perm[k], perm[l]).
inline Matrix apply_alignment(const Matrix& b, const Alignment& al) {
    const auto k = static_cast<Eigen::Index>(al.perm.size());
    Matrix out(k, k);
    for (Eigen::Index r = 0; r < k; ++r)
        for (Eigen::Index c = 0; c < k; ++c)
            out(r, c) = b(static_cast<Eigen::Index>(al.perm[static_cast<std::size_t>(r)]),
                          static_cast<Eigen::Index>(al.perm[static_cast<std::size_t>(c)]));
    return out;
}

/// Mean over nodes of ||pi_true_i - pi_est_i||. Inputs must already be
/// aligned.
inline double membership_error(const std::vector<Vector>& pi_true, const std::vector<Vector>& pi_est, Norm norm) {
    detail::require_same_shape(pi_true, pi_est);
    if (pi_true.empty()) return 0.0;
    double total = 0.0;
    for (std::size_t i = 0; i < pi_true.size(); ++i) {
        const Vector d = pi_true[i] - pi_est[i];
        total += norm == Norm::l1 ? d.lpNorm<1>() : d.norm();
    }
    return total / static_cast<double>(pi_true.size());
}

}  // namespace lnmmsb
