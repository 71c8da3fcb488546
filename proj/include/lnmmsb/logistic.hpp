#pragma once

// Logistic (softmax) map from pre-transformed role vectors to the simplex,
// its log-partition C(gamma) = log sum_k exp(gamma_k), and the gradient and
// Hessian of C used by the Laplace approximation.

#include <stdexcept>
#include <utility>

#include "lnmmsb/types.hpp"

namespace lnmmsb {

namespace detail {
inline void require_finite(const Vector& gamma) {
    if (gamma.size() == 0) throw std::invalid_argument("role vector is empty");
    if (!gamma.allFinite()) throw std::invalid_argument("role vector has non-finite entries");
}
}  // namespace detail

/// C(gamma), computed with max-subtraction.
inline double log_partition(const Vector& gamma) {
    detail::require_finite(gamma);
    const double m = gamma.maxCoeff();
    return m + std::log((gamma.array() - m).exp().sum());
}

/// pi_k = exp(gamma_k - C(gamma)).
inline Vector logistic_transform(const Vector& gamma) {
    detail::require_finite(gamma);
    const double m = gamma.maxCoeff();
    Vector p = (gamma.array() - m).exp();
    p /= p.sum();
    return p;
}

struct PartitionDerivatives {
    Vector g;  // softmax(gamma_hat)
    Matrix h;  // diag(g) - g g^T
};

inline PartitionDerivatives grad_hess_log_partition(const Vector& gamma_hat) {
    Vector g = logistic_transform(gamma_hat);
    Matrix h = Matrix(g.asDiagonal()) - g * g.transpose();
    return {std::move(g), std::move(h)};
}

}  // namespace lnmmsb
