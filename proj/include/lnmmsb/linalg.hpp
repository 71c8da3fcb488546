#pragma once

// Helpers for the active-block convention: role covariances are stored K x K
// with a zero last row/column, and all inversions act on the leading
// (K-1) x (K-1) block.

#include <cmath>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "lnmmsb/types.hpp"

namespace lnmmsb::linalg {

inline constexpr double kDefaultJitter = 1e-8;

inline Eigen::Index active_dim(Eigen::Index k) { return k > 0 ? k - 1 : 0; }

inline Matrix active_block(const Matrix& m) {
    const auto a = active_dim(m.rows());
    return m.topLeftCorner(a, a);
}

inline Vector active_part(const Vector& v) { return v.head(active_dim(v.size())); }

/// Embeds an active block into K x K with a zero last row and column.
inline Matrix embed(const Matrix& active, Eigen::Index k) {
    Matrix out = Matrix::Zero(k, k);
    out.topLeftCorner(active.rows(), active.cols()) = active;
    return out;
}

/// Embeds an active vector into length K with last entry 0.
inline Vector embed(const Vector& active, Eigen::Index k) {
    Vector out = Vector::Zero(k);
    out.head(active.size()) = active;
    return out;
}

inline Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

/// Inverse of a symmetric positive-definite matrix. On Cholesky failure the
/// diagonal is jittered, growing tenfold per retry; throws NumericalError
/// when every retry fails.
inline Matrix spd_inverse(const Matrix& m, double jitter = kDefaultJitter, const char* what = "matrix") {
    const auto n = m.rows();
    if (n == 0) return Matrix(0, 0);
    Matrix s = symmetrize(m);
    double eps = 0.0;
    for (int attempt = 0; attempt < 8; ++attempt) {
        Eigen::LLT<Matrix> llt(s + eps * Matrix::Identity(n, n));
        if (llt.info() == Eigen::Success) {
            Matrix inv = llt.solve(Matrix::Identity(n, n));
            if (inv.allFinite()) return symmetrize(inv);
        }
        eps = eps == 0.0 ? jitter : eps * 10.0;
    }
    throw NumericalError(std::string("singular ") + what + " after jitter retry");
}

/// log|m| for a symmetric positive-definite matrix (0 for an empty matrix).
inline double log_det_spd(const Matrix& m, double jitter = kDefaultJitter) {
    const auto n = m.rows();
    if (n == 0) return 0.0;
    Matrix s = symmetrize(m);
    double eps = 0.0;
    for (int attempt = 0; attempt < 8; ++attempt) {
        Eigen::LLT<Matrix> llt(s + eps * Matrix::Identity(n, n));
        if (llt.info() == Eigen::Success) {
            const Matrix& l = llt.matrixLLT();
            return 2.0 * l.diagonal().array().log().sum();
        }
        eps = eps == 0.0 ? jitter : eps * 10.0;
    }
    throw NumericalError("log-determinant of non-SPD matrix");
}

/// Symmetrizes and raises every eigenvalue to at least `floor`.
inline Matrix floor_eigenvalues(const Matrix& m, double floor) {
    if (m.rows() == 0) return m;
    Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(m));
    Vector ev = es.eigenvalues().cwiseMax(floor);
    return symmetrize(es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose());
}

inline double min_eigenvalue(const Matrix& m) {
    if (m.rows() == 0) return 0.0;
    Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(m), Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

inline bool is_symmetric(const Matrix& m, double tol) {
    return m.rows() == m.cols() && (m - m.transpose()).cwiseAbs().maxCoeff() <= tol;
}

/// Checks a stored role covariance: symmetric, zero last row/column, SPD
/// active block.
inline void require_role_covariance(const Matrix& m, Eigen::Index k, const char* what) {
    if (m.rows() != k || m.cols() != k)
        throw std::invalid_argument(std::string(what) + ": expected a K x K matrix");
    if (!m.allFinite()) throw std::invalid_argument(std::string(what) + ": non-finite entries");
    if (!is_symmetric(m, 1e-10)) throw std::invalid_argument(std::string(what) + ": not symmetric");
    if (k > 0 && (m.row(k - 1).cwiseAbs().maxCoeff() > 0.0 || m.col(k - 1).cwiseAbs().maxCoeff() > 0.0))
        throw std::invalid_argument(std::string(what) + ": last row/column must be zero");
    if (active_dim(k) > 0 && min_eigenvalue(active_block(m)) <= 0.0)
        throw std::invalid_argument(std::string(what) + ": active block is not positive definite");
}

/// log N(x; mean, cov) on the active coordinates, given the inverse and
/// log-determinant of the active covariance.
inline double log_normal_active(const Vector& x_active, const Vector& mean_active, const Matrix& cov_inv,
                                double log_det_cov) {
    constexpr double kLog2Pi = 1.8378770664093454835606594728112;
    const Vector d = x_active - mean_active;
    return -0.5 * (static_cast<double>(d.size()) * kLog2Pi + log_det_cov + d.dot(cov_inv * d));
}

}  // namespace lnmmsb::linalg
