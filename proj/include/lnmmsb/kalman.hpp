#pragma once

// Kalman filter and Rauch-Tung-Striebel smoother over the trajectory of
// membership-prior means mu^(t).
//
// State:        mu^(1) ~ N(nu, Phi),  mu^(t+1) = A mu^(t) + w,  w ~ N(0, Phi)
// Observation:  Y^(t) = mean_i gamma~_i^(t) ~ N(mu^(t), Sigma^(t) / N)
//
// All recursions act on the active (K-1)-dimensional block; stored vectors
// and matrices keep the K-th coordinate at zero.

#include <stdexcept>
#include <vector>

#include "lnmmsb/linalg.hpp"
#include "lnmmsb/types.hpp"

namespace lnmmsb {

struct KalmanTrace {
    std::vector<Vector> x_pred;    // x_{t|t-1}
    std::vector<Matrix> p_pred;    // P_{t|t-1}
    std::vector<Matrix> gains;     // K_t
    std::vector<Vector> x_filt;    // x_{t|t}
    std::vector<Matrix> p_filt;    // P_{t|t}
    std::vector<Vector> x_smooth;  // x_{t|T}
    std::vector<Matrix> p_smooth;  // P_{t|T}
    std::vector<Matrix> l_mats;    // L_t, t = 1..T-1

    std::size_t n_times() const { return x_filt.size(); }
};

/// Forward pass. `a` may be empty, meaning identity. Initialized with
/// x_{1|0} = nu and P_{1|0} = Phi, followed by the measurement update at
/// t = 1.
inline KalmanTrace kalman_filter(const std::vector<Vector>& y, const Vector& nu, const Matrix& phi,
                                 const std::vector<Matrix>& sigmas, std::size_t n_nodes, const Matrix& a = Matrix(),
                                 double jitter = linalg::kDefaultJitter) {
    const std::size_t t_count = y.size();
    if (t_count == 0) throw std::invalid_argument("kalman_filter: no observations");
    if (sigmas.size() != t_count) throw std::invalid_argument("kalman_filter: need one Sigma per time point");
    if (n_nodes == 0) throw std::invalid_argument("kalman_filter: N must be positive");
    const auto k = nu.size();
    const auto d = linalg::active_dim(k);
    if (phi.rows() != k || phi.cols() != k) throw std::invalid_argument("kalman_filter: Phi must be K x K");
    for (std::size_t t = 0; t < t_count; ++t)
        if (y[t].size() != k || sigmas[t].rows() != k || sigmas[t].cols() != k)
            throw std::invalid_argument("kalman_filter: dimension mismatch");
    const Matrix trans = a.size() == 0 ? Matrix::Identity(d, d) : Matrix(a.topLeftCorner(d, d));
    const Matrix q = phi.topLeftCorner(d, d);
    const Matrix eye = Matrix::Identity(d, d);
    const double inv_n = 1.0 / static_cast<double>(n_nodes);

    KalmanTrace tr;
    Vector x = nu.head(d);
    Matrix p = q;
    for (std::size_t t = 0; t < t_count; ++t) {
        if (t > 0) {
            x = trans * tr.x_filt.back().head(d);
            p = linalg::symmetrize(trans * tr.p_filt.back().topLeftCorner(d, d) * trans.transpose() + q);
        }
        tr.x_pred.push_back(linalg::embed(x, k));
        tr.p_pred.push_back(linalg::embed(p, k));
        const Matrix s = p + inv_n * sigmas[t].topLeftCorner(d, d);
        const Matrix gain = p * linalg::spd_inverse(s, jitter, "innovation covariance");
        x = x + gain * (y[t].head(d) - x);
        p = linalg::symmetrize((eye - gain) * p);
        tr.gains.push_back(linalg::embed(gain, k));
        tr.x_filt.push_back(linalg::embed(x, k));
        tr.p_filt.push_back(linalg::embed(p, k));
    }
    return tr;
}

/// Backward pass on a filtered trace:
///   L_t     = P_{t|t} A^T P_{t+1|t}^-1
///   x_{t|T} = x_{t|t} + L_t (x_{t+1|T} - x_{t+1|t})
///   P_{t|T} = P_{t|t} + L_t (P_{t+1|T} - P_{t+1|t}) L_t^T
inline KalmanTrace rts_smooth(KalmanTrace tr, const Matrix& a = Matrix(), double jitter = linalg::kDefaultJitter) {
    const std::size_t t_count = tr.n_times();
    if (t_count == 0) throw std::invalid_argument("rts_smooth: empty trace");
    const auto k = tr.x_filt.front().size();
    const auto d = linalg::active_dim(k);
    const Matrix trans = a.size() == 0 ? Matrix::Identity(d, d) : Matrix(a.topLeftCorner(d, d));
    tr.x_smooth.assign(t_count, Vector());
    tr.p_smooth.assign(t_count, Matrix());
    tr.l_mats.assign(t_count - 1, Matrix());
    tr.x_smooth.back() = tr.x_filt.back();
    tr.p_smooth.back() = tr.p_filt.back();
    for (std::size_t t = t_count - 1; t-- > 0;) {
        const Matrix pf = tr.p_filt[t].topLeftCorner(d, d);
        const Matrix pp = tr.p_pred[t + 1].topLeftCorner(d, d);
        const Matrix l = pf * trans.transpose() * linalg::spd_inverse(pp, jitter, "predicted covariance");
        const Vector xs = tr.x_filt[t].head(d) + l * (tr.x_smooth[t + 1].head(d) - tr.x_pred[t + 1].head(d));
        const Matrix ps = linalg::symmetrize(pf + l * (tr.p_smooth[t + 1].topLeftCorner(d, d) - pp) * l.transpose());
        tr.l_mats[t] = linalg::embed(l, k);
        tr.x_smooth[t] = linalg::embed(xs, k);
        tr.p_smooth[t] = linalg::embed(ps, k);
    }
    return tr;
}

}  // namespace lnmmsb
