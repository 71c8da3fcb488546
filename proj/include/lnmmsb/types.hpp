#pragma once

// Core domain types shared by every lnmmsb module.
//
// Vectors over roles always have length K. The K-th coordinate of every
// pre-transformed role vector (gamma, mu, nu) is pinned to zero, and every
// covariance over roles (Sigma, Phi, posterior covariances) keeps its K-th
// row and column at zero. Gaussian algebra runs on the leading
// (K-1)x(K-1) "active" block.

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace lnmmsb {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Malformed input data (files, indices, dimensions).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Unrecoverable numerical failure, e.g. a singular matrix after jitter retry.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class ModelKind { static_model, dynamic_model };

struct Dims {
    std::size_t n_nodes = 2;
    std::size_t n_roles = 1;
    std::size_t n_times = 1;

    void validate() const {
        if (n_nodes < 2) throw std::invalid_argument("Dims: need at least 2 nodes");
        if (n_roles < 1) throw std::invalid_argument("Dims: need at least 1 role");
        if (n_times < 1) throw std::invalid_argument("Dims: need at least 1 time point");
    }
};

/// A binary adjacency matrix over N nodes. Diagonal entries are never stored
/// as edges.
class Adjacency {
public:
    Adjacency() = default;
    explicit Adjacency(std::size_t n) : n_(n), cells_(n * n, 0) {}

    std::size_t size() const { return n_; }

    bool operator()(std::size_t i, std::size_t j) const { return cells_[i * n_ + j] != 0; }

    void set(std::size_t i, std::size_t j, bool v) {
        if (i == j) throw std::invalid_argument("Adjacency: self-edges are not allowed");
        cells_[i * n_ + j] = v ? 1 : 0;
    }

    std::size_t edge_count() const {
        std::size_t c = 0;
        for (auto v : cells_) c += v;
        return c;
    }

    bool operator==(const Adjacency&) const = default;

private:
    std::size_t n_ = 0;
    std::vector<std::uint8_t> cells_;
};

/// T adjacency snapshots over a fixed vertex set.
struct NetSeq {
    std::vector<Adjacency> snapshots;
    bool directed = true;

    NetSeq() = default;
    NetSeq(std::size_t n_nodes, std::size_t n_times, bool is_directed)
        : snapshots(n_times, Adjacency(n_nodes)), directed(is_directed) {}

    std::size_t n_nodes() const { return snapshots.empty() ? 0 : snapshots.front().size(); }
    std::size_t n_times() const { return snapshots.size(); }

    /// Sets e_ij at time t (0-based); mirrors the edge when undirected.
    void set_edge(std::size_t t, std::size_t i, std::size_t j, bool v) {
        snapshots.at(t).set(i, j, v);
        if (!directed) snapshots[t].set(j, i, v);
    }

    /// Number of observed dyads per snapshot.
    std::size_t dyads_per_time() const {
        const auto n = n_nodes();
        return directed ? n * (n - 1) : n * (n - 1) / 2;
    }

    void validate() const {
        if (snapshots.empty()) throw DataError("network has no time points");
        const auto n = n_nodes();
        if (n < 2) throw DataError("network needs at least 2 nodes");
        for (const auto& a : snapshots) {
            if (a.size() != n) throw DataError("snapshots disagree on node count");
            if (!directed) {
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = i + 1; j < n; ++j)
                        if (a(i, j) != a(j, i)) throw DataError("undirected network is not symmetric");
            }
        }
    }

    bool operator==(const NetSeq&) const = default;
};

/// K x K role-compatibility matrix with entries in [0, 1].
class CompatMatrix {
public:
    CompatMatrix() = default;
    explicit CompatMatrix(Matrix beta) : beta_(std::move(beta)) { validate(); }

    static CompatMatrix constant(std::size_t k, double v) {
        return CompatMatrix(Matrix::Constant(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k), v));
    }

    const Matrix& matrix() const { return beta_; }
    double operator()(Eigen::Index k, Eigen::Index l) const { return beta_(k, l); }
    std::size_t n_roles() const { return static_cast<std::size_t>(beta_.rows()); }

private:
    void validate() const {
        if (beta_.rows() != beta_.cols()) throw std::invalid_argument("CompatMatrix must be square");
        for (Eigen::Index i = 0; i < beta_.size(); ++i) {
            const double v = beta_.data()[i];
            if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("CompatMatrix entries must lie in [0, 1]");
        }
    }

    Matrix beta_;
};

struct StaticParams {
    Vector mu;      // length K, mu[K-1] == 0
    Matrix sigma;   // K x K, K-th row/column zero
    CompatMatrix b;

    std::size_t n_roles() const { return static_cast<std::size_t>(mu.size()); }
};

struct DynParams {
    Vector nu;                  // prior mean of the first trajectory state
    Matrix phi;                 // transition-noise covariance
    std::vector<Matrix> sigmas; // per-time membership covariance
    CompatMatrix b;
    Matrix a;                   // transition matrix, identity unless overridden
    std::vector<Vector> mu_traj;

    std::size_t n_roles() const { return static_cast<std::size_t>(nu.size()); }
    std::size_t n_times() const { return sigmas.size(); }

    /// Static view of time t (0-based) using mu_traj[t] as the prior mean.
    StaticParams at(std::size_t t) const { return StaticParams{mu_traj.at(t), sigmas.at(t), b}; }
};

/// Gaussian variational posterior over one node's role vector.
struct MembershipPosterior {
    Vector gamma_tilde;  // length K, last entry 0
    Matrix sigma_tilde;  // K x K, K-th row/column zero
};

}  // namespace lnmmsb
