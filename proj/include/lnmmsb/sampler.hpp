#pragma once

// Generative samplers for static LNMMSB networks and dMMSB sequences.
//
// Draw order is fixed so fixtures are bit-reproducible for a seed: all
// per-node role vectors in node order, then every ordered pair (i, j),
// i != j, row-major, drawing the sender role, the receiver role and the
// edge. Undirected networks visit each pair i < j once and mirror it.
// Degenerate (PSD but singular) covariances are accepted here so pure
// memberships can be built; inference requires SPD active blocks.

#include <cstdint>
#include <stdexcept>
#include <vector>

#include <Eigen/Eigenvalues>

#include "lnmmsb/linalg.hpp"
#include "lnmmsb/logistic.hpp"
#include "lnmmsb/rng.hpp"
#include "lnmmsb/types.hpp"

namespace lnmmsb {

/// Latent role indicators of one snapshot, indexed by i * N + j. For
/// undirected networks only i < j is populated.
struct RoleDraws {
    std::vector<std::uint32_t> to;    // z_{i->j}: role of i when sending to j
    std::vector<std::uint32_t> from;  // z_{j<-i}: role of j when receiving from i
};

struct StaticSample {
    NetSeq net;  // one snapshot
    std::vector<Vector> gammas;
    std::vector<Vector> pis;
    RoleDraws z;
};

struct DynamicSample {
    NetSeq net;
    std::vector<Vector> mu_traj;
    std::vector<std::vector<Vector>> gammas;  // [t][i]
    std::vector<std::vector<Vector>> pis;     // [t][i]
    std::vector<RoleDraws> z;
};

namespace detail {

inline void require_psd_role_cov(const Matrix& m, Eigen::Index k, const char* what) {
    if (m.rows() != k || m.cols() != k) throw std::invalid_argument(std::string(what) + ": expected K x K");
    if (!m.allFinite()) throw std::invalid_argument(std::string(what) + ": non-finite entries");
    if (!linalg::is_symmetric(m, 1e-10)) throw std::invalid_argument(std::string(what) + ": not symmetric");
    if (linalg::active_dim(k) > 0 && linalg::min_eigenvalue(linalg::active_block(m)) < -1e-12)
        throw std::invalid_argument(std::string(what) + ": not positive semidefinite");
}

inline void require_role_vector(const Vector& v, Eigen::Index k, const char* what) {
    if (v.size() != k) throw std::invalid_argument(std::string(what) + ": expected length K");
    if (!v.allFinite()) throw std::invalid_argument(std::string(what) + ": non-finite entries");
    if (v[k - 1] != 0.0) throw std::invalid_argument(std::string(what) + ": last entry must be 0");
}

/// A matrix root R with R R^T = cov on the active block; tolerates PSD input.
inline Matrix covariance_root(const Matrix& cov) {
    const Matrix act = linalg::active_block(cov);
    if (act.rows() == 0) return act;
    Eigen::SelfAdjointEigenSolver<Matrix> es(linalg::symmetrize(act));
    return es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

inline Vector draw_role_vector(const Vector& mean, const Matrix& root, Rng& rng) {
    Vector out = mean;
    const auto a = root.rows();
    if (a > 0) out.head(a) += root * rng.standard_normal(a);
    out[out.size() - 1] = 0.0;
    return out;
}

}  // namespace detail

/// Draws edges for one snapshot given membership vectors. Fills `adj` and
/// returns the role indicators.
inline RoleDraws sample_edges(const std::vector<Vector>& pis, const CompatMatrix& b, bool directed, Rng& rng,
                              Adjacency& adj) {
    const std::size_t n = pis.size();
    if (adj.size() != n) adj = Adjacency(n);
    RoleDraws z{std::vector<std::uint32_t>(n * n, 0), std::vector<std::uint32_t>(n * n, 0)};
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = directed ? 0 : i + 1; j < n; ++j) {
            if (i == j) continue;
            const auto u = rng.categorical(pis[i]);
            const auto v = rng.categorical(pis[j]);
            const bool e = rng.bernoulli(b(static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(v)));
            z.to[i * n + j] = static_cast<std::uint32_t>(u);
            z.from[i * n + j] = static_cast<std::uint32_t>(v);
            adj.set(i, j, e);
            if (!directed) adj.set(j, i, e);
        }
    }
    return z;
}

/// Static LNMMSB: gamma_i ~ N(mu, Sigma) on the active coordinates,
/// pi_i = softmax(gamma_i), then edges. `dims.n_times` is ignored.
inline StaticSample sample_static_network(const StaticParams& params, const Dims& dims, std::uint64_t seed,
                                          bool directed = true) {
    dims.validate();
    const auto k = static_cast<Eigen::Index>(dims.n_roles);
    detail::require_role_vector(params.mu, k, "mu");
    detail::require_psd_role_cov(params.sigma, k, "sigma");
    if (params.b.n_roles() != dims.n_roles) throw std::invalid_argument("B does not match K");

    Rng rng(seed);
    const Matrix root = detail::covariance_root(params.sigma);
    StaticSample out;
    out.net = NetSeq(dims.n_nodes, 1, directed);
    for (std::size_t i = 0; i < dims.n_nodes; ++i) {
        out.gammas.push_back(detail::draw_role_vector(params.mu, root, rng));
        out.pis.push_back(logistic_transform(out.gammas.back()));
    }
    out.z = sample_edges(out.pis, params.b, directed, rng, out.net.snapshots[0]);
    return out;
}

/// dMMSB: mu^(1) ~ N(nu, Phi), mu^(t) ~ N(A mu^(t-1), Phi), then a static
/// draw per time with prior N(mu^(t), Sigma^(t)) and a shared B.
/// `params.mu_traj` is ignored.
inline DynamicSample sample_dynamic_network(const DynParams& params, const Dims& dims, std::uint64_t seed,
                                            bool directed = true) {
    dims.validate();
    const auto k = static_cast<Eigen::Index>(dims.n_roles);
    const std::size_t t_count = dims.n_times;
    detail::require_role_vector(params.nu, k, "nu");
    detail::require_psd_role_cov(params.phi, k, "phi");
    if (params.sigmas.size() != t_count) throw std::invalid_argument("need one Sigma per time point");
    for (const auto& s : params.sigmas) detail::require_psd_role_cov(s, k, "sigma");
    if (params.b.n_roles() != dims.n_roles) throw std::invalid_argument("B does not match K");
    const Matrix a = params.a.size() == 0 ? Matrix::Identity(k, k) : params.a;
    if (a.rows() != k || a.cols() != k) throw std::invalid_argument("A must be K x K");

    const Rng root_rng(seed);
    DynamicSample out;
    out.net = NetSeq(dims.n_nodes, t_count, directed);

    Rng chain = root_rng.split(0);
    const Matrix phi_root = detail::covariance_root(params.phi);
    for (std::size_t t = 0; t < t_count; ++t) {
        const Vector mean = t == 0 ? params.nu : Vector(a * out.mu_traj.back());
        out.mu_traj.push_back(detail::draw_role_vector(mean, phi_root, chain));
    }

    for (std::size_t t = 0; t < t_count; ++t) {
        Rng rng = root_rng.split(t + 1);
        const Matrix root = detail::covariance_root(params.sigmas[t]);
        std::vector<Vector> gammas, pis;
        for (std::size_t i = 0; i < dims.n_nodes; ++i) {
            gammas.push_back(detail::draw_role_vector(out.mu_traj[t], root, rng));
            pis.push_back(logistic_transform(gammas.back()));
        }
        out.z.push_back(sample_edges(pis, params.b, directed, rng, out.net.snapshots[t]));
        out.gammas.push_back(std::move(gammas));
        out.pis.push_back(std::move(pis));
    }
    return out;
}

/// Settings of the synthetic benchmark generator. Role covariances are
/// `sigma_scale * (I + 1 1^T)` on the active block, so the K roles are
/// exchangeable and most nodes are nearly pure. B has a diagonal falling
/// linearly from `diag_high` to `diag_low` and constant `off_diag` entries.
struct ScenarioCfg {
    double sigma_scale = 10.0;
    double diag_high = 0.9;
    double diag_low = 0.6;
    double off_diag = 0.02;
    double phi_scale = 0.25;  // random-walk step variance of mu^(t)
};

inline Matrix scenario_compat(std::size_t k, const ScenarioCfg& cfg) {
    const auto kk = static_cast<Eigen::Index>(k);
    Matrix b = Matrix::Constant(kk, kk, cfg.off_diag);
    for (Eigen::Index r = 0; r < kk; ++r)
        b(r, r) = kk == 1 ? cfg.diag_high
                          : cfg.diag_high - (cfg.diag_high - cfg.diag_low) * static_cast<double>(r) /
                                                static_cast<double>(kk - 1);
    return b;
}

inline Matrix scenario_covariance(std::size_t k, double scale) {
    const auto d = linalg::active_dim(static_cast<Eigen::Index>(k));
    const Matrix act = scale * (Matrix::Identity(d, d) + Matrix::Ones(d, d));
    return linalg::embed(act, static_cast<Eigen::Index>(k));
}

inline StaticParams scenario_static_params(std::size_t k, const ScenarioCfg& cfg = {}) {
    return StaticParams{Vector::Zero(static_cast<Eigen::Index>(k)), scenario_covariance(k, cfg.sigma_scale),
                        CompatMatrix(scenario_compat(k, cfg))};
}

inline DynParams scenario_dynamic_params(std::size_t k, std::size_t n_times, const ScenarioCfg& cfg = {}) {
    const auto kk = static_cast<Eigen::Index>(k);
    DynParams p;
    p.nu = Vector::Zero(kk);
    const auto d = linalg::active_dim(kk);
    p.phi = linalg::embed(Matrix(cfg.phi_scale * Matrix::Identity(d, d)), kk);
    p.sigmas.assign(n_times, scenario_covariance(k, cfg.sigma_scale));
    p.b = CompatMatrix(scenario_compat(k, cfg));
    return p;
}

}  // namespace lnmmsb
