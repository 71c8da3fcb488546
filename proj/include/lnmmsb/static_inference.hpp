#pragma once

// Generalized mean-field inference and variational EM for the static
// logistic-normal MMSB.
//
// The posterior is approximated by q(gamma) q(z) where each q(z_{i->j},
// z_{j<-i}) is a K x K multinomial (delta) and each q(gamma_i) is Gaussian,
// obtained from a second-order expansion of the log-partition C(gamma_i)
// around the previous iterate.
//
// Convergence is measured on a surrogate of the variational lower bound
// that is available in closed form under q:
//
//   sum_pairs sum_uv delta_uv [log w_uv(e) - log delta_uv]
//   + sum_i [<m_i>^T gamma~_i - c (C(gamma~_i) + tr(H(gamma~_i) Sigma~_i) / 2)]
//   + sum_i (E_q[log N(gamma_i; mu, Sigma)] + entropy of q(gamma_i))
//
// where w_uv(e) = beta_uv^e (1 - beta_uv)^(1-e) and c is the number of
// role draws per node: 2(N-1) for directed networks, N-1 for undirected.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include "lnmmsb/init.hpp"
#include "lnmmsb/linalg.hpp"
#include "lnmmsb/logistic.hpp"
#include "lnmmsb/parallel.hpp"
#include "lnmmsb/rng.hpp"
#include "lnmmsb/types.hpp"

namespace lnmmsb {

inline constexpr double kBetaClamp = 1e-6;

struct InferCfg {
    double tol = 1e-6;
    int max_inner = 200;
    int max_outer = 100;
    int n_restarts = 5;
    double jitter = linalg::kDefaultJitter;
    /// How each restart initializes q(gamma): `random` draws gamma~ around
    /// the prior mean with standard deviation `init_scale`; `kmeans` favors
    /// the role of the node's k-means cluster with weight `init_weight`.
    InitMethod init = InitMethod::kmeans;
    double init_scale = 1.0;
    double init_weight = 0.7;
    unsigned threads = 1;
};

/// Learning options for the variational EM loops. Switching a parameter
/// off keeps its initial (or supplied) value.
struct FitCfg : InferCfg {
    bool learn_b = true;
    bool learn_mu = true;
    bool learn_sigma = true;
};

/// Iteration record of an inference or fitting run.
///
/// `objective_trace` holds the surrogate objective (see the header comment)
/// after every inner iteration of the winning restart; `restart_objectives`
/// holds the final objective of every restart.
struct FitReport {
    bool converged = false;
    int n_outer = 0;
    int n_inner = 0;
    std::vector<double> objective_trace;
    std::size_t restart_index = 0;
    std::vector<double> restart_objectives;
    bool degenerate_edges = false;

    double final_objective() const {
        return objective_trace.empty() ? -std::numeric_limits<double>::infinity() : objective_trace.back();
    }
};

// ---------------------------------------------------------------------------
// Single-pair and single-node updates

struct EdgePosterior {
    Matrix delta;  // K x K, delta(u, v) for sender role u and receiver role v
    bool degenerate = false;
};

/// q(z_{i->j}, z_{j<-i}) given expected role vectors of both endpoints.
/// Evaluated in log-space with beta clamped to [1e-6, 1 - 1e-6]. When the
/// unnormalized mass vanishes the result is uniform and flagged degenerate.
inline EdgePosterior update_edge_posterior(bool e, const Vector& egamma_i, const Vector& egamma_j,
                                           const CompatMatrix& b) {
    const auto k = static_cast<Eigen::Index>(b.n_roles());
    if (egamma_i.size() != k || egamma_j.size() != k)
        throw std::invalid_argument("update_edge_posterior: role vectors must have length K");
    if (!egamma_i.allFinite() || !egamma_j.allFinite())
        throw std::invalid_argument("update_edge_posterior: non-finite expectations");
    Matrix logd(k, k);
    for (Eigen::Index u = 0; u < k; ++u)
        for (Eigen::Index v = 0; v < k; ++v) {
            const double beta = std::clamp(b(u, v), kBetaClamp, 1.0 - kBetaClamp);
            logd(u, v) = egamma_i[u] + egamma_j[v] + (e ? std::log(beta) : std::log1p(-beta));
        }
    const double mx = logd.maxCoeff();
    Matrix d = (logd.array() - mx).exp();
    const double s = d.sum();
    if (!(s > 0.0) || !std::isfinite(s)) return {Matrix::Constant(k, k, 1.0 / static_cast<double>(k * k)), true};
    d /= s;
    return {std::move(d), false};
}

struct RoleExpectations {
    Vector to;    // <z_{i->j}>, row sums of delta
    Vector from;  // <z_{j<-i}>, column sums of delta
};

inline RoleExpectations edge_role_expectations(const Matrix& delta) {
    return {delta.rowwise().sum(), delta.colwise().sum().transpose()};
}

/// Number of role draws each node makes: 2(N-1) directed, N-1 undirected.
inline double role_draw_count(std::size_t n_nodes, bool directed) {
    const double n1 = static_cast<double>(n_nodes) - 1.0;
    return directed ? 2.0 * n1 : n1;
}

/// Laplace update of q(gamma_i) expanded at gamma_hat, with an explicit
/// role-draw coefficient `c`:
///   Sigma~ = (Sigma^-1 + c H)^-1
///   gamma~ = mu + Sigma~ (<m> - c g + c H gamma_hat - c H mu)
/// evaluated on the active block; gamma~_K stays 0.
inline MembershipPosterior laplace_membership_update(const Vector& m_expect, const Vector& mu, const Matrix& sigma,
                                                     const Vector& gamma_hat, double c,
                                                     double jitter = linalg::kDefaultJitter) {
    const auto k = mu.size();
    if (m_expect.size() != k || gamma_hat.size() != k || sigma.rows() != k || sigma.cols() != k)
        throw std::invalid_argument("update_membership_posterior: dimension mismatch");
    if (gamma_hat[k - 1] != 0.0 || mu[k - 1] != 0.0)
        throw std::invalid_argument("update_membership_posterior: last role coordinate must be pinned to 0");
    const auto a = linalg::active_dim(k);
    const auto [g, h] = grad_hess_log_partition(gamma_hat);
    const Matrix h_act = h.topLeftCorner(a, a);
    const Matrix prec = linalg::spd_inverse(sigma.topLeftCorner(a, a), jitter, "prior covariance");
    const Matrix sig_t = linalg::spd_inverse(prec + c * h_act, jitter, "posterior precision");
    const Vector mu_a = mu.head(a);
    const Vector rhs = m_expect.head(a) - c * g.head(a) + c * h_act * gamma_hat.head(a) - c * h_act * mu_a;
    return {linalg::embed(Vector(mu_a + sig_t * rhs), k), linalg::embed(sig_t, k)};
}

/// Laplace update for a node of an N-node network.
inline MembershipPosterior update_membership_posterior(const Vector& m_expect, const Vector& mu, const Matrix& sigma,
                                                       const Vector& gamma_hat, std::size_t n_nodes,
                                                       bool directed = true,
                                                       double jitter = linalg::kDefaultJitter) {
    if (n_nodes < 2) throw std::invalid_argument("update_membership_posterior: need N >= 2");
    return laplace_membership_update(m_expect, mu, sigma, gamma_hat, role_draw_count(n_nodes, directed), jitter);
}

// ---------------------------------------------------------------------------
// Bulk edge posteriors for one snapshot

/// delta for every observed dyad of one snapshot, stored contiguously. Pairs
/// are ordered row-major: all (i, j), i != j, for directed networks and
/// i < j for undirected ones.
class EdgePosteriors {
public:
    using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

    EdgePosteriors() = default;
    EdgePosteriors(std::size_t n_nodes, std::size_t k, bool directed) : k_(k) {
        for (std::size_t i = 0; i < n_nodes; ++i)
            for (std::size_t j = directed ? 0 : i + 1; j < n_nodes; ++j)
                if (i != j) pairs_.emplace_back(static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j));
        delta_.assign(pairs_.size() * k * k, 1.0 / static_cast<double>(k * k));
    }

    std::size_t size() const { return pairs_.size(); }
    std::size_t n_roles() const { return k_; }
    const std::pair<std::uint32_t, std::uint32_t>& pair(std::size_t p) const { return pairs_[p]; }

    double* data(std::size_t p) { return delta_.data() + p * k_ * k_; }
    const double* data(std::size_t p) const { return delta_.data() + p * k_ * k_; }

    Eigen::Map<const RowMajor> at(std::size_t p) const {
        const auto k = static_cast<Eigen::Index>(k_);
        return Eigen::Map<const RowMajor>(data(p), k, k);
    }

private:
    std::size_t k_ = 0;
    std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs_;
    std::vector<double> delta_;
};

/// Sufficient statistics for the B update: sum e*delta and sum delta.
struct BStats {
    Matrix num;
    Matrix den;

    explicit BStats(std::size_t k = 0)
        : num(Matrix::Zero(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k))), den(num) {}

    void add(const Adjacency& adj, const EdgePosteriors& edges) {
        for (std::size_t p = 0; p < edges.size(); ++p) {
            const auto [i, j] = edges.pair(p);
            const auto d = edges.at(p);
            den += d;
            if (adj(i, j)) num += d;
        }
    }

    /// beta_kl = num_kl / den_kl; cells without posterior mass keep `previous`.
    CompatMatrix estimate(const CompatMatrix& previous) const {
        Matrix out = previous.matrix();
        for (Eigen::Index i = 0; i < num.size(); ++i) {
            const double d = den.data()[i];
            if (d > 0.0) out.data()[i] = std::clamp(num.data()[i] / d, 0.0, 1.0);
        }
        return CompatMatrix(std::move(out));
    }
};

inline CompatMatrix mstep_b_static(const Adjacency& adj, const EdgePosteriors& edges, const CompatMatrix& previous) {
    BStats s(edges.n_roles());
    s.add(adj, edges);
    return s.estimate(previous);
}

/// Result of one sweep over all dyads.
struct EdgeSweep {
    std::vector<Vector> m;  // expected role counts <m_i>
    double edge_term = 0.0; // sum delta (log w - log delta)
    bool degenerate = false;
};

/// Recomputes every delta from the current gamma~ (bulk-synchronous) and
/// accumulates the expected role counts.
inline EdgeSweep edge_sweep(const Adjacency& adj, const std::vector<MembershipPosterior>& posts,
                            const CompatMatrix& b, EdgePosteriors& edges) {
    const auto k = static_cast<Eigen::Index>(b.n_roles());
    const std::size_t n = posts.size();
    const std::size_t kk = static_cast<std::size_t>(k * k);
    std::vector<Vector> p(n);
    for (std::size_t i = 0; i < n; ++i) p[i] = logistic_transform(posts[i].gamma_tilde);

    std::vector<double> w1(kk), w0(kk), lw1(kk), lw0(kk);
    for (Eigen::Index u = 0; u < k; ++u)
        for (Eigen::Index v = 0; v < k; ++v) {
            const double beta = std::clamp(b(u, v), kBetaClamp, 1.0 - kBetaClamp);
            const auto c = static_cast<std::size_t>(u * k + v);
            w1[c] = beta;
            w0[c] = 1.0 - beta;
            lw1[c] = std::log(beta);
            lw0[c] = std::log1p(-beta);
        }

    EdgeSweep out;
    out.m.assign(n, Vector::Zero(k));
    for (std::size_t q = 0; q < edges.size(); ++q) {
        const auto [i, j] = edges.pair(q);
        const bool e = adj(i, j);
        const auto& w = e ? w1 : w0;
        const auto& lw = e ? lw1 : lw0;
        double* d = edges.data(q);
        double s = 0.0;
        for (Eigen::Index u = 0; u < k; ++u)
            for (Eigen::Index v = 0; v < k; ++v) {
                const auto c = static_cast<std::size_t>(u * k + v);
                d[c] = p[i][u] * p[j][v] * w[c];
                s += d[c];
            }
        if (!(s > 0.0) || !std::isfinite(s)) {
            out.degenerate = true;
            std::fill(d, d + kk, 1.0 / static_cast<double>(kk));
        } else {
            for (std::size_t c = 0; c < kk; ++c) d[c] /= s;
        }
        Vector& mi = out.m[i];
        Vector& mj = out.m[j];
        for (Eigen::Index u = 0; u < k; ++u)
            for (Eigen::Index v = 0; v < k; ++v) {
                const auto c = static_cast<std::size_t>(u * k + v);
                mi[u] += d[c];
                mj[v] += d[c];
                if (d[c] > 0.0) out.edge_term += d[c] * (lw[c] - std::log(d[c]));
            }
    }
    return out;
}

namespace detail {

struct PriorCache {
    Vector mu_a;
    Matrix prec;
    double log_det = 0.0;

    PriorCache(const Vector& mu, const Matrix& sigma, double jitter) {
        const auto a = linalg::active_dim(mu.size());
        mu_a = mu.head(a);
        const Matrix s = sigma.topLeftCorner(a, a);
        prec = linalg::spd_inverse(s, jitter, "prior covariance");
        log_det = linalg::log_det_spd(s, jitter);
    }
};

/// Exact per-node objective maximized by the Laplace fixed point:
/// -1/2 (g - mu)^T Sigma^-1 (g - mu) + m^T g - c C(g).
inline double node_objective(const Vector& gamma, const Vector& m, const PriorCache& prior, double c) {
    const auto a = prior.mu_a.size();
    const Vector d = gamma.head(a) - prior.mu_a;
    return -0.5 * d.dot(prior.prec * d) + m.dot(gamma) - c * log_partition(gamma);
}

}  // namespace detail

/// Laplace update of every q(gamma_i) with the previous gamma~ as expansion
/// point. When the full step lowers the node objective it is halved until
/// it no longer does; the covariance is the Laplace covariance at the
/// expansion point.
inline void membership_sweep(const std::vector<Vector>& m, const Vector& mu, const Matrix& sigma, double c,
                             std::vector<MembershipPosterior>& posts, double jitter) {
    const auto k = mu.size();
    if (k == 1) {
        for (auto& q : posts) q = {Vector::Zero(1), Matrix::Zero(1, 1)};
        return;
    }
    const detail::PriorCache prior(mu, sigma, jitter);
    for (std::size_t i = 0; i < posts.size(); ++i) {
        const Vector gamma_hat = posts[i].gamma_tilde;
        MembershipPosterior next = laplace_membership_update(m[i], mu, sigma, gamma_hat, c, jitter);
        const double f0 = detail::node_objective(gamma_hat, m[i], prior, c);
        double f1 = detail::node_objective(next.gamma_tilde, m[i], prior, c);
        const Vector step = next.gamma_tilde - gamma_hat;
        double alpha = 1.0;
        for (int h = 0; h < 50 && !(f1 >= f0 - 1e-12 * std::abs(f0)); ++h) {
            alpha *= 0.5;
            next.gamma_tilde = gamma_hat + alpha * step;
            f1 = detail::node_objective(next.gamma_tilde, m[i], prior, c);
        }
        if (!(f1 >= f0 - 1e-12 * std::abs(f0))) next.gamma_tilde = gamma_hat;
        next.gamma_tilde[k - 1] = 0.0;
        posts[i] = std::move(next);
    }
}

/// Node-side terms of the surrogate objective for one snapshot.
inline double membership_term(const std::vector<Vector>& m, const Vector& mu, const Matrix& sigma, double c,
                              const std::vector<MembershipPosterior>& posts, double jitter) {
    constexpr double kLog2Pi = 1.8378770664093454835606594728112;
    const auto k = mu.size();
    const auto a = linalg::active_dim(k);
    if (a == 0) return 0.0;
    const detail::PriorCache prior(mu, sigma, jitter);
    double total = 0.0;
    for (std::size_t i = 0; i < posts.size(); ++i) {
        const Vector& gt = posts[i].gamma_tilde;
        const Matrix st = posts[i].sigma_tilde.topLeftCorner(a, a);
        const auto [g, h] = grad_hess_log_partition(gt);
        const double c_tilde = log_partition(gt) + 0.5 * (h.topLeftCorner(a, a).cwiseProduct(st)).sum();
        const Vector d = gt.head(a) - prior.mu_a;
        const double e_log_prior = -0.5 * (static_cast<double>(a) * kLog2Pi + prior.log_det + d.dot(prior.prec * d) +
                                           prior.prec.cwiseProduct(st).sum());
        const double entropy = 0.5 * (static_cast<double>(a) * (1.0 + kLog2Pi) + linalg::log_det_spd(st, jitter));
        total += m[i].dot(gt) - c * c_tilde + e_log_prior + entropy;
    }
    return total;
}

/// Random initial posteriors: gamma~ = mu + scale * N(0, I) on the active
/// block, Sigma~ = Sigma.
inline std::vector<MembershipPosterior> init_posteriors(std::size_t n_nodes, const Vector& mu, const Matrix& sigma,
                                                        double scale, Rng& rng) {
    const auto k = mu.size();
    const auto a = linalg::active_dim(k);
    std::vector<MembershipPosterior> out;
    out.reserve(n_nodes);
    for (std::size_t i = 0; i < n_nodes; ++i) {
        Vector g = mu;
        if (a > 0) g.head(a) += scale * rng.standard_normal(a);
        g[k - 1] = 0.0;
        out.push_back({std::move(g), sigma});
    }
    return out;
}

/// Starting posteriors for one restart according to `cfg.init`.
inline std::vector<MembershipPosterior> initial_posteriors(const Adjacency& adj, const Vector& mu,
                                                           const Matrix& sigma, const InferCfg& cfg, Rng& rng) {
    const auto k = static_cast<std::size_t>(mu.size());
    if (cfg.init == InitMethod::random || k == 1) return init_posteriors(adj.size(), mu, sigma, cfg.init_scale, rng);
    const auto labels = kmeans_roles(adj, k, rng);
    std::vector<MembershipPosterior> out;
    out.reserve(labels.size());
    for (auto r : labels) out.push_back({role_favoring_gamma(k, r, cfg.init_weight), sigma});
    return out;
}

inline bool relative_change_below(double prev, double cur, double tol) {
    return std::abs(cur - prev) <= tol * std::max(std::abs(prev), 1e-300);
}

// ---------------------------------------------------------------------------
// Inference with fixed parameters

struct StaticInference {
    std::vector<MembershipPosterior> posteriors;
    EdgePosteriors edges;
    FitReport report;
};

namespace detail {

inline void require_static_params(const StaticParams& params, std::size_t n_roles) {
    const auto k = static_cast<Eigen::Index>(n_roles);
    if (params.mu.size() != k || params.b.n_roles() != n_roles)
        throw std::invalid_argument("static parameters disagree on K");
    if (!params.mu.allFinite() || params.mu[k - 1] != 0.0)
        throw std::invalid_argument("mu must be finite with last entry 0");
    linalg::require_role_covariance(params.sigma, k, "sigma");
}

inline void require_snapshot(const NetSeq& net, std::size_t t) {
    net.validate();
    if (t >= net.n_times()) throw std::invalid_argument("time index out of range");
}

/// One static GMF run from a given start. Fills `state` in place.
inline FitReport run_static_inference(const Adjacency& adj, bool directed, const StaticParams& params,
                                      const InferCfg& cfg, std::vector<MembershipPosterior>& posts,
                                      EdgePosteriors& edges) {
    FitReport rep;
    const double c = role_draw_count(adj.size(), directed);
    const bool single_role = params.n_roles() == 1;
    double prev = 0.0;
    for (int it = 1; it <= cfg.max_inner; ++it) {
        EdgeSweep sweep = edge_sweep(adj, posts, params.b, edges);
        rep.degenerate_edges = rep.degenerate_edges || sweep.degenerate;
        membership_sweep(sweep.m, params.mu, params.sigma, c, posts, cfg.jitter);
        const double obj = sweep.edge_term + membership_term(sweep.m, params.mu, params.sigma, c, posts, cfg.jitter);
        rep.objective_trace.push_back(obj);
        rep.n_inner = it;
        if (single_role || (it > 1 && relative_change_below(prev, obj, cfg.tol))) {
            rep.converged = true;
            break;
        }
        prev = obj;
    }
    rep.n_outer = 1;
    return rep;
}

}  // namespace detail

/// GMF inference on snapshot `t` with fixed (mu, Sigma, B). With `init`
/// given a single run starts from it; otherwise `cfg.n_restarts` random
/// starts are run and the one with the best final objective is returned.
inline StaticInference infer_lnmmsb(const NetSeq& net, const StaticParams& params, const InferCfg& cfg,
                                    std::uint64_t seed,
                                    const std::optional<std::vector<MembershipPosterior>>& init = std::nullopt,
                                    std::size_t t = 0) {
    detail::require_snapshot(net, t);
    const std::size_t k = params.n_roles();
    detail::require_static_params(params, k);
    const std::size_t n = net.n_nodes();
    const std::size_t restarts = init ? 1 : static_cast<std::size_t>(std::max(1, cfg.n_restarts));
    if (init && init->size() != n) throw std::invalid_argument("initial posteriors do not match N");

    std::vector<StaticInference> runs(restarts);
    const Rng root(seed);
    detail::parallel_for(restarts, cfg.threads, [&](std::size_t r) {
        Rng rng = root.split(r);
        auto& run = runs[r];
        run.posteriors = init ? *init : initial_posteriors(net.snapshots[t], params.mu, params.sigma, cfg, rng);
        run.edges = EdgePosteriors(n, k, net.directed);
        run.report = detail::run_static_inference(net.snapshots[t], net.directed, params, cfg, run.posteriors,
                                                  run.edges);
    });

    std::size_t best = 0;
    std::vector<double> finals;
    for (std::size_t r = 0; r < restarts; ++r) {
        finals.push_back(runs[r].report.final_objective());
        if (finals[r] > finals[best]) best = r;
    }
    StaticInference out = std::move(runs[best]);
    out.report.restart_index = best;
    out.report.restart_objectives = std::move(finals);
    return out;
}

// ---------------------------------------------------------------------------
// Variational EM

/// mu^ = mean of gamma~_i; Sigma^ = mean of Sigma~_i plus the population
/// covariance of the gamma~_i. The active block is floored at `jitter`.
inline std::pair<Vector, Matrix> mstep_mu_sigma_static(const std::vector<MembershipPosterior>& posts,
                                                       double jitter = linalg::kDefaultJitter) {
    if (posts.size() < 2) throw std::invalid_argument("mstep_mu_sigma_static: need N >= 2");
    const auto k = posts.front().gamma_tilde.size();
    const auto a = linalg::active_dim(k);
    const double n = static_cast<double>(posts.size());
    Vector mu = Vector::Zero(k);
    for (const auto& q : posts) mu += q.gamma_tilde;
    mu /= n;
    mu[k - 1] = 0.0;
    Matrix s = Matrix::Zero(a, a);
    for (const auto& q : posts) {
        const Vector d = q.gamma_tilde.head(a) - mu.head(a);
        s += q.sigma_tilde.topLeftCorner(a, a) + d * d.transpose();
    }
    s /= n;
    return {std::move(mu), linalg::embed(linalg::floor_eigenvalues(s, jitter), k)};
}

struct StaticFit {
    StaticParams params;
    std::vector<MembershipPosterior> posteriors;
    EdgePosteriors edges;
    FitReport report;
};

namespace detail {

inline StaticParams random_static_init(std::size_t k, Rng& rng) {
    const auto kk = static_cast<Eigen::Index>(k);
    const auto a = linalg::active_dim(kk);
    Matrix b(kk, kk);
    for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = rng.uniform();
    Vector mu = Vector::Zero(kk);
    if (a > 0) mu.head(a) = rng.standard_normal(a);
    Matrix sigma = linalg::embed(Matrix(10.0 * Matrix::Identity(a, a)), kk);
    return {std::move(mu), std::move(sigma), CompatMatrix(std::move(b))};
}

/// One variational EM run from `params` (modified in place).
inline FitReport run_static_fit(const Adjacency& adj, bool directed, const FitCfg& cfg, StaticParams& params,
                                std::vector<MembershipPosterior>& posts, EdgePosteriors& edges) {
    FitReport rep;
    const double c = role_draw_count(adj.size(), directed);
    const bool single_role = params.n_roles() == 1;
    double outer_prev = 0.0;
    for (int outer = 1; outer <= cfg.max_outer; ++outer) {
        rep.n_outer = outer;
        double prev = 0.0;
        double obj = 0.0;
        for (int it = 1; it <= cfg.max_inner; ++it) {
            EdgeSweep sweep = edge_sweep(adj, posts, params.b, edges);
            rep.degenerate_edges = rep.degenerate_edges || sweep.degenerate;
            membership_sweep(sweep.m, params.mu, params.sigma, c, posts, cfg.jitter);
            if (cfg.learn_b) params.b = mstep_b_static(adj, edges, params.b);
            obj = sweep.edge_term + membership_term(sweep.m, params.mu, params.sigma, c, posts, cfg.jitter);
            rep.objective_trace.push_back(obj);
            ++rep.n_inner;
            if (it > 1 && relative_change_below(prev, obj, cfg.tol)) break;
            prev = obj;
        }
        if (cfg.learn_mu || cfg.learn_sigma) {
            auto [mu, sigma] = mstep_mu_sigma_static(posts, cfg.jitter);
            if (cfg.learn_mu) params.mu = std::move(mu);
            if (cfg.learn_sigma) params.sigma = std::move(sigma);
        }
        if (single_role || (outer > 1 && relative_change_below(outer_prev, obj, cfg.tol))) {
            rep.converged = true;
            break;
        }
        outer_prev = obj;
    }
    return rep;
}

}  // namespace detail

/// Variational EM for the static LNMMSB on snapshot `t`: B ~ U[0,1],
/// mu ~ N(0, I), Sigma = 10 I, random q(gamma); the inner loop alternates
/// delta, gamma and B updates, the outer loop re-estimates (mu, Sigma).
/// Runs `cfg.n_restarts` starts and keeps the best final objective.
///
/// `start`, when given, replaces the random parameter draw (B, mu, Sigma)
/// of every restart.
inline StaticFit fit_lnmmsb(const NetSeq& net, std::size_t k, const FitCfg& cfg, std::uint64_t seed,
                            const std::optional<StaticParams>& start = std::nullopt,
                            const std::optional<std::vector<MembershipPosterior>>& init = std::nullopt,
                            std::size_t t = 0) {
    detail::require_snapshot(net, t);
    if (k < 1) throw std::invalid_argument("fit_lnmmsb: K must be at least 1");
    if (start) detail::require_static_params(*start, k);
    const std::size_t n = net.n_nodes();
    const std::size_t restarts = static_cast<std::size_t>(std::max(1, cfg.n_restarts));

    std::vector<StaticFit> runs(restarts);
    const Rng root(seed);
    detail::parallel_for(restarts, cfg.threads, [&](std::size_t r) {
        Rng rng = root.split(r);
        auto& run = runs[r];
        run.params = detail::random_static_init(k, rng);
        if (start) run.params = *start;
        run.posteriors =
            init ? *init : initial_posteriors(net.snapshots[t], run.params.mu, run.params.sigma, cfg, rng);
        run.edges = EdgePosteriors(n, k, net.directed);
        run.report = detail::run_static_fit(net.snapshots[t], net.directed, cfg, run.params, run.posteriors,
                                            run.edges);
    });

    std::size_t best = 0;
    std::vector<double> finals;
    for (std::size_t r = 0; r < restarts; ++r) {
        finals.push_back(runs[r].report.final_objective());
        if (finals[r] > finals[best]) best = r;
    }
    StaticFit out = std::move(runs[best]);
    out.report.restart_index = best;
    out.report.restart_objectives = std::move(finals);
    return out;
}

/// Membership vectors pi_i = softmax(gamma~_i).
inline std::vector<Vector> memberships(const std::vector<MembershipPosterior>& posts) {
    std::vector<Vector> out;
    out.reserve(posts.size());
    for (const auto& q : posts) out.push_back(logistic_transform(q.gamma_tilde));
    return out;
}

}  // namespace lnmmsb
