#pragma once

// Model scoring: importance-sampling estimates of the marginal
// log-likelihood, BIC, and selection of the number of roles.
//
// The importance proposal is the fitted variational posterior
// q = prod_i N(gamma~_i, Sigma~_i). Role indicators are summed out exactly
// for every dyad, so each sample needs O(N^2 K^2) work.

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "lnmmsb/alignment.hpp"
#include "lnmmsb/dynamic_inference.hpp"
#include "lnmmsb/linalg.hpp"
#include "lnmmsb/logistic.hpp"
#include "lnmmsb/parallel.hpp"
#include "lnmmsb/rng.hpp"
#include "lnmmsb/static_inference.hpp"
#include "lnmmsb/types.hpp"

namespace lnmmsb {

struct LoglikEstimate {
    double loglik = 0.0;
    double se = 0.0;  // Monte Carlo standard error (delta method)
};

struct ModelScore {
    double loglik = 0.0;
    double loglik_se = 0.0;
    std::size_t n_params = 0;
    double bic = 0.0;
};

namespace detail {

/// Exact log p(E | pi) for one snapshot with z summed out per dyad.
inline double edge_loglik(const Adjacency& adj, bool directed, const std::vector<Vector>& pis, const Matrix& b) {
    const std::size_t n = adj.size();
    const Matrix nb = Matrix::Ones(b.rows(), b.cols()) - b;
    std::vector<Vector> on(n), off(n);
    for (std::size_t i = 0; i < n; ++i) {
        on[i] = b.transpose() * pis[i];
        off[i] = nb.transpose() * pis[i];
    }
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = directed ? 0 : i + 1; j < n; ++j) {
            if (i == j) continue;
            total += std::log(adj(i, j) ? on[i].dot(pis[j]) : off[i].dot(pis[j]));
        }
    return total;
}

/// Precomputed Gaussian factors of one node's proposal.
struct ProposalFactor {
    Vector mean;
    Matrix root;
    Matrix prec;
    double log_det = 0.0;
};

inline ProposalFactor proposal_factor(const MembershipPosterior& q, double jitter) {
    const auto d = linalg::active_dim(q.gamma_tilde.size());
    const Matrix s = q.sigma_tilde.topLeftCorner(d, d);
    ProposalFactor f;
    f.mean = q.gamma_tilde;
    if (d > 0) {
        Eigen::LLT<Matrix> llt(linalg::symmetrize(s));
        if (llt.info() != Eigen::Success) throw NumericalError("proposal covariance is not positive definite");
        f.root = llt.matrixL();
        f.prec = linalg::spd_inverse(s, jitter, "proposal covariance");
        f.log_det = linalg::log_det_spd(s, jitter);
    }
    return f;
}

/// Log importance weight of one joint draw for snapshot `adj`, added to
/// `acc`. Draws gamma for every node from `rng`.
inline double snapshot_log_weight(const Adjacency& adj, bool directed, const StaticParams& prior,
                                  const std::vector<ProposalFactor>& props, const Matrix& prior_prec,
                                  double prior_log_det, Rng& rng) {
    const auto k = static_cast<Eigen::Index>(prior.n_roles());
    const auto d = linalg::active_dim(k);
    std::vector<Vector> pis(props.size());
    double lw = 0.0;
    for (std::size_t i = 0; i < props.size(); ++i) {
        Vector g = props[i].mean;
        if (d > 0) {
            const Vector z = rng.standard_normal(d);
            g.head(d) += props[i].root * z;
            lw += linalg::log_normal_active(g.head(d), prior.mu.head(d), prior_prec, prior_log_det) -
                  linalg::log_normal_active(g.head(d), props[i].mean.head(d), props[i].prec, props[i].log_det);
        }
        pis[i] = logistic_transform(g);
    }
    return lw + edge_loglik(adj, directed, pis, prior.b.matrix());
}

/// log mean exp(lw) and the delta-method standard error of that estimate.
inline LoglikEstimate summarize_log_weights(const std::vector<double>& lw) {
    double mx = -std::numeric_limits<double>::infinity();
    for (double v : lw) mx = std::max(mx, v);
    if (!std::isfinite(mx)) throw NumericalError("all importance weights are zero; proposal does not match the model");
    const double s = static_cast<double>(lw.size());
    double m1 = 0.0, m2 = 0.0;
    for (double v : lw) {
        const double w = std::exp(v - mx);
        m1 += w;
        m2 += w * w;
    }
    m1 /= s;
    m2 /= s;
    const double var = std::max(0.0, m2 - m1 * m1) * s / std::max(1.0, s - 1.0);
    return {mx + std::log(m1), std::sqrt(var) / (std::sqrt(s) * m1)};
}

struct SnapshotTask {
    const Adjacency* adj;
    StaticParams prior;
    std::vector<ProposalFactor> props;
    Matrix prior_prec;
    double prior_log_det = 0.0;
};

inline SnapshotTask snapshot_task(const Adjacency& adj, const StaticParams& prior,
                                  const std::vector<MembershipPosterior>& posts, double jitter) {
    const auto k = static_cast<Eigen::Index>(prior.n_roles());
    if (posts.size() != adj.size()) throw std::invalid_argument("loglik_importance: one posterior per node required");
    SnapshotTask task{&adj, prior, {}, Matrix(), 0.0};
    for (const auto& q : posts) {
        if (q.gamma_tilde.size() != k || q.sigma_tilde.rows() != k)
            throw std::invalid_argument("loglik_importance: posterior dimension does not match K");
        task.props.push_back(proposal_factor(q, jitter));
    }
    const auto d = linalg::active_dim(k);
    const Matrix s = prior.sigma.topLeftCorner(d, d);
    task.prior_prec = linalg::spd_inverse(s, jitter, "prior covariance");
    task.prior_log_det = linalg::log_det_spd(s, jitter);
    return task;
}

inline LoglikEstimate run_importance(const std::vector<SnapshotTask>& tasks, bool directed, std::size_t n_samples,
                                     std::uint64_t seed, unsigned threads) {
    if (n_samples < 100) throw std::invalid_argument("loglik_importance: need at least 100 samples");
    std::vector<double> lw(n_samples, 0.0);
    const Rng root(seed);
    parallel_for(n_samples, threads, [&](std::size_t s) {
        Rng rng = root.split(s);
        double acc = 0.0;
        for (const auto& task : tasks)
            acc += snapshot_log_weight(*task.adj, directed, task.prior, task.props, task.prior_prec,
                                       task.prior_log_det, rng);
        lw[s] = std::isnan(acc) ? -std::numeric_limits<double>::infinity() : acc;
    });
    return summarize_log_weights(lw);
}

}  // namespace detail

/// Importance-sampling estimate of log p(E^(t) | params) for snapshot t.
inline LoglikEstimate loglik_importance(const NetSeq& net, const StaticParams& params,
                                        const std::vector<MembershipPosterior>& posteriors, std::size_t n_samples,
                                        std::uint64_t seed, std::size_t t = 0, unsigned threads = 1,
                                        double jitter = linalg::kDefaultJitter) {
    detail::require_snapshot(net, t);
    detail::require_static_params(params, params.n_roles());
    const std::vector<detail::SnapshotTask> tasks{
        detail::snapshot_task(net.snapshots[t], params, posteriors, jitter)};
    return detail::run_importance(tasks, net.directed, n_samples, seed, threads);
}

/// Importance-sampling estimate of log p(E^(1..T) | mu^(1..T), Sigma^(t), B):
/// the sum over time points given the fitted trajectory, estimated jointly.
inline LoglikEstimate loglik_importance(const NetSeq& net, const DynParams& params,
                                        const std::vector<std::vector<MembershipPosterior>>& posteriors,
                                        std::size_t n_samples, std::uint64_t seed, unsigned threads = 1,
                                        double jitter = linalg::kDefaultJitter) {
    net.validate();
    if (params.mu_traj.size() != net.n_times() || posteriors.size() != net.n_times())
        throw std::invalid_argument("loglik_importance: trajectory and posteriors must cover every time point");
    std::vector<detail::SnapshotTask> tasks;
    for (std::size_t t = 0; t < net.n_times(); ++t)
        tasks.push_back(detail::snapshot_task(net.snapshots[t], params.at(t), posteriors[t], jitter));
    return detail::run_importance(tasks, net.directed, n_samples, seed, threads);
}

/// Number of free parameters. Static: K^2 + (K-1) + (K-1)K/2.
/// Dynamic: K^2 + (K-1) + (K-1)K/2 + T (K-1)K/2.
inline std::size_t parameter_count(std::size_t k, std::size_t n_times, ModelKind model) {
    const std::size_t cov = (k - 1) * k / 2;
    const std::size_t base = k * k + (k - 1) + cov;
    return model == ModelKind::static_model ? base : base + n_times * cov;
}

/// BIC = -2 loglik + n_params log(n_obs), with n_obs the number of observed
/// dyads over all time points. Lower is better.
inline ModelScore bic_score(double loglik, const Dims& dims, ModelKind model, bool directed = true,
                            double loglik_se = 0.0) {
    if (!std::isfinite(loglik)) throw std::invalid_argument("bic_score: log-likelihood must be finite");
    dims.validate();
    const double n = static_cast<double>(dims.n_nodes);
    const double dyads = directed ? n * (n - 1.0) : n * (n - 1.0) / 2.0;
    ModelScore s;
    s.loglik = loglik;
    s.loglik_se = loglik_se;
    s.n_params = parameter_count(dims.n_roles, dims.n_times, model);
    s.bic = -2.0 * loglik + static_cast<double>(s.n_params) * std::log(static_cast<double>(dims.n_times) * dyads);
    return s;
}

struct RoleScore {
    std::size_t k = 0;
    bool ok = false;
    std::string error;  // set when the fit or scoring failed
    ModelScore score;
};

struct Selection {
    std::size_t best_k = 0;
    std::vector<RoleScore> scores;
};

struct SelectCfg {
    DynFitCfg fit;
    ModelKind model = ModelKind::static_model;
    std::size_t is_samples = 1000;
};

/// Fits every K in `k_range`, scores each by importance-sampled
/// log-likelihood and BIC, and returns the K with the lowest BIC. A K whose
/// fit or scoring throws is recorded and skipped. The static model fits
/// each snapshot independently; its log-likelihoods and parameter counts add
/// over time points.
inline Selection select_roles(const NetSeq& net, const std::vector<std::size_t>& k_range, const SelectCfg& cfg,
                              std::uint64_t seed) {
    if (k_range.empty()) throw std::invalid_argument("select_roles: empty K range");
    net.validate();
    Selection out;
    const Rng root(seed);
    double best_bic = std::numeric_limits<double>::infinity();
    for (std::size_t idx = 0; idx < k_range.size(); ++idx) {
        const std::size_t k = k_range[idx];
        RoleScore rs;
        rs.k = k;
        const Rng rng = root.split(idx);
        try {
            if (k < 1) throw std::invalid_argument("K must be at least 1");
            Dims dims{net.n_nodes(), k, net.n_times()};
            if (cfg.model == ModelKind::dynamic_model) {
                const DynamicFit f = fit_dmmsb(net, k, cfg.fit, rng.split(0).seed());
                const auto ll = loglik_importance(net, f.params, f.posteriors, cfg.is_samples, rng.split(1).seed(),
                                                  cfg.fit.threads, cfg.fit.jitter);
                rs.score = bic_score(ll.loglik, dims, cfg.model, net.directed, ll.se);
            } else {
                double ll = 0.0, var = 0.0;
                for (std::size_t t = 0; t < net.n_times(); ++t) {
                    const StaticFit f = fit_lnmmsb(net, k, cfg.fit, rng.split(2 * t).seed(), std::nullopt,
                                                   std::nullopt, t);
                    const auto e = loglik_importance(net, f.params, f.posteriors, cfg.is_samples,
                                                     rng.split(2 * t + 1).seed(), t, cfg.fit.threads, cfg.fit.jitter);
                    ll += e.loglik;
                    var += e.se * e.se;
                }
                rs.score = bic_score(ll, dims, cfg.model, net.directed, std::sqrt(var));
                rs.score.n_params *= net.n_times();
                const double n = static_cast<double>(net.dyads_per_time() * net.n_times());
                rs.score.bic = -2.0 * ll + static_cast<double>(rs.score.n_params) * std::log(n);
            }
            rs.ok = true;
            if (rs.score.bic < best_bic) {
                best_bic = rs.score.bic;
                out.best_k = k;
            }
        } catch (const std::exception& e) {
            rs.error = e.what();
        }
        out.scores.push_back(std::move(rs));
    }
    if (out.best_k == 0) throw NumericalError("select_roles: every K failed");
    return out;
}

}  // namespace lnmmsb
