#pragma once

// Inference and variational EM for the dynamic MMSB (dMMSB): per-time
// logistic-normal MMSB emissions whose prior means mu^(t) follow a linear
// Gaussian state-space model, with a compatibility matrix B shared by all
// time points.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <vector>

#include "lnmmsb/init.hpp"
#include "lnmmsb/kalman.hpp"
#include "lnmmsb/linalg.hpp"
#include "lnmmsb/parallel.hpp"
#include "lnmmsb/static_inference.hpp"
#include "lnmmsb/types.hpp"

namespace lnmmsb {

/// Eigenvalue floor applied to every estimated Sigma^(t).
inline constexpr double kSigmaFloor = 1e-6;

struct DynFitCfg : FitCfg {
    // learn_mu governs nu, learn_sigma the per-time Sigma^(t).
    bool learn_phi = true;
};

struct DynamicInference {
    std::vector<std::vector<MembershipPosterior>> posteriors;  // [t][i]
    std::vector<EdgePosteriors> edges;                         // [t]
    std::vector<Vector> mu_traj;
    KalmanTrace trace;
    FitReport report;
};

struct DynamicFit {
    DynParams params;
    std::vector<std::vector<MembershipPosterior>> posteriors;
    std::vector<EdgePosteriors> edges;
    KalmanTrace trace;
    FitReport report;
};

/// Pseudo-observations Y^(t) = (1/N) sum_i gamma~_i^(t).
inline std::vector<Vector> pseudo_observations(const std::vector<std::vector<MembershipPosterior>>& posts) {
    std::vector<Vector> y;
    for (const auto& pt : posts) {
        Vector s = Vector::Zero(pt.front().gamma_tilde.size());
        for (const auto& q : pt) s += q.gamma_tilde;
        y.push_back(s / static_cast<double>(pt.size()));
    }
    return y;
}

/// B update pooled over time points; cells without mass keep `previous`.
inline CompatMatrix mstep_b_dynamic(const NetSeq& net, const std::vector<EdgePosteriors>& edges,
                                    const CompatMatrix& previous) {
    if (edges.size() != net.n_times()) throw std::invalid_argument("mstep_b_dynamic: one delta set per time point");
    BStats s(previous.n_roles());
    for (std::size_t t = 0; t < edges.size(); ++t) s.add(net.snapshots[t], edges[t]);
    return s.estimate(previous);
}

struct DynamicsEstimate {
    Vector nu;
    Matrix phi;
    std::vector<Matrix> sigmas;
};

/// M-step for the state-space parameters from a smoothed trace:
///   Phi^     = 1/(T-1) sum_t [(x_{t+1|T} - x_{t|T})(.)^T + L_t P_{t+1|T} L_t^T]
///   Sigma^(t) = 1/N sum_i [(x_{t|T} - gamma~_i^(t))(.)^T + Sigma~_i^(t)]
///   nu^      = x_{1|T}
/// With T = 1, Phi is returned unchanged. Phi^ is floored at `jitter`,
/// Sigma^(t) at 1e-6.
inline DynamicsEstimate mstep_dynamics(const KalmanTrace& tr,
                                       const std::vector<std::vector<MembershipPosterior>>& posts,
                                       const Matrix& previous_phi, double jitter = linalg::kDefaultJitter) {
    const std::size_t t_count = tr.x_smooth.size();
    if (t_count == 0 || posts.size() != t_count) throw std::invalid_argument("mstep_dynamics: trace/posterior mismatch");
    const auto k = tr.x_smooth.front().size();
    const auto d = linalg::active_dim(k);
    DynamicsEstimate out;
    out.nu = tr.x_smooth.front();
    if (t_count >= 2) {
        Matrix acc = Matrix::Zero(d, d);
        for (std::size_t t = 0; t + 1 < t_count; ++t) {
            const Vector dx = tr.x_smooth[t + 1].head(d) - tr.x_smooth[t].head(d);
            const Matrix l = tr.l_mats[t].topLeftCorner(d, d);
            acc += dx * dx.transpose() + l * tr.p_smooth[t + 1].topLeftCorner(d, d) * l.transpose();
        }
        acc /= static_cast<double>(t_count - 1);
        out.phi = linalg::embed(linalg::floor_eigenvalues(acc, jitter), k);
    } else {
        out.phi = previous_phi;
    }
    for (std::size_t t = 0; t < t_count; ++t) {
        Matrix acc = Matrix::Zero(d, d);
        for (const auto& q : posts[t]) {
            const Vector r = tr.x_smooth[t].head(d) - q.gamma_tilde.head(d);
            acc += r * r.transpose() + q.sigma_tilde.topLeftCorner(d, d);
        }
        acc /= static_cast<double>(posts[t].size());
        out.sigmas.push_back(linalg::embed(linalg::floor_eigenvalues(acc, kSigmaFloor), k));
    }
    return out;
}

namespace detail {

inline void require_dyn_params(const DynParams& p, const NetSeq& net) {
    const auto k = static_cast<Eigen::Index>(p.n_roles());
    if (k < 1) throw std::invalid_argument("dMMSB parameters: K must be at least 1");
    if (p.b.n_roles() != p.n_roles()) throw std::invalid_argument("dMMSB parameters: B does not match K");
    if (!p.nu.allFinite() || p.nu[k - 1] != 0.0) throw std::invalid_argument("nu must be finite with last entry 0");
    linalg::require_role_covariance(p.phi, k, "phi");
    if (p.sigmas.size() != net.n_times()) throw std::invalid_argument("need one Sigma per time point");
    for (const auto& s : p.sigmas) linalg::require_role_covariance(s, k, "sigma");
    if (p.a.size() != 0 && (p.a.rows() != k || p.a.cols() != k)) throw std::invalid_argument("A must be K x K");
    if (!p.mu_traj.empty() && p.mu_traj.size() != net.n_times())
        throw std::invalid_argument("mu trajectory length does not match T");
}

/// log N(x_1; nu, Phi) + sum_t log N(x_{t+1}; A x_t, Phi) on the smoothed means.
inline double trajectory_term(const std::vector<Vector>& mu, const Vector& nu, const Matrix& phi, const Matrix& a,
                              double jitter) {
    const auto d = linalg::active_dim(nu.size());
    if (d == 0) return 0.0;
    const Matrix q = phi.topLeftCorner(d, d);
    const Matrix prec = linalg::spd_inverse(q, jitter, "transition covariance");
    const double ld = linalg::log_det_spd(q, jitter);
    const Matrix trans = a.size() == 0 ? Matrix::Identity(d, d) : Matrix(a.topLeftCorner(d, d));
    double total = linalg::log_normal_active(mu.front().head(d), nu.head(d), prec, ld);
    for (std::size_t t = 1; t < mu.size(); ++t)
        total += linalg::log_normal_active(mu[t].head(d), trans * mu[t - 1].head(d), prec, ld);
    return total;
}

/// gamma~ after relabeling roles: out role r takes input role perm[r].
inline Vector permute_gamma(const Vector& gamma, const std::vector<std::size_t>& perm) {
    const auto k = gamma.size();
    Vector out(k);
    const double pivot = gamma[static_cast<Eigen::Index>(perm[static_cast<std::size_t>(k - 1)])];
    for (Eigen::Index r = 0; r < k; ++r) out[r] = gamma[static_cast<Eigen::Index>(perm[static_cast<std::size_t>(r)])] - pivot;
    out[k - 1] = 0.0;
    return out;
}

/// Relabeling of `f` that best matches the reference compatibility matrix
/// and the previous mean memberships.
inline std::vector<std::size_t> match_labels(const StaticFit& f, const Matrix& ref_b, const Vector& prev_share) {
    const auto k = static_cast<std::size_t>(ref_b.rows());
    Vector share = Vector::Zero(static_cast<Eigen::Index>(k));
    for (const auto& p : memberships(f.posteriors)) share += p / static_cast<double>(f.posteriors.size());
    std::vector<std::size_t> perm(k), best(k);
    std::iota(perm.begin(), perm.end(), 0);
    best = perm;
    if (k > 8) return best;
    double best_cost = std::numeric_limits<double>::infinity();
    do {
        double c = 0.0;
        for (std::size_t u = 0; u < k; ++u) {
            const auto pu = static_cast<Eigen::Index>(perm[u]);
            c += std::pow(share[pu] - prev_share[static_cast<Eigen::Index>(u)], 2);
            for (std::size_t v = 0; v < k; ++v)
                c += std::pow(f.params.b(pu, static_cast<Eigen::Index>(perm[v])) -
                                  ref_b(static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(v)),
                              2);
        }
        if (c < best_cost) {
            best_cost = c;
            best = perm;
        }
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

/// B with roles relabeled: out(u, v) = b(perm[u], perm[v]).
inline Matrix permute_compat(const Matrix& b, const std::vector<std::size_t>& perm) {
    const auto k = b.rows();
    Matrix out(k, k);
    for (Eigen::Index u = 0; u < k; ++u)
        for (Eigen::Index v = 0; v < k; ++v)
            out(u, v) = b(static_cast<Eigen::Index>(perm[static_cast<std::size_t>(u)]),
                          static_cast<Eigen::Index>(perm[static_cast<std::size_t>(v)]));
    return out;
}

/// Relabeling of `b` closest to `ref` in squared Frobenius distance.
inline std::vector<std::size_t> match_compat(const Matrix& b, const Matrix& ref) {
    const auto k = static_cast<std::size_t>(ref.rows());
    std::vector<std::size_t> perm(k), best(k);
    std::iota(perm.begin(), perm.end(), 0);
    best = perm;
    if (k > 8) return best;
    double best_cost = std::numeric_limits<double>::infinity();
    do {
        const double c = (permute_compat(b, perm) - ref).squaredNorm();
        if (c < best_cost) {
            best_cost = c;
            best = perm;
        }
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

/// Starting posteriors from a chain of per-time static fits with matched
/// role labels. At each t > 1 a fit warm-started from the relabeled fit at
/// t - 1 competes with a fresh fit; the higher objective is kept and
/// relabeled against the previous time point. Matching only against the
/// previous time point lets labels drift along the chain, so the labels
/// are then refined by matching every per-time B to the mean of the
/// relabeled B matrices until no label changes.
inline std::vector<std::vector<MembershipPosterior>> aligned_static_posteriors(const NetSeq& net, std::size_t k,
                                                                              const std::vector<Matrix>& sigmas,
                                                                              const InferCfg& cfg, Rng& rng) {
    FitCfg sc;
    static_cast<InferCfg&>(sc) = cfg;
    sc.n_restarts = 1;
    sc.threads = 1;
    std::vector<StaticFit> fits;
    for (std::size_t t = 0; t < net.n_times(); ++t) {
        StaticFit f = fit_lnmmsb(net, k, sc, rng.engine()(), std::nullopt, std::nullopt, t);
        if (!fits.empty()) {
            const StaticFit& prev = fits.back();
            StaticFit warm = fit_lnmmsb(net, k, sc, rng.engine()(), prev.params, prev.posteriors, t);
            if (warm.report.final_objective() >= f.report.final_objective()) f = std::move(warm);
            Vector share = Vector::Zero(static_cast<Eigen::Index>(k));
            for (const auto& p : memberships(prev.posteriors)) share += p / static_cast<double>(prev.posteriors.size());
            const auto perm = match_labels(f, prev.params.b.matrix(), share);
            for (auto& q : f.posteriors) q.gamma_tilde = permute_gamma(q.gamma_tilde, perm);
            f.params.b = CompatMatrix(permute_compat(f.params.b.matrix(), perm));
            f.params.mu = permute_gamma(f.params.mu, perm);
            f.params.sigma = prev.params.sigma;
        }
        fits.push_back(std::move(f));
    }

    std::vector<std::size_t> identity(k);
    std::iota(identity.begin(), identity.end(), 0);
    std::vector<std::vector<std::size_t>> perms(fits.size(), identity);
    for (std::size_t round = 0; round < fits.size() + 1; ++round) {
        Matrix ref = Matrix::Zero(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
        for (std::size_t t = 0; t < fits.size(); ++t)
            ref += permute_compat(fits[t].params.b.matrix(), perms[t]) / static_cast<double>(fits.size());
        bool changed = false;
        for (std::size_t t = 0; t < fits.size(); ++t) {
            auto perm = match_compat(fits[t].params.b.matrix(), ref);
            changed = changed || perm != perms[t];
            perms[t] = std::move(perm);
        }
        if (!changed) break;
    }

    std::vector<std::vector<MembershipPosterior>> out;
    for (std::size_t t = 0; t < fits.size(); ++t) {
        std::vector<MembershipPosterior> pt;
        for (const auto& q : fits[t].posteriors) pt.push_back({permute_gamma(q.gamma_tilde, perms[t]), sigmas[t]});
        out.push_back(std::move(pt));
    }
    return out;
}

inline std::vector<std::vector<MembershipPosterior>> initial_dynamic_posteriors(const NetSeq& net,
                                                                                const std::vector<Vector>& mu,
                                                                                const std::vector<Matrix>& sigmas,
                                                                                const InferCfg& cfg, Rng& rng) {
    const auto k = static_cast<std::size_t>(mu.front().size());
    std::vector<std::vector<MembershipPosterior>> out;
    if (cfg.init == InitMethod::random || k == 1) {
        for (std::size_t t = 0; t < net.n_times(); ++t)
            out.push_back(init_posteriors(net.n_nodes(), mu[t], sigmas[t], cfg.init_scale, rng));
        return out;
    }
    return aligned_static_posteriors(net, k, sigmas, cfg, rng);
}

inline void refresh_trajectory(const DynParams& p, const std::vector<std::vector<MembershipPosterior>>& posts,
                               std::size_t n_nodes, double jitter, KalmanTrace& trace, std::vector<Vector>& mu) {
    const auto y = pseudo_observations(posts);
    trace = rts_smooth(kalman_filter(y, p.nu, p.phi, p.sigmas, n_nodes, p.a, jitter), p.a, jitter);
    mu = trace.x_smooth;
}

}  // namespace detail

/// dMMSB inference with fixed (nu, Phi, Sigma^(t), B): alternates per-time
/// GMF inference under prior mean mu^(t), the pseudo-observations Y^(t),
/// and a Kalman/RTS pass that refreshes mu^(t) = x_{t|T}. mu^(t) starts at
/// `params.mu_traj` when given, else at nu.
inline DynamicInference infer_dmmsb(const NetSeq& net, const DynParams& params, const InferCfg& cfg,
                                    std::uint64_t seed,
                                    const std::optional<std::vector<std::vector<MembershipPosterior>>>& init =
                                        std::nullopt) {
    net.validate();
    detail::require_dyn_params(params, net);
    const std::size_t t_count = net.n_times();
    const std::size_t n = net.n_nodes();
    const std::size_t k = params.n_roles();
    const double c = role_draw_count(n, net.directed);
    const std::size_t restarts = init ? 1 : static_cast<std::size_t>(std::max(1, cfg.n_restarts));

    std::vector<DynamicInference> runs(restarts);
    const Rng root(seed);
    detail::parallel_for(restarts, cfg.threads, [&](std::size_t r) {
        Rng rng = root.split(r);
        auto& run = runs[r];
        run.mu_traj = params.mu_traj.empty() ? std::vector<Vector>(t_count, params.nu) : params.mu_traj;
        run.posteriors = init ? *init : detail::initial_dynamic_posteriors(net, run.mu_traj, params.sigmas, cfg, rng);
        for (std::size_t t = 0; t < t_count; ++t) run.edges.emplace_back(n, k, net.directed);
        std::vector<EdgeSweep> sweeps(t_count);
        double prev = 0.0;
        for (int outer = 1; outer <= cfg.max_outer; ++outer) {
            run.report.n_outer = outer;
            for (std::size_t t = 0; t < t_count; ++t) {
                const StaticParams sp{run.mu_traj[t], params.sigmas[t], params.b};
                const FitReport rt = detail::run_static_inference(net.snapshots[t], net.directed, sp, cfg,
                                                                  run.posteriors[t], run.edges[t]);
                run.report.n_inner += rt.n_inner;
                run.report.degenerate_edges = run.report.degenerate_edges || rt.degenerate_edges;
            }
            detail::refresh_trajectory(params, run.posteriors, n, cfg.jitter, run.trace, run.mu_traj);
            double obj = detail::trajectory_term(run.mu_traj, params.nu, params.phi, params.a, cfg.jitter);
            for (std::size_t t = 0; t < t_count; ++t) {
                EdgePosteriors scratch = run.edges[t];
                const EdgeSweep sw = edge_sweep(net.snapshots[t], run.posteriors[t], params.b, scratch);
                obj += sw.edge_term +
                       membership_term(sw.m, run.mu_traj[t], params.sigmas[t], c, run.posteriors[t], cfg.jitter);
            }
            run.report.objective_trace.push_back(obj);
            if (k == 1 || (outer > 1 && relative_change_below(prev, obj, cfg.tol))) {
                run.report.converged = true;
                break;
            }
            prev = obj;
        }
    });

    std::size_t best = 0;
    std::vector<double> finals;
    for (std::size_t r = 0; r < restarts; ++r) {
        finals.push_back(runs[r].report.final_objective());
        if (finals[r] > finals[best]) best = r;
    }
    DynamicInference out = std::move(runs[best]);
    out.report.restart_index = best;
    out.report.restart_objectives = std::move(finals);
    return out;
}

namespace detail {

inline DynParams random_dynamic_init(std::size_t k, std::size_t t_count, Rng& rng) {
    const auto kk = static_cast<Eigen::Index>(k);
    const auto a = linalg::active_dim(kk);
    Matrix b(kk, kk);
    for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = rng.uniform();
    DynParams p;
    p.b = CompatMatrix(std::move(b));
    p.nu = Vector::Zero(kk);
    if (a > 0) p.nu.head(a) = rng.standard_normal(a);
    p.phi = linalg::embed(Matrix(10.0 * Matrix::Identity(a, a)), kk);
    p.sigmas.assign(t_count, p.phi);
    p.a = Matrix::Identity(kk, kk);
    p.mu_traj.assign(t_count, p.nu);
    return p;
}

inline FitReport run_dynamic_fit(const NetSeq& net, const DynFitCfg& cfg, DynParams& p,
                                 std::vector<std::vector<MembershipPosterior>>& posts,
                                 std::vector<EdgePosteriors>& edges, KalmanTrace& trace) {
    FitReport rep;
    const std::size_t t_count = net.n_times();
    const std::size_t n = net.n_nodes();
    const double c = role_draw_count(n, net.directed);
    const bool single_role = p.n_roles() == 1;
    double outer_prev = 0.0;
    for (int outer = 1; outer <= cfg.max_outer; ++outer) {
        rep.n_outer = outer;
        double prev = 0.0;
        double obj = 0.0;
        for (int it = 1; it <= cfg.max_inner; ++it) {
            obj = 0.0;
            for (std::size_t t = 0; t < t_count; ++t) {
                EdgeSweep sw = edge_sweep(net.snapshots[t], posts[t], p.b, edges[t]);
                rep.degenerate_edges = rep.degenerate_edges || sw.degenerate;
                membership_sweep(sw.m, p.mu_traj[t], p.sigmas[t], c, posts[t], cfg.jitter);
                obj += sw.edge_term + membership_term(sw.m, p.mu_traj[t], p.sigmas[t], c, posts[t], cfg.jitter);
            }
            if (cfg.learn_b) p.b = mstep_b_dynamic(net, edges, p.b);
            ++rep.n_inner;
            rep.objective_trace.push_back(obj);
            if (it > 1 && relative_change_below(prev, obj, cfg.tol)) break;
            prev = obj;
        }
        refresh_trajectory(p, posts, n, cfg.jitter, trace, p.mu_traj);
        const double traj = trajectory_term(p.mu_traj, p.nu, p.phi, p.a, cfg.jitter);
        const DynamicsEstimate est = mstep_dynamics(trace, posts, p.phi, cfg.jitter);
        if (cfg.learn_mu) p.nu = est.nu;
        if (cfg.learn_phi) p.phi = est.phi;
        if (cfg.learn_sigma) p.sigmas = est.sigmas;
        obj += traj;
        rep.objective_trace.back() = obj;
        if (single_role || (outer > 1 && relative_change_below(outer_prev, obj, cfg.tol))) {
            rep.converged = true;
            break;
        }
        outer_prev = obj;
    }
    return rep;
}

}  // namespace detail

/// Variational EM for the dMMSB. Each restart draws B ~ U[0,1],
/// nu ~ N(0, I), sets mu^(t) = nu, Phi = 10 I, Sigma^(t) = 10 I (or takes
/// `start`), then iterates: per-time delta and gamma updates with a pooled
/// B update (inner loop), an RTS refresh of mu^(t), and the
/// (nu, Phi, Sigma^(t)) M-step. A stays fixed. The restart with the best
/// final objective is returned.
inline DynamicFit fit_dmmsb(const NetSeq& net, std::size_t k, const DynFitCfg& cfg, std::uint64_t seed,
                            const std::optional<DynParams>& start = std::nullopt,
                            const std::optional<std::vector<std::vector<MembershipPosterior>>>& init = std::nullopt) {
    net.validate();
    if (k < 1) throw std::invalid_argument("fit_dmmsb: K must be at least 1");
    if (start) {
        detail::require_dyn_params(*start, net);
        if (start->n_roles() != k) throw std::invalid_argument("fit_dmmsb: start parameters disagree on K");
    }
    const std::size_t t_count = net.n_times();
    const std::size_t n = net.n_nodes();
    const std::size_t restarts = static_cast<std::size_t>(std::max(1, cfg.n_restarts));

    std::vector<DynamicFit> runs(restarts);
    const Rng root(seed);
    detail::parallel_for(restarts, cfg.threads, [&](std::size_t r) {
        Rng rng = root.split(r);
        auto& run = runs[r];
        run.params = detail::random_dynamic_init(k, t_count, rng);
        if (start) {
            run.params = *start;
            if (run.params.a.size() == 0) run.params.a = Matrix::Identity(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
            if (run.params.mu_traj.empty()) run.params.mu_traj.assign(t_count, run.params.nu);
        }
        run.posteriors =
            init ? *init : detail::initial_dynamic_posteriors(net, run.params.mu_traj, run.params.sigmas, cfg, rng);
        for (std::size_t t = 0; t < t_count; ++t) run.edges.emplace_back(n, k, net.directed);
        run.report = detail::run_dynamic_fit(net, cfg, run.params, run.posteriors, run.edges, run.trace);
    });

    std::size_t best = 0;
    std::vector<double> finals;
    for (std::size_t r = 0; r < restarts; ++r) {
        finals.push_back(runs[r].report.final_objective());
        if (finals[r] > finals[best]) best = r;
    }
    DynamicFit out = std::move(runs[best]);
    out.report.restart_index = best;
    out.report.restart_objectives = std::move(finals);
    return out;
}

}  // namespace lnmmsb
