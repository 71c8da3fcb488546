#include <gtest/gtest.h>

#include "lnmmsb/alignment.hpp"
#include "lnmmsb/dynamic_inference.hpp"
#include "lnmmsb/sampler.hpp"

using namespace lnmmsb;

namespace {

Vector scalar(double v) { return (Vector(2) << v, 0.0).finished(); }

Matrix scalar_cov(double v) {
    Matrix m = Matrix::Zero(2, 2);
    m(0, 0) = v;
    return m;
}

KalmanTrace scalar_chain() {
    return rts_smooth(kalman_filter({scalar(2), scalar(2)}, scalar(0), scalar_cov(1), {scalar_cov(1), scalar_cov(1)}, 1));
}

MembershipPosterior post(double g, double s) { return {scalar(g), scalar_cov(s)}; }

DynParams small_params(std::size_t t_count, double phi) {
    DynParams p = scenario_dynamic_params(2, t_count, ScenarioCfg{4.0, 0.8, 0.7, 0.05, 0.25});
    p.phi = scalar_cov(phi);
    return p;
}

NetSeq small_sequence(std::size_t t_count, std::uint64_t seed) {
    return sample_dynamic_network(scenario_dynamic_params(2, t_count, ScenarioCfg{4.0, 0.8, 0.7, 0.05, 0.5}),
                                  Dims{30, 2, t_count}, seed)
        .net;
}

}  // namespace

TEST(MstepDynamics, WorkedTransitionVariance) {
    const auto tr = scalar_chain();
    const std::vector<std::vector<MembershipPosterior>> posts{{post(1.0, 0.1)}, {post(2.0, 0.1)}};
    const auto est = mstep_dynamics(tr, posts, scalar_cov(1));
    EXPECT_NEAR(est.phi(0, 0), 0.16 + 0.6 / 9.0, 1e-14);
    EXPECT_NEAR(est.phi(0, 0), 0.2267, 1e-4);
    EXPECT_EQ(est.phi(1, 1), 0.0);
    EXPECT_EQ(est.nu, tr.x_smooth[0]);
}

TEST(MstepDynamics, MembershipCovariancePerTime) {
    const auto tr = scalar_chain();
    // At t = 1 the smoothed state is 1.2.
    const std::vector<std::vector<MembershipPosterior>> posts{{post(0.0, 0.5), post(2.0, 0.5)}, {post(1.6, 0.0)}};
    const auto est = mstep_dynamics(tr, posts, scalar_cov(1));
    EXPECT_NEAR(est.sigmas[0](0, 0), (1.44 + 0.64) / 2.0 + 0.5, 1e-14);
    // Identical posteriors at the smoothed mean collapse to the floor.
    EXPECT_NEAR(est.sigmas[1](0, 0), kSigmaFloor, 1e-15);
}

TEST(MstepDynamics, ConstantTrajectoryGivesFlooredPhi) {
    KalmanTrace tr;
    tr.x_smooth.assign(3, scalar(0.7));
    tr.p_smooth.assign(3, scalar_cov(0.0));
    tr.l_mats.assign(2, scalar_cov(0.5));
    const std::vector<std::vector<MembershipPosterior>> posts(3, {post(0.7, 1.0)});
    const auto est = mstep_dynamics(tr, posts, scalar_cov(1), 1e-8);
    EXPECT_NEAR(est.phi(0, 0), 1e-8, 1e-20);
}

TEST(MstepDynamics, SingleTimeKeepsPhi) {
    const auto tr = rts_smooth(kalman_filter({scalar(1)}, scalar(0), scalar_cov(3), {scalar_cov(1)}, 1));
    const auto est = mstep_dynamics(tr, {{post(1.0, 0.2)}}, scalar_cov(3));
    EXPECT_EQ(est.phi, scalar_cov(3));
    EXPECT_EQ(est.nu, tr.x_smooth[0]);
}

TEST(MstepDynamics, OutputsSymmetricPsd) {
    Rng rng(3);
    const Eigen::Index k = 3;
    std::vector<Vector> y;
    std::vector<Matrix> sig;
    std::vector<std::vector<MembershipPosterior>> posts(5);
    for (std::size_t t = 0; t < 5; ++t) {
        y.push_back(linalg::embed(Vector(rng.standard_normal(2)), k));
        sig.push_back(linalg::embed(Matrix(Matrix::Identity(2, 2)), k));
        for (int i = 0; i < 4; ++i)
            posts[t].push_back({linalg::embed(Vector(rng.standard_normal(2)), k), Matrix(0.1 * sig.back())});
    }
    const Matrix phi = linalg::embed(Matrix(Matrix::Identity(2, 2)), k);
    const auto est = mstep_dynamics(rts_smooth(kalman_filter(y, Vector::Zero(k), phi, sig, 4)), posts, phi);
    EXPECT_TRUE(linalg::is_symmetric(est.phi, 0.0));
    EXPECT_GE(linalg::min_eigenvalue(est.phi.topLeftCorner(2, 2)), 0.0);
    for (const auto& s : est.sigmas) {
        EXPECT_TRUE(linalg::is_symmetric(s, 0.0));
        EXPECT_GE(linalg::min_eigenvalue(s.topLeftCorner(2, 2)), 0.0);
    }
}

TEST(MstepBDynamic, PoolsAcrossTime) {
    NetSeq net(2, 2, true);
    net.set_edge(0, 0, 1, true);
    std::vector<EdgePosteriors> edges(2, EdgePosteriors(2, 2, true));
    for (auto& e : edges)
        for (std::size_t p = 0; p < e.size(); ++p) {
            std::fill(e.data(p), e.data(p) + 4, 0.0);
            e.data(p)[p == 0 ? 0 : 3] = 1.0;  // pair (0,1) on cell (0,0), pair (1,0) on cell (1,1)
        }
    const auto b = mstep_b_dynamic(net, edges, CompatMatrix::constant(2, 0.3));
    EXPECT_DOUBLE_EQ(b(0, 0), 0.5);
    EXPECT_DOUBLE_EQ(b(1, 1), 0.0);
    EXPECT_DOUBLE_EQ(b(0, 1), 0.3);  // no mass keeps the previous value
}

TEST(MstepBDynamic, SingleTimeMatchesStatic) {
    const NetSeq net = small_sequence(1, 4);
    EdgePosteriors e(30, 2, true);
    Rng rng(5);
    for (std::size_t p = 0; p < e.size(); ++p) {
        double s = 0.0;
        for (int c = 0; c < 4; ++c) s += (e.data(p)[c] = rng.uniform());
        for (int c = 0; c < 4; ++c) e.data(p)[c] /= s;
    }
    const CompatMatrix prev = CompatMatrix::constant(2, 0.5);
    EXPECT_EQ(mstep_b_dynamic(net, {e}, prev).matrix(), mstep_b_static(net.snapshots[0], e, prev).matrix());
}

TEST(MstepBDynamic, AllEdgesGiveOne) {
    NetSeq net(3, 2, true);
    for (std::size_t t = 0; t < 2; ++t)
        for (std::size_t i = 0; i < 3; ++i)
            for (std::size_t j = 0; j < 3; ++j)
                if (i != j) net.set_edge(t, i, j, true);
    const std::vector<EdgePosteriors> edges(2, EdgePosteriors(3, 2, true));
    EXPECT_EQ(mstep_b_dynamic(net, edges, CompatMatrix::constant(2, 0.2)).matrix(), Matrix::Ones(2, 2));
}

TEST(InferDmmsb, SingleTimeIsConjugateUpdate) {
    const NetSeq net = small_sequence(1, 8);
    const DynParams p = small_params(1, 2.0);
    InferCfg cfg;
    cfg.n_restarts = 1;
    const auto inf = infer_dmmsb(net, p, cfg, 3);
    const Vector y = pseudo_observations(inf.posteriors)[0];
    const double prior_prec = 1.0 / p.phi(0, 0);
    const double obs_prec = 30.0 / p.sigmas[0](0, 0);
    EXPECT_NEAR(inf.mu_traj[0][0], (prior_prec * p.nu[0] + obs_prec * y[0]) / (prior_prec + obs_prec), 1e-12);
    EXPECT_EQ(inf.mu_traj[0][1], 0.0);
}

TEST(InferDmmsb, NegligibleTransitionNoisePoolsFully) {
    const NetSeq net = small_sequence(4, 9);
    const DynParams p = small_params(4, 1e-10);
    InferCfg cfg;
    cfg.n_restarts = 1;
    const auto inf = infer_dmmsb(net, p, cfg, 3);
    for (std::size_t t = 1; t < 4; ++t) EXPECT_LT((inf.mu_traj[t] - inf.mu_traj[0]).norm(), 1e-6);
}

TEST(InferDmmsb, HugeTransitionNoiseTracksObservations) {
    const NetSeq net = small_sequence(4, 10);
    const DynParams p = small_params(4, 1e6);
    InferCfg cfg;
    cfg.n_restarts = 1;
    const auto inf = infer_dmmsb(net, p, cfg, 3);
    const auto y = pseudo_observations(inf.posteriors);
    for (std::size_t t = 0; t < 4; ++t) EXPECT_LT((inf.mu_traj[t] - y[t]).norm(), 1e-2);
}

TEST(InferDmmsb, RejectsInvalidParams) {
    const NetSeq net = small_sequence(2, 1);
    DynParams p = small_params(2, 1.0);
    p.sigmas.pop_back();
    EXPECT_THROW(infer_dmmsb(net, p, InferCfg{}, 1), std::invalid_argument);
    p = small_params(2, 1.0);
    p.nu[1] = 1.0;
    EXPECT_THROW(infer_dmmsb(net, p, InferCfg{}, 1), std::invalid_argument);
}

TEST(FitDmmsb, SingleTimeSigmaFollowsUpdate) {
    const NetSeq net = small_sequence(1, 11);
    DynFitCfg cfg;
    cfg.n_restarts = 1;
    const auto f = fit_dmmsb(net, 2, cfg, 4);
    ASSERT_EQ(f.params.sigmas.size(), 1u);
    double acc = 0.0;
    for (const auto& q : f.posteriors[0])
        acc += std::pow(f.params.mu_traj[0][0] - q.gamma_tilde[0], 2) + q.sigma_tilde(0, 0);
    EXPECT_NEAR(f.params.sigmas[0](0, 0), std::max(acc / 30.0, kSigmaFloor), 1e-10);
    EXPECT_EQ(f.params.nu, f.params.mu_traj[0]);
}

TEST(FitDmmsb, DeterministicAcrossThreadCounts) {
    const NetSeq net = small_sequence(3, 12);
    DynFitCfg cfg;
    cfg.n_restarts = 3;
    cfg.threads = 1;
    const auto a = fit_dmmsb(net, 2, cfg, 21);
    cfg.threads = 3;
    const auto b = fit_dmmsb(net, 2, cfg, 21);
    EXPECT_EQ(a.params.b.matrix(), b.params.b.matrix());
    EXPECT_EQ(a.params.phi, b.params.phi);
    EXPECT_EQ(a.report.restart_objectives, b.report.restart_objectives);
    for (std::size_t t = 0; t < 3; ++t) EXPECT_EQ(a.params.mu_traj[t], b.params.mu_traj[t]);
}

TEST(FitDmmsb, ObjectiveTraceIsFinite) {
    const NetSeq net = small_sequence(3, 13);
    DynFitCfg cfg;
    cfg.n_restarts = 1;
    const auto f = fit_dmmsb(net, 2, cfg, 2);
    ASSERT_FALSE(f.report.objective_trace.empty());
    for (double v : f.report.objective_trace) EXPECT_TRUE(std::isfinite(v));
    EXPECT_EQ(f.report.restart_objectives.size(), 1u);
}

TEST(FitDmmsb, SingleRoleConvergesImmediately) {
    const NetSeq net = small_sequence(3, 14);
    DynFitCfg cfg;
    cfg.n_restarts = 1;
    const auto f = fit_dmmsb(net, 1, cfg, 2);
    EXPECT_TRUE(f.report.converged);
    EXPECT_EQ(f.report.n_outer, 1);
    double edges = 0.0;
    for (const auto& s : net.snapshots) edges += static_cast<double>(s.edge_count());
    EXPECT_NEAR(f.params.b(0, 0), edges / (3.0 * 30.0 * 29.0), 1e-12);
}

TEST(Relabel, PermuteGammaKeepsReferencePinned) {
    const Vector g = (Vector(3) << 1.0, 2.0, 0.0).finished();
    const Vector out = detail::permute_gamma(g, {2, 0, 1});
    // Roles (2, 0, 1) in the new order, re-pinned on the new last role.
    EXPECT_EQ(out, (Vector(3) << -2.0, -1.0, 0.0).finished());
    EXPECT_TRUE(logistic_transform(out).isApprox(
        (Vector(3) << logistic_transform(g)[2], logistic_transform(g)[0], logistic_transform(g)[1]).finished()));
}

TEST(Relabel, MatchCompatFindsPermutation) {
    Matrix ref(3, 3);
    ref << 0.9, 0.1, 0.0, 0.2, 0.7, 0.0, 0.0, 0.3, 0.5;
    const std::vector<std::size_t> perm{1, 2, 0};
    Matrix shuffled(3, 3);
    for (Eigen::Index u = 0; u < 3; ++u)
        for (Eigen::Index v = 0; v < 3; ++v) shuffled(static_cast<Eigen::Index>(perm[u]), static_cast<Eigen::Index>(perm[v])) = ref(u, v);
    EXPECT_EQ(detail::match_compat(shuffled, ref), perm);
    EXPECT_EQ(detail::permute_compat(shuffled, perm), ref);
}

TEST(FitDmmsb, RoundTripRecoversCompatibility) {
    // Synthetic drift sequence with zero cross-role rates, five seeds.
    ScenarioCfg sc;
    sc.diag_high = 0.8;
    sc.diag_low = 0.6;
    sc.off_diag = 0.0;
    const auto truth = scenario_dynamic_params(3, 10, sc);
    int b_ok = 0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto s = sample_dynamic_network(truth, Dims{100, 3, 10}, seed);
        DynFitCfg cfg;
        cfg.n_restarts = 1;
        const auto f = fit_dmmsb(s.net, 3, cfg, 7);
        std::vector<Vector> pt, pe;
        for (std::size_t t = 0; t < 10; ++t) {
            pt.insert(pt.end(), s.pis[t].begin(), s.pis[t].end());
            const auto e = memberships(f.posteriors[t]);
            pe.insert(pe.end(), e.begin(), e.end());
        }
        const Matrix b = apply_alignment(f.params.b.matrix(), align_roles(pt, pe));
        b_ok += (b - truth.b.matrix()).cwiseAbs().maxCoeff() <= 0.1;
        // The transition update is biased low with ten noisy pseudo-observations,
        // so only overestimation beyond a factor of three is ruled out.
        const Vector phi = f.params.phi.topLeftCorner(2, 2).diagonal();
        EXPECT_GT(phi.minCoeff(), 0.0);
        EXPECT_LT(phi.maxCoeff(), 3.0 * sc.phi_scale);
    }
    EXPECT_GE(b_ok, 3);
}
