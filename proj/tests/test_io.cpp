#include <gtest/gtest.h>

#include <sstream>

#include "lnmmsb/io.hpp"
#include "lnmmsb/sampler.hpp"

using namespace lnmmsb;

namespace {

NetSeq read_text(const std::string& text, NetworkFormat fmt, std::vector<std::string>* warnings = nullptr) {
    std::istringstream in(text);
    return read_network(in, fmt, [&](const std::string& w) {
        if (warnings) warnings->push_back(w);
    });
}

std::string write_text(const NetSeq& net, NetworkFormat fmt) {
    std::ostringstream out;
    write_network(out, net, fmt);
    return out.str();
}

std::string error_of(const std::string& text, NetworkFormat fmt) {
    try {
        read_text(text, fmt);
    } catch (const DataError& e) {
        return e.what();
    }
    return "";
}

bool same_network(const NetSeq& a, const NetSeq& b) {
    if (a.n_nodes() != b.n_nodes() || a.n_times() != b.n_times() || a.directed != b.directed) return false;
    for (std::size_t t = 0; t < a.n_times(); ++t)
        for (std::size_t i = 0; i < a.n_nodes(); ++i)
            for (std::size_t j = 0; j < a.n_nodes(); ++j)
                if (a.snapshots[t](i, j) != b.snapshots[t](i, j)) return false;
    return true;
}

NetSeq random_network(Rng& rng) {
    const std::size_t n = 2 + static_cast<std::size_t>(rng.uniform() * 9);
    const std::size_t t_count = 1 + static_cast<std::size_t>(rng.uniform() * 4);
    const bool directed = rng.uniform() < 0.5;
    const double density = rng.uniform();
    NetSeq net(n, t_count, directed);
    for (std::size_t t = 0; t < t_count; ++t)
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = directed ? 0 : i + 1; j < n; ++j)
                if (i != j && rng.uniform() < density) net.set_edge(t, i, j, true);
    return net;
}

std::vector<std::vector<MembershipPosterior>> random_posteriors(std::size_t t_count, std::size_t n, Eigen::Index k,
                                                                Rng& rng) {
    std::vector<std::vector<MembershipPosterior>> out(t_count);
    for (auto& pt : out)
        for (std::size_t i = 0; i < n; ++i) {
            Vector g = 3.0 * rng.standard_normal(k);
            g[k - 1] = 0.0;
            Matrix s = Matrix::Zero(k, k);
            if (k > 1) {
                const Matrix r = rng.standard_normal((k - 1) * (k - 1)).reshaped(k - 1, k - 1);
                s.topLeftCorner(k - 1, k - 1) = r * r.transpose() + Matrix::Identity(k - 1, k - 1);
            }
            pt.push_back({g, s});
        }
    return out;
}

}  // namespace

TEST(Edgelist, HeaderAndSingleEdge) {
    const auto net = read_text("#nodes=2 #times=1 directed=1\n1\t0\t1\n", NetworkFormat::edgelist);
    EXPECT_EQ(net.n_nodes(), 2u);
    EXPECT_EQ(net.n_times(), 1u);
    EXPECT_TRUE(net.directed);
    EXPECT_TRUE(net.snapshots[0](0, 1));
    EXPECT_FALSE(net.snapshots[0](1, 0));
}

TEST(Edgelist, EmptyBodyGivesEmptyNetwork) {
    const auto net = read_text("#nodes=4 #times=3 directed=0\n", NetworkFormat::edgelist);
    EXPECT_EQ(net.n_times(), 3u);
    EXPECT_FALSE(net.directed);
    for (const auto& s : net.snapshots) EXPECT_EQ(s.edge_count(), 0u);
}

TEST(Edgelist, UndirectedEdgesAreMirrored) {
    const auto net = read_text("#nodes=3 #times=1 directed=0\n1\t2\t0\n", NetworkFormat::edgelist);
    EXPECT_TRUE(net.snapshots[0](0, 2));
    EXPECT_TRUE(net.snapshots[0](2, 0));
    EXPECT_EQ(write_text(net, NetworkFormat::edgelist), "#nodes=3 #times=1 directed=0\n1\t0\t2\n");
}

TEST(Edgelist, AllOnesTwoNodesWritesTwoLines) {
    NetSeq net(2, 1, true);
    net.set_edge(0, 0, 1, true);
    net.set_edge(0, 1, 0, true);
    EXPECT_EQ(write_text(net, NetworkFormat::edgelist), "#nodes=2 #times=1 directed=1\n1\t0\t1\n1\t1\t0\n");
}

TEST(Edgelist, DuplicatesWarnAndCollapse) {
    std::vector<std::string> warnings;
    const auto net = read_text("#nodes=3 #times=1 directed=0\n1\t0\t1\n1\t1\t0\n1\t0\t2\n", NetworkFormat::edgelist,
                               &warnings);
    ASSERT_EQ(warnings.size(), 1u);
    EXPECT_NE(warnings[0].find("line 3"), std::string::npos);
    EXPECT_EQ(net.snapshots[0].edge_count(), 4u);
}

TEST(Edgelist, ErrorsCarryLineNumbers) {
    const std::string h = "#nodes=3 #times=2 directed=1\n";
    EXPECT_NE(error_of(h + "1\t0\t1\n1\t1\t1\n", NetworkFormat::edgelist).find("line 3: self-loop"), std::string::npos);
    EXPECT_NE(error_of(h + "1\t0\t3\n", NetworkFormat::edgelist).find("line 2: node index out of range"),
              std::string::npos);
    EXPECT_NE(error_of(h + "3\t0\t1\n", NetworkFormat::edgelist).find("line 2: time index out of range"),
              std::string::npos);
    EXPECT_NE(error_of(h + "0\t0\t1\n", NetworkFormat::edgelist).find("line 2"), std::string::npos);
    EXPECT_NE(error_of(h + "1\t0\n", NetworkFormat::edgelist).find("line 2"), std::string::npos);
    EXPECT_NE(error_of(h + "1\tx\t1\n", NetworkFormat::edgelist).find("line 2"), std::string::npos);
    EXPECT_NE(error_of("1\t0\t1\n", NetworkFormat::edgelist).find("missing header"), std::string::npos);
    EXPECT_NE(error_of("", NetworkFormat::edgelist).find("missing header"), std::string::npos);
    EXPECT_NE(error_of("#nodes=3 #times=2\n", NetworkFormat::edgelist).find("line 1"), std::string::npos);
}

TEST(Dense, TwoTimeLayout) {
    NetSeq net(3, 2, true);
    net.set_edge(0, 0, 1, true);
    net.set_edge(1, 2, 0, true);
    EXPECT_EQ(write_text(net, NetworkFormat::dense),
              "#nodes=3 #times=2 directed=1\n0,1,0\n0,0,0\n0,0,0\n\n0,0,0\n0,0,0\n1,0,0\n");
}

TEST(Dense, HeaderIsOptional) {
    const auto net = read_text("0,1,1\n0,0,0\n1,0,0\n\n0,0,0\n1,0,0\n0,0,0\n", NetworkFormat::dense);
    EXPECT_EQ(net.n_nodes(), 3u);
    EXPECT_EQ(net.n_times(), 2u);
    EXPECT_TRUE(net.directed);
    EXPECT_TRUE(net.snapshots[0](2, 0));
    EXPECT_TRUE(net.snapshots[1](1, 0));
}

TEST(Dense, ErrorsCarryLineNumbers) {
    EXPECT_NE(error_of("0,1\n1,1\n", NetworkFormat::dense).find("line 2: self-loop"), std::string::npos);
    EXPECT_NE(error_of("0,1,0\n0,0\n0,0,0\n", NetworkFormat::dense).find("line 2"), std::string::npos);
    EXPECT_NE(error_of("0,2\n0,0\n", NetworkFormat::dense).find("line 1"), std::string::npos);
    EXPECT_NE(error_of("#nodes=2 #times=1 directed=0\n0,1\n0,0\n", NetworkFormat::dense).find("not symmetric"),
              std::string::npos);
    EXPECT_NE(error_of("0,1\n0,0\n\n0,1\n", NetworkFormat::dense).find("rows"), std::string::npos);
    EXPECT_NE(error_of("#nodes=3 #times=1 directed=1\n0,1\n0,0\n", NetworkFormat::dense).find("header"),
              std::string::npos);
}

TEST(RoundTrip, RandomNetworksBothFormats) {
    Rng rng(99);
    for (int inst = 0; inst < 100; ++inst) {
        const NetSeq net = random_network(rng);
        for (auto fmt : {NetworkFormat::edgelist, NetworkFormat::dense}) {
            const NetSeq back = read_text(write_text(net, fmt), fmt);
            EXPECT_TRUE(same_network(net, back)) << "instance " << inst;
        }
    }
}

TEST(RoundTrip, FilePaths) {
    const std::string path = ::testing::TempDir() + "lnmmsb_io_roundtrip.tsv";
    Rng rng(5);
    const NetSeq net = random_network(rng);
    write_network(path, net, NetworkFormat::edgelist);
    EXPECT_TRUE(same_network(net, read_network(path, NetworkFormat::edgelist)));
    EXPECT_THROW(read_network(path + ".missing", NetworkFormat::edgelist), DataError);
}

TEST(Format, ParsesNames) {
    EXPECT_EQ(parse_network_format("dense"), NetworkFormat::dense);
    EXPECT_EQ(parse_network_format("edgelist"), NetworkFormat::edgelist);
    EXPECT_THROW(parse_network_format("csv"), std::invalid_argument);
}

TEST(Numbers, ShortestRoundTrip) {
    Rng rng(1);
    for (int i = 0; i < 200; ++i) {
        const double v = rng.standard_normal(1)[0] * std::pow(10.0, static_cast<double>(i % 30) - 15.0);
        EXPECT_EQ(std::stod(format_double(v)), v);
    }
    EXPECT_EQ(format_double(0.1), "0.1");
    EXPECT_EQ(format_double(1e-8), "1e-08");
    const Matrix m = (Matrix(2, 2) << 1.5, -0.25, 1.0 / 3.0, 0.0).finished();
    EXPECT_EQ(parse_matrix(format_matrix(m), "m"), m);
    EXPECT_THROW(parse_matrix("1,2;3", "m"), DataError);
}

TEST(KeyValues, CommentsAndOverrides) {
    std::istringstream in("# comment\nk = 3\n\nseed=4\nk=2\n");
    const auto kv = read_key_values(in);
    EXPECT_EQ(kv.at("k"), "2");
    EXPECT_EQ(kv.at("seed"), "4");
    std::istringstream bad("k 3\n");
    EXPECT_THROW(read_key_values(bad), DataError);
}

TEST(Config, RoundTripAndValidation) {
    RunConfig cfg;
    cfg.k = 4;
    cfg.k_range = {2, 3, 7};
    cfg.tol = 2.5e-7;
    cfg.seed = 123456789012345ULL;
    cfg.directed = false;
    cfg.model = ModelKind::dynamic_model;
    cfg.threads = 3;
    std::ostringstream out;
    write_config(out, cfg);
    std::istringstream in(out.str());
    RunConfig back;
    apply_config(back, read_key_values(in));
    std::ostringstream again;
    write_config(again, back);
    EXPECT_EQ(out.str(), again.str());
    EXPECT_EQ(back.tol, cfg.tol);

    EXPECT_EQ(parse_k_range("1..5"), (std::vector<std::size_t>{1, 2, 3, 4, 5}));
    EXPECT_EQ(parse_k_range("2,4"), (std::vector<std::size_t>{2, 4}));
    EXPECT_THROW(parse_k_range("5..1"), DataError);
    RunConfig c2;
    EXPECT_THROW(apply_config(c2, {{"unknown", "1"}}), std::invalid_argument);
    EXPECT_THROW(apply_config(c2, {{"model", "hybrid"}}), std::invalid_argument);
    c2.tol = 0.0;
    EXPECT_THROW(c2.validate(), std::invalid_argument);
}

TEST(Params, StaticRoundTrip) {
    const StaticParams p{(Vector(3) << 0.5, -1.25, 0.0).finished(), scenario_covariance(3, 2.0),
                         CompatMatrix(scenario_compat(3, ScenarioCfg{}))};
    std::ostringstream out;
    write_params(out, p);
    std::istringstream in(out.str());
    const auto kv = read_key_values(in);
    EXPECT_FALSE(is_dynamic_params(kv));
    const auto back = static_params_from(kv);
    EXPECT_EQ(back.mu, p.mu);
    EXPECT_EQ(back.sigma, p.sigma);
    EXPECT_EQ(back.b.matrix(), p.b.matrix());
}

TEST(Params, ActiveBlockShorthandAndDefaults) {
    const auto p = static_params_from({{"b", "0.9,0.1;0.2,0.7"}, {"mu", "0.5"}, {"sigma", "4"}});
    EXPECT_EQ(p.mu, (Vector(2) << 0.5, 0.0).finished());
    EXPECT_EQ(p.sigma, (Matrix(2, 2) << 4.0, 0.0, 0.0, 0.0).finished());
    const auto d = static_params_from({{"b", "0.3"}});
    EXPECT_EQ(d.mu.size(), 1);
    EXPECT_THROW(static_params_from({{"mu", "0"}}), DataError);
    EXPECT_THROW(static_params_from({{"b", "1.5"}}), DataError);
    EXPECT_THROW(static_params_from({{"b", "0.5,0.5;0.5,0.5"}, {"mu", "1,2,3"}}), DataError);
}

TEST(Params, DynamicRoundTrip) {
    DynParams p = scenario_dynamic_params(3, 4);
    p.a = Matrix::Identity(3, 3);
    p.sigmas[2] = scenario_covariance(3, 3.0);
    for (std::size_t t = 0; t < 4; ++t) p.mu_traj.push_back((Vector(3) << 0.1 * t, -0.2, 0.0).finished());
    std::ostringstream out;
    write_params(out, p);
    std::istringstream in(out.str());
    const auto kv = read_key_values(in);
    EXPECT_TRUE(is_dynamic_params(kv));
    const auto back = dyn_params_from(kv, 4);
    EXPECT_EQ(back.nu, p.nu);
    EXPECT_EQ(back.phi, p.phi);
    EXPECT_EQ(back.a, p.a);
    EXPECT_EQ(back.b.matrix(), p.b.matrix());
    ASSERT_EQ(back.sigmas.size(), 4u);
    for (std::size_t t = 0; t < 4; ++t) {
        EXPECT_EQ(back.sigmas[t], p.sigmas[t]);
        EXPECT_EQ(back.mu_traj[t], p.mu_traj[t]);
    }
    KeyValues partial = kv;
    partial.erase("mu_t2");
    EXPECT_THROW(dyn_params_from(partial, 4), DataError);
}

TEST(Trajectories, ReimportWithinTolerance) {
    Rng rng(8);
    const auto posts = random_posteriors(3, 7, 4, rng);
    std::ostringstream out;
    write_trajectories(out, posts);
    std::istringstream in(out.str());
    const auto pis = read_trajectories(in);
    ASSERT_EQ(pis.size(), 3u);
    std::size_t rows = 0;
    for (char c : out.str()) rows += c == '\n';
    EXPECT_EQ(rows - 1, 3u * 7u * 4u);
    for (std::size_t t = 0; t < 3; ++t)
        for (std::size_t i = 0; i < 7; ++i) {
            const Vector pi = logistic_transform(posts[t][i].gamma_tilde);
            EXPECT_LT((pis[t][i] - pi).cwiseAbs().maxCoeff(), 1e-9);
            EXPECT_NEAR(pis[t][i].sum(), 1.0, 1e-9);
        }
}

TEST(Trajectories, SingleRoleIsOne) {
    const std::vector<std::vector<MembershipPosterior>> posts(2, {{Vector::Zero(1), Matrix::Zero(1, 1)}});
    std::ostringstream out;
    write_trajectories(out, posts);
    EXPECT_EQ(out.str(), "t,node,role,pi,gamma\n1,0,0,1,0\n2,0,0,1,0\n");
}

TEST(Trajectories, DominantRole) {
    const std::vector<std::vector<MembershipPosterior>> posts{
        {{(Vector(3) << 2.0, -1.0, 0.0).finished(), Matrix::Zero(3, 3)},
         {(Vector(3) << -2.0, -1.0, 0.0).finished(), Matrix::Zero(3, 3)}}};
    std::ostringstream out;
    write_dominant_roles(out, posts);
    EXPECT_EQ(out.str(), "t,node,dominant_role\n1,0,0\n1,1,2\n");
}

TEST(Posteriors, ExactRoundTrip) {
    Rng rng(12);
    const auto posts = random_posteriors(2, 5, 3, rng);
    std::ostringstream out;
    write_posteriors(out, posts);
    std::istringstream in(out.str());
    const auto back = read_posteriors(in);
    ASSERT_EQ(back.size(), 2u);
    for (std::size_t t = 0; t < 2; ++t)
        for (std::size_t i = 0; i < 5; ++i) {
            EXPECT_EQ(back[t][i].gamma_tilde, posts[t][i].gamma_tilde);
            EXPECT_EQ(back[t][i].sigma_tilde, posts[t][i].sigma_tilde);
        }
    std::istringstream bad("t,node,gamma,sigma\n1,1,0,0\n");
    EXPECT_THROW(read_posteriors(bad), DataError);
}
