#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "lnmmsb/cli.hpp"

using namespace lnmmsb;
namespace fs = std::filesystem;

namespace {

struct CliRun {
    int code;
    std::string out;
    std::string err;
};

CliRun run(std::vector<std::string> args) {
    args.insert(args.begin(), "lnmmsb");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::path(::testing::TempDir()) / ("lnmmsb_cli_" + name);
    fs::remove_all(p);
    return p;
}

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream out(p);
    out << text;
}

// A small dynamic data set shared by the end-to-end tests.
const fs::path& generated() {
    static const fs::path dir = [] {
        const fs::path d = scratch("gen_small");
        const CliRun r = run({"generate", "--nodes", "30", "--roles", "2", "--times", "3", "--seed", "5", "--threads",
                           "1", "--out", d.string()});
        EXPECT_EQ(r.code, 0) << r.err;
        return d;
    }();
    return dir;
}

fs::path quick_config() {
    const fs::path p = scratch("quick.cfg");
    write_text(p, "n_restarts=1\nis_samples=200\nthreads=1\n");
    return p;
}

}  // namespace

TEST(Cli, HelpAndUsageErrors) {
    EXPECT_EQ(run({"--help"}).code, 0);
    EXPECT_NE(run({"--help"}).out.find("generate"), std::string::npos);
    EXPECT_EQ(run({}).code, 1);
    EXPECT_EQ(run({"frobnicate"}).code, 1);
    EXPECT_EQ(run({"fit", "--out", "x"}).code, 1);  // --input missing
    const CliRun bad_model = run({"generate", "--model", "hybrid", "--out", scratch("bad_model").string()});
    EXPECT_EQ(bad_model.code, 1);
    EXPECT_NE(bad_model.err.find("model"), std::string::npos);
}

TEST(Cli, GenerateIsByteIdentical) {
    const fs::path a = scratch("gen_a"), b = scratch("gen_b");
    for (const auto& d : {a, b}) {
        const CliRun r = run({"generate", "--nodes", "100", "--roles", "3", "--times", "10", "--seed", "7", "--threads",
                           "1", "--out", d.string()});
        ASSERT_EQ(r.code, 0) << r.err;
    }
    for (const char* f : {"network.tsv", "truth.csv", "params.txt", "config.txt"}) {
        ASSERT_TRUE(fs::exists(a / f)) << f;
        EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
    }
    EXPECT_NE(slurp(a / "config.txt").find("seed=7"), std::string::npos);
    EXPECT_NE(slurp(a / "config.txt").find("model=dynamic"), std::string::npos);
    std::ifstream in(a / "network.tsv");
    const NetSeq net = read_network(in, NetworkFormat::edgelist);
    EXPECT_EQ(net.n_nodes(), 100u);
    EXPECT_EQ(net.n_times(), 10u);
}

TEST(Cli, GenerateFromParamsFile) {
    const fs::path params = scratch("params_in.txt");
    write_text(params, "b=0.9,0.05;0.05,0.8\nmu=0.5\nsigma=4\n");
    const fs::path out = scratch("gen_params");
    const CliRun r = run({"generate", "--params", params.string(), "--nodes", "12", "--directed", "0", "--format",
                       "dense", "--seed", "3", "--out", out.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    std::ifstream in(out / "network.csv");
    const NetSeq net = read_network(in, NetworkFormat::dense);
    EXPECT_FALSE(net.directed);
    EXPECT_EQ(net.n_nodes(), 12u);
    EXPECT_NE(slurp(out / "config.txt").find("model=static"), std::string::npos);
    EXPECT_EQ(run({"generate", "--model", "static", "--times", "2", "--out", scratch("st2").string()}).code, 1);
}

TEST(Cli, DynamicFitEvaluateExport) {
    const fs::path data = generated();
    const fs::path fit = scratch("fit_dyn");
    const CliRun f = run({"fit", "--input", (data / "network.tsv").string(), "--model", "dynamic", "--k", "2", "--seed",
                       "4", "--config", quick_config().string(), "--out", fit.string()});
    ASSERT_EQ(f.code, 0) << f.err;
    for (const char* name : {"params.txt", "trajectories.csv", "dominant.csv", "posteriors.csv", "trace.csv",
                             "config.txt"})
        EXPECT_TRUE(fs::exists(fit / name)) << name;
    EXPECT_NE(slurp(fit / "config.txt").find("seed=4"), std::string::npos);
    EXPECT_NE(slurp(fit / "config.txt").find("n_restarts=1"), std::string::npos);

    const fs::path eval = scratch("eval_dyn");
    const CliRun e = run({"evaluate", "--input", (data / "network.tsv").string(), "--fit", fit.string(), "--truth",
                       (data / "truth.csv").string(), "--is-samples", "200", "--seed", "1", "--threads", "1",
                       "--out", eval.string()});
    ASSERT_EQ(e.code, 0) << e.err;
    for (const char* key : {"membership_error_l1=", "membership_error_l2=", "loglik=", "loglik_se=", "n_params=",
                            "bic="})
        EXPECT_NE(e.out.find(key), std::string::npos) << key;
    EXPECT_NE(e.out.find("n_params=" + std::to_string(parameter_count(2, 3, ModelKind::dynamic_model))),
              std::string::npos);
    EXPECT_EQ(slurp(eval / "evaluation.txt"), e.out);

    const fs::path exp = scratch("export_dyn");
    const CliRun x = run({"export", "--fit", fit.string(), "--out", exp.string()});
    ASSERT_EQ(x.code, 0) << x.err;
    EXPECT_EQ(slurp(exp / "trajectories.csv"), slurp(fit / "trajectories.csv"));
    EXPECT_EQ(slurp(exp / "params.txt"), slurp(fit / "params.txt"));
}

TEST(Cli, FitIsDeterministicIncludingTrace) {
    const fs::path data = generated();
    const fs::path a = scratch("fit_det_a"), b = scratch("fit_det_b");
    for (const auto& d : {a, b}) {
        const CliRun r = run({"fit", "--input", (data / "network.tsv").string(), "--model", "static", "--k", "2",
                           "--seed", "9", "--config", quick_config().string(), "--out", d.string()});
        ASSERT_EQ(r.code, 0) << r.err;
    }
    for (const char* name : {"params_t1.txt", "params_t3.txt", "trace.csv", "posteriors.csv", "trajectories.csv"})
        EXPECT_EQ(slurp(a / name), slurp(b / name)) << name;
}

TEST(Cli, StaticFitEvaluatesPerSnapshot) {
    const fs::path data = generated();
    const fs::path fit = scratch("fit_static");
    ASSERT_EQ(run({"fit", "--input", (data / "network.tsv").string(), "--model", "static", "--k", "2", "--seed", "2",
                   "--config", quick_config().string(), "--out", fit.string()})
                  .code,
              0);
    const CliRun e = run({"evaluate", "--input", (data / "network.tsv").string(), "--fit", fit.string(), "--config",
                       quick_config().string()});
    ASSERT_EQ(e.code, 0) << e.err;
    EXPECT_NE(e.out.find("n_params=" + std::to_string(3 * parameter_count(2, 1, ModelKind::static_model))),
              std::string::npos);
}

TEST(Cli, SelectReportsEveryCandidate) {
    const fs::path data = generated();
    const fs::path out = scratch("select");
    const CliRun r = run({"select", "--input", (data / "network.tsv").string(), "--k-range", "1..3", "--seed", "3",
                       "--config", quick_config().string(), "--out", out.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    for (const char* key : {"k=1 ", "k=2 ", "k=3 ", "best_k="}) EXPECT_NE(r.out.find(key), std::string::npos) << key;
    const std::string table = slurp(out / "select.csv");
    EXPECT_EQ(table.rfind("k,ok,loglik,loglik_se,n_params,bic\n", 0), 0u);
    EXPECT_NE(slurp(out / "config.txt").find("k_range=1,2,3"), std::string::npos);
}

TEST(Cli, DataErrorsExitTwo) {
    const fs::path bad = scratch("bad.tsv");
    write_text(bad, "#nodes=3 #times=1 directed=1\n1\t0\t1\n1\t2\t2\n");
    const CliRun r = run({"fit", "--input", bad.string(), "--out", scratch("fit_bad").string()});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("line 3"), std::string::npos);
    EXPECT_EQ(run({"fit", "--input", (scratch("missing") / "x.tsv").string(), "--out", scratch("fm").string()}).code,
              2);
    EXPECT_EQ(run({"fit", "--input", bad.string(), "--format", "xml", "--out", scratch("fx").string()}).code, 1);
}

TEST(Cli, UnknownConfigKeyIsUsageError) {
    const fs::path cfg = scratch("unknown.cfg");
    write_text(cfg, "restarts=3\n");
    const CliRun r = run({"fit", "--input", (generated() / "network.tsv").string(), "--config", cfg.string(), "--out",
                       scratch("fit_cfg").string()});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("restarts"), std::string::npos);
}

TEST(Cli, NumericalFailureExitsThree) {
    const fs::path data = generated();
    const fs::path fit = scratch("fit_num");
    ASSERT_EQ(run({"fit", "--input", (data / "network.tsv").string(), "--model", "dynamic", "--k", "2", "--config",
                   quick_config().string(), "--out", fit.string()})
                  .code,
              0);
    // A proposal covariance of zero cannot be factorized.
    std::ifstream in(fit / "posteriors.csv");
    auto posts = read_posteriors(in);
    for (auto& pt : posts)
        for (auto& q : pt) q.sigma_tilde.setZero();
    std::ofstream out(fit / "posteriors.csv");
    write_posteriors(out, posts);
    out.close();
    const CliRun r = run({"evaluate", "--input", (data / "network.tsv").string(), "--fit", fit.string(), "--config",
                       quick_config().string()});
    EXPECT_EQ(r.code, 3);
    EXPECT_NE(r.err.find("numerical"), std::string::npos);
}

TEST(Cli, SampsonShapedDenseFixture) {
    const fs::path input = fs::path(LNMMSB_TEST_DATA_DIR) / "sampson_like.csv";
    const fs::path fit = scratch("fit_sampson");
    const CliRun f = run({"fit", "--input", input.string(), "--format", "dense", "--model", "dynamic", "--k", "3",
                       "--seed", "1", "--threads", "1", "--out", fit.string()});
    ASSERT_EQ(f.code, 0) << f.err;
    std::ifstream in(fit / "trajectories.csv");
    const auto pis = read_trajectories(in);
    ASSERT_EQ(pis.size(), 3u);
    for (const auto& pt : pis) {
        ASSERT_EQ(pt.size(), 18u);
        for (const auto& p : pt) EXPECT_NEAR(p.sum(), 1.0, 1e-8);
    }
    const CliRun s = run({"select", "--input", input.string(), "--format", "dense", "--k-range", "1..3", "--seed", "1",
                       "--config", quick_config().string()});
    ASSERT_EQ(s.code, 0) << s.err;
    EXPECT_NE(s.out.find("best_k="), std::string::npos);
}
