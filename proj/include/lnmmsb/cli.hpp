#pragma once

// Command-line front end: generate, fit, evaluate, select and export.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 data error
// (unreadable or malformed input), 3 numerical failure.
//
// Precedence of settings: built-in defaults, then `--config FILE`, then
// explicit flags. The effective configuration is written to config.txt in
// every output directory.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "lnmmsb/alignment.hpp"
#include "lnmmsb/dynamic_inference.hpp"
#include "lnmmsb/evaluation.hpp"
#include "lnmmsb/io.hpp"
#include "lnmmsb/sampler.hpp"
#include "lnmmsb/static_inference.hpp"

namespace lnmmsb {

namespace cli_detail {

namespace fs = std::filesystem;

struct Common {
    std::uint64_t seed = 0;
    std::string config;
    unsigned threads = 0;
    std::string out;
    std::string input;
    std::string format = "edgelist";
    std::string model;
    std::size_t k = 0;
    std::string k_range;
    std::size_t is_samples = 0;
};

inline unsigned default_threads() { return std::max(1u, std::thread::hardware_concurrency()); }

inline void add_common(CLI::App& sub, Common& c, bool with_input) {
    sub.add_option("--seed", c.seed, "Random seed");
    sub.add_option("--config", c.config, "key=value file overriding defaults")->check(CLI::ExistingFile);
    sub.add_option("--threads", c.threads, "Worker threads (default: available cores)");
    if (with_input) {
        sub.add_option("--input", c.input, "Network file")->required();
        sub.add_option("--format", c.format, "Network format: edgelist or dense");
    }
}

/// Defaults, then the config file, then any flag given on the command line.
inline RunConfig effective_config(const CLI::App& sub, const Common& c) {
    RunConfig cfg;
    cfg.threads = default_threads();
    if (!c.config.empty()) apply_config(cfg, read_key_values(c.config));
    auto given = [&](const char* name) {
        const CLI::Option* o = sub.get_option_no_throw(name);
        return o != nullptr && o->count() > 0;
    };
    if (given("--seed")) cfg.seed = c.seed;
    if (given("--threads")) cfg.threads = c.threads;
    if (given("--model")) cfg.model = parse_model(c.model);
    if (given("--k")) cfg.k = c.k;
    if (given("--k-range")) cfg.k_range = parse_k_range(c.k_range);
    if (given("--is-samples")) cfg.is_samples = c.is_samples;
    cfg.validate();
    return cfg;
}

inline DynFitCfg fit_cfg(const RunConfig& rc) {
    DynFitCfg f;
    f.tol = rc.tol;
    f.max_inner = rc.max_inner;
    f.max_outer = rc.max_outer;
    f.n_restarts = rc.n_restarts;
    f.jitter = rc.jitter;
    f.threads = rc.threads;
    return f;
}

inline fs::path prepare_dir(const std::string& dir) {
    if (dir.empty()) throw std::invalid_argument("--out is required");
    fs::path p(dir);
    std::error_code ec;
    fs::create_directories(p, ec);
    if (ec || !fs::is_directory(p)) throw DataError("cannot create output directory '" + dir + "'");
    return p;
}

template <class Fn>
void write_file(const fs::path& path, Fn&& fn) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    fn(out);
    if (!out) throw DataError("write failed for '" + path.string() + "'");
}

inline void echo_config(const fs::path& dir, const RunConfig& cfg) {
    write_file(dir / "config.txt", [&](std::ostream& o) { write_config(o, cfg); });
}

inline std::string network_file_name(NetworkFormat f) { return f == NetworkFormat::edgelist ? "network.tsv" : "network.csv"; }

inline NetSeq load_network(const Common& c, std::ostream& err) {
    return read_network(c.input, parse_network_format(c.format),
                        [&](const std::string& w) { err << "warning: " << c.input << ": " << w << '\n'; });
}

inline std::vector<std::vector<MembershipPosterior>> posteriors_from_gammas(
    const std::vector<std::vector<Vector>>& gammas) {
    std::vector<std::vector<MembershipPosterior>> out;
    for (const auto& gt : gammas) {
        std::vector<MembershipPosterior> row;
        for (const auto& g : gt) row.push_back({g, Matrix::Zero(g.size(), g.size())});
        out.push_back(std::move(row));
    }
    return out;
}

inline void write_trace(std::ostream& o, const std::vector<FitReport>& reports) {
    o << "fit,step,objective\n";
    for (std::size_t f = 0; f < reports.size(); ++f)
        for (std::size_t s = 0; s < reports[f].objective_trace.size(); ++s)
            o << (f + 1) << ',' << (s + 1) << ',' << format_double(reports[f].objective_trace[s]) << '\n';
}

inline std::string params_name(std::size_t t) { return "params_t" + std::to_string(t + 1) + ".txt"; }

inline void write_fit_exports(const fs::path& dir, const std::vector<std::vector<MembershipPosterior>>& posts) {
    write_file(dir / "trajectories.csv", [&](std::ostream& o) { write_trajectories(o, posts); });
    write_file(dir / "dominant.csv", [&](std::ostream& o) { write_dominant_roles(o, posts); });
    write_file(dir / "posteriors.csv", [&](std::ostream& o) { write_posteriors(o, posts); });
}

/// Loaded fit directory: either one dynamic parameter set or one static set
/// per time point.
struct LoadedFit {
    bool dynamic = false;
    DynParams dyn;
    std::vector<StaticParams> stat;
    std::vector<std::vector<MembershipPosterior>> posteriors;
};

inline LoadedFit load_fit(const std::string& dir) {
    const fs::path p(dir);
    LoadedFit f;
    std::ifstream pin(p / "posteriors.csv");
    if (!pin) throw DataError("fit directory '" + dir + "' has no posteriors.csv");
    f.posteriors = read_posteriors(pin);
    const std::size_t t_count = f.posteriors.size();
    if (fs::exists(p / "params.txt")) {
        f.dynamic = true;
        f.dyn = dyn_params_from(read_key_values((p / "params.txt").string()), t_count);
        if (f.dyn.mu_traj.size() != t_count) throw DataError("params.txt lacks the fitted trajectory");
    } else {
        for (std::size_t t = 0; t < t_count; ++t)
            f.stat.push_back(static_params_from(read_key_values((p / params_name(t)).string())));
    }
    return f;
}

// ---------------------------------------------------------------------------

inline int run_generate(const CLI::App& sub, const Common& c, std::size_t nodes, std::size_t roles,
                        std::size_t times, const std::string& params_path, int directed, std::ostream& out) {
    RunConfig cfg = effective_config(sub, c);
    if (sub.get_option("--model")->count() == 0 && times > 1) cfg.model = ModelKind::dynamic_model;
    if (cfg.model == ModelKind::static_model && times != 1)
        throw std::invalid_argument("static generation needs --times 1");
    if (directed != 0 && directed != 1) throw std::invalid_argument("--directed must be 0 or 1");
    cfg.directed = directed == 1;
    const NetworkFormat fmt = parse_network_format(c.format);
    const fs::path dir = prepare_dir(c.out);

    std::optional<KeyValues> kv;
    if (!params_path.empty()) kv = read_key_values(params_path);
    if (kv && kv->count("b")) roles = static_cast<std::size_t>(parse_matrix(kv->at("b"), "b").rows());
    cfg.k = roles;
    Dims dims{nodes, roles, times};
    dims.validate();

    NetSeq net;
    std::vector<std::vector<Vector>> gammas;
    if (cfg.model == ModelKind::static_model) {
        const StaticParams p = kv ? static_params_from(*kv) : scenario_static_params(roles);
        StaticSample s = sample_static_network(p, dims, cfg.seed, cfg.directed);
        net = std::move(s.net);
        gammas.push_back(std::move(s.gammas));
        write_file(dir / "params.txt", [&](std::ostream& o) { write_params(o, p); });
    } else {
        DynParams p = kv ? dyn_params_from(*kv, times) : scenario_dynamic_params(roles, times);
        DynamicSample s = sample_dynamic_network(p, dims, cfg.seed, cfg.directed);
        net = std::move(s.net);
        gammas = std::move(s.gammas);
        p.mu_traj = s.mu_traj;
        write_file(dir / "params.txt", [&](std::ostream& o) { write_params(o, p); });
    }
    write_file(dir / network_file_name(fmt), [&](std::ostream& o) { write_network(o, net, fmt); });
    write_file(dir / "truth.csv", [&](std::ostream& o) { write_trajectories(o, posteriors_from_gammas(gammas)); });
    echo_config(dir, cfg);
    std::size_t edges = 0;
    for (const auto& a : net.snapshots) edges += a.edge_count();
    out << "generated N=" << nodes << " K=" << roles << " T=" << times << " edges=" << edges << " -> "
        << (dir / network_file_name(fmt)).string() << '\n';
    return 0;
}

inline int run_fit(const CLI::App& sub, const Common& c, std::ostream& out, std::ostream& err) {
    RunConfig cfg = effective_config(sub, c);
    const NetSeq net = load_network(c, err);
    cfg.directed = net.directed;
    const fs::path dir = prepare_dir(c.out);
    const DynFitCfg fc = fit_cfg(cfg);
    std::vector<FitReport> reports;
    std::vector<std::vector<MembershipPosterior>> posts;
    if (cfg.model == ModelKind::dynamic_model) {
        const DynamicFit f = fit_dmmsb(net, cfg.k, fc, cfg.seed);
        posts = f.posteriors;
        reports.push_back(f.report);
        write_file(dir / "params.txt", [&](std::ostream& o) { write_params(o, f.params); });
    } else {
        const Rng root(cfg.seed);
        for (std::size_t t = 0; t < net.n_times(); ++t) {
            const StaticFit f = fit_lnmmsb(net, cfg.k, fc, root.split(t).seed(), std::nullopt, std::nullopt, t);
            posts.push_back(f.posteriors);
            reports.push_back(f.report);
            write_file(dir / params_name(t), [&](std::ostream& o) { write_params(o, f.params); });
        }
    }
    write_fit_exports(dir, posts);
    write_file(dir / "trace.csv", [&](std::ostream& o) { write_trace(o, reports); });
    echo_config(dir, cfg);
    bool converged = true;
    for (const auto& r : reports) converged = converged && r.converged;
    out << "fit model=" << (cfg.model == ModelKind::dynamic_model ? "dynamic" : "static") << " K=" << cfg.k
        << " converged=" << (converged ? 1 : 0) << std::setprecision(10)
        << " objective=" << reports.back().final_objective() << " -> " << dir.string() << '\n';
    return 0;
}

inline int run_evaluate(const CLI::App& sub, const Common& c, const std::string& fit_dir, const std::string& truth,
                        std::ostream& out, std::ostream& err) {
    RunConfig cfg = effective_config(sub, c);
    const NetSeq net = load_network(c, err);
    cfg.directed = net.directed;
    const LoadedFit fit = load_fit(fit_dir);
    if (fit.posteriors.size() != net.n_times() || fit.posteriors.front().size() != net.n_nodes())
        throw DataError("fit does not match the network dimensions");
    const std::size_t k = static_cast<std::size_t>(fit.posteriors.front().front().gamma_tilde.size());
    cfg.k = k;
    cfg.model = fit.dynamic ? ModelKind::dynamic_model : ModelKind::static_model;

    std::ostringstream report;
    report << std::setprecision(10);
    if (!truth.empty()) {
        std::ifstream tin(truth);
        if (!tin) throw DataError("cannot open '" + truth + "'");
        const auto truth_pi = read_trajectories(tin);
        if (truth_pi.size() != net.n_times()) throw DataError("truth file does not match T");
        double l1 = 0.0, l2 = 0.0;
        for (std::size_t t = 0; t < net.n_times(); ++t) {
            const auto est = memberships(fit.posteriors[t]);
            const Alignment al = align_roles(truth_pi[t], est);
            const auto aligned = apply_alignment(est, al);
            l1 += membership_error(truth_pi[t], aligned, Norm::l1);
            l2 += membership_error(truth_pi[t], aligned, Norm::l2);
        }
        const double tt = static_cast<double>(net.n_times());
        report << "membership_error_l1=" << l1 / tt << '\n' << "membership_error_l2=" << l2 / tt << '\n';
    }
    ModelScore score;
    const Dims dims{net.n_nodes(), k, net.n_times()};
    if (fit.dynamic) {
        const auto ll = loglik_importance(net, fit.dyn, fit.posteriors, cfg.is_samples, cfg.seed, cfg.threads,
                                          cfg.jitter);
        score = bic_score(ll.loglik, dims, ModelKind::dynamic_model, net.directed, ll.se);
    } else {
        const Rng root(cfg.seed);
        double ll = 0.0, var = 0.0;
        for (std::size_t t = 0; t < net.n_times(); ++t) {
            const auto e = loglik_importance(net, fit.stat[t], fit.posteriors[t], cfg.is_samples, root.split(t).seed(),
                                             t, cfg.threads, cfg.jitter);
            ll += e.loglik;
            var += e.se * e.se;
        }
        score = bic_score(ll, Dims{net.n_nodes(), k, 1}, ModelKind::static_model, net.directed, std::sqrt(var));
        score.n_params *= net.n_times();
        score.bic = -2.0 * ll + static_cast<double>(score.n_params) *
                                    std::log(static_cast<double>(net.dyads_per_time() * net.n_times()));
    }
    report << "loglik=" << score.loglik << '\n'
           << "loglik_se=" << score.loglik_se << '\n'
           << "n_params=" << score.n_params << '\n'
           << "bic=" << score.bic << '\n';
    out << report.str();
    if (!c.out.empty()) {
        const fs::path dir = prepare_dir(c.out);
        write_file(dir / "evaluation.txt", [&](std::ostream& o) { o << report.str(); });
        echo_config(dir, cfg);
    }
    return 0;
}

inline int run_select(const CLI::App& sub, const Common& c, std::ostream& out, std::ostream& err) {
    RunConfig cfg = effective_config(sub, c);
    const NetSeq net = load_network(c, err);
    cfg.directed = net.directed;
    SelectCfg sc;
    sc.fit = fit_cfg(cfg);
    sc.model = cfg.model;
    sc.is_samples = cfg.is_samples;
    const Selection sel = select_roles(net, cfg.k_range, sc, cfg.seed);
    std::ostringstream table;
    table << "k,ok,loglik,loglik_se,n_params,bic\n" << std::setprecision(10);
    for (const auto& r : sel.scores) {
        if (r.ok) {
            table << r.k << ",1," << r.score.loglik << ',' << r.score.loglik_se << ',' << r.score.n_params << ','
                  << r.score.bic << '\n';
            out << "k=" << r.k << " loglik=" << std::setprecision(10) << r.score.loglik
                << " se=" << r.score.loglik_se << " n_params=" << r.score.n_params << " bic=" << r.score.bic << '\n';
        } else {
            table << r.k << ",0,,,,\n";
            err << "k=" << r.k << " failed: " << r.error << '\n';
        }
    }
    out << "best_k=" << sel.best_k << '\n';
    if (!c.out.empty()) {
        const fs::path dir = prepare_dir(c.out);
        write_file(dir / "select.csv", [&](std::ostream& o) { o << table.str() << "best_k=" << sel.best_k << '\n'; });
        echo_config(dir, cfg);
    }
    return 0;
}

inline int run_export(const CLI::App& sub, const Common& c, const std::string& fit_dir, std::ostream& out) {
    RunConfig cfg = effective_config(sub, c);
    const LoadedFit fit = load_fit(fit_dir);
    cfg.k = static_cast<std::size_t>(fit.posteriors.front().front().gamma_tilde.size());
    cfg.model = fit.dynamic ? ModelKind::dynamic_model : ModelKind::static_model;
    const fs::path dir = prepare_dir(c.out);
    write_fit_exports(dir, fit.posteriors);
    if (fit.dynamic) {
        write_file(dir / "params.txt", [&](std::ostream& o) { write_params(o, fit.dyn); });
    } else {
        for (std::size_t t = 0; t < fit.stat.size(); ++t)
            write_file(dir / params_name(t), [&](std::ostream& o) { write_params(o, fit.stat[t]); });
    }
    echo_config(dir, cfg);
    out << "exported T=" << fit.posteriors.size() << " N=" << fit.posteriors.front().size() << " K=" << cfg.k
        << " -> " << dir.string() << '\n';
    return 0;
}

}  // namespace cli_detail

/// Runs the command-line tool and returns its exit code.
inline int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    using namespace cli_detail;
    CLI::App app{"Mixed membership stochastic blockmodels with logistic-normal priors"};
    app.require_subcommand(1);
    Common c;
    std::size_t nodes = 100, roles = 3, times = 1;
    int directed = 1;
    std::string params_path, fit_dir, truth;

    CLI::App* gen = app.add_subcommand("generate", "Sample a static or dynamic network");
    add_common(*gen, c, false);
    gen->add_option("--nodes", nodes, "Number of nodes");
    gen->add_option("--roles", roles, "Number of roles (ignored when --params gives B)");
    gen->add_option("--times", times, "Number of time points");
    gen->add_option("--params", params_path, "Parameter file")->check(CLI::ExistingFile);
    gen->add_option("--directed", directed, "1 for directed, 0 for undirected");
    gen->add_option("--format", c.format, "Network format: edgelist or dense");
    gen->add_option("--model", c.model, "static or dynamic (default: dynamic when --times > 1)");
    gen->add_option("--out", c.out, "Output directory")->required();

    CLI::App* fit = app.add_subcommand("fit", "Fit a static or dynamic model");
    add_common(*fit, c, true);
    fit->add_option("--model", c.model, "static or dynamic");
    fit->add_option("--k", c.k, "Number of roles");
    fit->add_option("--out", c.out, "Output directory")->required();

    CLI::App* eval = app.add_subcommand("evaluate", "Score a fit against data and optional truth");
    add_common(*eval, c, true);
    eval->add_option("--fit", fit_dir, "Fit output directory")->required()->check(CLI::ExistingDirectory);
    eval->add_option("--truth", truth, "True memberships in trajectory format")->check(CLI::ExistingFile);
    eval->add_option("--is-samples", c.is_samples, "Importance samples");
    eval->add_option("--out", c.out, "Output directory");

    CLI::App* sel = app.add_subcommand("select", "Choose the number of roles by BIC");
    add_common(*sel, c, true);
    sel->add_option("--model", c.model, "static or dynamic");
    sel->add_option("--k-range", c.k_range, "Range such as 1..5 or a list such as 2,3,4");
    sel->add_option("--is-samples", c.is_samples, "Importance samples");
    sel->add_option("--out", c.out, "Output directory");

    CLI::App* exp = app.add_subcommand("export", "Re-export the trajectories of a fit");
    add_common(*exp, c, false);
    exp->add_option("--fit", fit_dir, "Fit output directory")->required()->check(CLI::ExistingDirectory);
    exp->add_option("--out", c.out, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }

    try {
        if (gen->parsed()) return run_generate(*gen, c, nodes, roles, times, params_path, directed, out);
        if (fit->parsed()) return run_fit(*fit, c, out, err);
        if (eval->parsed()) return run_evaluate(*eval, c, fit_dir, truth, out, err);
        if (sel->parsed()) return run_select(*sel, c, out, err);
        if (exp->parsed()) return run_export(*exp, c, fit_dir, out);
    } catch (const DataError& e) {
        err << "data error: " << e.what() << '\n';
        return 2;
    } catch (const NumericalError& e) {
        err << "numerical error: " << e.what() << '\n';
        return 3;
    } catch (const std::invalid_argument& e) {
        err << "usage error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    }
    return 1;
}

}  // namespace lnmmsb
