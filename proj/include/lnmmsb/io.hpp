#pragma once

// Text formats for networks, parameters, run configurations and fit
// exports.
//
// Edge list:  a header `#nodes=N #times=T directed={0,1}` followed by lines
//             `t<TAB>i<TAB>j` with 1-based t and 0-based node ids. Absent
//             pairs are non-edges. Undirected networks are written once per
//             pair with i < j.
// Dense CSV:  the same header (optional on input, then directed=1 is
//             assumed), then N rows of N comma-separated 0/1 values per time
//             point, with one blank line between time points.
// Params:     `key=value` lines. Vectors are comma-separated; matrix rows
//             are separated by ';'.

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <functional>
#include <iomanip>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "lnmmsb/linalg.hpp"
#include "lnmmsb/logistic.hpp"
#include "lnmmsb/types.hpp"

namespace lnmmsb {

enum class NetworkFormat { edgelist, dense };

/// Receives non-fatal diagnostics such as dropped duplicate lines.
using WarningSink = std::function<void(const std::string&)>;

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, sep)) out.push_back(trim(cur));
    if (!s.empty() && s.back() == sep) out.emplace_back();
    return out;
}

inline std::string at_line(std::size_t line) { return "line " + std::to_string(line) + ": "; }

inline std::uint64_t parse_uint(const std::string& s, const std::string& where) {
    if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos)
        throw DataError(where + "expected a non-negative integer, got '" + s + "'");
    try {
        return std::stoull(s);
    } catch (const std::exception&) {
        throw DataError(where + "integer out of range: '" + s + "'");
    }
}

inline double parse_double(const std::string& s, const std::string& where) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        throw DataError(where + "expected a number, got '" + s + "'");
    }
    if (used != s.size()) throw DataError(where + "expected a number, got '" + s + "'");
    return v;
}

struct Header {
    std::size_t nodes = 0;
    std::size_t times = 0;
    bool directed = true;
};

inline bool is_header(const std::string& line) { return line.rfind("#nodes=", 0) == 0; }

inline Header parse_header(const std::string& line, std::size_t lineno) {
    Header h;
    bool seen_n = false, seen_t = false, seen_d = false;
    std::istringstream in(line);
    std::string tok;
    while (in >> tok) {
        if (!tok.empty() && tok[0] == '#') tok.erase(0, 1);
        const auto eq = tok.find('=');
        if (eq == std::string::npos) throw DataError(at_line(lineno) + "malformed header token '" + tok + "'");
        const std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
        if (key == "nodes") {
            h.nodes = parse_uint(val, at_line(lineno));
            seen_n = true;
        } else if (key == "times") {
            h.times = parse_uint(val, at_line(lineno));
            seen_t = true;
        } else if (key == "directed") {
            if (val != "0" && val != "1") throw DataError(at_line(lineno) + "directed must be 0 or 1");
            h.directed = val == "1";
            seen_d = true;
        } else {
            throw DataError(at_line(lineno) + "unknown header key '" + key + "'");
        }
    }
    if (!seen_n || !seen_t || !seen_d) throw DataError(at_line(lineno) + "header needs nodes, times and directed");
    if (h.nodes < 2) throw DataError(at_line(lineno) + "need at least 2 nodes");
    if (h.times < 1) throw DataError(at_line(lineno) + "need at least 1 time point");
    return h;
}

inline void write_header(std::ostream& out, const NetSeq& net) {
    out << "#nodes=" << net.n_nodes() << " #times=" << net.n_times() << " directed=" << (net.directed ? 1 : 0)
        << '\n';
}

inline NetSeq read_edgelist(std::istream& in, const WarningSink& warn) {
    std::string line;
    std::size_t lineno = 0;
    std::optional<Header> header;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string s = trim(line);
        if (s.empty()) continue;
        if (!is_header(s)) throw DataError(at_line(lineno) + "missing header '#nodes=N #times=T directed=d'");
        header = parse_header(s, lineno);
        break;
    }
    if (!header) throw DataError("missing header '#nodes=N #times=T directed=d'");
    NetSeq net(header->nodes, header->times, header->directed);
    std::set<std::uint64_t> seen;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string s = trim(line);
        if (s.empty() || s[0] == '#') continue;
        std::istringstream fields(s);
        std::string a, b, c, extra;
        if (!(fields >> a >> b >> c) || (fields >> extra))
            throw DataError(at_line(lineno) + "expected 't<TAB>i<TAB>j'");
        const auto t = parse_uint(a, at_line(lineno));
        const auto i = parse_uint(b, at_line(lineno));
        const auto j = parse_uint(c, at_line(lineno));
        if (t < 1 || t > header->times) throw DataError(at_line(lineno) + "time index out of range");
        if (i >= header->nodes || j >= header->nodes) throw DataError(at_line(lineno) + "node index out of range");
        if (i == j) throw DataError(at_line(lineno) + "self-loop " + std::to_string(i));
        const auto lo = net.directed ? i : std::min(i, j);
        const auto hi = net.directed ? j : std::max(i, j);
        const std::uint64_t key = ((t - 1) * header->nodes + lo) * header->nodes + hi;
        if (!seen.insert(key).second) {
            if (warn) warn(at_line(lineno) + "duplicate edge ignored");
            continue;
        }
        net.set_edge(t - 1, i, j, true);
    }
    return net;
}

inline NetSeq read_dense(std::istream& in) {
    std::string line;
    std::size_t lineno = 0;
    std::optional<Header> header;
    std::vector<std::vector<std::vector<std::uint8_t>>> blocks(1);
    std::vector<std::size_t> block_line(1, 0);
    while (std::getline(in, line)) {
        ++lineno;
        const std::string s = trim(line);
        if (s.empty()) {
            if (!blocks.back().empty()) {
                blocks.emplace_back();
                block_line.push_back(0);
            }
            continue;
        }
        if (is_header(s)) {
            if (header || !blocks.front().empty()) throw DataError(at_line(lineno) + "header must come first");
            header = parse_header(s, lineno);
            continue;
        }
        std::vector<std::uint8_t> row;
        for (const auto& cell : split(s, ',')) {
            if (cell != "0" && cell != "1") throw DataError(at_line(lineno) + "dense cells must be 0 or 1");
            row.push_back(cell == "1" ? 1 : 0);
        }
        if (blocks.back().empty()) block_line.back() = lineno;
        blocks.back().push_back(std::move(row));
    }
    if (blocks.back().empty()) {
        blocks.pop_back();
        block_line.pop_back();
    }
    if (blocks.empty()) {
        if (header) return NetSeq(header->nodes, header->times, header->directed);
        throw DataError("dense network file has no rows");
    }
    const std::size_t n = blocks.front().size();
    const bool directed = header ? header->directed : true;
    if (header && (header->nodes != n || header->times != blocks.size()))
        throw DataError("dense network does not match its header dimensions");
    if (n < 2) throw DataError("network needs at least 2 nodes");
    NetSeq net(n, blocks.size(), directed);
    for (std::size_t t = 0; t < blocks.size(); ++t) {
        if (blocks[t].size() != n)
            throw DataError(at_line(block_line[t]) + "time block has " + std::to_string(blocks[t].size()) +
                            " rows, expected " + std::to_string(n));
        for (std::size_t i = 0; i < n; ++i)
            if (blocks[t][i].size() != n)
                throw DataError(at_line(block_line[t] + i) + "expected " + std::to_string(n) + " columns");
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t ln = block_line[t] + i;
            for (std::size_t j = 0; j < n; ++j) {
                const bool e = blocks[t][i][j] != 0;
                if (i == j) {
                    if (e) throw DataError(at_line(ln) + "self-loop " + std::to_string(i));
                    continue;
                }
                if (!directed && e != (blocks[t][j][i] != 0))
                    throw DataError(at_line(ln) + "undirected network is not symmetric");
                net.snapshots[t].set(i, j, e);
            }
        }
    }
    return net;
}

}  // namespace detail

inline NetworkFormat parse_network_format(const std::string& s) {
    if (s == "edgelist") return NetworkFormat::edgelist;
    if (s == "dense") return NetworkFormat::dense;
    throw std::invalid_argument("unknown network format '" + s + "' (expected edgelist or dense)");
}

inline NetSeq read_network(std::istream& in, NetworkFormat format, const WarningSink& warn = {}) {
    NetSeq net = format == NetworkFormat::edgelist ? detail::read_edgelist(in, warn) : detail::read_dense(in);
    net.validate();
    return net;
}

inline NetSeq read_network(const std::string& path, NetworkFormat format, const WarningSink& warn = {}) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path + "'");
    return read_network(in, format, warn);
}

inline void write_network(std::ostream& out, const NetSeq& net, NetworkFormat format) {
    net.validate();
    detail::write_header(out, net);
    const std::size_t n = net.n_nodes();
    for (std::size_t t = 0; t < net.n_times(); ++t) {
        const auto& a = net.snapshots[t];
        if (format == NetworkFormat::edgelist) {
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = net.directed ? 0 : i + 1; j < n; ++j)
                    if (i != j && a(i, j)) out << (t + 1) << '\t' << i << '\t' << j << '\n';
        } else {
            if (t > 0) out << '\n';
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t j = 0; j < n; ++j) out << (j ? "," : "") << (a(i, j) ? 1 : 0);
                out << '\n';
            }
        }
    }
}

inline void write_network(const std::string& path, const NetSeq& net, NetworkFormat format) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path + "'");
    write_network(out, net, format);
    if (!out) throw DataError("write failed for '" + path + "'");
}

// ---------------------------------------------------------------------------
// key=value files

/// Ordered key=value pairs; later duplicates override earlier ones.
using KeyValues = std::map<std::string, std::string>;

inline KeyValues read_key_values(std::istream& in) {
    KeyValues kv;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string s = detail::trim(line);
        if (s.empty() || s[0] == '#') continue;
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw DataError(detail::at_line(lineno) + "expected key=value");
        const std::string key = detail::trim(s.substr(0, eq));
        if (key.empty()) throw DataError(detail::at_line(lineno) + "empty key");
        kv[key] = detail::trim(s.substr(eq + 1));
    }
    return kv;
}

inline KeyValues read_key_values(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path + "'");
    return read_key_values(in);
}

/// Shortest decimal form that reads back to exactly `v`.
inline std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline std::string format_vector(const Vector& v) {
    std::string out;
    for (Eigen::Index i = 0; i < v.size(); ++i) out += (i ? "," : "") + format_double(v[i]);
    return out;
}

inline std::string format_matrix(const Matrix& m) {
    std::string out;
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        if (r) out += ';';
        for (Eigen::Index c = 0; c < m.cols(); ++c) out += (c ? "," : "") + format_double(m(r, c));
    }
    return out;
}

inline Vector parse_vector(const std::string& s, const std::string& what) {
    const auto cells = detail::split(s, ',');
    Vector v(static_cast<Eigen::Index>(cells.size()));
    for (std::size_t i = 0; i < cells.size(); ++i) v[static_cast<Eigen::Index>(i)] = detail::parse_double(cells[i], what + ": ");
    return v;
}

inline Matrix parse_matrix(const std::string& s, const std::string& what) {
    const auto rows = detail::split(s, ';');
    Matrix m;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const Vector row = parse_vector(rows[r], what);
        if (r == 0) m.resize(static_cast<Eigen::Index>(rows.size()), row.size());
        if (row.size() != m.cols()) throw DataError(what + ": ragged matrix");
        m.row(static_cast<Eigen::Index>(r)) = row.transpose();
    }
    return m;
}

// ---------------------------------------------------------------------------
// parameter files

namespace detail {

inline const std::string& require_key(const KeyValues& kv, const std::string& key) {
    const auto it = kv.find(key);
    if (it == kv.end()) throw DataError("parameter file is missing '" + key + "'");
    return it->second;
}

/// Builds a covariance from file form: either the full K x K matrix or
/// just the (K-1) x (K-1) active block.
inline Matrix role_covariance(const Matrix& m, Eigen::Index k, const std::string& what) {
    if (m.rows() == k && m.cols() == k) return m;
    if (m.rows() == k - 1 && m.cols() == k - 1) {
        Matrix out = Matrix::Zero(k, k);
        out.topLeftCorner(k - 1, k - 1) = m;
        return out;
    }
    throw DataError(what + ": expected a K x K or (K-1) x (K-1) matrix");
}

/// Role vector from file form: length K (last entry 0) or length K-1.
inline Vector role_vector(const Vector& v, Eigen::Index k, const std::string& what) {
    if (v.size() == k) return v;
    if (v.size() == k - 1) {
        Vector out = Vector::Zero(k);
        out.head(k - 1) = v;
        return out;
    }
    throw DataError(what + ": expected length K or K-1");
}

inline CompatMatrix compat_from(const KeyValues& kv) {
    try {
        return CompatMatrix(parse_matrix(require_key(kv, "b"), "b"));
    } catch (const std::invalid_argument& e) {
        throw DataError(std::string("b: ") + e.what());
    }
}

}  // namespace detail

inline bool is_dynamic_params(const KeyValues& kv) { return kv.count("nu") > 0 || kv.count("phi") > 0; }

inline StaticParams static_params_from(const KeyValues& kv) {
    StaticParams p;
    p.b = detail::compat_from(kv);
    const auto k = static_cast<Eigen::Index>(p.b.n_roles());
    p.mu = kv.count("mu") ? detail::role_vector(parse_vector(kv.at("mu"), "mu"), k, "mu") : Vector(Vector::Zero(k));
    p.sigma = kv.count("sigma") ? detail::role_covariance(parse_matrix(kv.at("sigma"), "sigma"), k, "sigma")
                                : linalg::embed(Matrix(Matrix::Identity(k - 1, k - 1)), k);
    return p;
}

/// Dynamic parameters. `sigma_t<t>` and `mu_t<t>` (1-based t) override the
/// shared `sigma` for that time point and supply a fixed trajectory;
/// `n_times` fixes T when no per-time keys are given.
inline DynParams dyn_params_from(const KeyValues& kv, std::size_t n_times) {
    DynParams p;
    p.b = detail::compat_from(kv);
    const auto k = static_cast<Eigen::Index>(p.b.n_roles());
    p.nu = kv.count("nu") ? detail::role_vector(parse_vector(kv.at("nu"), "nu"), k, "nu") : Vector(Vector::Zero(k));
    p.phi = kv.count("phi") ? detail::role_covariance(parse_matrix(kv.at("phi"), "phi"), k, "phi")
                            : linalg::embed(Matrix(Matrix::Identity(k - 1, k - 1)), k);
    const Matrix shared = kv.count("sigma")
                              ? detail::role_covariance(parse_matrix(kv.at("sigma"), "sigma"), k, "sigma")
                              : linalg::embed(Matrix(Matrix::Identity(k - 1, k - 1)), k);
    if (kv.count("a")) p.a = parse_matrix(kv.at("a"), "a");
    for (std::size_t t = 1; t <= n_times; ++t) {
        const std::string key = "sigma_t" + std::to_string(t);
        p.sigmas.push_back(kv.count(key) ? detail::role_covariance(parse_matrix(kv.at(key), key), k, key) : shared);
        const std::string mk = "mu_t" + std::to_string(t);
        if (kv.count(mk)) p.mu_traj.push_back(detail::role_vector(parse_vector(kv.at(mk), mk), k, mk));
    }
    if (!p.mu_traj.empty() && p.mu_traj.size() != n_times)
        throw DataError("parameter file gives mu_t for some but not all time points");
    return p;
}

inline void write_params(std::ostream& out, const StaticParams& p) {
    out << "k=" << p.n_roles() << '\n';
    out << "b=" << format_matrix(p.b.matrix()) << '\n';
    out << "mu=" << format_vector(p.mu) << '\n';
    out << "sigma=" << format_matrix(p.sigma) << '\n';
}

inline void write_params(std::ostream& out, const DynParams& p) {
    out << "k=" << p.n_roles() << '\n';
    out << "b=" << format_matrix(p.b.matrix()) << '\n';
    out << "nu=" << format_vector(p.nu) << '\n';
    out << "phi=" << format_matrix(p.phi) << '\n';
    if (p.a.size() != 0) out << "a=" << format_matrix(p.a) << '\n';
    for (std::size_t t = 0; t < p.sigmas.size(); ++t)
        out << "sigma_t" << (t + 1) << '=' << format_matrix(p.sigmas[t]) << '\n';
    for (std::size_t t = 0; t < p.mu_traj.size(); ++t)
        out << "mu_t" << (t + 1) << '=' << format_vector(p.mu_traj[t]) << '\n';
}

// ---------------------------------------------------------------------------
// run configuration

struct RunConfig {
    std::size_t k = 3;
    std::vector<std::size_t> k_range{1, 2, 3, 4, 5};
    int n_restarts = 5;
    double tol = 1e-6;
    int max_inner = 200;
    int max_outer = 100;
    double jitter = 1e-8;
    std::uint64_t seed = 0;
    bool directed = true;
    ModelKind model = ModelKind::static_model;
    std::size_t is_samples = 1000;
    unsigned threads = 1;

    void validate() const {
        if (!(tol > 0.0)) throw std::invalid_argument("config: tol must be positive");
        if (!(jitter > 0.0)) throw std::invalid_argument("config: jitter must be positive");
        if (k < 1) throw std::invalid_argument("config: k must be at least 1");
        if (k_range.empty()) throw std::invalid_argument("config: k_range must be nonempty");
        for (auto v : k_range)
            if (v < 1) throw std::invalid_argument("config: k_range entries must be at least 1");
        if (n_restarts < 1 || max_inner < 1 || max_outer < 1 || is_samples < 1 || threads < 1)
            throw std::invalid_argument("config: counts must be at least 1");
    }
};

/// Parses `a..b` or a comma-separated list.
inline std::vector<std::size_t> parse_k_range(const std::string& s) {
    std::vector<std::size_t> out;
    const auto dots = s.find("..");
    if (dots != std::string::npos) {
        const auto lo = detail::parse_uint(detail::trim(s.substr(0, dots)), "k_range: ");
        const auto hi = detail::parse_uint(detail::trim(s.substr(dots + 2)), "k_range: ");
        if (lo > hi) throw DataError("k_range: empty range '" + s + "'");
        for (auto v = lo; v <= hi; ++v) out.push_back(static_cast<std::size_t>(v));
        return out;
    }
    for (const auto& cell : detail::split(s, ','))
        out.push_back(static_cast<std::size_t>(detail::parse_uint(cell, "k_range: ")));
    if (out.empty()) throw DataError("k_range: empty");
    return out;
}

inline std::string format_k_range(const std::vector<std::size_t>& r) {
    std::ostringstream out;
    for (std::size_t i = 0; i < r.size(); ++i) out << (i ? "," : "") << r[i];
    return out.str();
}

inline ModelKind parse_model(const std::string& s) {
    if (s == "static") return ModelKind::static_model;
    if (s == "dynamic") return ModelKind::dynamic_model;
    throw std::invalid_argument("model must be 'static' or 'dynamic', got '" + s + "'");
}

/// Applies key=value overrides; unknown keys are rejected.
inline void apply_config(RunConfig& cfg, const KeyValues& kv) {
    for (const auto& [key, val] : kv) {
        const std::string where = "config " + key + ": ";
        auto as_int = [&] { return static_cast<int>(detail::parse_uint(val, where)); };
        if (key == "k") cfg.k = static_cast<std::size_t>(detail::parse_uint(val, where));
        else if (key == "k_range") cfg.k_range = parse_k_range(val);
        else if (key == "n_restarts") cfg.n_restarts = as_int();
        else if (key == "tol") cfg.tol = detail::parse_double(val, where);
        else if (key == "max_inner") cfg.max_inner = as_int();
        else if (key == "max_outer") cfg.max_outer = as_int();
        else if (key == "jitter") cfg.jitter = detail::parse_double(val, where);
        else if (key == "seed") cfg.seed = detail::parse_uint(val, where);
        else if (key == "directed") {
            if (val != "0" && val != "1") throw std::invalid_argument(where + "expected 0 or 1");
            cfg.directed = val == "1";
        } else if (key == "model") cfg.model = parse_model(val);
        else if (key == "is_samples") cfg.is_samples = static_cast<std::size_t>(detail::parse_uint(val, where));
        else if (key == "threads") cfg.threads = static_cast<unsigned>(detail::parse_uint(val, where));
        else throw std::invalid_argument("config: unknown key '" + key + "'");
    }
}

inline void write_config(std::ostream& out, const RunConfig& cfg) {
    out << "k=" << cfg.k << '\n'
        << "k_range=" << format_k_range(cfg.k_range) << '\n'
        << "n_restarts=" << cfg.n_restarts << '\n'
        << "tol=" << format_double(cfg.tol) << '\n'
        << "max_inner=" << cfg.max_inner << '\n'
        << "max_outer=" << cfg.max_outer << '\n'
        << "jitter=" << format_double(cfg.jitter) << '\n'
        << "seed=" << cfg.seed << '\n'
        << "directed=" << (cfg.directed ? 1 : 0) << '\n'
        << "model=" << (cfg.model == ModelKind::dynamic_model ? "dynamic" : "static") << '\n'
        << "is_samples=" << cfg.is_samples << '\n'
        << "threads=" << cfg.threads << '\n';
}

// ---------------------------------------------------------------------------
// fit exports

/// Writes `t,node,role,pi,gamma` rows (1-based t, 0-based node and role)
/// with 10 significant digits.
inline void write_trajectories(std::ostream& out, const std::vector<std::vector<MembershipPosterior>>& posts) {
    out << "t,node,role,pi,gamma\n" << std::setprecision(10);
    for (std::size_t t = 0; t < posts.size(); ++t)
        for (std::size_t i = 0; i < posts[t].size(); ++i) {
            const Vector& g = posts[t][i].gamma_tilde;
            const Vector pi = logistic_transform(g);
            for (Eigen::Index r = 0; r < g.size(); ++r)
                out << (t + 1) << ',' << i << ',' << r << ',' << pi[r] << ',' << g[r] << '\n';
        }
}

/// Reads membership vectors back from a trajectory export, indexed [t][node].
inline std::vector<std::vector<Vector>> read_trajectories(std::istream& in) {
    std::string line;
    std::size_t lineno = 0;
    if (!std::getline(in, line) || detail::trim(line) != "t,node,role,pi,gamma")
        throw DataError("trajectory file must start with 't,node,role,pi,gamma'");
    ++lineno;
    std::map<std::size_t, std::map<std::size_t, std::map<std::size_t, double>>> cells;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string s = detail::trim(line);
        if (s.empty()) continue;
        const auto f = detail::split(s, ',');
        if (f.size() != 5) throw DataError(detail::at_line(lineno) + "expected 5 columns");
        const auto where = detail::at_line(lineno);
        const auto t = detail::parse_uint(f[0], where);
        if (t < 1) throw DataError(where + "time index must be at least 1");
        cells[t - 1][detail::parse_uint(f[1], where)][detail::parse_uint(f[2], where)] =
            detail::parse_double(f[3], where);
    }
    std::vector<std::vector<Vector>> out;
    for (const auto& [t, nodes] : cells) {
        if (t != out.size()) throw DataError("trajectory file skips a time point");
        std::vector<Vector> row;
        for (const auto& [i, roles] : nodes) {
            if (i != row.size()) throw DataError("trajectory file skips a node");
            Vector v(static_cast<Eigen::Index>(roles.size()));
            std::size_t r = 0;
            for (const auto& [role, pi] : roles) {
                if (role != r) throw DataError("trajectory file skips a role");
                v[static_cast<Eigen::Index>(r++)] = pi;
            }
            row.push_back(std::move(v));
        }
        out.push_back(std::move(row));
    }
    return out;
}

/// Writes `t,node,dominant_role` rows.
inline void write_dominant_roles(std::ostream& out, const std::vector<std::vector<MembershipPosterior>>& posts) {
    out << "t,node,dominant_role\n";
    for (std::size_t t = 0; t < posts.size(); ++t)
        for (std::size_t i = 0; i < posts[t].size(); ++i) {
            Eigen::Index r = 0;
            posts[t][i].gamma_tilde.maxCoeff(&r);
            out << (t + 1) << ',' << i << ',' << r << '\n';
        }
}

/// Full-precision variational posteriors: `t,node,gamma,sigma` where gamma
/// is space-separated and sigma is the row-major K x K matrix.
inline void write_posteriors(std::ostream& out, const std::vector<std::vector<MembershipPosterior>>& posts) {
    out << "t,node,gamma,sigma\n";
    for (std::size_t t = 0; t < posts.size(); ++t)
        for (std::size_t i = 0; i < posts[t].size(); ++i) {
            const auto& q = posts[t][i];
            out << (t + 1) << ',' << i << ',';
            for (Eigen::Index r = 0; r < q.gamma_tilde.size(); ++r)
                out << (r ? " " : "") << format_double(q.gamma_tilde[r]);
            out << ',';
            for (Eigen::Index r = 0; r < q.sigma_tilde.rows(); ++r)
                for (Eigen::Index c = 0; c < q.sigma_tilde.cols(); ++c)
                    out << (r || c ? " " : "") << format_double(q.sigma_tilde(r, c));
            out << '\n';
        }
}

inline std::vector<std::vector<MembershipPosterior>> read_posteriors(std::istream& in) {
    std::string line;
    std::size_t lineno = 1;
    if (!std::getline(in, line) || detail::trim(line) != "t,node,gamma,sigma")
        throw DataError("posterior file must start with 't,node,gamma,sigma'");
    std::vector<std::vector<MembershipPosterior>> out;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string s = detail::trim(line);
        if (s.empty()) continue;
        const auto where = detail::at_line(lineno);
        const auto f = detail::split(s, ',');
        if (f.size() != 4) throw DataError(where + "expected 4 columns");
        const auto t = detail::parse_uint(f[0], where);
        const auto i = detail::parse_uint(f[1], where);
        if (t < 1 || t > out.size() + 1) throw DataError(where + "time points must be listed in order");
        if (t == out.size() + 1) out.emplace_back();
        if (i != out[t - 1].size()) throw DataError(where + "nodes must be listed in order");
        std::istringstream gs(f[2]), ss(f[3]);
        std::vector<double> g, sv;
        for (std::string tok; gs >> tok;) g.push_back(detail::parse_double(tok, where));
        for (std::string tok; ss >> tok;) sv.push_back(detail::parse_double(tok, where));
        const auto k = static_cast<Eigen::Index>(g.size());
        if (k < 1 || sv.size() != g.size() * g.size()) throw DataError(where + "gamma/sigma sizes disagree");
        MembershipPosterior q{Eigen::Map<Vector>(g.data(), k),
                              Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
                                  sv.data(), k, k)};
        out[t - 1].push_back(std::move(q));
    }
    if (out.empty()) throw DataError("posterior file is empty");
    return out;
}

}  // namespace lnmmsb
