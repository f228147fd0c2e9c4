#pragma once
// Text formats: model/sweep configuration (TOML), graphs and side information.

#include <sbm/linalg.hpp>
#include <sbm/model.hpp>

#include <toml.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace sbm {

inline toml::table read_toml_file(const std::string& path) {
    try {
        return toml::parse_file(path);
    } catch (const toml::parse_error& e) {
        std::ostringstream msg;
        msg << "config " << path << ": " << e.description() << " at line " << e.source().begin.line;
        throw Error(msg.str());
    }
}

namespace detail {

inline std::vector<double> toml_numbers(const toml::node_view<const toml::node>& node, const std::string& key) {
    const toml::array* arr = node.as_array();
    if (!arr) throw Error("config: '" + key + "' must be an array of numbers");
    std::vector<double> out;
    for (const toml::node& v : *arr) {
        if (auto d = v.value<double>()) {
            out.push_back(*d);
        } else if (const toml::array* row = v.as_array()) { // nested rows are flattened
            for (const toml::node& x : *row) {
                auto dx = x.value<double>();
                if (!dx) throw Error("config: '" + key + "' must contain only numbers");
                out.push_back(*dx);
            }
        } else {
            throw Error("config: '" + key + "' must contain only numbers");
        }
    }
    return out;
}

} // namespace detail

template <typename T>
T toml_get(const toml::table& t, const std::string& key, const T& fallback) {
    const auto node = t[key];
    if (!node) return fallback;
    if constexpr (std::is_same_v<T, bool>) {
        if (auto v = node.value<bool>()) return *v;
    } else if constexpr (std::is_integral_v<T>) {
        if (auto v = node.value<std::int64_t>()) {
            if (*v < 0 && std::is_unsigned_v<T>) throw Error("config: '" + key + "' must be nonnegative");
            return static_cast<T>(*v);
        }
        if (auto v = node.value<double>()) { // allow 1e4 style integers
            if (*v != std::floor(*v) || (*v < 0 && std::is_unsigned_v<T>))
                throw Error("config: '" + key + "' must be a nonnegative integer");
            return static_cast<T>(*v);
        }
    } else if constexpr (std::is_floating_point_v<T>) {
        if (auto v = node.value<double>()) return static_cast<T>(*v);
    } else {
        if (auto v = node.value<std::string>()) return *v;
    }
    throw Error("config: '" + key + "' has the wrong type");
}

inline std::optional<std::vector<double>> toml_numbers(const toml::table& t, const std::string& key) {
    const auto node = t[key];
    if (!node) return std::nullopt;
    return detail::toml_numbers(node, key);
}

/// Square symmetric matrix from a row-major list of dim^2 numbers.
inline SymMatrix sym_from_row_major(const std::vector<double>& v, std::size_t dim, const std::string& what) {
    if (v.size() != dim * dim)
        throw Error(what + ": expected " + std::to_string(dim * dim) + " entries (row-major), got " + std::to_string(v.size()));
    Matrix m(dim, dim);
    for (std::size_t i = 0; i < dim; ++i)
        for (std::size_t j = 0; j < dim; ++j) m(i, j) = v[i * dim + j];
    return SymMatrix(m);
}

/// Parses "a,b,c" or "a b c" into numbers.
inline std::vector<double> parse_number_list(const std::string& text) {
    std::string s = text;
    for (char& c : s)
        if (c == ',' || c == ';' || c == '[' || c == ']') c = ' ';
    std::istringstream in(s);
    std::vector<double> out;
    std::string tok;
    while (in >> tok) {
        std::size_t pos = 0;
        double v = 0.0;
        try {
            v = std::stod(tok, &pos);
        } catch (const std::exception&) {
            throw Error("cannot parse number '" + tok + "'");
        }
        if (pos != tok.size()) throw Error("cannot parse number '" + tok + "'");
        out.push_back(v);
    }
    return out;
}

/// Dimension d with d * d == count, or throws.
inline std::size_t square_dim(std::size_t count, const std::string& what) {
    const auto d = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(count))));
    if (d == 0 || d * d != count) throw Error(what + ": entry count is not a perfect square");
    return d;
}

struct ModelConfig {
    std::size_t n = 0;
    double d = 0.0;
    ProbVector p;
    SymMatrix R;
    std::uint64_t seed = 1;
    std::optional<PsdMatrix> S; // optional side-information SNR

    SbmModel model() const { return build_model(n, d, p, R); }
};

inline ModelConfig parse_model_config(const toml::table& t) {
    ModelConfig c;
    c.n = toml_get<std::size_t>(t, "n", 0);
    c.d = toml_get<double>(t, "d", 0.0);
    c.seed = toml_get<std::uint64_t>(t, "seed", 1);
    const auto p = toml_numbers(t, "p");
    if (!p) throw Error("config: missing 'p'");
    c.p = ProbVector(*p);
    const auto r = toml_numbers(t, "R");
    if (!r) throw Error("config: missing 'R'");
    c.R = sym_from_row_major(*r, c.p.k() - 1, "config R");
    if (const auto s = toml_numbers(t, "S")) c.S = PsdMatrix(sym_from_row_major(*s, c.p.k() - 1, "config S"));
    if (c.n == 0) throw Error("config: missing or zero 'n'");
    if (!(c.d > 0.0)) throw Error("config: missing or nonpositive 'd'");
    return c;
}

inline ModelConfig load_model_config(const std::string& path) { return parse_model_config(read_toml_file(path)); }

inline void write_graph(std::ostream& out, const LabeledGraph& g) {
    out << g.n << ' ' << g.edges.size() << ' ' << g.k << '\n';
    for (std::size_t i = 0; i < g.labels.size(); ++i) out << (i ? " " : "") << g.labels[i] + 1;
    out << '\n';
    for (const auto& [u, v] : g.edges) out << u << ' ' << v << '\n';
}

inline LabeledGraph read_graph(std::istream& in) {
    LabeledGraph g;
    std::size_t m = 0;
    if (!(in >> g.n >> m >> g.k)) throw Error("graph file: bad header (expected 'n m k')");
    if (g.k < 2) throw Error("graph file: k must be at least 2");
    g.labels.resize(g.n);
    for (auto& l : g.labels) {
        long v = 0;
        if (!(in >> v)) throw Error("graph file: missing labels");
        if (v < 1 || static_cast<std::size_t>(v) > g.k) throw Error("graph file: label out of range 1..k");
        l = static_cast<int>(v - 1);
    }
    g.edges.reserve(m);
    for (std::size_t e = 0; e < m; ++e) {
        long long u = 0;
        long long v = 0;
        if (!(in >> u >> v)) throw Error("graph file: expected " + std::to_string(m) + " edges");
        if (u < 0 || v < 0 || static_cast<std::size_t>(u) >= g.n || static_cast<std::size_t>(v) >= g.n || u == v)
            throw Error("graph file: invalid edge " + std::to_string(u) + " " + std::to_string(v));
        if (u > v) std::swap(u, v);
        g.edges.emplace_back(static_cast<std::uint32_t>(u), static_cast<std::uint32_t>(v));
    }
    std::sort(g.edges.begin(), g.edges.end());
    if (std::adjacent_find(g.edges.begin(), g.edges.end()) != g.edges.end()) throw Error("graph file: duplicate edge");
    return g;
}

inline LabeledGraph read_graph_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open graph file " + path);
    return read_graph(in);
}

inline void write_side_info(std::ostream& out, const SideInfo& s) {
    out << std::setprecision(17);
    for (std::size_t i = 0; i < s.Y.rows(); ++i) {
        for (std::size_t j = 0; j < s.Y.cols(); ++j) out << (j ? " " : "") << s.Y(i, j);
        out << '\n';
    }
}

inline SideInfo read_side_info(std::istream& in, std::size_t n, const PsdMatrix& S) {
    const std::size_t dim = S.dim();
    SideInfo s{S, Matrix(n, dim), 0};
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < dim; ++j)
            if (!(in >> s.Y(i, j))) throw Error("side-info file: expected " + std::to_string(n) + " rows of " + std::to_string(dim) + " numbers");
    double extra = 0.0;
    if (in >> extra) throw Error("side-info file: trailing data");
    return s;
}

inline SideInfo read_side_info_file(const std::string& path, std::size_t n, const PsdMatrix& S) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open side-info file " + path);
    return read_side_info(in, n, S);
}

} // namespace sbm
