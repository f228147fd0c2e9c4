#pragma once
// Eigenvalue-grid sweep for three-community models with R = diag(l1, l2):
// theory columns from the potential solver, empirical columns from BP.

#include <sbm/bp.hpp>
#include <sbm/channel.hpp>
#include <sbm/io.hpp>
#include <sbm/model.hpp>
#include <sbm/potential.hpp>
#include <sbm/rng.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace sbm {

inline constexpr int kSweepSchema = 1;

struct SweepConfig {
    ProbVector p;
    std::vector<double> lambda1_grid;
    std::vector<double> lambda2_grid;
    std::size_t n = 10000;
    double d = 30.0;
    int trials = 8;
    BpConfig bp;
    ChannelConfig channel;
    SolveOptions solve;
    std::uint64_t master_seed = 1;
    std::string output = "results.csv";
    bool run_bp = true;
    bool record_runtime = false; // wall-clock column; off keeps the CSV byte-reproducible
    unsigned threads = 1;
};

struct SweepRow {
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    bool valid = false;
    std::string status;
    std::optional<double> f_min;
    std::string weak_recovery;
    std::optional<double> trace_mmse_ub;
    std::optional<double> interaction_lb;
    std::optional<double> delta00, delta01, delta11;
    std::optional<double> bp_mse_median;
    std::vector<std::optional<double>> bp_mse_trials; // one slot per trial
    std::uint64_t seed = 0;
    std::optional<double> runtime_s;
};

struct SweepSummary {
    std::vector<SweepRow> rows; // canonical order
    std::size_t computed = 0;
    std::size_t resumed = 0;
};

inline std::vector<double> linspace(double lo, double hi, std::size_t count) {
    if (count == 0) throw Error("linspace: count must be positive");
    std::vector<double> out(count);
    for (std::size_t i = 0; i < count; ++i)
        out[i] = count == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
    return out;
}

enum class Figure1Variant { a, b };

/// Variant a: uniform p on [0.1, 2]^2. Variant b: p = (0.6, 0.3, 0.1) on
/// [0.1, 3]^2 so the invalid corner is visible at d = 30.
inline SweepConfig figure1_defaults(Figure1Variant variant, std::size_t resolution = 20) {
    SweepConfig c;
    if (variant == Figure1Variant::a) {
        c.p = ProbVector::normalized({1.0, 1.0, 1.0});
        c.lambda1_grid = c.lambda2_grid = linspace(0.1, 2.0, resolution);
    } else {
        c.p = ProbVector({0.6, 0.3, 0.1});
        c.lambda1_grid = c.lambda2_grid = linspace(0.1, 3.0, resolution);
    }
    c.n = 10000;
    c.d = 30.0;
    c.trials = 8;
    c.bp.n_inits = 15;
    c.master_seed = 20190707;
    return c;
}

inline void validate(const SweepConfig& c) {
    if (c.p.k() != 3) throw Error("sweep: R = diag(l1, l2) requires k = 3 communities");
    if (c.lambda1_grid.empty() || c.lambda2_grid.empty()) throw Error("sweep: lambda grids must be nonempty");
    if (!(c.d > 0.0 && c.d < static_cast<double>(c.n))) throw Error("sweep: need 0 < d < n");
    if (c.run_bp && c.n < 1000) throw Error("sweep: BP sweeps need n >= 1000");
    if (c.trials < 1) throw Error("sweep: trials must be at least 1");
    if (c.threads < 1) throw Error("sweep: threads must be at least 1");
}

namespace detail {

inline std::vector<double> read_grid(const toml::table& t, const std::string& key) {
    if (auto v = sbm::toml_numbers(t, key)) return *v;
    if (auto r = sbm::toml_numbers(t, key + "_range")) {
        if (r->size() != 3 || (*r)[2] < 1 || (*r)[2] != std::floor((*r)[2]))
            throw Error("sweep config: '" + key + "_range' must be [lo, hi, count]");
        return linspace((*r)[0], (*r)[1], static_cast<std::size_t>((*r)[2]));
    }
    throw Error("sweep config: missing '" + key + "' (or '" + key + "_range')");
}

} // namespace detail

/// Reads a sweep configuration. Top-level keys mirror SweepConfig; optional
/// [bp], [channel] and [potential] tables; `variant = "a" | "b"` starts from
/// the figure defaults.
inline SweepConfig parse_sweep_config(const toml::table& t) {
    SweepConfig c;
    const std::string variant = toml_get<std::string>(t, "variant", "");
    const auto resolution = toml_get<std::size_t>(t, "resolution", 20);
    if (variant == "a")
        c = figure1_defaults(Figure1Variant::a, resolution);
    else if (variant == "b")
        c = figure1_defaults(Figure1Variant::b, resolution);
    else if (!variant.empty())
        throw Error("sweep config: variant must be 'a' or 'b'");

    if (auto p = toml_numbers(t, "p")) c.p = ProbVector(*p);
    else if (variant.empty()) throw Error("sweep config: missing 'p'");
    if (variant.empty() || t["lambda1"] || t["lambda1_range"]) c.lambda1_grid = detail::read_grid(t, "lambda1");
    if (variant.empty() || t["lambda2"] || t["lambda2_range"]) c.lambda2_grid = detail::read_grid(t, "lambda2");
    c.n = toml_get<std::size_t>(t, "n", c.n);
    c.d = toml_get<double>(t, "d", c.d);
    c.trials = toml_get<int>(t, "trials", c.trials);
    c.master_seed = toml_get<std::uint64_t>(t, "master_seed", c.master_seed);
    c.output = toml_get<std::string>(t, "output", c.output);
    c.run_bp = toml_get<bool>(t, "run_bp", c.run_bp);
    c.record_runtime = toml_get<bool>(t, "record_runtime", c.record_runtime);
    c.threads = toml_get<unsigned>(t, "threads", c.threads);

    if (const toml::table* bp = t["bp"].as_table()) {
        c.bp.n_inits = toml_get<int>(*bp, "n_inits", c.bp.n_inits);
        c.bp.damping = toml_get<double>(*bp, "damping", c.bp.damping);
        c.bp.max_sweeps = toml_get<int>(*bp, "max_sweeps", c.bp.max_sweeps);
        c.bp.msg_tol = toml_get<double>(*bp, "msg_tol", c.bp.msg_tol);
    }
    if (const toml::table* ch = t["channel"].as_table()) {
        const std::string method = toml_get<std::string>(*ch, "method", "quadrature");
        if (method == "quadrature") c.channel.method = ChannelMethod::quadrature;
        else if (method == "mc") c.channel.method = ChannelMethod::monte_carlo;
        else throw Error("sweep config: channel.method must be 'quadrature' or 'mc'");
        c.channel.nodes_per_dim = toml_get<std::size_t>(*ch, "nodes_per_dim", c.channel.nodes_per_dim);
        c.channel.mc_samples = toml_get<std::size_t>(*ch, "mc_samples", c.channel.mc_samples);
        c.channel.seed = toml_get<std::uint64_t>(*ch, "seed", c.channel.seed);
    }
    if (const toml::table* po = t["potential"].as_table()) {
        c.solve.cccp.eps = toml_get<double>(*po, "eps", c.solve.cccp.eps);
        c.solve.cccp.max_iter = toml_get<int>(*po, "max_iter", c.solve.cccp.max_iter);
        c.solve.cccp.tol = toml_get<double>(*po, "tol", c.solve.cccp.tol);
        c.solve.random_starts = toml_get<int>(*po, "random_starts", c.solve.random_starts);
    }
    validate(c);
    return c;
}

inline SweepConfig load_sweep_config(const std::string& path) { return parse_sweep_config(read_toml_file(path)); }

inline std::string csv_header(int trials) {
    std::string h = "lambda1,lambda2,valid,status,f_min,weak_recovery,trace_mmse_ub,interaction_lb,"
                    "delta_star_00,delta_star_01,delta_star_11,bp_mse_median";
    for (int t = 1; t <= trials; ++t) h += ",bp_mse_t" + std::to_string(t);
    h += ",seed,runtime_s";
    return h;
}

namespace detail {

inline std::string fmt_num(double v, int digits = 12) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    return buf;
}

inline std::string fmt_opt(const std::optional<double>& v) { return v ? fmt_num(*v) : std::string(); }

inline std::optional<double> parse_opt(const std::string& s) {
    if (s.empty()) return std::nullopt;
    return std::stod(s);
}

inline std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

inline std::string sanitize(std::string s) {
    for (char& c : s)
        if (c == ',' || c == '\n' || c == '\r' || c == '"') c = ' ';
    return s;
}

inline double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

} // namespace detail

inline std::string format_row(const SweepRow& r) {
    using detail::fmt_opt;
    std::string s = detail::fmt_num(r.lambda1, 10) + "," + detail::fmt_num(r.lambda2, 10) + "," +
                    (r.valid ? "true" : "false") + "," + r.status + "," + fmt_opt(r.f_min) + "," + r.weak_recovery + "," +
                    fmt_opt(r.trace_mmse_ub) + "," + fmt_opt(r.interaction_lb) + "," + fmt_opt(r.delta00) + "," +
                    fmt_opt(r.delta01) + "," + fmt_opt(r.delta11) + "," + fmt_opt(r.bp_mse_median);
    for (const auto& t : r.bp_mse_trials) s += "," + fmt_opt(t);
    s += "," + std::to_string(r.seed) + "," + fmt_opt(r.runtime_s);
    return s;
}

inline SweepRow parse_row(const std::string& line, int trials) {
    const auto f = detail::split_csv(line);
    if (f.size() != static_cast<std::size_t>(14 + trials)) throw Error("sweep CSV: wrong number of fields");
    SweepRow r;
    r.lambda1 = std::stod(f[0]);
    r.lambda2 = std::stod(f[1]);
    r.valid = f[2] == "true";
    r.status = f[3];
    r.f_min = detail::parse_opt(f[4]);
    r.weak_recovery = f[5];
    r.trace_mmse_ub = detail::parse_opt(f[6]);
    r.interaction_lb = detail::parse_opt(f[7]);
    r.delta00 = detail::parse_opt(f[8]);
    r.delta01 = detail::parse_opt(f[9]);
    r.delta11 = detail::parse_opt(f[10]);
    r.bp_mse_median = detail::parse_opt(f[11]);
    for (int t = 0; t < trials; ++t) r.bp_mse_trials.push_back(detail::parse_opt(f[12 + static_cast<std::size_t>(t)]));
    r.seed = std::stoull(f[12 + static_cast<std::size_t>(trials)]);
    r.runtime_s = detail::parse_opt(f[13 + static_cast<std::size_t>(trials)]);
    return r;
}

/// Grid points in canonical order (ascending lambda1, then lambda2).
inline std::vector<std::pair<double, double>> sweep_points(const SweepConfig& c) {
    std::vector<double> l1 = c.lambda1_grid;
    std::vector<double> l2 = c.lambda2_grid;
    std::sort(l1.begin(), l1.end());
    std::sort(l2.begin(), l2.end());
    l1.erase(std::unique(l1.begin(), l1.end()), l1.end());
    l2.erase(std::unique(l2.begin(), l2.end()), l2.end());
    std::vector<std::pair<double, double>> pts;
    for (double a : l1)
        for (double b : l2) pts.emplace_back(a, b);
    return pts;
}

/// Computes one grid point. Failures are recorded in the status column.
inline SweepRow sweep_point(const SweepConfig& c, const std::shared_ptr<const ChannelEvaluator>& evaluator,
                            std::size_t index, double l1, double l2) {
    const auto start = std::chrono::steady_clock::now();
    SweepRow row;
    row.lambda1 = l1;
    row.lambda2 = l2;
    row.seed = derive_seed(c.master_seed, {index});
    row.bp_mse_trials.assign(static_cast<std::size_t>(c.trials), std::nullopt);
    try {
        const SymMatrix R = SymMatrix::diagonal({l1, l2});
        const SbmModel model = build_model(c.n, c.d, c.p, R);
        row.valid = model.valid;

        const PotentialProblem problem(evaluator, R);
        SolveOptions so = c.solve;
        so.seed = row.seed;
        const PotentialSolution sol = solve(problem, so);
        row.f_min = sol.f_min;
        row.weak_recovery = to_string(sol.weak_recovery);
        row.trace_mmse_ub = trace(sol.mmse_ub.matrix());
        row.interaction_lb = sol.interaction_lb;
        row.delta00 = sol.delta_star(0, 0);
        row.delta01 = sol.delta_star(0, 1);
        row.delta11 = sol.delta_star(1, 1);
        row.status = sol.converged ? "ok" : "unconverged";

        if (!model.valid) {
            row.status = "invalid";
        } else if (c.run_bp) {
            std::vector<double> mses;
            for (int t = 0; t < c.trials; ++t) {
                const std::uint64_t ts = derive_seed(c.master_seed, {index, static_cast<std::uint64_t>(t)});
                const LabeledGraph g = sample_graph(model, derive_seed(ts, {0}));
                BpConfig bc = c.bp;
                bc.seed = derive_seed(ts, {1});
                const BpResult br = bp_run(g, model, bc);
                row.bp_mse_trials[static_cast<std::size_t>(t)] = br.empirical_mse_trace;
                mses.push_back(br.empirical_mse_trace);
            }
            row.bp_mse_median = detail::median(mses);
        }
    } catch (const std::exception& e) {
        row.status = "error: " + detail::sanitize(e.what());
    }
    if (c.record_runtime)
        row.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return row;
}

/// Runs the sweep, appending finished rows to `<output>.partial` as they
/// complete and writing the canonical CSV at the end. With resume, rows found
/// in the partial file are kept verbatim and not recomputed.
inline SweepSummary run_sweep(const SweepConfig& c, bool resume = false) {
    validate(c);
    const auto pts = sweep_points(c);
    const std::string header = csv_header(c.trials);
    const std::string schema_line = "#schema=" + std::to_string(kSweepSchema);
    const std::string partial = c.output + ".partial";

    std::vector<std::optional<std::string>> lines(pts.size());
    std::map<std::pair<std::string, std::string>, std::size_t> key_to_index;
    for (std::size_t i = 0; i < pts.size(); ++i)
        key_to_index[{detail::fmt_num(pts[i].first, 10), detail::fmt_num(pts[i].second, 10)}] = i;

    SweepSummary summary;
    if (resume && std::filesystem::exists(partial)) {
        std::ifstream in(partial);
        std::string line;
        if (!std::getline(in, line) || line != schema_line || !std::getline(in, line) || line != header)
            throw Error("sweep: partial file " + partial + " does not match this configuration");
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            const auto f = detail::split_csv(line);
            if (f.size() != static_cast<std::size_t>(14 + c.trials)) continue; // torn final line
            const auto it = key_to_index.find({f[0], f[1]});
            if (it == key_to_index.end()) throw Error("sweep: partial file has a point outside the grid");
            if (!lines[it->second]) ++summary.resumed;
            lines[it->second] = line;
        }
    }

    // Rewrite the partial file with only the complete rows, then append.
    {
        std::ofstream out(partial, std::ios::trunc);
        if (!out) throw Error("sweep: cannot write " + partial);
        out << schema_line << '\n' << header << '\n';
        for (const auto& l : lines)
            if (l) out << *l << '\n';
    }
    std::ofstream append(partial, std::ios::app);

    std::vector<std::size_t> todo;
    for (std::size_t i = 0; i < pts.size(); ++i)
        if (!lines[i]) todo.push_back(i);

    const auto evaluator = std::make_shared<const ChannelEvaluator>(whiten(c.p), c.channel);
    std::atomic<std::size_t> next{0};
    std::mutex write_mutex;
    auto worker = [&] {
        for (;;) {
            const std::size_t slot = next.fetch_add(1);
            if (slot >= todo.size()) return;
            const std::size_t i = todo[slot];
            const std::string line = format_row(sweep_point(c, evaluator, i, pts[i].first, pts[i].second));
            const std::lock_guard<std::mutex> lock(write_mutex);
            lines[i] = line;
            append << line << '\n' << std::flush;
        }
    };
    const unsigned nthreads = std::min<unsigned>(c.threads, static_cast<unsigned>(std::max<std::size_t>(1, todo.size())));
    if (nthreads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < nthreads; ++t) pool.emplace_back(worker);
    }
    append.close();
    summary.computed = todo.size();

    const std::string tmp = c.output + ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out) throw Error("sweep: cannot write " + tmp);
        out << schema_line << '\n' << header << '\n';
        for (const auto& l : lines) out << *l << '\n';
    }
    std::filesystem::rename(tmp, c.output);
    std::filesystem::remove(partial);

    for (const auto& l : lines) summary.rows.push_back(parse_row(*l, c.trials));
    return summary;
}

/// Reads a sweep CSV written by run_sweep.
inline std::vector<SweepRow> read_sweep_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line != "#schema=" + std::to_string(kSweepSchema))
        throw Error("sweep CSV: unsupported schema line");
    if (!std::getline(in, line)) throw Error("sweep CSV: missing header");
    const auto cols = detail::split_csv(line);
    const int trials = static_cast<int>(cols.size()) - 14;
    if (trials < 1 || line != csv_header(trials)) throw Error("sweep CSV: unexpected header");
    std::vector<SweepRow> rows;
    while (std::getline(in, line))
        if (!line.empty()) rows.push_back(parse_row(line, trials));
    return rows;
}

} // namespace sbm
