#include <sbm/sbm.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

using nlohmann::json;

namespace {

json to_json(const sbm::Matrix& m) {
    json rows = json::array();
    for (std::size_t i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (std::size_t j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(row);
    }
    return rows;
}

json to_json(const sbm::SymMatrix& m) { return to_json(m.matrix()); }
json to_json(const sbm::PsdMatrix& m) { return to_json(m.matrix()); }

sbm::ChannelConfig channel_config(const std::string& method, std::size_t nodes, std::size_t samples, std::uint64_t seed) {
    sbm::ChannelConfig c;
    if (method == "quadrature") c.method = sbm::ChannelMethod::quadrature;
    else if (method == "mc") c.method = sbm::ChannelMethod::monte_carlo;
    else throw sbm::Error("--method must be 'quadrature' or 'mc'");
    c.nodes_per_dim = nodes;
    c.mc_samples = samples;
    c.seed = seed;
    return c;
}

sbm::PsdMatrix parse_psd(const std::string& text, std::size_t dim) {
    const auto v = sbm::parse_number_list(text);
    return sbm::PsdMatrix(sbm::sym_from_row_major(v, dim, "--S"));
}

json stationary_json(const sbm::StationaryPoint& p) {
    return {{"delta", to_json(p.delta)}, {"f", p.f},           {"f_error", p.f_error},
            {"residual", p.residual},    {"is_zero", p.is_zero}, {"is_local_min", p.is_local_min}};
}

json solution_json(const sbm::PotentialSolution& s) {
    json minima = json::array();
    for (const auto& p : s.all_local_minima) minima.push_back(stationary_json(p));
    json stationary = json::array();
    for (const auto& p : s.stationary_points) stationary.push_back(stationary_json(p));
    return {{"delta_star", to_json(s.delta_star)},
            {"f_min", s.f_min},
            {"fixed_point_residual", s.fixed_point_residual},
            {"weak_recovery", sbm::to_string(s.weak_recovery)},
            {"hessian_unstable_at_zero", s.hessian_unstable_at_zero},
            {"mmse_ub", to_json(s.mmse_ub)},
            {"trace_mmse_ub", sbm::trace(s.mmse_ub.matrix())},
            {"interaction_lb", s.interaction_lb},
            {"trace_r2", s.trace_r2},
            {"converged", s.converged},
            {"iterations", s.iterations},
            {"starts", s.starts},
            {"unconverged_starts", s.unconverged_starts},
            {"f_tolerance", s.f_tolerance},
            {"all_local_minima", minima},
            {"stationary_points", stationary}};
}

json bp_json(const sbm::BpResult& r) {
    return {{"chosen_init", r.chosen_init},
            {"predicted_mse", r.predicted_mse},
            {"empirical_mse_trace", r.empirical_mse_trace},
            {"empirical_mse_matrix", to_json(r.empirical_mse_matrix)},
            {"converged", r.converged},
            {"sweeps_used", r.sweeps_used},
            {"predicted_per_init", r.predicted_per_init},
            {"sweeps_per_init", r.sweeps_per_init},
            {"converged_per_init", r.converged_per_init}};
}

json ensemble_json(const sbm::EnsembleSummary& e) {
    return {{"n", e.n},
            {"realizations", e.realizations},
            {"total_weight", e.total_weight},
            {"exact", e.exact},
            {"std_error", e.std_error},
            {"mmse_std", to_json(e.mmse_std)},
            {"mmse_white", to_json(e.mmse_white)},
            {"mean_sq_deviation", e.mean_sq_deviation},
            {"mean_chi2", e.mean_chi2}};
}

std::optional<sbm::SideInfo> load_side_info(const std::string& path, const sbm::ModelConfig& mc, const std::string& s_text,
                                            std::size_t n) {
    if (path.empty()) return std::nullopt;
    std::optional<sbm::PsdMatrix> S = mc.S;
    if (!s_text.empty()) S = parse_psd(s_text, mc.p.k() - 1);
    if (!S) throw sbm::Error("--side-info needs an SNR matrix (--S or S in the config)");
    return sbm::read_side_info_file(path, n, *S);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Degree-balanced stochastic block model toolkit"};
    app.require_subcommand(1);

    // snr-eval
    auto* snr = app.add_subcommand("snr-eval", "Evaluate I_X(S) and M_X(S) for the whitened prior");
    std::string snr_p, snr_S, snr_method = "quadrature";
    std::size_t snr_nodes = 0, snr_samples = 20000;
    std::uint64_t snr_seed = 1;
    snr->add_option("--p", snr_p, "Community probabilities, comma separated")->required();
    snr->add_option("--S", snr_S, "SNR matrix, row-major")->required();
    snr->add_option("--method", snr_method, "quadrature | mc");
    snr->add_option("--nodes", snr_nodes, "Quadrature nodes per dimension (0 = default)");
    snr->add_option("--samples", snr_samples, "Monte Carlo samples");
    snr->add_option("--seed", snr_seed, "Monte Carlo seed");

    // solve-potential
    auto* pot = app.add_subcommand("solve-potential", "Minimize the potential and report the weak-recovery verdict");
    std::string pot_config, pot_S, pot_method = "quadrature";
    double pot_eps = 0.5;
    std::uint64_t pot_seed = 7;
    pot->add_option("--config", pot_config, "Model config (TOML)")->required();
    pot->add_option("--S", pot_S, "Side-information SNR, row-major");
    pot->add_option("--eps", pot_eps, "CCCP damping");
    pot->add_option("--method", pot_method, "quadrature | mc");
    pot->add_option("--seed", pot_seed, "Seed for random starts");

    // bp
    auto* bpc = app.add_subcommand("bp", "Run belief propagation on a graph file");
    std::string bp_graph, bp_config, bp_side, bp_S;
    int bp_inits = 15, bp_sweeps = 500;
    double bp_damping = 0.2;
    std::uint64_t bp_seed = 1;
    bool bp_edges_only = false;
    bpc->add_option("--graph", bp_graph, "Graph file")->required();
    bpc->add_option("--config", bp_config, "Model config (TOML)")->required();
    bpc->add_option("--side-info", bp_side, "Side-information file");
    bpc->add_option("--S", bp_S, "Side-information SNR, row-major");
    bpc->add_option("--inits", bp_inits, "Random initializations");
    bpc->add_option("--seed", bp_seed, "Seed");
    bpc->add_option("--damping", bp_damping, "Message damping");
    bpc->add_option("--max-sweeps", bp_sweeps, "Sweep cap per initialization");
    bpc->add_flag("--edges-only", bp_edges_only, "Drop the non-edge external field");

    // oracle
    auto* orc = app.add_subcommand("oracle", "Exact enumeration on tiny instances");
    std::string or_mode, or_config, or_graph, or_side, or_S, or_dgrid = "1.5,3";
    bool or_edges_only = false;
    std::size_t or_nodes = 0, or_samples = 20000;
    orc->add_option("--mode", or_mode, "posterior | prop-check | dpi | universality")
        ->required()
        ->check(CLI::IsMember({"posterior", "prop-check", "dpi", "universality"}));
    orc->add_option("--config", or_config, "Model config (TOML)")->required();
    orc->add_option("--graph", or_graph, "Graph file (posterior mode)");
    orc->add_option("--side-info", or_side, "Side-information file (posterior mode)");
    orc->add_option("--S", or_S, "Side-information SNR, row-major");
    orc->add_option("--nodes", or_nodes, "Quadrature nodes per dimension for side information");
    orc->add_option("--d-grid", or_dgrid, "Average degrees for the universality probe");
    orc->add_option("--samples", or_samples, "Monte Carlo samples for the universality probe");
    orc->add_flag("--edges-only", or_edges_only, "Ignore non-edge factors");

    // sweep
    auto* sw = app.add_subcommand("sweep", "Run an eigenvalue-grid sweep and write CSV");
    std::string sw_config, sw_out;
    bool sw_resume = false;
    bool sw_full = false;
    unsigned sw_threads = 0;
    sw->add_option("--config", sw_config, "Sweep config (TOML)")->required();
    sw->add_option("--out", sw_out, "Output CSV (overrides config)");
    sw->add_flag("--resume", sw_resume, "Keep rows from an interrupted run");
    sw->add_option("--threads", sw_threads, "Worker threads (overrides config)");
    sw->add_flag("--full-scale", sw_full, "Use n = 100000 nodes per graph");

    // sample
    auto* smp = app.add_subcommand("sample", "Sample a labeled graph (and optional side information)");
    std::string sm_config, sm_out, sm_side, sm_S;
    std::optional<std::uint64_t> sm_seed;
    smp->add_option("--config", sm_config, "Model config (TOML)")->required();
    smp->add_option("--out", sm_out, "Graph file to write")->required();
    smp->add_option("--side-info", sm_side, "Side-information file to write");
    smp->add_option("--S", sm_S, "Side-information SNR, row-major");
    smp->add_option("--seed", sm_seed, "Seed (overrides config)");

    // figure1-config
    auto* fig = app.add_subcommand("figure1-config", "Print the default sweep config for figure 1a or 1b");
    std::string fig_variant = "a";
    std::size_t fig_res = 20;
    fig->add_option("--variant", fig_variant, "a | b")->check(CLI::IsMember({"a", "b"}));
    fig->add_option("--resolution", fig_res, "Grid points per axis");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*snr) {
            const sbm::ProbVector p(sbm::parse_number_list(snr_p));
            const sbm::PsdMatrix S = parse_psd(snr_S, p.k() - 1);
            const sbm::ChannelEvaluator ev(sbm::whiten(p), channel_config(snr_method, snr_nodes, snr_samples, snr_seed));
            const auto mi = ev.mutual_information(S);
            const auto mm = ev.mmse_matrix(S);
            json out = {{"method", sbm::to_string(ev.config().method)},
                        {"mutual_information", mi.value},
                        {"mutual_information_error", mi.std_error},
                        {"mmse", to_json(mm.matrix)},
                        {"trace_mmse", mm.value},
                        {"mmse_error", mm.std_error}};
            std::cout << out.dump(2) << '\n';
        } else if (*pot) {
            const sbm::ModelConfig mc = sbm::load_model_config(pot_config);
            std::optional<sbm::PsdMatrix> S = mc.S;
            if (!pot_S.empty()) S = parse_psd(pot_S, mc.p.k() - 1);
            auto ev = std::make_shared<const sbm::ChannelEvaluator>(sbm::whiten(mc.p), channel_config(pot_method, 0, 20000, 1));
            const sbm::PotentialProblem problem(ev, mc.R, S);
            sbm::SolveOptions so;
            so.cccp.eps = pot_eps;
            so.seed = pot_seed;
            std::cout << solution_json(sbm::solve(problem, so)).dump(2) << '\n';
        } else if (*bpc) {
            const sbm::ModelConfig mc = sbm::load_model_config(bp_config);
            const sbm::LabeledGraph g = sbm::read_graph_file(bp_graph);
            const sbm::SbmModel model = sbm::build_model(g.n, mc.d, mc.p, mc.R);
            sbm::BpConfig cfg;
            cfg.n_inits = bp_inits;
            cfg.seed = bp_seed;
            cfg.damping = bp_damping;
            cfg.max_sweeps = bp_sweeps;
            cfg.external_field = !bp_edges_only;
            const auto side = load_side_info(bp_side, mc, bp_S, g.n);
            std::cout << bp_json(sbm::bp_run(g, model, cfg, side)).dump(2) << '\n';
        } else if (*orc) {
            const sbm::ModelConfig mc = sbm::load_model_config(or_config);
            std::optional<sbm::PsdMatrix> S = mc.S;
            if (!or_S.empty()) S = parse_psd(or_S, mc.p.k() - 1);
            sbm::ExactOptions eo;
            eo.include_non_edges = !or_edges_only;
            json out = {{"mode", or_mode}};
            if (or_mode == "posterior") {
                if (or_graph.empty()) throw sbm::Error("posterior mode needs --graph");
                const sbm::LabeledGraph g = sbm::read_graph_file(or_graph);
                const sbm::SbmModel model = sbm::build_model(g.n, mc.d, mc.p, mc.R);
                const auto side = load_side_info(or_side, mc, or_S, g.n);
                const auto post = sbm::exact_posterior(g, model, side, eo);
                out["log_evidence"] = post.log_evidence;
                out["marginals"] = to_json(post.marginals);
                out["mmse_white"] = to_json(post.mmse_white);
                out["mmse_std"] = to_json(post.mmse_std);
            } else if (or_mode == "prop-check") {
                const sbm::SbmModel model = mc.model();
                sbm::EnsembleOptions opt;
                opt.exact = eo;
                opt.S = S;
                opt.quadrature_nodes = or_nodes;
                const auto e = sbm::enumerate_ensemble(model, mc.n, opt);
                out["ensemble"] = ensemble_json(e);
                out["prop1_residual"] = sbm::prop1_check(e, mc.p);
                out["prop2_residual"] = sbm::prop2_check(e);
            } else if (or_mode == "dpi") {
                if (!S) throw sbm::Error("dpi mode needs --S or S in the config");
                const sbm::SbmModel model = mc.model();
                sbm::EnsembleOptions opt;
                opt.exact = eo;
                opt.quadrature_nodes = or_nodes;
                const auto r = sbm::dpi_check(model, mc.n, *S, opt);
                out["mmse_graph"] = to_json(r.mmse_graph);
                out["mmse_graph_side"] = to_json(r.mmse_graph_side);
                out["min_gap_eigenvalue"] = r.min_gap_eigenvalue;
                out["holds"] = r.holds;
            } else {
                const auto probe = sbm::universality_gap(mc.p, mc.R, mc.n, sbm::parse_number_list(or_dgrid), or_samples, mc.seed);
                json pts = json::array();
                for (const auto& pt : probe.points)
                    pts.push_back({{"d", pt.d},
                                   {"mi_graph", pt.mi_graph},
                                   {"mi_gauss", pt.mi_gauss},
                                   {"mi_gauss_se", pt.mi_gauss_se},
                                   {"gap", pt.gap},
                                   {"gap_se", pt.gap_se}});
                out["n"] = probe.n;
                out["t"] = probe.t;
                out["points"] = pts;
            }
            std::cout << out.dump(2) << '\n';
        } else if (*sw) {
            sbm::SweepConfig cfg = sbm::load_sweep_config(sw_config);
            if (!sw_out.empty()) cfg.output = sw_out;
            if (sw_threads > 0) cfg.threads = sw_threads;
            if (sw_full) cfg.n = 100000;
            const auto summary = sbm::run_sweep(cfg, sw_resume);
            json out = {{"output", cfg.output},
                        {"rows", summary.rows.size()},
                        {"computed", summary.computed},
                        {"resumed", summary.resumed}};
            std::cout << out.dump(2) << '\n';
        } else if (*smp) {
            const sbm::ModelConfig mc = sbm::load_model_config(sm_config);
            const sbm::SbmModel model = mc.model();
            const std::uint64_t seed = sm_seed.value_or(mc.seed);
            const sbm::LabeledGraph g = sbm::sample_graph(model, seed);
            std::ofstream gout(sm_out);
            if (!gout) throw sbm::Error("cannot write " + sm_out);
            sbm::write_graph(gout, g);
            if (!sm_side.empty()) {
                std::optional<sbm::PsdMatrix> S = mc.S;
                if (!sm_S.empty()) S = parse_psd(sm_S, mc.p.k() - 1);
                if (!S) throw sbm::Error("--side-info needs --S or S in the config");
                const sbm::SideInfo si = sbm::sample_side_info(model, g.labels, *S, sbm::derive_seed(seed, {1}));
                std::ofstream sout(sm_side);
                if (!sout) throw sbm::Error("cannot write " + sm_side);
                sbm::write_side_info(sout, si);
            }
            json out = {{"n", g.n}, {"edges", g.edges.size()}, {"k", g.k}, {"seed", seed}};
            std::cout << out.dump(2) << '\n';
        } else if (*fig) {
            const auto c = sbm::figure1_defaults(fig_variant == "a" ? sbm::Figure1Variant::a : sbm::Figure1Variant::b, fig_res);
            auto list = [](const std::vector<double>& v) {
                std::string s = "[";
                for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + sbm::detail::fmt_num(v[i], 17);
                return s + "]";
            };
            std::cout << "p = " << list(c.p.values()) << '\n'
                      << "lambda1 = " << list(c.lambda1_grid) << '\n'
                      << "lambda2 = " << list(c.lambda2_grid) << '\n'
                      << "n = " << c.n << '\n'
                      << "d = " << c.d << '\n'
                      << "trials = " << c.trials << '\n'
                      << "master_seed = " << c.master_seed << '\n'
                      << "output = \"figure1" << fig_variant << ".csv\"\n\n"
                      << "[bp]\nn_inits = " << c.bp.n_inits << "\ndamping = " << c.bp.damping << '\n';
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
