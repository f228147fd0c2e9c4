// Acceptance run: one PASS/FAIL line per release criterion. Exit status is
// nonzero when any criterion fails.

#include <sbm/sbm.hpp>

#include "trees.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace sbm;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double a) {
    char buf[128];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

std::string fmt(const char* f, double a, double b) {
    char buf[160];
    std::snprintf(buf, sizeof buf, f, a, b);
    return buf;
}

std::string fmt(const char* f, double a, double b, double c) {
    char buf[200];
    std::snprintf(buf, sizeof buf, f, a, b, c);
    return buf;
}

std::shared_ptr<const ChannelEvaluator> evaluator(const ProbVector& p) {
    return std::make_shared<const ChannelEvaluator>(whiten(p));
}

const ProbVector kUniform3 = ProbVector::normalized({1.0, 1.0, 1.0});
const ProbVector kSkewed3({0.6, 0.3, 0.1});

// Potential solutions on the two reference grids, shared by several criteria.
struct GridSolution {
    double l1, l2;
    PotentialSolution sol;
};

struct Grids {
    std::vector<GridSolution> uniform;
    std::vector<GridSolution> skewed;
    double seconds_uniform = 0.0;
    double seconds_skewed = 0.0;
};

std::vector<GridSolution> solve_grid(const ProbVector& p, double lo, double hi, std::size_t count) {
    const auto ev = evaluator(p);
    std::vector<GridSolution> out;
    for (double l1 : linspace(lo, hi, count))
        for (double l2 : linspace(lo, hi, count))
            out.push_back({l1, l2, solve(PotentialProblem(ev, SymMatrix::diagonal({l1, l2})))});
    return out;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

const Grids& grids() {
    static const Grids g = [] {
        Grids r;
        auto t0 = std::chrono::steady_clock::now();
        r.uniform = solve_grid(kUniform3, 0.4, 1.6, 9);
        r.seconds_uniform = seconds_since(t0);
        t0 = std::chrono::steady_clock::now();
        r.skewed = solve_grid(kSkewed3, 0.5, 0.98, 9);
        r.seconds_skewed = seconds_since(t0);
        return r;
    }();
    return g;
}

Outcome whitened_moments() {
    Rng rng = make_rng(101);
    std::uniform_int_distribution<std::size_t> kdist(2, 6);
    std::uniform_real_distribution<double> w(0.02, 1.0);
    double worst = 0.0;
    for (int rep = 0; rep < 100; ++rep) {
        Vector v(kdist(rng));
        for (double& x : v) x = w(rng);
        const WhitenedSupport s = whiten(ProbVector::normalized(v));
        const std::size_t dim = s.dim();
        Vector mean(dim, 0.0);
        Matrix second(dim, dim);
        for (std::size_t a = 0; a < s.k(); ++a) {
            for (std::size_t i = 0; i < dim; ++i) {
                mean[i] += s.prob[a] * s.point(a)[i];
                for (std::size_t j = 0; j < dim; ++j) second(i, j) += s.prob[a] * s.point(a)[i] * s.point(a)[j];
            }
        }
        for (double m : mean) worst = std::max(worst, std::abs(m));
        worst = std::max(worst, max_abs_entry(second - Matrix::identity(dim)));
    }
    return {worst < 1e-10, fmt("max deviation %.2e over 100 priors", worst)};
}

Outcome immse_gradient() {
    Rng rng = make_rng(202);
    std::uniform_real_distribution<double> eigv(0.2, 2.5);
    std::uniform_real_distribution<double> angle(0.0, 3.141592653589793);
    const std::vector<ProbVector> priors{kUniform3, kSkewed3, ProbVector({0.7, 0.3})};
    double worst = 0.0;
    for (int rep = 0; rep < 20; ++rep) {
        const ProbVector& p = priors[static_cast<std::size_t>(rep) % priors.size()];
        const ChannelEvaluator ev(whiten(p));
        SymMatrix S;
        if (p.k() == 2) {
            S = SymMatrix({{eigv(rng)}});
        } else {
            const double t = angle(rng), a = eigv(rng), b = eigv(rng);
            const double c = std::cos(t), s = std::sin(t);
            S = SymMatrix({{a * c * c + b * s * s, (a - b) * c * s}, {(a - b) * c * s, a * s * s + b * c * c}});
        }
        worst = std::max(worst, gradient_check(ev, PsdMatrix(S)));
    }
    return {worst < 1e-3, fmt("max |dI/dS - M/2| = %.2e over 20 points", worst)};
}

Outcome mmse_at_zero() {
    const std::vector<ProbVector> priors{ProbVector({0.5, 0.5}), ProbVector({0.7, 0.3}), ProbVector({0.95, 0.05}),
                                         kUniform3, kSkewed3, ProbVector::normalized({1, 1, 1, 1}),
                                         ProbVector({0.4, 0.3, 0.2, 0.1})};
    double worst = 0.0;
    for (const auto& p : priors) {
        const ChannelEvaluator ev(whiten(p));
        const std::size_t dim = p.k() - 1;
        worst = std::max(worst, frobenius_norm(ev.mmse(PsdMatrix::zero(dim)).matrix() - Matrix::identity(dim)));
    }
    return {worst < 1e-6, fmt("max ||M(0) - I||_F = %.2e over %g priors", worst, static_cast<double>(priors.size()))};
}

Outcome fixed_point_residual_check() {
    const Grids& g = grids();
    double worst = 0.0;
    std::size_t count = 0;
    for (const auto* grid : {&g.uniform, &g.skewed})
        for (const auto& gs : *grid)
            for (const auto& sp : gs.sol.stationary_points) {
                worst = std::max(worst, sp.residual);
                ++count;
            }
    return {count > 0 && worst < 1e-6,
            fmt("max residual %.2e over %g converged stationary points", worst, static_cast<double>(count))};
}

Outcome threshold_uniform() {
    const Grids& g = grids();
    int wrong = 0, checked = 0;
    double lowest_possible = 1e9, highest_impossible = -1e9;
    for (const auto& gs : g.uniform) {
        const double m = std::max(gs.l1, gs.l2);
        const WeakRecovery v = gs.sol.weak_recovery;
        if (v == WeakRecovery::possible) lowest_possible = std::min(lowest_possible, m);
        if (v == WeakRecovery::impossible) highest_impossible = std::max(highest_impossible, m);
        if (m <= 0.95) {
            ++checked;
            wrong += v != WeakRecovery::impossible;
        } else if (m >= 1.05) {
            ++checked;
            wrong += v != WeakRecovery::possible;
        }
    }
    const bool fast = g.seconds_uniform < 600.0;
    return {wrong == 0 && fast,
            fmt("%g misclassified of %g", wrong, checked) +
                fmt("; highest impossible max lambda %.3f, lowest possible %.3f", highest_impossible, lowest_possible) +
                fmt(" (%.1f s)", g.seconds_uniform)};
}

Outcome sub_ks_detectability() {
    const Grids& g = grids();
    int hits = 0;
    double best_l1 = 0.0, best_l2 = 0.0;
    for (const auto& gs : g.skewed)
        if (std::max(gs.l1, gs.l2) < 1.0 && gs.sol.weak_recovery == WeakRecovery::possible) {
            if (hits == 0) {
                best_l1 = gs.l1;
                best_l2 = gs.l2;
            }
            ++hits;
        }
    const bool fast = g.seconds_skewed < 600.0;
    return {hits > 0 && fast, fmt("%g grid points with max lambda < 1 are possible, e.g. (%.3f, ", hits, best_l1) +
                                  fmt("%.3f) (%.1f s)", best_l2, g.seconds_skewed)};
}

SweepConfig bp_reference_config() {
    SweepConfig c = figure1_defaults(Figure1Variant::a);
    c.output = "acceptance_bp.csv";
    return c;
}

Outcome bp_point(double lambda, bool above, double budget_s) {
    const auto t0 = std::chrono::steady_clock::now();
    const SweepConfig c = bp_reference_config();
    const auto ev = std::make_shared<const ChannelEvaluator>(whiten(c.p), c.channel);
    const SweepRow r = sweep_point(c, ev, above ? 1 : 0, lambda, lambda);
    const double dt = seconds_since(t0);
    if (!r.bp_mse_median || !r.trace_mmse_ub) return {false, "status " + r.status};
    const double target = above ? *r.trace_mmse_ub : 2.0;
    const double gap = std::abs(*r.bp_mse_median - target);
    return {gap <= 0.1 && dt < budget_s,
            fmt("bp median %.4f vs %.4f", *r.bp_mse_median, target) + fmt(" (gap %.4f, %.0f s)", gap, dt)};
}

Outcome bp_trees() {
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng = make_rng(303);
    double worst = 0.0;
    int unconverged = 0;
    for (int rep = 0; rep < 50; ++rep) {
        const testref::TreeInstance inst = testref::random_tree_instance(rng, rep);
        BpConfig cfg;
        cfg.n_inits = 1;
        cfg.external_field = false;
        cfg.msg_tol = 1e-13;
        cfg.max_sweeps = 2000;
        cfg.seed = static_cast<std::uint64_t>(rep);
        const BpResult bp = bp_run(inst.graph, inst.model, cfg, inst.side);
        ExactOptions eo;
        eo.include_non_edges = false;
        const ExactPosterior ex = exact_posterior(inst.graph, inst.model, inst.side, eo);
        unconverged += !bp.converged;
        worst = std::max(worst, max_abs_entry(bp.marginals - ex.marginals));
    }
    const double dt = seconds_since(t0);
    return {worst < 1e-8 && dt < 60.0,
            fmt("max marginal error %.2e over 50 trees, %g unconverged", worst, unconverged) + fmt(" (%.1f s)", dt)};
}

Outcome propositions() {
    const auto t0 = std::chrono::steady_clock::now();
    struct Case {
        std::size_t n;
        ProbVector p;
        SymMatrix R;
        std::optional<PsdMatrix> S;
    };
    const std::vector<Case> cases{
        {2, ProbVector({0.5, 0.5}), SymMatrix({{1.0}}), std::nullopt},
        {3, ProbVector({0.7, 0.3}), SymMatrix({{0.8}}), std::nullopt},
        {4, ProbVector({0.5, 0.5}), SymMatrix({{-0.9}}), std::nullopt},
        {4, ProbVector({0.8, 0.2}), SymMatrix({{0.6}}), std::nullopt},
        {3, kSkewed3, SymMatrix::diagonal({0.3, 0.15}), std::nullopt},
        {4, ProbVector({0.4, 0.35, 0.25}), SymMatrix({{0.5, 0.1}, {0.1, -0.3}}), std::nullopt},
        {3, ProbVector({0.7, 0.3}), SymMatrix({{0.8}}), PsdMatrix(SymMatrix({{1.0}}))},
        {2, kUniform3, SymMatrix::diagonal({0.5, 0.5}), PsdMatrix(SymMatrix::diagonal({0.25, 0.25}))}};
    double r1 = 0.0, r2 = 0.0;
    for (const auto& c : cases) {
        EnsembleOptions opt;
        opt.S = c.S;
        const SbmModel m = build_model(c.n, 1.2, c.p, c.R);
        if (!m.valid) return {false, "test instance is not a valid SBM"};
        const EnsembleSummary e = enumerate_ensemble(m, c.n, opt);
        if (!e.exact) return {false, "ensemble was not enumerated exactly"};
        r1 = std::max(r1, prop1_check(e, c.p));
        r2 = std::max(r2, prop2_check(e));
    }
    const double dt = seconds_since(t0);
    return {r1 < 1e-10 && r2 < 1e-10 && dt < 120.0,
            fmt("max residuals %.2e (first), %.2e (second)", r1, r2) + fmt(" (%.1f s)", dt)};
}

Outcome dpi() {
    const auto t0 = std::chrono::steady_clock::now();
    struct Case {
        std::size_t n;
        double d;
        ProbVector p;
        SymMatrix R;
    };
    const std::vector<Case> cases{{2, 1.2, ProbVector({0.5, 0.5}), SymMatrix({{1.0}})},
                                  {3, 1.2, ProbVector({0.7, 0.3}), SymMatrix({{0.9}})},
                                  {3, 1.2, kUniform3, SymMatrix::diagonal({0.5, 0.5})},
                                  {2, 0.5, kSkewed3, SymMatrix::diagonal({0.3, 0.2})},
                                  {2, 0.5, kUniform3, SymMatrix::diagonal({0.8, -0.5})}};
    double min_gap = 1e300;
    bool ok = true;
    for (const auto& c : cases)
        for (double s : {0.25, 1.0}) {
            const std::size_t dim = c.p.k() - 1;
            const PsdMatrix S(SymMatrix(s * Matrix::identity(dim)));
            const SbmModel m = build_model(c.n, c.d, c.p, c.R);
            if (!m.valid) return {false, "test instance is not a valid SBM"};
            const DpiResult r = dpi_check(m, c.n, S, {}, 1e-10);
            ok = ok && r.holds;
            min_gap = std::min(min_gap, r.min_gap_eigenvalue);
        }
    const double dt = seconds_since(t0);
    return {ok && dt < 120.0, fmt("smallest eigenvalue of MMSE(G) - MMSE(G,Y): %.3e", min_gap) + fmt(" (%.1f s)", dt)};
}

Outcome universality() {
    const auto t0 = std::chrono::steady_clock::now();
    const UniversalityProbe probe = universality_gap(ProbVector({0.5, 0.5}), SymMatrix({{1.0}}), 6, {1.5, 3.0}, 200000, 404);
    const auto& a = probe.points[0];
    const auto& b = probe.points[1];
    const double se = std::sqrt(a.gap_se * a.gap_se + b.gap_se * b.gap_se);
    const double dt = seconds_since(t0);
    return {b.gap <= a.gap + 3.0 * se && dt < 600.0,
            fmt("gap(d=1.5) = %.4f, gap(d=3) = %.4f, combined se %.4f", a.gap, b.gap, se) + fmt(" (%.1f s)", dt)};
}

// The 10 converged above-threshold points used by the bound identities.
std::vector<const GridSolution*> above_threshold_points() {
    std::vector<const GridSolution*> pts;
    for (const auto& gs : grids().uniform)
        if (gs.sol.converged && gs.sol.weak_recovery == WeakRecovery::possible && pts.size() < 10) pts.push_back(&gs);
    return pts;
}

struct BoundTerms {
    double lhs;          // tr(R^2 (I - M)^2)
    double interaction;  // tr(R^2 - R^{-2} Delta^2)
    double quadratic;    // tr(R^{-2} Delta^2)
};

BoundTerms bound_terms(const GridSolution& gs) {
    const Matrix R = SymMatrix::diagonal({gs.l1, gs.l2}).matrix();
    const Matrix rinv = SymMatrix::diagonal({1.0 / gs.l1, 1.0 / gs.l2}).matrix();
    const Matrix d = gs.sol.delta_star.matrix();
    const Matrix i_m = Matrix::identity(2) - gs.sol.mmse_ub.matrix();
    BoundTerms t;
    t.lhs = trace(R * R * i_m * i_m);
    t.quadratic = trace(rinv * rinv * d * d);
    t.interaction = trace(R * R) - t.quadratic;
    return t;
}

Outcome bound_sandwich() {
    const auto pts = above_threshold_points();
    double worst = 0.0;
    for (const auto* gs : pts) {
        const BoundTerms t = bound_terms(*gs);
        worst = std::max(worst, std::abs(t.lhs - t.interaction));
    }
    return {pts.size() == 10 && worst < 1e-6,
            fmt("max |tr(R^2(I-M)^2) - tr(R^2 - R^-2 D^2)| = %.3e over %g points", worst, static_cast<double>(pts.size()))};
}

std::string bound_identity_info() {
    const auto pts = above_threshold_points();
    double worst = 0.0;
    for (const auto* gs : pts) {
        const BoundTerms t = bound_terms(*gs);
        worst = std::max(worst, std::abs(t.lhs - t.quadratic));
    }
    return fmt("stationarity gives tr(R^2(I-M)^2) = tr(R^-2 D^2): max deviation %.3e over %g points", worst,
               static_cast<double>(pts.size()));
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

Outcome determinism() {
    SweepConfig c = figure1_defaults(Figure1Variant::b);
    c.lambda1_grid = {0.6, 1.4};
    c.lambda2_grid = {0.98, 2.9};
    c.n = 1000;
    c.d = 10.0;
    c.trials = 2;
    c.bp.n_inits = 2;
    c.output = "acceptance_det_1.csv";
    run_sweep(c);
    c.output = "acceptance_det_2.csv";
    run_sweep(c);
    const std::string a = slurp("acceptance_det_1.csv");
    const std::string b = slurp("acceptance_det_2.csv");
    std::filesystem::remove("acceptance_det_1.csv");
    std::filesystem::remove("acceptance_det_2.csv");
    return {!a.empty() && a == b, fmt("two runs, %g bytes each, identical", static_cast<double>(a.size()))};
}

} // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> checks{
        {"whitened_moments", whitened_moments},
        {"immse_gradient", immse_gradient},
        {"mmse_at_zero_snr", mmse_at_zero},
        {"fixed_point_residual", fixed_point_residual_check},
        {"threshold_uniform_k3", threshold_uniform},
        {"sub_ks_detectability", sub_ks_detectability},
        {"bp_vs_theory_above_threshold", [] { return bp_point(1.5, true, 1200.0); }},
        {"bp_below_threshold", [] { return bp_point(0.5, false, 600.0); }},
        {"bp_tree_oracle_equivalence", bp_trees},
        {"proposition_identities", propositions},
        {"dpi_ordering", dpi},
        {"universality_probe", universality},
        {"bound_sandwich", bound_sandwich},
        {"determinism", determinism},
    };
    int failures = 0;
    for (const auto& [name, fn] : checks) {
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failures += !o.pass;
        std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
        if (name == "bound_sandwich") std::printf("INFO bound_identity: %s\n", bound_identity_info().c_str());
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria failed\n", failures, checks.size());
    return failures == 0 ? 0 : 1;
}
