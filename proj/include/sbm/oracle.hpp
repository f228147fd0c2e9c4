#pragma once
// Brute-force posterior computation on tiny instances: k^n label enumeration,
// optional enumeration of the whole graph space, Gauss-Hermite integration of
// Gaussian side information, and a Bernoulli-vs-Gaussian channel probe.

#include <sbm/linalg.hpp>
#include <sbm/model.hpp>
#include <sbm/quadrature.hpp>
#include <sbm/rng.hpp>

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <vector>

namespace sbm {

struct ExactOptions {
    /// Include (1 - Q) factors for absent pairs. When false only the edge
    /// factors enter, which is the model BP solves exactly on trees.
    bool include_non_edges = true;
};

struct ExactPosterior {
    std::size_t n = 0;
    std::size_t k = 0;
    std::vector<double> log_weights; // normalized, mixed-radix order (node 0 fastest)
    double log_evidence = 0.0;       // log of the normalizer
    Matrix marginals;                // n x k
    Matrix mmse_std;                 // k x k, standard basis
    SymMatrix mmse_white;            // (k-1) x (k-1)
};

namespace detail {

inline constexpr double kMaxAssignments = 1e7;

inline std::size_t checked_assignments(std::size_t n, std::size_t k) {
    const double total = std::pow(static_cast<double>(k), static_cast<double>(n));
    if (n > 14 || total > kMaxAssignments) throw Error("exact oracle: instance too large (need n <= 14 and k^n <= 1e7)");
    return static_cast<std::size_t>(total);
}

inline void decode(std::size_t index, std::size_t k, std::vector<int>& x) {
    for (auto& v : x) {
        v = static_cast<int>(index % k);
        index /= k;
    }
}

inline double log_sum_exp(const std::vector<double>& v) {
    double mx = -std::numeric_limits<double>::infinity();
    for (double x : v) mx = std::max(mx, x);
    if (!std::isfinite(mx)) return mx;
    double s = 0.0;
    for (double x : v) s += std::exp(x - mx);
    return mx + std::log(s);
}

/// Dense 0/1 adjacency of an n-node graph.
inline std::vector<char> dense_adjacency(std::size_t n, const std::vector<std::pair<std::uint32_t, std::uint32_t>>& edges) {
    std::vector<char> adj(n * n, 0);
    for (const auto& [u, v] : edges) {
        if (u >= n || v >= n || u == v) throw Error("exact oracle: invalid edge");
        adj[u * n + v] = 1;
        adj[v * n + u] = 1;
    }
    return adj;
}

/// log P(x) + log P(G | x) for every assignment x.
inline std::vector<double> graph_log_joint(const SbmModel& model, std::size_t n, const std::vector<char>& adj,
                                           const ExactOptions& opt) {
    const std::size_t k = model.k();
    const std::size_t total = checked_assignments(n, k);
    Matrix logq(k, k);
    Matrix log1mq(k, k);
    for (std::size_t a = 0; a < k; ++a)
        for (std::size_t b = 0; b < k; ++b) {
            logq(a, b) = std::log(model.Q(a, b));
            log1mq(a, b) = std::log1p(-model.Q(a, b));
        }
    std::vector<double> out(total);
    std::vector<int> x(n);
    for (std::size_t idx = 0; idx < total; ++idx) {
        decode(idx, k, x);
        double lw = 0.0;
        for (std::size_t i = 0; i < n; ++i) lw += std::log(model.prob[static_cast<std::size_t>(x[i])]);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) {
                const auto a = static_cast<std::size_t>(x[i]);
                const auto b = static_cast<std::size_t>(x[j]);
                if (adj[i * n + j])
                    lw += logq(a, b);
                else if (opt.include_non_edges)
                    lw += log1mq(a, b);
            }
        out[idx] = lw;
    }
    return out;
}

/// Fills marginals and MMSE matrices from normalized log-weights.
inline void summarize(ExactPosterior& post, const WhitenedSupport& support) {
    const std::size_t n = post.n;
    const std::size_t k = post.k;
    post.marginals = Matrix(n, k);
    std::vector<int> x(n);
    for (std::size_t idx = 0; idx < post.log_weights.size(); ++idx) {
        const double w = std::exp(post.log_weights[idx]);
        if (w == 0.0) continue;
        decode(idx, k, x);
        for (std::size_t i = 0; i < n; ++i) post.marginals(i, static_cast<std::size_t>(x[i])) += w;
    }
    post.mmse_std = Matrix(k, k);
    Matrix white(k - 1, k - 1);
    for (std::size_t i = 0; i < n; ++i) {
        Vector m(k - 1, 0.0);
        for (std::size_t a = 0; a < k; ++a) {
            const double b = post.marginals(i, a);
            post.mmse_std(a, a) += b;
            for (std::size_t c = 0; c < k; ++c) post.mmse_std(a, c) -= b * post.marginals(i, c);
            for (std::size_t r = 0; r + 1 < k; ++r) {
                m[r] += b * support.point(a)[r];
                for (std::size_t c = 0; c + 1 < k; ++c) white(r, c) += b * support.point(a)[r] * support.point(a)[c];
            }
        }
        white -= outer(m, m);
    }
    post.mmse_std *= 1.0 / static_cast<double>(n);
    white *= 1.0 / static_cast<double>(n);
    post.mmse_white = SymMatrix(white);
}

inline ExactPosterior finish(std::vector<double> log_joint, std::size_t n, const SbmModel& model) {
    ExactPosterior post;
    post.n = n;
    post.k = model.k();
    post.log_evidence = log_sum_exp(log_joint);
    for (double& v : log_joint) v -= post.log_evidence;
    post.log_weights = std::move(log_joint);
    summarize(post, model.support);
    return post;
}

/// log phi(y - s) for every node and label; returns n x k.
inline Matrix side_log_likelihood(const SbmModel& model, const PsdMatrix& S, const Matrix& Y) {
    const std::size_t dim = model.dim();
    const PsdMatrix root = psd_sqrt(S);
    Matrix out(Y.rows(), model.k());
    const double norm = -0.5 * static_cast<double>(dim) * std::log(2.0 * std::numbers::pi);
    for (std::size_t a = 0; a < model.k(); ++a) {
        const Vector s = root.matrix() * model.support.point(a);
        for (std::size_t i = 0; i < Y.rows(); ++i) {
            double r2 = 0.0;
            for (std::size_t j = 0; j < dim; ++j) {
                const double r = Y(i, j) - s[j];
                r2 += r * r;
            }
            out(i, a) = norm - 0.5 * r2;
        }
    }
    return out;
}

inline void add_side_terms(std::vector<double>& log_joint, std::size_t n, std::size_t k, const Matrix& side) {
    std::vector<int> x(n);
    for (std::size_t idx = 0; idx < log_joint.size(); ++idx) {
        decode(idx, k, x);
        for (std::size_t i = 0; i < n; ++i) log_joint[idx] += side(i, static_cast<std::size_t>(x[i]));
    }
}

} // namespace detail

/// Exact posterior over all k^n labelings given the graph (its labels are
/// ignored) and optional side information.
inline ExactPosterior exact_posterior(const LabeledGraph& graph, const SbmModel& model,
                                      const std::optional<SideInfo>& side_info = std::nullopt,
                                      const ExactOptions& opt = {}) {
    if (graph.k != model.k()) throw Error("exact_posterior: graph and model disagree on k");
    if (!model.valid) throw Error("exact_posterior: model is not a valid SBM");
    const std::size_t n = graph.n;
    std::vector<double> lj = detail::graph_log_joint(model, n, detail::dense_adjacency(n, graph.edges), opt);
    if (side_info) {
        if (side_info->Y.rows() != n || side_info->Y.cols() != model.dim())
            throw Error("exact_posterior: side information has wrong shape");
        detail::add_side_terms(lj, n, model.k(), detail::side_log_likelihood(model, side_info->S, side_info->Y));
    }
    return detail::finish(std::move(lj), n, model);
}

/// Expectations over the observation space of posterior functionals.
struct EnsembleSummary {
    std::size_t n = 0;
    std::size_t realizations = 0;
    double total_weight = 0.0;   // integrates to one
    Matrix mmse_std;             // E[(1/n) sum_i cov_std(X_i | obs)]
    SymMatrix mmse_white;        // E[(1/n) sum_i cov_white(X_i | obs)]
    double mean_sq_deviation = 0.0; // (1/n) sum_i E ||P_{X_i|obs} - p||^2
    double mean_chi2 = 0.0;         // (1/n) sum_i E chi^2(P_{X_i|obs} || p)
    double std_error = 0.0;         // nonzero only for sampled graph ensembles
    bool exact = true;
};

struct EnsembleOptions {
    ExactOptions exact;
    std::optional<PsdMatrix> S;      // Gaussian side information SNR, integrated by quadrature
    std::size_t quadrature_nodes = 0; // per dimension; 0 -> 20 for k-1 = 1, 8 for k-1 = 2
    std::size_t max_enumerated_nodes = 5; // beyond this graphs are sampled
    std::size_t sampled_graphs = 2000;
    std::uint64_t seed = 11;
};

namespace detail {

struct EnsembleAccumulator {
    const SbmModel& model;
    std::size_t n;
    EnsembleSummary sum;
    Matrix white;
    std::vector<double> trace_samples; // for sampled ensembles

    EnsembleAccumulator(const SbmModel& m, std::size_t nodes)
        : model(m), n(nodes), white(m.dim(), m.dim()) {
        sum.n = nodes;
        sum.mmse_std = Matrix(m.k(), m.k());
    }

    void add(const ExactPosterior& post, double weight) {
        const std::size_t k = model.k();
        sum.total_weight += weight;
        ++sum.realizations;
        sum.mmse_std += weight * post.mmse_std;
        white += weight * post.mmse_white.matrix();
        double dev = 0.0;
        double chi = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t a = 0; a < k; ++a) {
                const double b = post.marginals(i, a);
                const double p = model.prob[a];
                dev += (b - p) * (b - p);
                chi += (b - p) * (b - p) / p;
            }
        sum.mean_sq_deviation += weight * dev / static_cast<double>(n);
        sum.mean_chi2 += weight * chi / static_cast<double>(n);
    }

    EnsembleSummary finish() {
        sum.mmse_white = SymMatrix(white);
        return sum;
    }
};

} // namespace detail

/// Averages posterior functionals over every graph on n nodes (weighted by
/// P(G)) and, with side information, over Y by Gauss-Hermite quadrature on a
/// common grid reweighted by the likelihood ratio p(Y) / phi(Y). For
/// n > max_enumerated_nodes (no side information) graphs are sampled instead.
inline EnsembleSummary enumerate_ensemble(const SbmModel& model, std::size_t n, const EnsembleOptions& opt = {}) {
    if (n < 1) throw Error("enumerate_ensemble: need at least one node");
    if (!model.valid) throw Error("enumerate_ensemble: model is not a valid SBM");
    const std::size_t k = model.k();
    const std::size_t dim = model.dim();
    const std::size_t pairs = n * (n - 1) / 2;
    detail::checked_assignments(n, k);
    detail::EnsembleAccumulator acc(model, n);

    if (n > opt.max_enumerated_nodes) {
        if (opt.S) throw Error("enumerate_ensemble: side information requires full graph enumeration");
        SbmModel small = model;
        small.n = n;
        const double w = 1.0 / static_cast<double>(opt.sampled_graphs);
        std::vector<double> traces;
        for (std::size_t s = 0; s < opt.sampled_graphs; ++s) {
            const LabeledGraph g = sample_graph_naive(small, derive_seed(opt.seed, {s}));
            const ExactPosterior post = exact_posterior(g, model, std::nullopt, opt.exact);
            acc.add(post, w);
            traces.push_back(trace(post.mmse_white.matrix()));
        }
        EnsembleSummary out = acc.finish();
        double mean = 0.0;
        for (double t : traces) mean += t;
        mean /= static_cast<double>(traces.size());
        double var = 0.0;
        for (double t : traces) var += (t - mean) * (t - mean);
        out.std_error = std::sqrt(var / static_cast<double>(traces.size() - 1) / static_cast<double>(traces.size()));
        out.exact = false;
        return out;
    }

    const std::size_t graphs = std::size_t{1} << pairs;
    std::vector<std::pair<std::uint32_t, std::uint32_t>> pair_list;
    for (std::uint32_t i = 0; i < n; ++i)
        for (std::uint32_t j = i + 1; j < n; ++j) pair_list.emplace_back(i, j);

    if (!opt.S) {
        for (std::size_t mask = 0; mask < graphs; ++mask) {
            LabeledGraph g{n, k, {}, {}, 0};
            for (std::size_t e = 0; e < pairs; ++e)
                if (mask >> e & 1U) g.edges.push_back(pair_list[e]);
            const ExactPosterior post = exact_posterior(g, model, std::nullopt, opt.exact);
            acc.add(post, std::exp(post.log_evidence));
        }
        return acc.finish();
    }

    const PsdMatrix& S = *opt.S;
    if (S.dim() != dim) throw Error("enumerate_ensemble: S has wrong dimension");
    std::size_t nodes = opt.quadrature_nodes;
    if (nodes == 0) nodes = dim == 1 ? 20 : 8;
    const GaussianRule rule = tensor_gauss_hermite(dim, nodes);
    const double combos = std::pow(static_cast<double>(rule.size()), static_cast<double>(n));
    if (combos * static_cast<double>(graphs) * std::pow(static_cast<double>(k), static_cast<double>(n)) > 5e8)
        throw Error("enumerate_ensemble: side-information quadrature too large for this instance");

    const double log_norm = -0.5 * static_cast<double>(dim) * std::log(2.0 * std::numbers::pi);
    std::vector<std::vector<double>> graph_joint;
    for (std::size_t mask = 0; mask < graphs; ++mask) {
        std::vector<char> adj(n * n, 0);
        for (std::size_t e = 0; e < pairs; ++e)
            if (mask >> e & 1U) {
                adj[pair_list[e].first * n + pair_list[e].second] = 1;
                adj[pair_list[e].second * n + pair_list[e].first] = 1;
            }
        graph_joint.push_back(detail::graph_log_joint(model, n, adj, opt.exact));
    }

    Matrix Y(n, dim);
    std::vector<std::size_t> idx(n, 0);
    const auto total_combos = static_cast<std::size_t>(combos);
    for (std::size_t c = 0; c < total_combos; ++c) {
        double w = 1.0;
        double log_phi = 0.0; // log of the reference N(0, I) density at Y
        for (std::size_t i = 0; i < n; ++i) {
            const double* z = rule.point(idx[i]);
            w *= rule.weights[idx[i]];
            for (std::size_t j = 0; j < dim; ++j) {
                Y(i, j) = z[j];
                log_phi += -0.5 * z[j] * z[j];
            }
            log_phi += log_norm;
        }
        const Matrix side = detail::side_log_likelihood(model, S, Y);
        for (std::size_t mask = 0; mask < graphs; ++mask) {
            std::vector<double> lj = graph_joint[mask];
            detail::add_side_terms(lj, n, k, side);
            const ExactPosterior post = detail::finish(std::move(lj), n, model);
            acc.add(post, w * std::exp(post.log_evidence - log_phi));
        }
        for (std::size_t i = 0; i < n; ++i) {
            if (++idx[i] < rule.size()) break;
            idx[i] = 0;
        }
    }
    return acc.finish();
}

/// |tr(MMSE(X) - MMSE(X | obs)) - (1/n) sum_i E ||P_{X_i|obs} - P_{X_i}||^2|, standard basis.
inline double prop1_check(const EnsembleSummary& e, const ProbVector& p) {
    double prior_trace = 0.0;
    for (std::size_t a = 0; a < p.k(); ++a) prior_trace += p[a] - p[a] * p[a];
    return std::abs(prior_trace - trace(e.mmse_std) - e.mean_sq_deviation);
}

/// |tr(I - MMSE(X | obs)) - (1/n) sum_i E chi^2(P_{X_i|obs} || P_{X_i})|, whitened basis.
inline double prop2_check(const EnsembleSummary& e) {
    return std::abs(static_cast<double>(e.mmse_white.dim()) - trace(e.mmse_white.matrix()) - e.mean_chi2);
}

struct DpiResult {
    SymMatrix mmse_graph;      // MMSE(X | G), whitened
    SymMatrix mmse_graph_side; // MMSE(X | G, Y), whitened
    double min_gap_eigenvalue = 0.0; // smallest eigenvalue of mmse_graph - mmse_graph_side
    bool holds = false;
};

/// MMSE(X | G, Y) <= MMSE(X | G) in the Loewner order, exact over the graph space.
inline DpiResult dpi_check(const SbmModel& model, std::size_t n, const PsdMatrix& S, const EnsembleOptions& base = {},
                           double tol = 1e-10) {
    EnsembleOptions without = base;
    without.S.reset();
    without.max_enumerated_nodes = std::max(without.max_enumerated_nodes, n);
    EnsembleOptions with = without;
    with.S = S;
    DpiResult r;
    r.mmse_graph = enumerate_ensemble(model, n, without).mmse_white;
    r.mmse_graph_side = enumerate_ensemble(model, n, with).mmse_white;
    r.min_gap_eigenvalue = min_eigenvalue(r.mmse_graph - r.mmse_graph_side);
    r.holds = loewner_leq(r.mmse_graph_side, r.mmse_graph, tol);
    return r;
}

struct UniversalityPoint {
    double d = 0.0;
    double mi_graph = 0.0;    // (1/n) I(W; G), exact
    double mi_gauss = 0.0;    // (1/n) I(W; Z), Monte Carlo
    double mi_gauss_se = 0.0;
    double gap = 0.0;         // |mi_graph - mi_gauss|
    double gap_se = 0.0;
};

struct UniversalityProbe {
    std::size_t n = 0;
    double t = 1.0;
    std::vector<UniversalityPoint> points;
};

/// Compares the per-node information that a Bernoulli graph and a Gaussian
/// Wigner observation (Z = W + xi, t = 1) carry about W = X R X^T / sqrt(n).
inline UniversalityProbe universality_gap(const ProbVector& p, const SymMatrix& R, std::size_t n,
                                          const std::vector<double>& d_grid, std::size_t mc_samples, std::uint64_t seed) {
    if (n < 2 || n > 8) throw Error("universality_gap: need 2 <= n <= 8");
    const std::size_t k = p.k();
    const std::size_t pairs = n * (n - 1) / 2;
    const std::size_t assignments = detail::checked_assignments(n, k);
    if (static_cast<double>(assignments) * std::pow(2.0, static_cast<double>(pairs)) > 2e8)
        throw Error("universality_gap: graph space too large to enumerate");
    const WhitenedSupport support = whiten(p);
    const double nd = static_cast<double>(n);

    // Interaction values w_ab = mu_a^T R mu_b / sqrt(n).
    Matrix w(k, k);
    for (std::size_t a = 0; a < k; ++a)
        for (std::size_t b = 0; b < k; ++b) w(a, b) = dot(R.matrix() * support.point(a), support.point(b)) / std::sqrt(nd);

    std::vector<std::vector<int>> xs(assignments, std::vector<int>(n));
    std::vector<double> log_prior(assignments, 0.0);
    for (std::size_t idx = 0; idx < assignments; ++idx) {
        detail::decode(idx, k, xs[idx]);
        for (int a : xs[idx]) log_prior[idx] += std::log(p[static_cast<std::size_t>(a)]);
    }

    UniversalityProbe probe;
    probe.n = n;
    for (double d : d_grid) {
        if (!(d > 0.0 && d < nd)) throw Error("universality_gap: need 0 < d < n");
        UniversalityPoint pt;
        pt.d = d;
        const double base = d / nd;
        const double scale = std::sqrt(base * (1.0 - base));
        Matrix logq(k, k);
        Matrix log1mq(k, k);
        for (std::size_t a = 0; a < k; ++a)
            for (std::size_t b = 0; b < k; ++b) {
                const double q = base + scale * w(a, b);
                if (q < 0.0 || q > 1.0) throw Error("universality_gap: Bernoulli parameter outside [0, 1]");
                logq(a, b) = std::log(q);
                log1mq(a, b) = std::log1p(-q);
            }

        // Exact I(X; G) = sum_x p(x) sum_G P(G|x) log(P(G|x) / P(G)).
        const std::size_t graphs = std::size_t{1} << pairs;
        std::vector<double> lg(assignments);
        double mi = 0.0;
        for (std::size_t mask = 0; mask < graphs; ++mask) {
            for (std::size_t idx = 0; idx < assignments; ++idx) {
                const auto& x = xs[idx];
                double s = 0.0;
                std::size_t e = 0;
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = i + 1; j < n; ++j, ++e) {
                        const auto a = static_cast<std::size_t>(x[i]);
                        const auto b = static_cast<std::size_t>(x[j]);
                        s += (mask >> e & 1U) ? logq(a, b) : log1mq(a, b);
                    }
                lg[idx] = s;
            }
            std::vector<double> joint(assignments);
            for (std::size_t idx = 0; idx < assignments; ++idx) joint[idx] = log_prior[idx] + lg[idx];
            const double log_pg = detail::log_sum_exp(joint);
            for (std::size_t idx = 0; idx < assignments; ++idx) {
                const double pj = std::exp(joint[idx]);
                if (pj > 0.0) mi += pj * (lg[idx] - log_pg);
            }
        }
        pt.mi_graph = mi / nd;

        // Monte Carlo I(X; Z) with the inner sum over the W support done exactly.
        Rng rng = make_rng(derive_seed(seed, {static_cast<std::uint64_t>(std::llround(d * 1e6))}));
        std::discrete_distribution<int> label(p.values().begin(), p.values().end());
        std::normal_distribution<double> normal(0.0, 1.0);
        Matrix Z(n, n);
        std::vector<double> ll(assignments);
        double sum = 0.0;
        double sum_sq = 0.0;
        for (std::size_t s = 0; s < mc_samples; ++s) {
            std::vector<int> x(n);
            for (auto& v : x) v = label(rng);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = i; j < n; ++j) {
                    const double noise = i == j ? std::sqrt(2.0) * normal(rng) : normal(rng);
                    Z(i, j) = w(static_cast<std::size_t>(x[i]), static_cast<std::size_t>(x[j])) + noise;
                }
            std::size_t truth = 0;
            for (std::size_t i = n; i-- > 0;) truth = truth * k + static_cast<std::size_t>(x[i]);
            for (std::size_t idx = 0; idx < assignments; ++idx) {
                const auto& xp = xs[idx];
                double l = 0.0;
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = i; j < n; ++j) {
                        const double r = Z(i, j) - w(static_cast<std::size_t>(xp[i]), static_cast<std::size_t>(xp[j]));
                        l -= i == j ? 0.25 * r * r : 0.5 * r * r;
                    }
                ll[idx] = l;
            }
            std::vector<double> joint(assignments);
            for (std::size_t idx = 0; idx < assignments; ++idx) joint[idx] = log_prior[idx] + ll[idx];
            const double v = ll[truth] - detail::log_sum_exp(joint);
            sum += v;
            sum_sq += v * v;
        }
        const double ms = static_cast<double>(mc_samples);
        const double mean = sum / ms;
        const double var = std::max(0.0, sum_sq / ms - mean * mean);
        pt.mi_gauss = mean / nd;
        pt.mi_gauss_se = std::sqrt(var / ms) / nd;
        pt.gap = std::abs(pt.mi_graph - pt.mi_gauss);
        pt.gap_se = pt.mi_gauss_se;
        probe.points.push_back(pt);
    }
    return probe;
}

} // namespace sbm
