#pragma once
// Sparse-SBM belief propagation with a mean-field external field for
// non-edges, random multi-start, and whitened-basis MSE evaluation.

#include <sbm/linalg.hpp>
#include <sbm/model.hpp>
#include <sbm/rng.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <vector>

namespace sbm {

struct BpConfig {
    int n_inits = 15;
    double damping = 0.2;
    int max_sweeps = 500;
    double msg_tol = 1e-6;
    std::uint64_t seed = 1;
    /// When false, non-edges are ignored and BP runs on the edge factors only
    /// (the graph's own factor graph; exact on trees).
    bool external_field = true;
};

/// Directed-edge view of a simple graph in CSR form.
struct Adjacency {
    std::vector<std::size_t> offset;   // n + 1
    std::vector<std::uint32_t> target; // per directed edge i -> target
    std::vector<std::size_t> reverse;  // index of target -> i

    std::size_t degree(std::size_t i) const { return offset[i + 1] - offset[i]; }
    std::size_t directed_edges() const { return target.size(); }

    static Adjacency build(std::size_t n, const std::vector<std::pair<std::uint32_t, std::uint32_t>>& edges) {
        Adjacency adj;
        adj.offset.assign(n + 1, 0);
        for (const auto& [u, v] : edges) {
            if (u >= n || v >= n || u == v) throw Error("Adjacency: invalid edge");
            ++adj.offset[u + 1];
            ++adj.offset[v + 1];
        }
        for (std::size_t i = 0; i < n; ++i) adj.offset[i + 1] += adj.offset[i];
        adj.target.resize(adj.offset[n]);
        adj.reverse.resize(adj.offset[n]);
        std::vector<std::size_t> fill(adj.offset.begin(), adj.offset.end() - 1);
        for (const auto& [u, v] : edges) {
            const std::size_t eu = fill[u]++;
            const std::size_t ev = fill[v]++;
            adj.target[eu] = v;
            adj.target[ev] = u;
            adj.reverse[eu] = ev;
            adj.reverse[ev] = eu;
        }
        return adj;
    }
};

struct BpState {
    std::size_t k = 0;
    std::vector<double> messages; // directed edge e -> k entries, message source(e) -> target(e)
    Vector external_field;        // h_a
    Matrix marginals;             // n x k
};

struct BpResult {
    int chosen_init = 0;
    double predicted_mse = 0.0;
    double empirical_mse_trace = 0.0;
    SymMatrix empirical_mse_matrix;
    bool converged = false;
    int sweeps_used = 0;
    std::vector<double> predicted_per_init;
    std::vector<int> sweeps_per_init;
    std::vector<bool> converged_per_init;
    Matrix marginals; // chosen init
};

/// (1/n) sum_i [sum_a b_ia |mu_a|^2 - |sum_a b_ia mu_a|^2].
inline double predicted_mse(const Matrix& marginals, const WhitenedSupport& support) {
    const std::size_t n = marginals.rows();
    const std::size_t k = support.k();
    const std::size_t dim = support.dim();
    Vector sq(k);
    for (std::size_t a = 0; a < k; ++a) sq[a] = dot(support.point(a), support.point(a));
    double total = 0.0;
    Vector m(dim);
    for (std::size_t i = 0; i < n; ++i) {
        std::fill(m.begin(), m.end(), 0.0);
        double second = 0.0;
        for (std::size_t a = 0; a < k; ++a) {
            const double b = marginals(i, a);
            second += b * sq[a];
            for (std::size_t j = 0; j < dim; ++j) m[j] += b * support.point(a)[j];
        }
        total += second - dot(m, m);
    }
    return total / static_cast<double>(n);
}

inline double predicted_mse(const BpState& state, const WhitenedSupport& support) {
    return predicted_mse(state.marginals, support);
}

using Permutation = std::vector<int>;

/// Label permutations preserving p and Q (the model's symmetry group).
inline std::vector<Permutation> admissible_permutations(const SbmModel& model, double tol = 1e-12) {
    const std::size_t k = model.k();
    Permutation pi(k);
    std::iota(pi.begin(), pi.end(), 0);
    const double qscale = std::max(1e-300, max_abs_entry(model.Q));
    std::vector<Permutation> out;
    do {
        bool ok = true;
        for (std::size_t a = 0; a < k && ok; ++a) {
            const auto pa = static_cast<std::size_t>(pi[a]);
            if (std::abs(model.prob[pa] - model.prob[a]) > tol) ok = false;
            for (std::size_t b = 0; b < k && ok; ++b)
                if (std::abs(model.Q(pa, static_cast<std::size_t>(pi[b])) - model.Q(a, b)) > tol * qscale) ok = false;
        }
        if (ok) out.push_back(pi);
    } while (std::next_permutation(pi.begin(), pi.end()));
    return out;
}

struct EmpiricalMse {
    double trace = 0.0;
    SymMatrix matrix;
    Permutation permutation;
};

/// (1/n) sum_i e_i e_i^T with e_i = mu_{x_i} - sum_a b_{i, pi(a)} mu_a, minimized in
/// trace over the given permutations (identity only when none are given).
inline EmpiricalMse empirical_mse(const Matrix& marginals, const std::vector<int>& labels,
                                  const WhitenedSupport& support, const std::vector<Permutation>& perms = {}) {
    const std::size_t n = marginals.rows();
    const std::size_t k = support.k();
    const std::size_t dim = support.dim();
    if (labels.size() != n || marginals.cols() != k) throw Error("empirical_mse: dimension mismatch");
    std::vector<Permutation> candidates = perms;
    if (candidates.empty()) {
        Permutation id(k);
        std::iota(id.begin(), id.end(), 0);
        candidates.push_back(id);
    }
    EmpiricalMse best;
    best.trace = std::numeric_limits<double>::infinity();
    Vector e(dim);
    for (const Permutation& pi : candidates) {
        Matrix acc(dim, dim);
        for (std::size_t i = 0; i < n; ++i) {
            e = support.point(static_cast<std::size_t>(labels[i]));
            for (std::size_t a = 0; a < k; ++a) {
                const double b = marginals(i, static_cast<std::size_t>(pi[a]));
                for (std::size_t j = 0; j < dim; ++j) e[j] -= b * support.point(a)[j];
            }
            for (std::size_t r = 0; r < dim; ++r)
                for (std::size_t c = r; c < dim; ++c) acc(r, c) += e[r] * e[c];
        }
        for (std::size_t r = 0; r < dim; ++r)
            for (std::size_t c = 0; c < r; ++c) acc(r, c) = acc(c, r);
        acc *= 1.0 / static_cast<double>(n);
        const double tr = trace(acc);
        if (tr < best.trace) {
            best.trace = tr;
            best.matrix = SymMatrix(acc);
            best.permutation = pi;
        }
    }
    return best;
}

namespace detail {

struct BpProblem {
    std::size_t n = 0;
    std::size_t k = 0;
    Adjacency adj;
    Matrix affinity;        // c_ab = n Q_ab
    Matrix Q;
    Matrix node_log_prior;  // n x k: log p_a (+ side-information log-likelihood)
    bool external_field = true;
};

inline void normalize(double* v, std::size_t k) {
    double s = 0.0;
    for (std::size_t a = 0; a < k; ++a) s += v[a];
    for (std::size_t a = 0; a < k; ++a) v[a] /= s;
}

struct InitOutcome {
    Matrix marginals;
    int sweeps = 0;
    bool converged = false;
};

/// One BP run from a random Dirichlet(1) message initialization.
inline InitOutcome run_single(const BpProblem& pb, const BpConfig& cfg, std::uint64_t seed, BpState* state_out = nullptr) {
    const std::size_t n = pb.n;
    const std::size_t k = pb.k;
    Rng rng = make_rng(seed);
    std::exponential_distribution<double> expo(1.0);

    BpState st;
    st.k = k;
    st.messages.resize(pb.adj.directed_edges() * k);
    for (std::size_t e = 0; e < pb.adj.directed_edges(); ++e) {
        double* m = &st.messages[e * k];
        for (std::size_t a = 0; a < k; ++a) m[a] = expo(rng);
        normalize(m, k);
    }
    st.marginals = Matrix(n, k);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t a = 0; a < k; ++a) st.marginals(i, a) = std::exp(pb.node_log_prior(i, a));
    for (std::size_t i = 0; i < n; ++i) normalize(&st.marginals(i, 0), k);
    st.external_field.assign(k, 0.0);

    std::vector<std::uint32_t> order(n);
    std::iota(order.begin(), order.end(), 0u);

    std::vector<double> logL; // per incoming edge of the current node, k entries
    std::vector<double> L;
    Vector total(k);
    Vector w(k);
    Vector colsum(k, 0.0);
    Vector old_marginal(k);

    auto refresh_field = [&] {
        for (std::size_t a = 0; a < k; ++a) {
            double h = 0.0;
            for (std::size_t b = 0; b < k; ++b) h += pb.Q(a, b) * colsum[b];
            st.external_field[a] = h;
        }
    };

    InitOutcome out;
    for (int sweep = 0; sweep < cfg.max_sweeps; ++sweep) {
        if (pb.external_field) {
            // Resynchronize the running column sums once per sweep to shed drift.
            std::fill(colsum.begin(), colsum.end(), 0.0);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t b = 0; b < k; ++b) colsum[b] += st.marginals(i, b);
            refresh_field();
        }
        std::shuffle(order.begin(), order.end(), rng);

        double max_change = 0.0;
        for (std::uint32_t i : order) {
            const std::size_t begin = pb.adj.offset[i];
            const std::size_t deg = pb.adj.degree(i);
            logL.resize(deg * k);
            L.resize(deg * k);
            for (std::size_t a = 0; a < k; ++a) total[a] = pb.node_log_prior(i, a) - st.external_field[a];
            for (std::size_t t = 0; t < deg; ++t) {
                const double* in = &st.messages[pb.adj.reverse[begin + t] * k];
                for (std::size_t a = 0; a < k; ++a) {
                    double s = 0.0;
                    for (std::size_t b = 0; b < k; ++b) s += pb.affinity(a, b) * in[b];
                    L[t * k + a] = s;
                    logL[t * k + a] = std::log(s);
                    total[a] += logL[t * k + a];
                }
            }
            double mx = -std::numeric_limits<double>::infinity();
            for (std::size_t a = 0; a < k; ++a) mx = std::max(mx, total[a]);
            for (std::size_t a = 0; a < k; ++a) w[a] = std::exp(total[a] - mx);

            for (std::size_t a = 0; a < k; ++a) old_marginal[a] = st.marginals(i, a);
            for (std::size_t a = 0; a < k; ++a) st.marginals(i, a) = w[a];
            normalize(&st.marginals(i, 0), k);
            if (pb.external_field) {
                for (std::size_t a = 0; a < k; ++a) colsum[a] += st.marginals(i, a) - old_marginal[a];
                refresh_field();
            }

            for (std::size_t t = 0; t < deg; ++t) {
                double* msg = &st.messages[(begin + t) * k];
                double fresh[kMaxSymDim + 1];
                bool finite = true;
                for (std::size_t a = 0; a < k; ++a) {
                    fresh[a] = L[t * k + a] > 0.0 ? w[a] / L[t * k + a] : std::exp(total[a] - mx - logL[t * k + a]);
                    if (!std::isfinite(fresh[a])) finite = false;
                }
                if (!finite) {
                    // A zero affinity annihilated this label; recompute the cavity sum explicitly.
                    for (std::size_t a = 0; a < k; ++a) {
                        double s = pb.node_log_prior(i, a) - st.external_field[a];
                        for (std::size_t u = 0; u < deg; ++u)
                            if (u != t) s += logL[u * k + a];
                        fresh[a] = s;
                    }
                    double m2 = -std::numeric_limits<double>::infinity();
                    for (std::size_t a = 0; a < k; ++a) m2 = std::max(m2, fresh[a]);
                    for (std::size_t a = 0; a < k; ++a) fresh[a] = std::exp(fresh[a] - m2);
                }
                normalize(fresh, k);
                for (std::size_t a = 0; a < k; ++a) {
                    const double updated = (1.0 - cfg.damping) * fresh[a] + cfg.damping * msg[a];
                    max_change = std::max(max_change, std::abs(updated - msg[a]));
                    msg[a] = updated;
                }
                normalize(msg, k);
            }
        }
        out.sweeps = sweep + 1;
        if (max_change < cfg.msg_tol) {
            out.converged = true;
            break;
        }
    }

    // Final marginals from the final messages.
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t begin = pb.adj.offset[i];
        for (std::size_t a = 0; a < k; ++a) total[a] = pb.node_log_prior(i, a) - st.external_field[a];
        for (std::size_t t = 0; t < pb.adj.degree(i); ++t) {
            const double* in = &st.messages[pb.adj.reverse[begin + t] * k];
            for (std::size_t a = 0; a < k; ++a) {
                double s = 0.0;
                for (std::size_t b = 0; b < k; ++b) s += pb.affinity(a, b) * in[b];
                total[a] += std::log(s);
            }
        }
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t a = 0; a < k; ++a) mx = std::max(mx, total[a]);
        for (std::size_t a = 0; a < k; ++a) st.marginals(i, a) = std::exp(total[a] - mx);
        normalize(&st.marginals(i, 0), k);
    }
    out.marginals = st.marginals;
    if (state_out) *state_out = std::move(st);
    return out;
}

inline BpProblem make_problem(const LabeledGraph& graph, const SbmModel& model, const BpConfig& cfg,
                              const std::optional<SideInfo>& side_info) {
    if (graph.n != model.n || graph.k != model.k()) throw Error("bp_run: graph does not match model (n, k)");
    BpProblem pb;
    pb.n = model.n;
    pb.k = model.k();
    pb.adj = Adjacency::build(graph.n, graph.edges);
    pb.Q = model.Q;
    pb.affinity = static_cast<double>(model.n) * model.Q;
    pb.external_field = cfg.external_field;
    pb.node_log_prior = Matrix(pb.n, pb.k);
    for (std::size_t i = 0; i < pb.n; ++i)
        for (std::size_t a = 0; a < pb.k; ++a) pb.node_log_prior(i, a) = std::log(model.prob[a]);
    if (side_info) {
        if (side_info->Y.rows() != pb.n || side_info->Y.cols() != model.dim() || side_info->S.dim() != model.dim())
            throw Error("bp_run: side information does not match model");
        const PsdMatrix root = psd_sqrt(side_info->S);
        for (std::size_t a = 0; a < pb.k; ++a) {
            const Vector s = root.matrix() * model.support.point(a);
            const double energy = 0.5 * dot(s, s);
            for (std::size_t i = 0; i < pb.n; ++i) {
                double proj = 0.0;
                for (std::size_t j = 0; j < model.dim(); ++j) proj += side_info->Y(i, j) * s[j];
                pb.node_log_prior(i, a) += proj - energy;
            }
        }
    }
    return pb;
}

} // namespace detail

/// Runs config.n_inits random initializations, keeps the one with the lowest
/// predicted MSE and scores it against the ground-truth labels.
inline BpResult bp_run(const LabeledGraph& graph, const SbmModel& model, const BpConfig& config,
                       const std::optional<SideInfo>& side_info = std::nullopt) {
    if (config.n_inits < 1) throw Error("bp_run: n_inits must be at least 1");
    if (!(config.damping >= 0.0 && config.damping < 1.0)) throw Error("bp_run: damping must lie in [0, 1)");
    const detail::BpProblem pb = detail::make_problem(graph, model, config, side_info);

    BpResult res;
    res.predicted_mse = std::numeric_limits<double>::infinity();
    for (int init = 0; init < config.n_inits; ++init) {
        detail::InitOutcome o = detail::run_single(pb, config, derive_seed(config.seed, {static_cast<std::uint64_t>(init)}));
        const double pred = predicted_mse(o.marginals, model.support);
        res.predicted_per_init.push_back(pred);
        res.sweeps_per_init.push_back(o.sweeps);
        res.converged_per_init.push_back(o.converged);
        if (pred < res.predicted_mse) {
            res.predicted_mse = pred;
            res.chosen_init = init;
            res.converged = o.converged;
            res.sweeps_used = o.sweeps;
            res.marginals = std::move(o.marginals);
        }
    }
    const EmpiricalMse emp = empirical_mse(res.marginals, graph.labels, model.support, admissible_permutations(model));
    res.empirical_mse_trace = emp.trace;
    res.empirical_mse_matrix = emp.matrix;
    return res;
}

} // namespace sbm
