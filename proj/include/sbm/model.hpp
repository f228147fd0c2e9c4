#pragma once
// Degree-balanced stochastic block model: whitened label geometry, the
// (n, d, p, R) parameterization, and samplers for graphs and side information.

#include <sbm/linalg.hpp>
#include <sbm/rng.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <unordered_set>
#include <utility>
#include <vector>

namespace sbm {

/// Strictly positive probability vector over k >= 2 communities.
class ProbVector {
public:
    ProbVector() = default;
    explicit ProbVector(Vector p) : p_(std::move(p)) {
        if (p_.size() < 2) throw Error("ProbVector: need at least two communities");
        if (p_.size() > kMaxSymDim + 1) throw Error("ProbVector: at most 9 communities supported");
        double sum = 0.0;
        for (double v : p_) {
            if (!(v > 0.0)) throw Error("ProbVector: entries must be strictly positive");
            sum += v;
        }
        if (std::abs(sum - 1.0) > 1e-12) throw Error("ProbVector: entries must sum to one");
    }

    /// Normalizes positive weights to sum exactly (to roundoff) to one.
    static ProbVector normalized(Vector w) {
        double sum = 0.0;
        for (double v : w) sum += v;
        for (double& v : w) v /= sum;
        return ProbVector(std::move(w));
    }

    std::size_t k() const { return p_.size(); }
    double operator[](std::size_t a) const { return p_[a]; }
    const Vector& values() const { return p_; }

private:
    Vector p_;
};

/// Whitened label support: k points in R^{k-1} with zero mean and identity
/// covariance under p.
struct WhitenedSupport {
    ProbVector prob;
    Matrix basis;              // B, k x (k-1)
    std::vector<Vector> points; // mu_a = B^T P^{-1/2} e_a
    Vector p_half_inv;          // diag(P^{-1/2})

    std::size_t k() const { return prob.k(); }
    std::size_t dim() const { return prob.k() - 1; }
    const Vector& point(std::size_t a) const { return points[a]; }

    /// Map from the standard basis (R^k) to the whitened basis: B^T P^{-1/2}.
    Matrix standard_to_white() const {
        Matrix t(dim(), k());
        for (std::size_t i = 0; i < dim(); ++i)
            for (std::size_t a = 0; a < k(); ++a) t(i, a) = basis(a, i) * p_half_inv[a];
        return t;
    }

    /// e_a = p + P^{1/2} B mu.
    Vector to_standard(const Vector& mu) const {
        Vector e(k());
        for (std::size_t a = 0; a < k(); ++a) {
            double s = 0.0;
            for (std::size_t i = 0; i < dim(); ++i) s += basis(a, i) * mu[i];
            e[a] = prob[a] + std::sqrt(prob[a]) * s;
        }
        return e;
    }
};

/// Gram-Schmidt on {sqrt(p), e_1, ..., e_{k-1}}. Each new basis vector has a
/// positive component along the e_j it was built from (equivalently, its first
/// nonzero entry is positive).
inline WhitenedSupport whiten(const ProbVector& p) {
    const std::size_t k = p.k();
    std::vector<Vector> ortho;
    Vector root(k);
    for (std::size_t a = 0; a < k; ++a) root[a] = std::sqrt(p[a]);
    const double rn = std::sqrt(dot(root, root));
    for (double& v : root) v /= rn;
    ortho.push_back(root);

    for (std::size_t j = 0; j + 1 < k; ++j) {
        Vector u(k, 0.0);
        u[j] = 1.0;
        // Two passes of classical Gram-Schmidt keep the result orthogonal to
        // roundoff even for very skewed p.
        for (int pass = 0; pass < 2; ++pass)
            for (const Vector& b : ortho) {
                const double c = dot(u, b);
                for (std::size_t a = 0; a < k; ++a) u[a] -= c * b[a];
            }
        for (std::size_t a = 0; a < j; ++a) u[a] = 0.0;
        const double norm = std::sqrt(dot(u, u));
        if (norm < 1e-14) throw Error("whiten: degenerate probability vector");
        for (double& v : u) v /= norm;
        ortho.push_back(u);
    }

    WhitenedSupport w{p, Matrix(k, k - 1), {}, Vector(k)};
    for (std::size_t a = 0; a < k; ++a) {
        w.p_half_inv[a] = 1.0 / std::sqrt(p[a]);
        for (std::size_t j = 0; j + 1 < k; ++j) w.basis(a, j) = ortho[j + 1][a];
    }
    for (std::size_t a = 0; a < k; ++a) {
        Vector mu(k - 1);
        for (std::size_t j = 0; j + 1 < k; ++j) mu[j] = w.basis(a, j) * w.p_half_inv[a];
        w.points.push_back(std::move(mu));
    }
    return w;
}

struct SbmModel {
    std::size_t n = 0;
    double d = 0.0;
    ProbVector prob;
    SymMatrix R;
    WhitenedSupport support;
    Matrix Q; // k x k edge probabilities
    bool valid = false;

    std::size_t k() const { return prob.k(); }
    std::size_t dim() const { return prob.k() - 1; }

    /// Max |(Q p)_a - d/n| over communities.
    double degree_balance_error() const {
        double worst = 0.0;
        for (std::size_t a = 0; a < k(); ++a) {
            double s = 0.0;
            for (std::size_t b = 0; b < k(); ++b) s += Q(a, b) * prob[b];
            worst = std::max(worst, std::abs(s - d / static_cast<double>(n)));
        }
        return worst;
    }
};

/// Q_ab = d/n + sqrt(d (1 - d/n)) / n * mu_a^T R mu_b.
inline SbmModel build_model(std::size_t n, double d, const ProbVector& p, const SymMatrix& R) {
    const double nd = static_cast<double>(n);
    if (!(d > 0.0) || !(d < nd)) throw Error("build_model: average degree must satisfy 0 < d < n");
    if (R.dim() != p.k() - 1) throw Error("build_model: R must have dimension k - 1");
    for (double l : eig(R).eigenvalues)
        if (std::abs(l) <= 1e-12) throw Error("build_model: R must be invertible");

    SbmModel m{n, d, p, R, whiten(p), Matrix(p.k(), p.k()), true};
    const double base = d / nd;
    const double scale = std::sqrt(d * (1.0 - d / nd)) / nd;
    for (std::size_t a = 0; a < p.k(); ++a) {
        const Vector ra = R.matrix() * m.support.point(a);
        for (std::size_t b = a; b < p.k(); ++b) {
            const double q = base + scale * dot(ra, m.support.point(b));
            m.Q(a, b) = q;
            m.Q(b, a) = q;
            if (q < 0.0 || q > 1.0) m.valid = false;
        }
    }
    return m;
}

/// Simple undirected graph with ground-truth labels. Labels are 0-based in
/// memory and 1-based in the text file format.
struct LabeledGraph {
    std::size_t n = 0;
    std::size_t k = 0;
    std::vector<std::pair<std::uint32_t, std::uint32_t>> edges; // i < j, sorted
    std::vector<int> labels;
    std::uint64_t seed = 0;
};

struct SideInfo {
    PsdMatrix S;
    Matrix Y; // n x (k-1)
    std::uint64_t seed = 0;
};

namespace detail {

inline std::vector<int> sample_labels(const ProbVector& p, std::size_t n, Rng& rng) {
    std::discrete_distribution<int> dist(p.values().begin(), p.values().end());
    std::vector<int> labels(n);
    for (auto& l : labels) l = dist(rng);
    return labels;
}

/// Floyd's algorithm: m distinct integers from [0, total).
inline std::vector<std::uint64_t> sample_distinct(std::uint64_t total, std::uint64_t m, Rng& rng) {
    std::unordered_set<std::uint64_t> chosen;
    chosen.reserve(static_cast<std::size_t>(m * 2));
    for (std::uint64_t j = total - m; j < total; ++j) {
        std::uniform_int_distribution<std::uint64_t> u(0, j);
        const std::uint64_t t = u(rng);
        if (!chosen.insert(t).second) chosen.insert(j);
    }
    std::vector<std::uint64_t> out(chosen.begin(), chosen.end());
    std::sort(out.begin(), out.end());
    return out;
}

inline void require_valid(const SbmModel& model) {
    if (!model.valid) throw Error("sample_graph: model does not define a valid SBM (Q outside [0,1])");
}

} // namespace detail

/// Block-pair sampler: per (a, b) draws the edge count from a binomial and
/// then that many distinct node pairs. Expected cost O(n + m).
inline LabeledGraph sample_graph(const SbmModel& model, std::uint64_t seed) {
    detail::require_valid(model);
    Rng rng = make_rng(seed);
    LabeledGraph g{model.n, model.k(), {}, detail::sample_labels(model.prob, model.n, rng), seed};

    std::vector<std::vector<std::uint32_t>> members(model.k());
    for (std::size_t i = 0; i < model.n; ++i)
        members[static_cast<std::size_t>(g.labels[i])].push_back(static_cast<std::uint32_t>(i));

    for (std::size_t a = 0; a < model.k(); ++a)
        for (std::size_t b = a; b < model.k(); ++b) {
            const auto& ma = members[a];
            const auto& mb = members[b];
            const std::uint64_t na = ma.size();
            const std::uint64_t nb = mb.size();
            const std::uint64_t pairs = a == b ? na * (na - (na > 0 ? 1 : 0)) / 2 : na * nb;
            if (pairs == 0) continue;
            const double q = model.Q(a, b);
            std::uint64_t m = 0;
            if (q >= 1.0) {
                m = pairs;
            } else if (q > 0.0) {
                std::binomial_distribution<std::uint64_t> bin(pairs, q);
                m = bin(rng);
            }
            if (m == 0) continue;
            for (std::uint64_t t : detail::sample_distinct(pairs, m, rng)) {
                std::uint32_t u = 0;
                std::uint32_t v = 0;
                if (a == b) {
                    // t indexes the strict upper triangle row by row: (r, c), r < c.
                    std::uint64_t r = static_cast<std::uint64_t>(
                        (std::sqrt(8.0 * static_cast<double>(t) + 1.0) - 1.0) / 2.0);
                    while ((r + 1) * (r + 2) / 2 <= t) ++r;
                    while (r * (r + 1) / 2 > t) --r;
                    const std::uint64_t c = t - r * (r + 1) / 2;
                    // Pair (c, r + 1) with c <= r.
                    u = ma[c];
                    v = ma[r + 1];
                } else {
                    u = ma[t / nb];
                    v = mb[t % nb];
                }
                if (u > v) std::swap(u, v);
                g.edges.emplace_back(u, v);
            }
        }
    std::sort(g.edges.begin(), g.edges.end());
    return g;
}

/// O(n^2) Bernoulli-per-pair sampler; only for small n, used as a reference.
inline LabeledGraph sample_graph_naive(const SbmModel& model, std::uint64_t seed) {
    detail::require_valid(model);
    if (model.n > 2000) throw Error("sample_graph_naive: limited to n <= 2000");
    Rng rng = make_rng(seed);
    LabeledGraph g{model.n, model.k(), {}, detail::sample_labels(model.prob, model.n, rng), seed};
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (std::size_t i = 0; i < model.n; ++i)
        for (std::size_t j = i + 1; j < model.n; ++j) {
            const double q = model.Q(static_cast<std::size_t>(g.labels[i]), static_cast<std::size_t>(g.labels[j]));
            if (unif(rng) < q) g.edges.emplace_back(static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j));
        }
    return g;
}

/// Y_i = S^{1/2} mu_{x_i} + N_i with N_i standard Gaussian.
inline SideInfo sample_side_info(const SbmModel& model, const std::vector<int>& labels, const PsdMatrix& S,
                                 std::uint64_t seed) {
    if (S.dim() != model.dim()) throw Error("sample_side_info: S must have dimension k - 1");
    if (labels.size() != model.n) throw Error("sample_side_info: label count does not match n");
    const PsdMatrix root = psd_sqrt(S);
    std::vector<Vector> signal(model.k());
    for (std::size_t a = 0; a < model.k(); ++a) signal[a] = root.matrix() * model.support.point(a);

    Rng rng = make_rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    SideInfo out{S, Matrix(model.n, model.dim()), seed};
    for (std::size_t i = 0; i < model.n; ++i) {
        const auto& s = signal[static_cast<std::size_t>(labels[i])];
        for (std::size_t j = 0; j < model.dim(); ++j) out.Y(i, j) = s[j] + normal(rng);
    }
    return out;
}

} // namespace sbm
