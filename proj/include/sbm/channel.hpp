#pragma once
// Single-letter Gaussian channel Y = S^{1/2} X + N with X drawn from the
// whitened support: mutual information I_X(S) and MMSE matrix M_X(S).

#include <sbm/linalg.hpp>
#include <sbm/model.hpp>
#include <sbm/quadrature.hpp>
#include <sbm/rng.hpp>

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>

namespace sbm {

enum class ChannelMethod { quadrature, monte_carlo };

inline std::string to_string(ChannelMethod m) {
    return m == ChannelMethod::quadrature ? "quadrature" : "mc";
}

struct ChannelConfig {
    ChannelMethod method = ChannelMethod::quadrature;
    std::size_t nodes_per_dim = 0; // 0: 40 for dim <= 2, 24 for dim 3
    std::size_t mc_samples = 20000;
    std::uint64_t seed = 1;
};

struct ChannelOutput {
    double value = 0.0;         // I_X(S) for mutual_information, tr(M) for mmse_matrix
    SymMatrix matrix;           // M_X(S) (mmse_matrix only)
    double std_error = 0.0;     // MC standard error, or quadrature truncation estimate
};

inline std::size_t default_quadrature_nodes(std::size_t dim) {
    if (dim <= 2) return 40;
    if (dim == 3) return 24;
    return 0;
}

/// Immutable evaluator. All label expectations are summed exactly over the
/// support; the noise expectation uses either a tensor Gauss-Hermite rule or a
/// fixed bank of Gaussian samples reused for every S (common random numbers).
class ChannelEvaluator {
public:
    ChannelEvaluator(WhitenedSupport support, ChannelConfig config = {})
        : support_(std::move(support)), config_(config) {
        const std::size_t dim = support_.dim();
        if (config_.method == ChannelMethod::quadrature) {
            if (dim > 3) throw Error("ChannelEvaluator: quadrature requires k - 1 <= 3; use mc");
            if (config_.nodes_per_dim == 0) config_.nodes_per_dim = default_quadrature_nodes(dim);
            if (config_.nodes_per_dim < 20) throw Error("ChannelEvaluator: need at least 20 quadrature nodes per dimension");
            rule_ = tensor_gauss_hermite(dim, config_.nodes_per_dim);
            const std::size_t coarse = std::max<std::size_t>(config_.nodes_per_dim / 2, config_.nodes_per_dim - 10);
            coarse_rule_ = tensor_gauss_hermite(dim, coarse);
        } else {
            if (config_.mc_samples < 10000) throw Error("ChannelEvaluator: need at least 1e4 Monte Carlo samples");
            Rng rng = make_rng(config_.seed);
            std::normal_distribution<double> normal(0.0, 1.0);
            rule_.dim = dim;
            rule_.points.resize(config_.mc_samples * dim);
            for (double& v : rule_.points) v = normal(rng);
            rule_.weights.assign(config_.mc_samples, 1.0 / static_cast<double>(config_.mc_samples));
        }
    }

    const WhitenedSupport& support() const { return support_; }
    const ChannelConfig& config() const { return config_; }
    std::size_t dim() const { return support_.dim(); }

    /// E[X | Y = y] via log-sum-exp stabilized posterior weights.
    Vector posterior_mean(const PsdMatrix& S, const Vector& y) const {
        check_dim(S);
        if (y.size() != dim()) throw Error("posterior_mean: observation has wrong dimension");
        const Signals sig = signals(S);
        Vector logw(support_.k());
        for (std::size_t b = 0; b < support_.k(); ++b)
            logw[b] = std::log(support_.prob[b]) + dot(y, sig.s[b]) - sig.energy[b];
        return mean_from_logweights(logw);
    }

    ChannelOutput mutual_information(const PsdMatrix& S) const {
        check_dim(S);
        ChannelOutput out;
        out.matrix = SymMatrix::zero(dim());
        const Moments fine = moments(S, rule_, true, config_.method == ChannelMethod::monte_carlo);
        out.value = fine.mi;
        if (config_.method == ChannelMethod::quadrature) {
            out.std_error = std::abs(fine.mi - moments(S, coarse_rule_, true, false).mi);
        } else {
            out.std_error = fine.mi_se;
        }
        return out;
    }

    ChannelOutput mmse_matrix(const PsdMatrix& S) const {
        check_dim(S);
        const Moments fine = moments(S, rule_, false, config_.method == ChannelMethod::monte_carlo);
        ChannelOutput out;
        out.matrix = to_mmse(fine.mmt);
        out.value = trace(out.matrix);
        if (config_.method == ChannelMethod::quadrature) {
            const SymMatrix coarse = to_mmse(moments(S, coarse_rule_, false, false).mmt);
            out.std_error = max_abs_entry(out.matrix - coarse);
        } else {
            out.std_error = fine.mmt_se;
        }
        return out;
    }

    /// I_X(S) without an error estimate.
    double mi(const PsdMatrix& S) const {
        check_dim(S);
        return moments(S, rule_, true, false).mi;
    }

    /// M_X(S) without an error estimate.
    SymMatrix mmse(const PsdMatrix& S) const {
        check_dim(S);
        return to_mmse(moments(S, rule_, false, false).mmt);
    }

private:
    struct Signals {
        std::vector<Vector> s; // S^{1/2} mu_b
        Vector energy;         // mu_b^T S mu_b / 2
    };

    struct Moments {
        double mi = 0.0;
        double mi_se = 0.0;
        Matrix mmt;           // E[m m^T]
        double mmt_se = 0.0;  // max entrywise standard error
    };

    void check_dim(const PsdMatrix& S) const {
        if (S.dim() != dim()) throw Error("channel: S has wrong dimension");
    }

    Signals signals(const PsdMatrix& S) const {
        const PsdMatrix root = psd_sqrt(S);
        Signals sig{{}, Vector(support_.k())};
        for (std::size_t b = 0; b < support_.k(); ++b) {
            sig.s.push_back(root.matrix() * support_.point(b));
            sig.energy[b] = 0.5 * dot(sig.s[b], sig.s[b]);
        }
        return sig;
    }

    Vector mean_from_logweights(Vector& logw) const {
        double mx = -std::numeric_limits<double>::infinity();
        for (double v : logw) mx = std::max(mx, v);
        double z = 0.0;
        for (double& v : logw) {
            v = std::exp(v - mx);
            z += v;
        }
        Vector m(dim(), 0.0);
        for (std::size_t b = 0; b < support_.k(); ++b) {
            const double w = logw[b] / z;
            for (std::size_t i = 0; i < dim(); ++i) m[i] += w * support_.point(b)[i];
        }
        return m;
    }

    SymMatrix to_mmse(const Matrix& mmt) const {
        Matrix m = Matrix::identity(dim()) - mmt;
        for (std::size_t i = 0; i < dim(); ++i)
            for (std::size_t j = i + 1; j < dim(); ++j) {
                const double v = 0.5 * (m(i, j) + m(j, i));
                m(i, j) = v;
                m(j, i) = v;
            }
        return PsdMatrix::project(SymMatrix(m)).sym();
    }

    Moments moments(const PsdMatrix& S, const GaussianRule& rule, bool want_mi, bool want_se) const {
        const std::size_t k = support_.k();
        const std::size_t dim = this->dim();
        const Signals sig = signals(S);
        Vector logp(k);
        for (std::size_t b = 0; b < k; ++b) logp[b] = std::log(support_.prob[b]);

        // Precompute <s_a, s_b> - e_b so that y^T s_b - e_b = z^T s_b + cross(a, b).
        Matrix cross(k, k);
        for (std::size_t a = 0; a < k; ++a)
            for (std::size_t b = 0; b < k; ++b) cross(a, b) = dot(sig.s[a], sig.s[b]) - sig.energy[b];

        Moments mo;
        mo.mmt = Matrix(dim, dim);
        Matrix mmt_sq(dim, dim);
        double mi_sq = 0.0;
        Vector zs(k);
        Vector lw(k);
        Vector m(dim);
        Matrix sample(dim, dim);

        for (std::size_t c = 0; c < rule.size(); ++c) {
            const double* z = rule.point(c);
            const double wc = rule.weights[c];
            for (std::size_t b = 0; b < k; ++b) {
                double s = 0.0;
                for (std::size_t i = 0; i < dim; ++i) s += z[i] * sig.s[b][i];
                zs[b] = s;
            }
            double mi_sample = 0.0;
            if (want_se) sample = Matrix(dim, dim);
            for (std::size_t a = 0; a < k; ++a) {
                double mx = -std::numeric_limits<double>::infinity();
                for (std::size_t b = 0; b < k; ++b) {
                    lw[b] = logp[b] + zs[b] + cross(a, b);
                    mx = std::max(mx, lw[b]);
                }
                const double la = lw[a];
                double zsum = 0.0;
                for (std::size_t b = 0; b < k; ++b) {
                    lw[b] = std::exp(lw[b] - mx);
                    zsum += lw[b];
                }
                const double pa = support_.prob[a];
                if (want_mi) mi_sample += pa * (la - logp[a] - (mx + std::log(zsum)));
                std::fill(m.begin(), m.end(), 0.0);
                for (std::size_t b = 0; b < k; ++b) {
                    const double w = lw[b] / zsum;
                    const Vector& mu = support_.point(b);
                    for (std::size_t i = 0; i < dim; ++i) m[i] += w * mu[i];
                }
                const double f = wc * pa;
                for (std::size_t i = 0; i < dim; ++i)
                    for (std::size_t j = i; j < dim; ++j) {
                        const double v = m[i] * m[j];
                        mo.mmt(i, j) += f * v;
                        if (want_se) sample(i, j) += pa * v;
                    }
            }
            if (want_mi) {
                mo.mi += wc * mi_sample;
                if (want_se) mi_sq += wc * mi_sample * mi_sample;
            }
            if (want_se)
                for (std::size_t i = 0; i < dim; ++i)
                    for (std::size_t j = i; j < dim; ++j) mmt_sq(i, j) += wc * sample(i, j) * sample(i, j);
        }
        for (std::size_t i = 0; i < dim; ++i)
            for (std::size_t j = 0; j < i; ++j) mo.mmt(i, j) = mo.mmt(j, i);

        if (want_se) {
            const double count = static_cast<double>(rule.size());
            if (want_mi) mo.mi_se = std::sqrt(std::max(0.0, mi_sq - mo.mi * mo.mi) / count);
            for (std::size_t i = 0; i < dim; ++i)
                for (std::size_t j = i; j < dim; ++j) {
                    const double var = std::max(0.0, mmt_sq(i, j) - mo.mmt(i, j) * mo.mmt(i, j));
                    mo.mmt_se = std::max(mo.mmt_se, std::sqrt(var / count));
                }
        }
        return mo;
    }

    WhitenedSupport support_;
    ChannelConfig config_;
    GaussianRule rule_;
    GaussianRule coarse_rule_;
};

/// Max discrepancy between the central-difference gradient of I_X with respect
/// to each symmetric coordinate of S and the corresponding entry of M_X / 2.
inline double gradient_check(const ChannelEvaluator& ev, const PsdMatrix& S, double h = 1e-4) {
    if (S.min_eigenvalue() <= 10.0 * h)
        throw Error("gradient_check: S is too close to the boundary of the PSD cone for step " + std::to_string(h));
    const std::size_t dim = S.dim();
    const SymMatrix M = ev.mmse(S);
    double worst = 0.0;
    for (std::size_t i = 0; i < dim; ++i)
        for (std::size_t j = i; j < dim; ++j) {
            SymMatrix dir = SymMatrix::zero(dim);
            dir.set(i, j, 1.0);
            const double up = ev.mi(PsdMatrix(S.sym() + h * dir));
            const double down = ev.mi(PsdMatrix(S.sym() - h * dir));
            const double fd = (up - down) / (2.0 * h);
            const double expected = i == j ? 0.5 * M(i, i) : M(i, j);
            worst = std::max(worst, std::abs(fd - expected));
        }
    return worst;
}

} // namespace sbm
