#pragma once

#include <sbm/linalg.hpp>

#include <cmath>
#include <cstddef>
#include <vector>

namespace sbm {

/// Gauss-Hermite rule for E[f(Z)], Z ~ N(0, 1): nodes and weights summing to one.
struct GaussHermiteRule {
    Vector nodes;
    Vector weights;
};

/// Newton iteration on the orthonormal Hermite recurrence.
inline GaussHermiteRule gauss_hermite(std::size_t n) {
    if (n == 0) throw Error("gauss_hermite: need at least one node");
    // The Newton starting guesses stop bracketing the extreme roots beyond this.
    if (n > 180) throw Error("gauss_hermite: at most 180 nodes are supported");
    constexpr double kPim4 = 0.7511255444649425; // pi^{-1/4}
    Vector x(n);
    Vector w(n);
    const std::size_t m = (n + 1) / 2;
    const double nd = static_cast<double>(n);
    double z = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        if (i == 0)
            z = std::sqrt(2.0 * nd + 1.0) - 1.85575 * std::pow(2.0 * nd + 1.0, -0.16667);
        else if (i == 1)
            z -= 1.14 * std::pow(nd, 0.426) / z;
        else if (i == 2)
            z = 1.86 * z - 0.86 * x[0];
        else if (i == 3)
            z = 1.91 * z - 0.91 * x[1];
        else
            z = 2.0 * z - x[i - 2];

        double pp = 0.0;
        for (int it = 0; it < 200; ++it) {
            double p1 = kPim4;
            double p2 = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                const double p3 = p2;
                p2 = p1;
                const double jd = static_cast<double>(j);
                p1 = z * std::sqrt(2.0 / (jd + 1.0)) * p2 - std::sqrt(jd / (jd + 1.0)) * p3;
            }
            pp = std::sqrt(2.0 * nd) * p2;
            const double z1 = z;
            z = z1 - p1 / pp;
            if (std::abs(z - z1) <= 1e-15 * std::max(1.0, std::abs(z))) break;
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }

    // Physicists' rule for exp(-t^2) -> standard normal: x = sqrt(2) t, w / sqrt(pi).
    GaussHermiteRule rule{Vector(n), Vector(n)};
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        rule.nodes[n - 1 - i] = std::sqrt(2.0) * x[i];
        rule.weights[n - 1 - i] = w[i];
        total += w[i];
    }
    for (double& v : rule.weights) v /= total;
    return rule;
}

/// Weighted point set in R^dim approximating a standard Gaussian expectation.
struct GaussianRule {
    std::size_t dim = 0;
    std::vector<double> points; // point-major, size count * dim
    Vector weights;

    std::size_t size() const { return weights.size(); }
    const double* point(std::size_t i) const { return points.data() + i * dim; }
};

inline GaussianRule tensor_gauss_hermite(std::size_t dim, std::size_t nodes_per_dim) {
    const GaussHermiteRule base = gauss_hermite(nodes_per_dim);
    std::size_t count = 1;
    for (std::size_t d = 0; d < dim; ++d) count *= nodes_per_dim;
    GaussianRule rule{dim, std::vector<double>(count * dim), Vector(count)};
    std::vector<std::size_t> idx(dim, 0);
    for (std::size_t c = 0; c < count; ++c) {
        double w = 1.0;
        for (std::size_t d = 0; d < dim; ++d) {
            rule.points[c * dim + d] = base.nodes[idx[d]];
            w *= base.weights[idx[d]];
        }
        rule.weights[c] = w;
        for (std::size_t d = 0; d < dim; ++d) {
            if (++idx[d] < nodes_per_dim) break;
            idx[d] = 0;
        }
    }
    return rule;
}

} // namespace sbm
