#pragma once
// Independent reference computations shared by the tests.

#include <sbm/model.hpp>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <numbers>

namespace testref {

struct Reference {
    double mi;
    double mmse;
};

/// Scalar channel Y = sqrt(s) X + N with X on two points, by adaptive
/// Gauss-Kronrod on the output density: I = h(Y) - h(N), mmse = 1 - E[E[X|Y]^2].
inline Reference binary_reference(const sbm::WhitenedSupport& w, double s) {
    const double r = std::sqrt(s);
    const double p0 = w.prob[0], p1 = w.prob[1];
    const double m0 = w.point(0)[0], m1 = w.point(1)[0];
    auto phi = [](double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); };
    auto density = [&](double y) { return p0 * phi(y - r * m0) + p1 * phi(y - r * m1); };
    auto neg_ent = [&](double y) {
        const double f = density(y);
        return f > 0.0 ? f * std::log(f) : 0.0;
    };
    auto mean_sq = [&](double y) {
        const double a = p0 * phi(y - r * m0);
        const double b = p1 * phi(y - r * m1);
        const double f = a + b;
        if (f <= 0.0) return 0.0;
        const double m = (a * m0 + b * m1) / f;
        return f * m * m;
    };
    const double lo = -30.0, hi = 30.0;
    const double h = -boost::math::quadrature::gauss_kronrod<double, 61>::integrate(neg_ent, lo, hi, 15, 1e-13);
    const double hn = 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e);
    const double em2 = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(mean_sq, lo, hi, 15, 1e-13);
    return {h - hn, 1.0 - em2};
}

} // namespace testref
