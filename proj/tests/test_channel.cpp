#include <sbm/channel.hpp>
#include <sbm/model.hpp>

#include "reference.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>

using namespace sbm;
using boost::math::quadrature::gauss_kronrod;

namespace {

/// Two-dimensional MMSE matrix by nested Gauss-Kronrod.
Matrix mmse_2d_reference(const WhitenedSupport& w, const PsdMatrix& S) {
    const PsdMatrix root = psd_sqrt(S);
    std::vector<Vector> sig;
    for (std::size_t a = 0; a < w.k(); ++a) sig.push_back(root.matrix() * w.point(a));
    Matrix out(2, 2);
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = i; j < 2; ++j) {
            auto inner = [&](double y0) {
                auto f = [&](double y1) {
                    double z = 0.0;
                    Vector m(2, 0.0);
                    for (std::size_t a = 0; a < w.k(); ++a) {
                        const double d0 = y0 - sig[a][0], d1 = y1 - sig[a][1];
                        const double q = w.prob[a] * std::exp(-0.5 * (d0 * d0 + d1 * d1)) / (2.0 * std::numbers::pi);
                        z += q;
                        m[0] += q * w.point(a)[0];
                        m[1] += q * w.point(a)[1];
                    }
                    if (z <= 0.0) return 0.0;
                    return m[i] * m[j] / z;
                };
                return gauss_kronrod<double, 31>::integrate(f, -14.0, 14.0, 10, 1e-11);
            };
            const double v = gauss_kronrod<double, 31>::integrate(inner, -14.0, 14.0, 10, 1e-11);
            out(i, j) = (i == j ? 1.0 : 0.0) - v;
            out(j, i) = out(i, j);
        }
    return out;
}

} // namespace

TEST(Channel, BinaryMatchesIndependentQuadrature) {
    // The default 40-node rule resolves the posterior-mean transition (width
    // ~ 1/sqrt(s)) well at moderate SNR and to about 1e-4 by s = 8.
    for (const auto& pv : {Vector{0.5, 0.5}, Vector{0.7, 0.3}, Vector{0.9, 0.1}}) {
        const WhitenedSupport w = whiten(ProbVector(pv));
        const ChannelEvaluator ev(w);
        for (double s : {0.1, 0.5, 1.0, 3.0, 8.0}) {
            const PsdMatrix S(SymMatrix({{s}}));
            const testref::Reference ref = testref::binary_reference(w, s);
            const double tol = s <= 0.5 ? 1e-6 : s <= 1.0 ? 3e-5 : 3e-4;
            EXPECT_NEAR(ev.mi(S), ref.mi, tol) << "p0=" << pv[0] << " s=" << s;
            EXPECT_NEAR(ev.mmse(S)(0, 0), ref.mmse, tol) << "p0=" << pv[0] << " s=" << s;
        }
    }
}

TEST(Channel, FinerRuleConvergesToReference) {
    for (const auto& pv : {Vector{0.5, 0.5}, Vector{0.9, 0.1}}) {
        const WhitenedSupport w = whiten(ProbVector(pv));
        const ChannelEvaluator ev(w, {ChannelMethod::quadrature, 160, 0, 1});
        for (double s : {0.5, 3.0, 8.0}) {
            const PsdMatrix S(SymMatrix({{s}}));
            const testref::Reference ref = testref::binary_reference(w, s);
            EXPECT_NEAR(ev.mi(S), ref.mi, 1e-6) << "p0=" << pv[0] << " s=" << s;
            EXPECT_NEAR(ev.mmse(S)(0, 0), ref.mmse, 1e-6) << "p0=" << pv[0] << " s=" << s;
        }
    }
    EXPECT_THROW(ChannelEvaluator(whiten(ProbVector({0.5, 0.5})), {ChannelMethod::quadrature, 200, 0, 1}), Error);
}

TEST(Channel, ThreeCommunityMatchesNestedQuadrature) {
    const WhitenedSupport w = whiten(ProbVector({0.6, 0.3, 0.1}));
    const ChannelEvaluator ev(w);
    const PsdMatrix S(SymMatrix({{1.2, 0.3}, {0.3, 0.6}}));
    const Matrix ref = mmse_2d_reference(w, S);
    EXPECT_LT(max_abs_entry(ev.mmse(S).matrix() - ref), 3e-6);
}

TEST(Channel, SymmetricBinaryPosteriorMeanIsTanh) {
    const ChannelEvaluator ev(whiten(ProbVector({0.5, 0.5})));
    for (double s : {0.3, 1.0, 4.0})
        for (double y : {-2.0, -0.1, 0.0, 0.7, 3.0})
            EXPECT_NEAR(ev.posterior_mean(PsdMatrix(SymMatrix({{s}})), {y})[0], std::tanh(std::sqrt(s) * y), 1e-12);
}

TEST(Channel, ZeroSnrGivesIdentityAndZeroInformation) {
    for (const auto& pv : {Vector{0.5, 0.5}, Vector{0.6, 0.3, 0.1}, Vector{0.25, 0.25, 0.25, 0.25}, Vector{0.4, 0.3, 0.2, 0.1}}) {
        const ChannelEvaluator ev(whiten(ProbVector(pv)));
        const std::size_t dim = pv.size() - 1;
        const PsdMatrix zero = PsdMatrix::zero(dim);
        EXPECT_LT(frobenius_norm(ev.mmse(zero).matrix() - Matrix::identity(dim)), 1e-6);
        EXPECT_NEAR(ev.mi(zero), 0.0, 1e-12);
    }
}

TEST(Channel, LargeSnrDrivesMmseToZero) {
    const ChannelEvaluator ev(whiten(ProbVector({0.5, 0.3, 0.2})));
    const double tr = trace(ev.mmse(PsdMatrix(SymMatrix::diagonal({60.0, 60.0}))).matrix());
    EXPECT_LT(tr, 1e-3);
    // I_X saturates at the label entropy.
    const double h = -(0.5 * std::log(0.5) + 0.3 * std::log(0.3) + 0.2 * std::log(0.2));
    EXPECT_NEAR(ev.mi(PsdMatrix(SymMatrix::diagonal({60.0, 60.0}))), h, 1e-3);
}

TEST(Channel, ImmseGradient) {
    Rng rng = make_rng(21);
    std::uniform_real_distribution<double> u(0.2, 2.0);
    for (const auto& pv : {Vector{0.7, 0.3}, Vector{0.6, 0.3, 0.1}, Vector{1.0 / 3, 1.0 / 3, 1.0 / 3}}) {
        const ChannelEvaluator ev(whiten(ProbVector::normalized(pv)));
        const std::size_t dim = pv.size() - 1;
        for (int rep = 0; rep < 3; ++rep) {
            Matrix a(dim, dim);
            for (std::size_t i = 0; i < dim; ++i)
                for (std::size_t j = 0; j < dim; ++j) a(i, j) = u(rng) - 1.1;
            const PsdMatrix S(SymMatrix(a * a.transpose() + 0.3 * Matrix::identity(dim)));
            EXPECT_LT(gradient_check(ev, S), 1e-5);
        }
    }
}

TEST(Channel, MmseDecreasesInLoewnerOrder) {
    const ChannelEvaluator ev(whiten(ProbVector({0.5, 0.3, 0.2})));
    const PsdMatrix small(SymMatrix({{0.5, 0.1}, {0.1, 0.3}}));
    const PsdMatrix large(SymMatrix({{1.0, 0.1}, {0.1, 0.9}}));
    EXPECT_TRUE(loewner_leq(ev.mmse(large), ev.mmse(small), 1e-12));
    EXPECT_LT(ev.mi(small), ev.mi(large));
}

TEST(Channel, MonteCarloAgreesWithQuadrature) {
    const WhitenedSupport w = whiten(ProbVector({0.6, 0.3, 0.1}));
    const ChannelEvaluator quad(w);
    const ChannelEvaluator mc(w, {ChannelMethod::monte_carlo, 0, 40000, 5});
    const PsdMatrix S(SymMatrix({{1.0, 0.2}, {0.2, 0.5}}));
    const ChannelOutput qi = quad.mutual_information(S);
    const ChannelOutput mi = mc.mutual_information(S);
    EXPECT_GT(mi.std_error, 0.0);
    EXPECT_LT(std::abs(qi.value - mi.value), 5.0 * mi.std_error + 1e-6);
    const ChannelOutput qm = quad.mmse_matrix(S);
    const ChannelOutput mm = mc.mmse_matrix(S);
    EXPECT_LT(max_abs_entry(qm.matrix - mm.matrix), 5.0 * mm.std_error + 1e-6);
    EXPECT_LT(qm.std_error, 1e-4);
}

TEST(Channel, MonteCarloIsDeterministicForSeed) {
    const WhitenedSupport w = whiten(ProbVector({0.5, 0.5}));
    const ChannelEvaluator a(w, {ChannelMethod::monte_carlo, 0, 10000, 3});
    const ChannelEvaluator b(w, {ChannelMethod::monte_carlo, 0, 10000, 3});
    const PsdMatrix S(SymMatrix({{1.0}}));
    EXPECT_EQ(a.mi(S), b.mi(S));
}

TEST(Channel, ConfigurationErrors) {
    EXPECT_THROW(ChannelEvaluator(whiten(ProbVector(Vector(5, 0.2)))), Error);
    EXPECT_THROW(ChannelEvaluator(whiten(ProbVector({0.5, 0.5})), {ChannelMethod::quadrature, 10, 0, 1}), Error);
    EXPECT_THROW(ChannelEvaluator(whiten(ProbVector({0.5, 0.5})), {ChannelMethod::monte_carlo, 0, 500, 1}), Error);
    EXPECT_NO_THROW(ChannelEvaluator(whiten(ProbVector(Vector(5, 0.2))), {ChannelMethod::monte_carlo, 0, 10000, 1}));
    const ChannelEvaluator ev(whiten(ProbVector({0.5, 0.5})));
    EXPECT_THROW(ev.mi(PsdMatrix::identity(2)), Error);
    EXPECT_THROW(gradient_check(ev, PsdMatrix(SymMatrix({{1e-4}}))), Error);
}
