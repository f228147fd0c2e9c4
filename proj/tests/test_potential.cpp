#include <sbm/potential.hpp>

#include "reference.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <memory>

using namespace sbm;

namespace {

std::shared_ptr<const ChannelEvaluator> evaluator(const ProbVector& p) {
    return std::make_shared<const ChannelEvaluator>(whiten(p));
}

PotentialProblem diag_problem(const ProbVector& p, double l1, double l2) {
    return PotentialProblem(evaluator(p), SymMatrix::diagonal({l1, l2}));
}

const ProbVector& uniform3() {
    static const ProbVector p = ProbVector::normalized({1, 1, 1});
    return p;
}

} // namespace

TEST(Potential, ValueAtZeroIsQuarterTraceR2) {
    const PotentialProblem pb = diag_problem(uniform3(), 0.7, 1.3);
    EXPECT_NEAR(potential_value(pb, PsdMatrix::zero(2)), 0.25 * (0.49 + 1.69), 1e-14);
}

TEST(Potential, ScalarMinimizerMatchesGridScan) {
    // Two communities: F(delta) = I(delta) + (lambda - delta / lambda)^2 / 4 scanned on a
    // fine grid with an independent I(delta).
    for (const auto& pv : {Vector{0.5, 0.5}, Vector{0.8, 0.2}}) {
        const ProbVector p(pv);
        const WhitenedSupport w = whiten(p);
        for (double lambda : {0.8, 1.2, 1.6}) {
            const PotentialProblem pb(evaluator(p), SymMatrix({{lambda}}));
            const PotentialSolution sol = solve(pb);
            ASSERT_TRUE(sol.converged);
            const double hi = 1.2 * lambda * lambda;
            const int steps = 600;
            double best_f = 1e300, best_d = 0.0;
            for (int i = 0; i <= steps; ++i) {
                const double d = hi * i / steps;
                const double f = testref::binary_reference(w, d).mi + 0.25 * std::pow(lambda - d / lambda, 2);
                if (f < best_f) {
                    best_f = f;
                    best_d = d;
                }
            }
            EXPECT_LE(sol.f_min, best_f + 1e-5) << "lambda=" << lambda;
            EXPECT_NEAR(sol.delta_star(0, 0), best_d, 2.0 * hi / steps) << "lambda=" << lambda;
        }
    }
}

TEST(Potential, FixedPointResidualAtConvergedPoints) {
    for (auto [l1, l2] : {std::pair{0.5, 0.5}, {1.5, 1.5}, {0.8, 1.3}, {1.2, -1.1}}) {
        const PotentialSolution sol = solve(diag_problem(uniform3(), l1, l2));
        for (const auto& p : sol.stationary_points) EXPECT_LT(p.residual, 1e-6);
    }
    const PotentialSolution b = solve(diag_problem(ProbVector({0.6, 0.3, 0.1}), 0.6, 0.98));
    for (const auto& p : b.stationary_points) EXPECT_LT(p.residual, 1e-6);
}

TEST(Potential, CccpDecreasesPotential) {
    const PotentialProblem pb = diag_problem(ProbVector({0.6, 0.3, 0.1}), 1.3, 0.9);
    PsdMatrix delta = PsdMatrix::project(SymMatrix::diagonal({0.1, 0.05}));
    double prev = potential_value(pb, delta);
    CccpOptions one;
    one.max_iter = 1;
    for (int t = 0; t < 40; ++t) {
        delta = cccp_solve(pb, delta, one).delta;
        const double f = potential_value(pb, delta);
        EXPECT_LE(f, prev + 1e-12) << "iteration " << t;
        prev = f;
    }
}

TEST(Potential, BelowThresholdStartFromR2ConvergesToZero) {
    const PotentialProblem pb = diag_problem(uniform3(), 0.5, 0.5);
    const CccpResult r = cccp_solve(pb, PsdMatrix::project(pb.R_squared()));
    EXPECT_TRUE(r.converged);
    EXPECT_LT(frobenius_norm(r.delta.matrix()), 1e-6);
}

TEST(Potential, UniformVerdicts) {
    const PotentialSolution below = solve(diag_problem(uniform3(), 0.5, 0.5));
    EXPECT_EQ(below.weak_recovery, WeakRecovery::impossible);
    EXPECT_LT(frobenius_norm(below.delta_star.matrix()), 1e-6);
    EXPECT_FALSE(below.hessian_unstable_at_zero);
    EXPECT_NEAR(trace(below.mmse_ub.matrix()), 2.0, 1e-6);

    const PotentialSolution above = solve(diag_problem(uniform3(), 1.5, 1.5));
    EXPECT_EQ(above.weak_recovery, WeakRecovery::possible);
    EXPECT_GT(frobenius_norm(above.delta_star.matrix()), 0.1);
    EXPECT_TRUE(above.hessian_unstable_at_zero);
    EXPECT_LT(trace(above.mmse_ub.matrix()), 2.0);
    // Zero is not reported as a local minimum above the threshold.
    for (const auto& m : above.all_local_minima) EXPECT_FALSE(m.is_zero);
}

TEST(Potential, SubThresholdRecoveryForSkewedPrior) {
    const PotentialSolution sol = solve(diag_problem(ProbVector({0.6, 0.3, 0.1}), 0.6, 0.98));
    EXPECT_FALSE(sol.hessian_unstable_at_zero);
    EXPECT_EQ(sol.weak_recovery, WeakRecovery::possible);
}

TEST(Potential, ReportedBoundsAreConsistent) {
    const PotentialProblem pb = diag_problem(uniform3(), 1.4, 1.1);
    const PotentialSolution sol = solve(pb);
    const SymMatrix M = pb.evaluator().mmse(sol.delta_star);
    EXPECT_LT(max_abs_entry(M - sol.mmse_ub), 1e-14);
    const Matrix rinv = pb.R_inv().matrix();
    const Matrix d = sol.delta_star.matrix();
    EXPECT_NEAR(sol.interaction_lb, trace(pb.R_squared().matrix()) - trace(rinv * rinv * d * d), 1e-12);
    // At a stationary point tr(R^2 (I - M)^2) = tr(R^{-2} Delta^2).
    const Matrix i_m = Matrix::identity(2) - M.matrix();
    EXPECT_NEAR(trace(pb.R_squared().matrix() * i_m * i_m), trace(rinv * rinv * d * d), 1e-6);
    // Delta* lies in [0, R^2].
    EXPECT_TRUE(loewner_leq(sol.delta_star, pb.R_squared(), 1e-8));
}

TEST(Potential, SideInformationShiftsChannel) {
    const auto ev = evaluator(uniform3());
    const PsdMatrix S(SymMatrix::diagonal({0.3, 0.3}));
    const PotentialProblem pb(ev, SymMatrix::diagonal({0.5, 0.5}), S);
    EXPECT_TRUE(pb.has_side_info());
    EXPECT_NEAR(pb.channel_snr(PsdMatrix::zero(2))(0, 0), 0.3, 1e-15);
    const PotentialSolution sol = solve(pb);
    EXPECT_TRUE(sol.converged);
    // With side information the fixed point moves off zero.
    EXPECT_GT(trace(sol.delta_star.matrix()), 1e-3);
    EXPECT_LT(sol.fixed_point_residual, 1e-6);
}

TEST(Potential, Errors) {
    const auto ev = evaluator(uniform3());
    EXPECT_THROW(PotentialProblem(ev, SymMatrix::diagonal({1.0, 0.0})), Error);
    EXPECT_THROW(PotentialProblem(ev, SymMatrix::identity(1)), Error);
    EXPECT_THROW(PotentialProblem(nullptr, SymMatrix::identity(2)), Error);
    const PotentialProblem pb(ev, SymMatrix::identity(2));
    CccpOptions bad;
    bad.eps = 1.0;
    EXPECT_THROW(cccp_solve(pb, PsdMatrix::zero(2), bad), Error);
    EXPECT_THROW(cccp_solve(pb, PsdMatrix::zero(1)), Error);
}

TEST(Potential, HessianTest) {
    EXPECT_FALSE(hessian_test(SymMatrix::diagonal({0.99, -0.5})));
    EXPECT_TRUE(hessian_test(SymMatrix::diagonal({0.5, -1.01})));
    EXPECT_FALSE(hessian_test(SymMatrix::identity(2)));
}
