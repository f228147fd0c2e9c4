#pragma once
// Potential function F(Delta, S) = I_X(S + Delta) + tr((R - R^{-1} Delta)^2) / 4,
// its damped concave-convex minimization, and the derived MMSE bounds and
// weak-recovery verdict.

#include <sbm/channel.hpp>
#include <sbm/linalg.hpp>
#include <sbm/model.hpp>
#include <sbm/rng.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace sbm {

class PotentialProblem {
public:
    PotentialProblem(std::shared_ptr<const ChannelEvaluator> evaluator, SymMatrix R,
                     std::optional<PsdMatrix> S = std::nullopt)
        : evaluator_(std::move(evaluator)), R_(std::move(R)) {
        if (!evaluator_) throw Error("PotentialProblem: missing evaluator");
        const std::size_t dim = evaluator_->dim();
        if (R_.dim() != dim) throw Error("PotentialProblem: R has wrong dimension");
        S_ = S ? *S : PsdMatrix::zero(dim);
        if (S_.dim() != dim) throw Error("PotentialProblem: S has wrong dimension");
        for (double l : eig(R_).eigenvalues)
            if (std::abs(l) <= 1e-12) throw Error("PotentialProblem: R must be invertible");
        R_inv_ = inverse(R_);
        R2_ = SymMatrix(R_.matrix() * R_.matrix());
    }

    const ChannelEvaluator& evaluator() const { return *evaluator_; }
    const WhitenedSupport& support() const { return evaluator_->support(); }
    const SymMatrix& R() const { return R_; }
    const SymMatrix& R_inv() const { return R_inv_; }
    const SymMatrix& R_squared() const { return R2_; }
    const PsdMatrix& S() const { return S_; }
    std::size_t dim() const { return R_.dim(); }
    bool has_side_info() const { return max_abs_entry(S_.matrix()) > 0.0; }

    /// Channel SNR seen at Delta: S + Delta.
    PsdMatrix channel_snr(const PsdMatrix& delta) const {
        return has_side_info() ? PsdMatrix(S_.sym() + delta.sym()) : delta;
    }

    /// tr((R - R^{-1} Delta)^2) / 4.
    double interaction_term(const PsdMatrix& delta) const {
        const Matrix a = R_.matrix() - R_inv_.matrix() * delta.matrix();
        return 0.25 * trace(a * a);
    }

private:
    std::shared_ptr<const ChannelEvaluator> evaluator_;
    SymMatrix R_;
    SymMatrix R_inv_;
    SymMatrix R2_;
    PsdMatrix S_;
};

inline double potential_value(const PotentialProblem& problem, const PsdMatrix& delta) {
    return problem.evaluator().mi(problem.channel_snr(delta)) + problem.interaction_term(delta);
}

/// ||M_X(S + Delta) - (I - R^{-1} Delta R^{-1})||_F.
inline double fixed_point_residual(const PotentialProblem& problem, const PsdMatrix& delta) {
    const SymMatrix M = problem.evaluator().mmse(problem.channel_snr(delta));
    const SymMatrix target = SymMatrix::identity(problem.dim()) - sandwich(problem.R_inv(), delta.sym());
    return frobenius_norm((M - target).matrix());
}

struct CccpResult {
    PsdMatrix delta;
    std::vector<double> step_norms; // ||Delta^{t+1} - Delta^t||_F per iteration
    int iterations = 0;
    bool converged = false;
};

struct CccpOptions {
    double eps = 0.5;
    int max_iter = 10000;
    double tol = 1e-8;
};

/// Delta <- (1 - eps)(R^2 - R M_X(S + Delta) R) + eps Delta, projected onto the PSD cone.
inline CccpResult cccp_solve(const PotentialProblem& problem, const PsdMatrix& delta0, const CccpOptions& opt = {}) {
    if (!(opt.eps >= 0.0 && opt.eps < 1.0)) throw Error("cccp_solve: damping must lie in [0, 1)");
    if (delta0.dim() != problem.dim()) throw Error("cccp_solve: initial point has wrong dimension");
    const double blowup = 10.0 * frobenius_norm(problem.R_squared().matrix());

    CccpResult res{delta0, {}, 0, false};
    for (int t = 0; t < opt.max_iter; ++t) {
        const SymMatrix M = problem.evaluator().mmse(problem.channel_snr(res.delta));
        const SymMatrix mapped = problem.R_squared() - sandwich(problem.R(), M);
        const SymMatrix next = (1.0 - opt.eps) * mapped + opt.eps * res.delta.sym();
        PsdMatrix projected = PsdMatrix::project(next);
        const double step = frobenius_norm((projected.sym() - res.delta.sym()).matrix());
        res.step_norms.push_back(step);
        res.delta = std::move(projected);
        res.iterations = t + 1;
        if (frobenius_norm(res.delta.matrix()) > blowup)
            throw Error("cccp_solve: iterate diverged beyond 10 ||R^2||_F");
        if (step < opt.tol) {
            res.converged = true;
            break;
        }
    }
    return res;
}

/// True iff Delta = 0 is not a local minimizer of F: max eigenvalue of R^2 > 1.
inline bool hessian_test(const SymMatrix& R) {
    return max_eigenvalue(SymMatrix(R.matrix() * R.matrix())) > 1.0 + 1e-12;
}
inline bool hessian_test(const PotentialProblem& problem) { return hessian_test(problem.R()); }

enum class WeakRecovery { possible, impossible, undetermined };

inline std::string to_string(WeakRecovery v) {
    switch (v) {
    case WeakRecovery::possible: return "possible";
    case WeakRecovery::impossible: return "impossible";
    default: return "undetermined";
    }
}

struct StationaryPoint {
    PsdMatrix delta;
    double f = 0.0;
    double f_error = 0.0; // quadrature truncation estimate or MC standard error of I_X
    double residual = 0.0;
    bool is_zero = false;
    bool is_local_min = true;
};

struct PotentialSolution {
    PsdMatrix delta_star;
    double f_min = 0.0;
    double fixed_point_residual = 0.0;
    std::vector<StationaryPoint> all_local_minima;
    std::vector<StationaryPoint> stationary_points; // every distinct converged point
    bool hessian_unstable_at_zero = false;
    WeakRecovery weak_recovery = WeakRecovery::undetermined;
    SymMatrix mmse_ub;           // M_X(S + Delta*)
    double interaction_lb = 0.0; // tr(R^2 - R^{-2} Delta*^2), evaluated at Delta* only
    double trace_r2 = 0.0;
    int iterations = 0;
    bool converged = false;
    int starts = 0;
    int unconverged_starts = 0;
    double f_tolerance = 0.0;
    double zero_tolerance = 0.0;
    bool side_info = false;
};

struct SolveOptions {
    CccpOptions cccp;
    std::uint64_t seed = 7;
    int random_starts = 3;
};

namespace detail {

/// R A R with A = U diag(u) U^T, U Haar-ish orthogonal and u uniform on [0, 1],
/// so that 0 <= Delta <= R^2.
inline PsdMatrix random_start(const SymMatrix& R, Rng& rng) {
    const std::size_t dim = R.dim();
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<Vector> basis;
    while (basis.size() < dim) {
        Vector v(dim);
        for (double& x : v) x = normal(rng);
        for (const Vector& b : basis) {
            const double c = dot(v, b);
            for (std::size_t i = 0; i < dim; ++i) v[i] -= c * b[i];
        }
        const double nv = std::sqrt(dot(v, v));
        if (nv < 1e-8) continue;
        for (double& x : v) x /= nv;
        basis.push_back(v);
    }
    Matrix a(dim, dim);
    for (const Vector& b : basis) a += unif(rng) * outer(b, b);
    return PsdMatrix::project(sandwich(R, SymMatrix(a)));
}

} // namespace detail

/// Decides the weak-recovery verdict from the multi-start outcome.
inline WeakRecovery weak_recovery_verdict(const PotentialSolution& sol) {
    if (!sol.converged || sol.all_local_minima.empty()) return WeakRecovery::undetermined;
    const StationaryPoint* best_zero = nullptr;
    const StationaryPoint* best_nonzero = nullptr;
    for (const auto& m : sol.all_local_minima) {
        auto& slot = m.is_zero ? best_zero : best_nonzero;
        if (!slot || m.f < slot->f) slot = &m;
    }
    if (best_zero && best_nonzero && std::abs(best_zero->f - best_nonzero->f) < sol.f_tolerance)
        return WeakRecovery::undetermined;
    const bool star_nonzero = frobenius_norm(sol.delta_star.matrix()) > sol.zero_tolerance;
    if (star_nonzero) return WeakRecovery::possible;
    // Delta* = 0: certify only if every start converged and nothing else competes.
    if (sol.unconverged_starts > 0) return WeakRecovery::undetermined;
    for (const auto& p : sol.stationary_points)
        if (!p.is_zero && p.f < sol.f_min + sol.f_tolerance) return WeakRecovery::undetermined;
    return WeakRecovery::impossible;
}

/// Multi-start minimization of F from {0, R^2, R^2 / 2, 3 random points in [0, R^2]}.
inline PotentialSolution solve(const PotentialProblem& problem, const SolveOptions& opt = {}) {
    const std::size_t dim = problem.dim();
    const SymMatrix& R2 = problem.R_squared();
    const double r2norm = frobenius_norm(R2.matrix());

    std::vector<PsdMatrix> starts{PsdMatrix::zero(dim), PsdMatrix::project(R2), PsdMatrix::project(0.5 * R2)};
    Rng rng = make_rng(opt.seed);
    for (int i = 0; i < opt.random_starts; ++i) starts.push_back(detail::random_start(problem.R(), rng));

    PotentialSolution sol;
    sol.side_info = problem.has_side_info();
    sol.hessian_unstable_at_zero = hessian_test(problem);
    sol.zero_tolerance = 1e-4 * r2norm;
    sol.trace_r2 = trace(R2.matrix());
    sol.starts = static_cast<int>(starts.size());

    const double dedupe = 1e-5 * std::max(1.0, r2norm);
    std::vector<PsdMatrix> finals;
    for (const PsdMatrix& s : starts) {
        const CccpResult run = cccp_solve(problem, s, opt.cccp);
        sol.iterations += run.iterations;
        finals.push_back(run.delta);
        if (!run.converged) {
            ++sol.unconverged_starts;
            continue;
        }
        bool duplicate = false;
        for (const auto& p : sol.stationary_points)
            if (frobenius_norm((p.delta.sym() - run.delta.sym()).matrix()) < dedupe) duplicate = true;
        if (duplicate) continue;
        StationaryPoint p;
        p.delta = run.delta;
        const ChannelOutput mi = problem.evaluator().mutual_information(problem.channel_snr(p.delta));
        p.f = mi.value + problem.interaction_term(p.delta);
        p.f_error = mi.std_error;
        p.residual = fixed_point_residual(problem, p.delta);
        p.is_zero = frobenius_norm(p.delta.matrix()) <= sol.zero_tolerance;
        p.is_local_min = !(p.is_zero && !sol.side_info && sol.hessian_unstable_at_zero);
        sol.stationary_points.push_back(p);
    }

    double max_err = 0.0;
    for (const auto& p : sol.stationary_points) max_err = std::max(max_err, p.f_error);
    sol.f_tolerance = std::max(1e-9, 5.0 * max_err);

    for (const auto& p : sol.stationary_points)
        if (p.is_local_min) sol.all_local_minima.push_back(p);
    std::sort(sol.all_local_minima.begin(), sol.all_local_minima.end(),
              [](const StationaryPoint& a, const StationaryPoint& b) {
                  if (a.f != b.f) return a.f < b.f;
                  return trace(a.delta.matrix()) < trace(b.delta.matrix());
              });

    sol.converged = !sol.all_local_minima.empty();
    if (sol.converged) {
        const double fbest = sol.all_local_minima.front().f;
        const StationaryPoint* star = &sol.all_local_minima.front();
        for (const auto& m : sol.all_local_minima)
            if (m.f < fbest + sol.f_tolerance && trace(m.delta.matrix()) < trace(star->delta.matrix())) star = &m;
        sol.delta_star = star->delta;
        sol.f_min = star->f;
        sol.fixed_point_residual = star->residual;
    } else {
        // Report the lowest-F final iterate even though nothing converged.
        double best = std::numeric_limits<double>::infinity();
        for (const PsdMatrix& d : finals) {
            const double f = potential_value(problem, d);
            if (f < best) {
                best = f;
                sol.delta_star = d;
            }
        }
        sol.f_min = best;
        sol.fixed_point_residual = fixed_point_residual(problem, sol.delta_star);
    }

    sol.mmse_ub = problem.evaluator().mmse(problem.channel_snr(sol.delta_star));
    const Matrix rinv2 = problem.R_inv().matrix() * problem.R_inv().matrix();
    const Matrix d2 = sol.delta_star.matrix() * sol.delta_star.matrix();
    sol.interaction_lb = trace(R2.matrix()) - trace(rinv2 * d2);
    sol.weak_recovery = weak_recovery_verdict(sol);
    return sol;
}

} // namespace sbm
