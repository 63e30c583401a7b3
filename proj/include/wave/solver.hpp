#pragma once

// Damped Newton for the bordered travelling-wave system and the 1-D shooting
// computation of the starting wave.

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "wave/error.hpp"
#include "wave/grid.hpp"
#include "wave/model.hpp"
#include "wave/residual.hpp"

namespace wave {

struct NewtonOptions {
    double tol_residual = 1e-10;  ///< infinity norm
    int max_iters = 50;
    double damping = 0.5;  ///< backtracking factor
    double min_step = 1e-8;

    void validate() const {
        if (!(tol_residual > 0.0)) throw Error(ErrorCode::Validation, "newton.tol_residual must be positive");
        if (!(damping > 0.0 && damping < 1.0)) throw Error(ErrorCode::Validation, "newton.damping must lie in (0,1)");
        if (max_iters < 1) throw Error(ErrorCode::Validation, "newton.max_iters must be at least 1");
        if (!(min_step > 0.0 && min_step < 1.0)) throw Error(ErrorCode::Validation, "newton.min_step must lie in (0,1)");
    }
};

/// Sparse LU with the symbolic analysis kept across factorizations of matrices that share
/// a sparsity pattern (assembly emits a state-independent pattern).
class SparseLuSolver {
public:
    void factorize(const SparseMatrix& J) {
        if (J.rows() != J.cols()) throw Error(ErrorCode::LinearSolveFailed, "matrix is not square");
        if (!analyzed_ || J.rows() != rows_ || J.nonZeros() != nnz_) {
            lu_.analyzePattern(J);
            analyzed_ = true;
            rows_ = J.rows();
            nnz_ = J.nonZeros();
        }
        lu_.factorize(J);
        if (lu_.info() != Eigen::Success)
            throw Error(ErrorCode::LinearSolveFailed, "sparse LU factorization failed: " + lu_.lastErrorMessage());
        matrix_ = &J;
    }

    /// Solves with up to two steps of iterative refinement towards a normwise relative
    /// residual of 1e-12.
    [[nodiscard]] Vector solve(const Vector& rhs) {
        Vector x = lu_.solve(rhs);
        if (lu_.info() != Eigen::Success || !x.allFinite())
            throw Error(ErrorCode::LinearSolveFailed, "sparse LU solve failed");
        const double jnorm = inf_norm(*matrix_);
        for (int k = 0; k < 2 && relative_residual(x, rhs, jnorm) > 1e-12; ++k) {
            const Vector r = rhs - (*matrix_) * x;
            x += lu_.solve(r);
        }
        last_relative_residual_ = relative_residual(x, rhs, jnorm);
        if (!x.allFinite()) throw Error(ErrorCode::LinearSolveFailed, "non-finite solution");
        return x;
    }

    [[nodiscard]] double last_relative_residual() const noexcept { return last_relative_residual_; }

    static double inf_norm(const SparseMatrix& J) {
        Vector rowsum = Vector::Zero(J.rows());
        for (Eigen::Index k = 0; k < J.outerSize(); ++k)
            for (SparseMatrix::InnerIterator it(J, k); it; ++it) rowsum[it.row()] += std::abs(it.value());
        return rowsum.size() ? rowsum.maxCoeff() : 0.0;
    }

private:
    double relative_residual(const Vector& x, const Vector& rhs, double jnorm) const {
        const double denom = jnorm * x.lpNorm<Eigen::Infinity>() + rhs.lpNorm<Eigen::Infinity>();
        if (denom == 0.0) return 0.0;
        return ((*matrix_) * x - rhs).lpNorm<Eigen::Infinity>() / denom;
    }

    Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> lu_;
    bool analyzed_ = false;
    Eigen::Index rows_ = 0;
    Eigen::Index nnz_ = 0;
    const SparseMatrix* matrix_ = nullptr;
    double last_relative_residual_ = 0.0;
};

inline Vector linear_solve(const SparseMatrix& J, const Vector& rhs) {
    if (J.rows() != rhs.size()) throw Error(ErrorCode::ShapeMismatch, "rhs length does not match the matrix");
    SparseLuSolver s;
    s.factorize(J);
    return s.solve(rhs);
}

struct NewtonReport {
    int iterations = 0;
    double residual_norm = 0.0;
    std::vector<double> history;  ///< residual norm before each iteration and at exit
    bool peclet_warning = false;  ///< c hx / d >= 2 at the returned state
};

/// Damped Newton with Armijo backtracking on the infinity norm of the residual.
/// Deterministic for given inputs; an accepted step always strictly decreases the norm.
inline WaveState newton_solve(const WaveState& init, const ModelParams& params, const NonlinearitySpec& spec,
                              const Grid& grid, const NewtonOptions& opts, NewtonReport* report = nullptr,
                              SparseLuSolver* lu = nullptr) {
    opts.validate();
    check_shape(init, grid);
    SparseLuSolver local;
    SparseLuSolver& solver = lu ? *lu : local;
    constexpr double armijo = 1e-4;

    WaveState state = init;
    NewtonReport rep;
    for (int iter = 0;; ++iter) {
        auto [r, J] = assemble_system(state, params, spec, grid);
        const double norm = r.lpNorm<Eigen::Infinity>();
        rep.history.push_back(norm);
        rep.iterations = iter;
        rep.residual_norm = norm;
        if (!std::isfinite(norm)) throw Error(ErrorCode::LinearSolveFailed, "non-finite residual");
        if (norm <= opts.tol_residual) {
            if (!(state.c > 0.0))
                throw Error(ErrorCode::NegativeSpeed, "converged to c = " + std::to_string(state.c));
            rep.peclet_warning = state.c * grid.hx / params.d >= 2.0;
            if (report) *report = rep;
            return state;
        }
        if (iter >= opts.max_iters) {
            if (report) *report = rep;
            throw Error(ErrorCode::MaxItersExceeded,
                        "no convergence after " + std::to_string(opts.max_iters) + " iterations, |R| = " +
                            std::to_string(norm));
        }
        solver.factorize(J);
        const Vector delta = solver.solve(-r);
        const Vector u = pack(state, grid);

        double lambda = 1.0;
        for (;;) {
            WaveState trial = unpack(u + lambda * delta, grid, state.family);
            const double tnorm = assemble_residual(trial, params, spec, grid).lpNorm<Eigen::Infinity>();
            if (tnorm < (1.0 - armijo * lambda) * norm) {
                state = std::move(trial);
                break;
            }
            lambda *= opts.damping;
            if (lambda < opts.min_step) {
                if (report) *report = rep;
                throw Error(ErrorCode::StepUnderflow, "line search step fell below min_step at |R| = " +
                                                          std::to_string(norm));
            }
        }
    }
}

/// Travelling wave of -d psi'' + c psi' = f(psi) with psi(0) = theta. Samples hold psi on
/// x = k h for k >= 0; the tail x <= 0 is exactly theta exp(c x / d).
struct OneDimWave {
    double c = 0.0;
    double theta = 0.0;
    double d = 1.0;
    double h = 0.0;
    double right_rate = 0.0;  ///< decay rate of 1 - psi beyond the sampled range
    std::vector<double> samples;

    [[nodiscard]] double x_end() const { return h * static_cast<double>(samples.size() - 1); }

    [[nodiscard]] double value_at(double x) const {
        if (x <= 0.0) return theta * std::exp(c / d * x);
        const double xe = x_end();
        if (x >= xe) {
            const double gap = std::max(0.0, 1.0 - samples.back());
            return 1.0 - gap * std::exp(-right_rate * (x - xe));
        }
        const double t = x / h;
        const auto k = std::min(static_cast<std::size_t>(t), samples.size() - 2);
        const double w = t - static_cast<double>(k);
        return (1.0 - w) * samples[k] + w * samples[k + 1];
    }

    /// Position where psi first reaches level (theta <= level < 1).
    [[nodiscard]] double position_of(double level) const {
        for (std::size_t k = 1; k < samples.size(); ++k) {
            if (samples[k] >= level) {
                const double w = (level - samples[k - 1]) / (samples[k] - samples[k - 1]);
                return h * (static_cast<double>(k - 1) + w);
            }
        }
        return x_end();
    }
};

namespace detail {

enum class ShotOutcome { Overshoot, Undershoot };

// RK4 for (psi, psi') from x = 0. Overshoot: psi exceeds 1 while increasing (speed too
// large). Undershoot: psi' reaches 0 below 1 (speed too small). Right limits of f are used
// so the first stage at psi = theta sees the active branch.
template <class Sink>
ShotOutcome shoot(double c, double d, const NonlinearitySpec& spec, double h, double x_cap, Sink&& sink) {
    double u = spec.theta;
    double p = c * spec.theta / d;
    auto rhs_p = [&](double uu, double pp) { return (c * pp - eval_nonlinearity_right(uu, spec).f) / d; };
    sink(u);
    const auto max_steps = static_cast<long>(x_cap / h);
    for (long k = 0; k < max_steps; ++k) {
        const double k1u = p, k1p = rhs_p(u, p);
        const double k2u = p + 0.5 * h * k1p, k2p = rhs_p(u + 0.5 * h * k1u, p + 0.5 * h * k1p);
        const double k3u = p + 0.5 * h * k2p, k3p = rhs_p(u + 0.5 * h * k2u, p + 0.5 * h * k2p);
        const double k4u = p + h * k3p, k4p = rhs_p(u + h * k3u, p + h * k3p);
        u += h / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);
        p += h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
        if (u > 1.0) return ShotOutcome::Overshoot;
        if (p <= 0.0) return ShotOutcome::Undershoot;
        sink(u);
    }
    return ShotOutcome::Undershoot;
}

} // namespace detail

/// Bisection on c between an undershooting and an overshooting speed. The initial bracket is
/// [tol, 2 sqrt(d K)] with K = max(Lip f, sup f(u)/u); the second term keeps the bracket valid
/// for the discontinuous oracle nonlinearity.
inline OneDimWave solve_1d_ignition_shooting(double d, const NonlinearitySpec& spec, double tol, double step = 0.0) {
    spec.validate();
    if (!(d > 0.0)) throw Error(ErrorCode::InvalidArgument, "d must be positive");
    if (!(tol > 0.0)) throw Error(ErrorCode::InvalidArgument, "tol must be positive");
    const double K = std::max(lipschitz_constant(spec), ignition_slope_bound(spec));
    double hi = 2.0 * std::sqrt(d * K);
    double lo = tol;
    const double h = step > 0.0 ? step : 1e-3 * d / hi;
    const double x_cap = 4000.0 * d / lo > 1e5 ? 1e5 : 4000.0 * d / lo;
    auto ignore = [](double) {};

    if (detail::shoot(lo, d, spec, h, x_cap, ignore) != detail::ShotOutcome::Undershoot ||
        detail::shoot(hi, d, spec, h, x_cap, ignore) != detail::ShotOutcome::Overshoot)
        throw Error(ErrorCode::BracketNotFound, "shooting bracket does not straddle the wave speed");

    while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        if (detail::shoot(mid, d, spec, h, x_cap, ignore) == detail::ShotOutcome::Overshoot)
            hi = mid;
        else
            lo = mid;
    }

    OneDimWave w;
    w.c = 0.5 * (lo + hi);
    w.theta = spec.theta;
    w.d = d;
    w.h = h;
    const double f1 = fprime_at_one(spec);
    w.right_rate = (-w.c + std::sqrt(w.c * w.c - 4.0 * d * f1)) / (2.0 * d);
    // The undershooting side of the bracket gives a monotone trajectory; keep it while it is
    // still approaching 1 and let the exponential tail take over from there.
    detail::shoot(lo, d, spec, h, x_cap, [&](double u) {
        if (w.samples.empty() || (u > w.samples.back() && 1.0 - w.samples.back() > 1e-6)) w.samples.push_back(u);
    });
    if (w.samples.size() < 2) w.samples.push_back(1.0);
    return w;
}

/// y-uniform embedding of a 1-D wave as a Wentzell(0) state, translated so that the phase
/// condition holds (for offset = 0) and with the Dirichlet ends imposed.
inline WaveState embed_1d_wave(const OneDimWave& wave, const Grid& grid, double offset = 0.0) {
    const double xi = wave.position_of(0.5 * (1.0 + wave.theta));
    WaveState s;
    s.c = wave.c;
    s.family = HomotopyFamily::wentzell(0.0);
    s.psi.resize(static_cast<Eigen::Index>(grid.nodes()));
    for (std::size_t j = 0; j < grid.ny; ++j) {
        for (std::size_t i = 0; i < grid.nx; ++i) {
            double v = wave.value_at(grid.x(i) + xi - offset);
            if (i == 0) v = 0.0;
            if (i == grid.nx - 1) v = 1.0;
            s.psi[static_cast<Eigen::Index>(grid.node(i, j))] = v;
        }
    }
    return s;
}

} // namespace wave
