#pragma once

// Machine-checkable a-priori properties of converged travelling waves: bounds,
// monotonicity, line/strip sandwich, the integral speed identity, left supersolution
// decay, right asymptotic decay against the dispersion relation, and uniqueness up to
// translation. Diagnostics never throw on a failed property; they report it.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>

#include "wave/error.hpp"
#include "wave/family.hpp"
#include "wave/grid.hpp"
#include "wave/model.hpp"
#include "wave/residual.hpp"

namespace wave {

struct Tolerances {
    double bounds = 1e-8;
    double monotone = 1e-6;
    double sandwich = 1e-8;
    double left_decay = 1e-8;
    double speed_identity = 1e-2;
    double decay_rate = 0.1;  ///< relative mismatch allowed between fitted and predicted right rates
};

/// Node index and value of the worst violation seen by a check.
struct Offender {
    std::size_t node = 0;
    double value = 0.0;
};

struct BoundsCheck {
    bool ok = true;
    double min_psi = 0.0;
    double max_psi = 0.0;
    double min_line = 0.0;  ///< min of mu phi (Exchange only)
    double max_line = 0.0;
    Offender worst;
};

inline BoundsCheck check_bounds(const WaveState& state, const ModelParams& params, double tol = 1e-8) {
    BoundsCheck b;
    double worst_excess = -std::numeric_limits<double>::infinity();
    auto visit = [&](double v, std::size_t node) {
        const double excess = std::max(-v, v - 1.0);
        if (excess > worst_excess) {
            worst_excess = excess;
            b.worst = {node, v};
        }
    };
    b.min_psi = state.psi.minCoeff();
    b.max_psi = state.psi.maxCoeff();
    for (Eigen::Index k = 0; k < state.psi.size(); ++k) visit(state.psi[k], static_cast<std::size_t>(k));
    if (state.phi) {
        const Vector line = params.mu * *state.phi;
        b.min_line = line.minCoeff();
        b.max_line = line.maxCoeff();
        for (Eigen::Index k = 0; k < line.size(); ++k)
            visit(line[k], static_cast<std::size_t>(state.psi.size() + k));
    }
    b.ok = worst_excess <= tol;
    return b;
}

struct MonotonicityCheck {
    bool ok = true;
    double min_forward_difference = 0.0;
    double min_dx_psi = 0.0;  ///< min forward difference of psi divided by hx
    Offender worst;           ///< left node of the worst pair; line nodes follow the strip nodes
};

inline MonotonicityCheck check_monotonicity(const WaveState& state, const Grid& grid, double tol = 1e-6) {
    MonotonicityCheck m;
    double worst = std::numeric_limits<double>::infinity();
    double worst_psi = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < grid.ny; ++j) {
        for (std::size_t i = 0; i + 1 < grid.nx; ++i) {
            const auto k = grid.node(i, j);
            const double diff = state.psi[static_cast<Eigen::Index>(k + 1)] - state.psi[static_cast<Eigen::Index>(k)];
            worst_psi = std::min(worst_psi, diff);
            if (diff < worst) {
                worst = diff;
                m.worst = {k, diff};
            }
        }
    }
    if (state.phi) {
        const Vector& phi = *state.phi;
        for (Eigen::Index i = 0; i + 1 < phi.size(); ++i) {
            const double diff = phi[i + 1] - phi[i];
            if (diff < worst) {
                worst = diff;
                m.worst = {grid.nodes() + static_cast<std::size_t>(i), diff};
            }
        }
    }
    m.min_forward_difference = worst;
    m.min_dx_psi = worst_psi / grid.hx;
    m.ok = worst >= -tol;
    return m;
}

struct SandwichCheck {
    bool ok = true;
    double min_psi = 0.0;
    double max_psi = 0.0;
    Offender worst;  ///< line node index and mu phi value
};

/// inf psi <= mu phi <= sup psi on the line.
inline SandwichCheck check_sandwich(const WaveState& state, const ModelParams& params, double tol = 1e-8) {
    if (!state.family.is_exchange() || !state.phi)
        throw Error(ErrorCode::WrongFamily, "sandwich check needs an Exchange state");
    SandwichCheck s;
    s.min_psi = state.psi.minCoeff();
    s.max_psi = state.psi.maxCoeff();
    double worst = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < state.phi->size(); ++i) {
        const double v = params.mu * (*state.phi)[i];
        const double excess = std::max(s.min_psi - v, v - s.max_psi);
        if (excess > worst) {
            worst = excess;
            s.worst = {static_cast<std::size_t>(i), v};
        }
    }
    s.ok = worst <= tol;
    return s;
}

/// c estimated from the integral identity c (L + s/mu) = integral of f(psi) over the strip
/// (s = 1 for the Exchange family), with trapezoidal quadrature.
inline double speed_identity(const WaveState& state, const ModelParams& params, const NonlinearitySpec& spec,
                             const Grid& grid) {
    double total = 0.0;
    for (std::size_t j = 0; j < grid.ny; ++j) {
        const double wy = (j == 0 || j == grid.ny - 1) ? 0.5 : 1.0;
        for (std::size_t i = 0; i < grid.nx; ++i) {
            const double wx = (i == 0 || i == grid.nx - 1) ? 0.5 : 1.0;
            total += wx * wy * eval_nonlinearity(state.psi[static_cast<Eigen::Index>(grid.node(i, j))], spec).f;
        }
    }
    total *= grid.hx * grid.hy;
    return total / (params.L + state.family.s() / params.mu);
}

struct LeftDecayCheck {
    bool ok = true;
    double rate = 0.0;     ///< c / max(d, D)
    double x_theta = 0.0;  ///< rightmost x with max_y psi <= theta
    Offender worst;        ///< largest excess psi - bound
};

/// psi(x, y) <= theta exp(r (x - x_theta)) for x <= x_theta with r = c / max(d, D).
inline LeftDecayCheck left_decay_bound(const WaveState& state, const ModelParams& params, const NonlinearitySpec& spec,
                                       const Grid& grid, double tol = 1e-8) {
    LeftDecayCheck out;
    out.rate = state.c / std::max(params.d, params.D);
    std::optional<std::size_t> i_theta;
    for (std::size_t i = 0; i < grid.nx; ++i) {
        double col_max = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < grid.ny; ++j)
            col_max = std::max(col_max, state.psi[static_cast<Eigen::Index>(grid.node(i, j))]);
        if (col_max <= spec.theta) i_theta = i;
    }
    if (!i_theta) throw Error(ErrorCode::ThresholdNotCrossed, "psi exceeds theta on every column");
    out.x_theta = grid.x(*i_theta);
    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < grid.ny; ++j) {
        for (std::size_t i = 0; i <= *i_theta; ++i) {
            const auto k = grid.node(i, j);
            const double bound = spec.theta * std::exp(out.rate * (grid.x(i) - out.x_theta));
            const double excess = state.psi[static_cast<Eigen::Index>(k)] - bound;
            if (excess > worst) {
                worst = excess;
                out.worst = {k, excess};
            }
        }
    }
    out.ok = worst <= tol;
    return out;
}

/// Inputs of the transcendental equation for the rate gamma of 1 - psi ~ exp(-gamma x)
/// cosh(beta (y + L)) at +infinity. parameter is s (Wentzell) or epsilon (Exchange, 0 allowed).
struct DispersionQuery {
    double c = 0.0;
    ModelParams params;
    FamilyKind family = FamilyKind::Wentzell;
    double parameter = 1.0;
    double fprime1 = -1.0;
    /// Weight on f'(1) inside beta: 1 is the true linearization at psi = 1; 1/2 reproduces the
    /// halved-linearization supersolution whose rate is a guaranteed lower bound.
    double linearization_weight = 1.0;
};

struct DispersionRoot {
    double gamma = 0.0;
    double gamma_lim = 0.0;  ///< positive zero of beta(gamma)
};

namespace detail {

inline double dispersion_beta(const DispersionQuery& q, double g) {
    const auto& p = q.params;
    return std::sqrt(std::max(0.0, -q.linearization_weight * q.fprime1 / p.d - g * (g + q.c / p.d)));
}

inline double dispersion_gap(const DispersionQuery& q, double g) {
    const auto& p = q.params;
    const double beta = dispersion_beta(q, g);
    const double bt = beta * std::tanh(beta * p.L);
    const double tangential = p.D * g * g + q.c * g;
    if (q.family == FamilyKind::Wentzell) return q.parameter * tangential - p.mu * p.d * bt;
    return tangential - p.mu * p.d * bt / (1.0 + q.parameter * p.d * bt);
}

} // namespace detail

inline double dispersion_gamma_lim(const DispersionQuery& q) {
    const double d = q.params.d;
    return (-q.c + std::sqrt(q.c * q.c - 4.0 * q.linearization_weight * d * q.fprime1)) / (2.0 * d);
}

/// Bisection on (0, gamma_lim).
///   Wentzell(s):   s (D g^2 + c g) = mu d beta tanh(beta L)
///   Exchange(eps): D g^2 + c g     = mu d beta tanh(beta L) / (1 + eps d beta tanh(beta L))
/// At s = 0 the root is gamma_lim itself (the y-independent 1-D rate).
inline DispersionRoot dispersion_root(const DispersionQuery& q) {
    if (!(q.fprime1 < 0.0)) throw Error(ErrorCode::InvalidArgument, "f'(1) must be negative");
    if (!(q.c > 0.0)) throw Error(ErrorCode::InvalidArgument, "c must be positive");
    if (q.parameter < 0.0) throw Error(ErrorCode::InvalidArgument, "family parameter must be non-negative");
    DispersionRoot out;
    out.gamma_lim = dispersion_gamma_lim(q);
    if (q.family == FamilyKind::Wentzell && q.parameter == 0.0) {
        out.gamma = out.gamma_lim;
        return out;
    }
    double lo = 0.0;
    double hi = out.gamma_lim;
    const double g_lo = detail::dispersion_gap(q, lo);
    const double g_hi = detail::dispersion_gap(q, hi);
    if (!(g_lo < 0.0 && g_hi > 0.0)) throw Error(ErrorCode::NoRoot, "dispersion bracket does not straddle a root");
    for (int k = 0; k < 200 && hi - lo > 0.0; ++k) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        if (detail::dispersion_gap(q, mid) < 0.0)
            lo = mid;
        else
            hi = mid;
    }
    out.gamma = 0.5 * (lo + hi);
    return out;
}

inline DispersionQuery make_dispersion_query(const WaveState& state, const ModelParams& params,
                                             const NonlinearitySpec& spec, double linearization_weight = 1.0) {
    DispersionQuery q;
    q.c = state.c;
    q.params = params;
    q.family = state.family.kind();
    q.parameter = state.family.parameter();
    q.fprime1 = fprime_at_one(spec);
    q.linearization_weight = linearization_weight;
    return q;
}

/// Least-squares rate of 1 - psi(x, -L) over the window where 1e-8 < 1 - psi < 1e-2,
/// stopping 5 cells before the right end.
inline double fit_right_decay(const WaveState& state, const Grid& grid) {
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    std::size_t n = 0;
    bool started = false;
    if (grid.nx < 7) throw Error(ErrorCode::WindowEmpty, "grid too short for a decay window");
    for (std::size_t i = 0; i + 5 < grid.nx; ++i) {
        const double gap = 1.0 - state.psi[static_cast<Eigen::Index>(grid.node(i, 0))];
        const bool inside = gap > 1e-8 && gap < 1e-2;
        if (!inside) {
            if (started) break;
            continue;
        }
        started = true;
        const double x = grid.x(i);
        const double y = std::log(gap);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++n;
    }
    if (n < 3) throw Error(ErrorCode::WindowEmpty, "fewer than 3 nodes with 1e-8 < 1 - psi < 1e-2");
    const double nn = static_cast<double>(n);
    const double slope = (nn * sxy - sx * sy) / (nn * sxx - sx * sx);
    return -slope;
}

struct TranslationCollapse {
    double shift = 0.0;     ///< r minimizing sup |psi_a(x + r, y) - psi_b(x, y)|
    double sup_dist = 0.0;
};

/// Best x-translation between two strip fields on grids of identical spacing and height.
/// Integer node shifts are scanned, then the minimizer is refined by a parabola through the
/// neighbouring shifts with linear interpolation in x.
inline TranslationCollapse translation_collapse(const WaveState& a, const Grid& grid_a, const WaveState& b,
                                                const Grid& grid_b) {
    auto same = [](double u, double v) { return std::abs(u - v) <= 1e-12 * std::max(std::abs(u), std::abs(v)); };
    if (grid_a.ny != grid_b.ny || !same(grid_a.hx, grid_b.hx) || !same(grid_a.hy, grid_b.hy) ||
        a.family.kind() != b.family.kind())
        throw Error(ErrorCode::GridMismatch, "translation collapse needs grids of identical spacing and family");
    check_shape(a, grid_a);
    check_shape(b, grid_b);

    const double hx = grid_a.hx;
    const auto ia0 = static_cast<double>(grid_a.anchor_i);
    const auto ib0 = static_cast<double>(grid_b.anchor_i);
    // sup distance with psi_a sampled at x_b + r, r = t hx, over nodes of b whose shifted
    // position lies inside a.
    auto dist = [&](double t) {
        double worst = 0.0;
        for (std::size_t ib = 0; ib < grid_b.nx; ++ib) {
            const double pos = static_cast<double>(ib) - ib0 + ia0 + t;
            if (pos < 0.0 || pos > static_cast<double>(grid_a.nx - 1)) continue;
            const auto k = std::min(static_cast<std::size_t>(pos), grid_a.nx - 2);
            const double w = pos - static_cast<double>(k);
            for (std::size_t j = 0; j < grid_b.ny; ++j) {
                const double va = (1.0 - w) * a.psi[static_cast<Eigen::Index>(grid_a.node(k, j))] +
                                  w * a.psi[static_cast<Eigen::Index>(grid_a.node(k + 1, j))];
                const double vb = b.psi[static_cast<Eigen::Index>(grid_b.node(ib, j))];
                worst = std::max(worst, std::abs(va - vb));
            }
        }
        return worst;
    };

    const long reach = static_cast<long>(std::min(grid_a.nx, grid_b.nx) / 4);
    long best_k = 0;
    double best = dist(0.0);
    for (long k = -reach; k <= reach; ++k) {
        const double v = dist(static_cast<double>(k));
        if (v < best) {
            best = v;
            best_k = k;
        }
    }
    TranslationCollapse out{static_cast<double>(best_k) * hx, best};
    const double dm = dist(static_cast<double>(best_k - 1));
    const double dp = dist(static_cast<double>(best_k + 1));
    const double curv = dm - 2.0 * best + dp;
    if (curv > 0.0) {
        const double delta = std::clamp(0.5 * (dm - dp) / curv, -0.5, 0.5);
        const double refined = dist(static_cast<double>(best_k) + delta);
        if (refined < best) out = {(static_cast<double>(best_k) + delta) * hx, refined};
    }
    return out;
}

/// All per-record diagnostics.
struct DiagnosticsReport {
    bool bounds_ok = false;
    bool monotone_ok = false;
    std::optional<bool> sandwich_ok;  ///< Exchange only
    std::optional<bool> left_decay_ok;  ///< empty when psi never drops below theta
    bool speed_identity_ok = false;
    bool speed_bound_ok = false;        ///< 0 < c < c_max
    std::optional<bool> right_decay_ok; ///< empty when the fit or the dispersion root is unavailable

    double speed_identity_c = 0.0;
    double speed_identity_gap = 0.0;  ///< |c_est - c| / c
    double gamma_fit = std::numeric_limits<double>::quiet_NaN();
    double gamma_pred = std::numeric_limits<double>::quiet_NaN();
    double gamma_lower = std::numeric_limits<double>::quiet_NaN();  ///< halved-linearization rate
    double gamma_lim = std::numeric_limits<double>::quiet_NaN();
    double c_max = 0.0;
    double cmax_margin = 0.0;
    double min_psi = 0.0;
    double max_psi = 0.0;
    double min_dx_psi = 0.0;

    Offender bounds_worst;
    Offender monotone_worst;
    Offender sandwich_worst;
    Offender left_decay_worst;

    /// Properties that must hold at every converged record.
    [[nodiscard]] bool invariants_ok() const {
        return bounds_ok && monotone_ok && sandwich_ok.value_or(true) && left_decay_ok.value_or(true) &&
               speed_identity_ok && speed_bound_ok;
    }
};

/// Evaluates every check on a converged state. Lip f is computed once per instance.
class Diagnostics {
public:
    Diagnostics(ModelParams params, NonlinearitySpec spec, Grid grid, Tolerances tol = {})
        : params_(params), spec_(spec), grid_(grid), tol_(tol), c_max_(c_max(params, spec)) {}

    [[nodiscard]] double speed_bound() const noexcept { return c_max_; }
    [[nodiscard]] const Tolerances& tolerances() const noexcept { return tol_; }

    [[nodiscard]] DiagnosticsReport run(const WaveState& state) const {
        DiagnosticsReport r;
        const BoundsCheck b = check_bounds(state, params_, tol_.bounds);
        r.bounds_ok = b.ok;
        r.bounds_worst = b.worst;
        r.min_psi = b.min_psi;
        r.max_psi = b.max_psi;

        const MonotonicityCheck m = check_monotonicity(state, grid_, tol_.monotone);
        r.monotone_ok = m.ok;
        r.monotone_worst = m.worst;
        r.min_dx_psi = m.min_dx_psi;

        if (state.family.is_exchange()) {
            const SandwichCheck s = check_sandwich(state, params_, tol_.sandwich);
            r.sandwich_ok = s.ok;
            r.sandwich_worst = s.worst;
        }

        r.speed_identity_c = speed_identity(state, params_, spec_, grid_);
        r.speed_identity_gap = std::abs(r.speed_identity_c - state.c) / state.c;
        r.speed_identity_ok = r.speed_identity_gap < tol_.speed_identity;

        r.c_max = c_max_;
        r.cmax_margin = c_max_ - state.c;
        r.speed_bound_ok = state.c > 0.0 && state.c < c_max_;

        try {
            const LeftDecayCheck l = left_decay_bound(state, params_, spec_, grid_, tol_.left_decay);
            r.left_decay_ok = l.ok;
            r.left_decay_worst = l.worst;
        } catch (const Error&) {
        }

        if (state.c > 0.0) {
            try {
                const DispersionRoot full = dispersion_root(make_dispersion_query(state, params_, spec_, 1.0));
                r.gamma_pred = full.gamma;
                r.gamma_lim = full.gamma_lim;
            } catch (const Error&) {
            }
            try {
                r.gamma_lower = dispersion_root(make_dispersion_query(state, params_, spec_, 0.5)).gamma;
            } catch (const Error&) {
            }
        }
        try {
            r.gamma_fit = fit_right_decay(state, grid_);
        } catch (const Error&) {
        }
        if (std::isfinite(r.gamma_fit) && std::isfinite(r.gamma_pred)) {
            const bool close = std::abs(r.gamma_fit - r.gamma_pred) <= tol_.decay_rate * r.gamma_pred;
            const bool above_lower = !std::isfinite(r.gamma_lower) || r.gamma_fit >= r.gamma_lower;
            r.right_decay_ok = close && above_lower;
        }
        return r;
    }

private:
    ModelParams params_;
    NonlinearitySpec spec_;
    Grid grid_;
    Tolerances tol_;
    double c_max_;
};

} // namespace wave
