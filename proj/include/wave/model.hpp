#pragma once

// Physical constants of the strip/line system and the ignition reaction term.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <string_view>

#include "wave/error.hpp"

namespace wave {

/// Strip diffusivity d, line diffusivity D, exchange ratio mu and strip depth L.
struct ModelParams {
    double d = 1.0;
    double D = 4.0;
    double mu = 1.0;
    double L = 1.0;

    void validate() const {
        auto check = [](double v, const char* name) {
            if (!(v > 0.0) || !std::isfinite(v))
                throw Error(ErrorCode::Validation, std::string(name) + " must be strictly positive");
        };
        check(d, "d");
        check(D, "D");
        check(mu, "mu");
        check(L, "L");
    }
};

enum class NonlinearityKind {
    SmoothCubic,            ///< (u - theta)^2 (1 - u) on (theta, 1]
    PiecewiseLinearOracle,  ///< (1 - u) on (theta, 1]; discontinuous at theta, test fixture only
};

inline std::string_view to_string(NonlinearityKind k) {
    return k == NonlinearityKind::SmoothCubic ? "SmoothCubic" : "PiecewiseLinearOracle";
}

inline NonlinearityKind nonlinearity_kind_from_string(std::string_view s) {
    if (s == "SmoothCubic") return NonlinearityKind::SmoothCubic;
    if (s == "PiecewiseLinearOracle") return NonlinearityKind::PiecewiseLinearOracle;
    throw Error(ErrorCode::Validation, "unknown nonlinearity kind '" + std::string(s) + "'");
}

struct NonlinearitySpec {
    NonlinearityKind kind = NonlinearityKind::SmoothCubic;
    double theta = 0.3;

    void validate() const {
        if (!(theta > 0.0 && theta < 1.0))
            throw Error(ErrorCode::Validation, "theta must lie in (0,1)");
    }
};

struct ReactionValue {
    double f;
    double fprime;
};

namespace detail {

// Active branch on (theta, 1], evaluated as a formula so it can be used at theta itself
// to obtain right limits.
inline ReactionValue active_branch(double u, const NonlinearitySpec& spec) {
    switch (spec.kind) {
    case NonlinearityKind::SmoothCubic: {
        const double a = u - spec.theta;
        const double b = 1.0 - u;
        return {a * a * b, 2.0 * a * b - a * a};
    }
    case NonlinearityKind::PiecewiseLinearOracle:
        return {1.0 - u, -1.0};
    }
    return {0.0, 0.0};
}

} // namespace detail

/// f'(1), strictly negative for every supported kind.
inline double fprime_at_one(const NonlinearitySpec& spec) {
    return detail::active_branch(1.0, spec).fprime;
}

/// f and its one-sided derivative with the extension convention: zero left of theta,
/// tangent line right of 1. At the kink u = theta the right derivative is returned.
inline ReactionValue eval_nonlinearity(double u, const NonlinearitySpec& spec) {
    if (u < spec.theta) return {0.0, 0.0};
    if (u == spec.theta) return {0.0, detail::active_branch(u, spec).fprime};
    if (u > 1.0) {
        const double slope = fprime_at_one(spec);
        return {slope * (u - 1.0), slope};
    }
    return detail::active_branch(u, spec);
}

/// Right-continuous evaluation: at u = theta the active branch is used for f as well.
/// Only differs from eval_nonlinearity for discontinuous kinds.
inline ReactionValue eval_nonlinearity_right(double u, const NonlinearitySpec& spec) {
    if (u < spec.theta) return {0.0, 0.0};
    if (u > 1.0) return eval_nonlinearity(u, spec);
    return detail::active_branch(u, spec);
}

namespace detail {

// Golden-section maximization of g on [a, b]; returns the best value seen.
template <class F>
double golden_max(F&& g, double a, double b, int iters = 100) {
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = b - inv_phi * (b - a);
    double x2 = a + inv_phi * (b - a);
    double g1 = g(x1);
    double g2 = g(x2);
    double best = std::max({g(a), g(b), g1, g2});
    for (int k = 0; k < iters && (b - a) > 1e-15; ++k) {
        if (g1 < g2) {
            a = x1;
            x1 = x2;
            g1 = g2;
            x2 = a + inv_phi * (b - a);
            g2 = g(x2);
        } else {
            b = x2;
            x2 = x1;
            g2 = g1;
            x1 = b - inv_phi * (b - a);
            g1 = g(x1);
        }
        best = std::max({best, g1, g2});
    }
    return best;
}

// Dense scan of g on [lo, hi] with n points, refined around the best sample.
template <class F>
double scan_max(F&& g, double lo, double hi, std::size_t n) {
    const double h = (hi - lo) / static_cast<double>(n - 1);
    std::size_t best_k = 0;
    double best = g(lo);
    for (std::size_t k = 1; k < n; ++k) {
        const double v = g(lo + h * static_cast<double>(k));
        if (v > best) {
            best = v;
            best_k = k;
        }
    }
    const double a = lo + h * static_cast<double>(best_k == 0 ? 0 : best_k - 1);
    const double b = std::min(hi, lo + h * static_cast<double>(best_k + 1));
    return std::max(best, golden_max(g, a, b));
}

} // namespace detail

/// sup over [0,1] of |f'|, one-sided at kinks.
inline double lipschitz_constant(const NonlinearitySpec& spec) {
    auto g = [&](double u) { return std::abs(eval_nonlinearity(u, spec).fprime); };
    return detail::scan_max(g, 0.0, 1.0, 1'000'000);
}

/// sup over (0,1] of f(u)/u using right limits. f(u) <= K u makes 2 sqrt(d K) an upper bound
/// on the 1-D speed even when f jumps at theta.
inline double ignition_slope_bound(const NonlinearitySpec& spec) {
    auto g = [&](double u) { return eval_nonlinearity_right(u, spec).f / u; };
    return detail::scan_max(g, spec.theta, 1.0, 100'000);
}

/// Closed-form upper bound on the wave speed of the strip/line system.
inline double c_max(const ModelParams& params, double lipschitz) {
    if (params.D <= 2.0 * params.d) return 2.0 * std::sqrt(params.d * lipschitz);
    return std::sqrt(params.D * params.D / (params.D - params.d) * lipschitz);
}

inline double c_max(const ModelParams& params, const NonlinearitySpec& spec) {
    return c_max(params, lipschitz_constant(spec));
}

} // namespace wave
