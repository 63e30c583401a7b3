#pragma once

// Fourier-side checks for the Wentzell/exchange boundary operator: the denominator of the
// boundary symbol, a real-axis scan for zeros, and the K0 kernel behind the
// approximation-to-identity argument.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <numbers>
#include <vector>

#include "wave/error.hpp"
#include "wave/model.hpp"

namespace wave {

struct SymbolQuery {
    double xi = 0.0;
    double epsilon = 0.0;
    double c0 = 0.0;
    double c1 = 0.0;
    ModelParams params;
};

/// F(xi) = d beta sinh(beta L) (1 + eps D xi^2/mu + eps (c0 + c1 eps) i xi/mu)
///       + (D xi^2/mu + (c0 + c1 eps) i xi/mu) cosh(beta L),  beta = sqrt(xi^2 + 1).
inline std::complex<double> wentzell_symbol_denominator(const SymbolQuery& q) {
    if (q.epsilon < 0.0) throw Error(ErrorCode::InvalidArgument, "epsilon must be non-negative");
    using namespace std::complex_literals;
    const auto& p = q.params;
    const double beta = std::sqrt(q.xi * q.xi + 1.0);
    const double speed = q.c0 + q.c1 * q.epsilon;
    const std::complex<double> tangential = p.D * q.xi * q.xi / p.mu + speed * q.xi / p.mu * 1i;
    return p.d * beta * std::sinh(beta * p.L) * (1.0 + q.epsilon * tangential) + tangential * std::cosh(beta * p.L);
}

struct SymbolSample {
    double xi;
    std::complex<double> value;
};

/// n uniform frequencies on [-xi_max, xi_max].
inline std::vector<SymbolSample> sample_symbol(const ModelParams& params, double epsilon, double c0, double c1,
                                               double xi_max, std::size_t n) {
    if (n < 2) throw Error(ErrorCode::InvalidArgument, "need at least 2 scan points");
    if (!(xi_max > 0.0)) throw Error(ErrorCode::InvalidArgument, "xi_max must be positive");
    std::vector<SymbolSample> out;
    out.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double xi = -xi_max + 2.0 * xi_max * static_cast<double>(k) / static_cast<double>(n - 1);
        out.push_back({xi, wentzell_symbol_denominator({xi, epsilon, c0, c1, params})});
    }
    return out;
}

struct SymbolScan {
    double min_abs = std::numeric_limits<double>::infinity();
    double argmin_xi = 0.0;
    [[nodiscard]] bool zero_free() const { return min_abs > 0.0; }
};

inline SymbolScan scan_symbol_zero_free(const ModelParams& params, double epsilon, double c0, double c1, double xi_max,
                                        std::size_t n) {
    SymbolScan s;
    for (const auto& sample : sample_symbol(params, epsilon, c0, c1, xi_max, n)) {
        const double a = std::abs(sample.value);
        if (a < s.min_abs) {
            s.min_abs = a;
            s.argmin_xi = sample.xi;
        }
    }
    return s;
}

namespace detail {

template <class F>
double adaptive_simpson_step(F& f, double a, double b, double fa, double fm, double fb, double whole, double tol,
                             int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = f(lm);
    const double frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
    return adaptive_simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           adaptive_simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

template <class F>
double adaptive_simpson(F f, double a, double b, double tol, int max_depth = 40) {
    const double fa = f(a);
    const double fb = f(b);
    const double fm = f(0.5 * (a + b));
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return adaptive_simpson_step(f, a, b, fa, fm, fb, whole, tol, max_depth);
}

} // namespace detail

/// Modified Bessel function K0 from K0(x) = int_0^inf exp(-x cosh t) dt, truncated where the
/// integrand drops below 1e-16.
inline double bessel_k0(double x) {
    if (!(x > 0.0)) throw Error(ErrorCode::DomainError, "K0 needs x > 0");
    const double cut = std::log(1e16);  // exp(-x cosh t) < 1e-16 beyond
    const double t_max = std::acosh(std::max(1.0, cut / x));
    if (t_max == 0.0) return 0.0;
    // Scale the tolerance to the integrand magnitude at t = 0 so large x keeps relative accuracy.
    const double scale = std::exp(-x);
    auto integrand = [x](double t) { return std::exp(-x * std::cosh(t)); };
    // Split so the adaptive rule sees the peak region and the tail separately.
    const double split = std::min(t_max, std::max(0.5, std::acosh(1.0 + 1.0 / x)));
    return detail::adaptive_simpson(integrand, 0.0, split, 1e-14 * scale) +
           (split < t_max ? detail::adaptive_simpson(integrand, split, t_max, 1e-14 * scale) : 0.0);
}

/// Mass of (1/(w pi)) K0(|x|/w) over the real line (1 for every width w > 0). The half-line
/// integral is taken in u = log(x/w), which removes the logarithmic singularity at 0.
inline double k0_kernel_mass(double width = 1.0) {
    if (!(width > 0.0)) throw Error(ErrorCode::DomainError, "kernel width must be positive");
    auto integrand = [width](double u) {
        const double x = width * std::exp(u);
        return bessel_k0(x / width) * x / (width * std::numbers::pi);
    };
    // K0(e^u) e^u ~ -u e^u as u -> -inf and is below 1e-16 once e^u > 40.
    return 2.0 * detail::adaptive_simpson(integrand, -45.0, std::log(40.0), 1e-12, 30);
}

/// int over the real line of K0(|x|) (equals pi).
inline double k0_line_integral() { return std::numbers::pi * k0_kernel_mass(1.0); }

/// The exchange-limit kernel (1/(d eps)) (1/pi) K0(|x|/(d eps)) as an approximation to the identity.
inline double exchange_kernel_mass(double d, double epsilon) { return k0_kernel_mass(d * epsilon); }

} // namespace wave
