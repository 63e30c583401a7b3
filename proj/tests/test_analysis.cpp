#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "wave/analysis.hpp"

namespace {

using namespace wave;

SymbolQuery query(double xi, double eps, const ModelParams& p = {}) { return {xi, eps, 1.0, 0.0, p}; }

TEST(Symbol, ValueAtZeroFrequency) {
    EXPECT_NEAR(std::abs(wentzell_symbol_denominator(query(0.0, 0.0, {1.0, 4.0, 1.0, 1.0})) - 1.1752011936438014), 0.0,
                1e-15);
    const ModelParams p{2.5, 3.0, 0.7, 1.7};
    const auto f = wentzell_symbol_denominator(query(0.0, 0.4, p));
    EXPECT_NEAR(f.real(), 2.5 * std::sinh(1.7), 1e-12);
    EXPECT_EQ(f.imag(), 0.0);
}

TEST(Symbol, GrowthAtLargeFrequency) {
    const double ratio = std::abs(wentzell_symbol_denominator(query(20.0, 0.0))) /
                         std::abs(wentzell_symbol_denominator(query(10.0, 0.0)));
    EXPECT_GT(ratio, 1e3);
}

TEST(Symbol, ConjugateSymmetry) {
    const ModelParams p{1.3, 4.0, 0.8, 1.2};
    for (double xi : {0.1, 1.0, 3.7, 12.0}) {
        for (double eps : {0.0, 0.3}) {
            SymbolQuery q{xi, eps, 0.9, 0.4, p};
            const auto a = wentzell_symbol_denominator(q);
            q.xi = -xi;
            const auto b = wentzell_symbol_denominator(q);
            EXPECT_NEAR(std::abs(a - std::conj(b)), 0.0, 1e-12 * std::abs(a));
        }
    }
}

TEST(Symbol, ScanIsZeroFreeForDefaults) {
    const auto s0 = scan_symbol_zero_free({}, 0.0, 1.0, 0.0, 50.0, 10000);
    EXPECT_TRUE(s0.zero_free());
    EXPECT_GT(s0.min_abs, 0.0);
    const auto s1 = scan_symbol_zero_free({}, 1.0, 1.0, 0.0, 50.0, 10000);
    EXPECT_GE(s1.min_abs, s0.min_abs);
    // The minimum sits next to xi = 0, where |F| = d sinh(L).
    EXPECT_NEAR(s0.min_abs, std::sinh(1.0), 1e-3);
    EXPECT_LT(std::abs(s0.argmin_xi), 0.01);
}

TEST(Symbol, RejectsBadScan) {
    EXPECT_THROW((void)sample_symbol({}, 0.0, 1.0, 0.0, 50.0, 1), Error);
    EXPECT_THROW((void)sample_symbol({}, 0.0, 1.0, 0.0, -1.0, 10), Error);
    EXPECT_THROW((void)wentzell_symbol_denominator(query(1.0, -0.1)), Error);
}

// Independent oracle: trapezoid rule on the same integral with a fixed fine step.
double k0_trapezoid(double x) {
    const double t_max = std::acosh(std::max(1.0, 60.0 / x)) + 1.0;
    const int n = 200000;
    const double h = t_max / n;
    double sum = 0.5 * std::exp(-x);
    for (int k = 1; k <= n; ++k) sum += std::exp(-x * std::cosh(k * h));
    return sum * h;
}

TEST(BesselK0, MatchesQuadratureOracle) {
    EXPECT_NEAR(bessel_k0(1.0), k0_trapezoid(1.0), 1e-8);
    EXPECT_NEAR(bessel_k0(1.0), 0.4210244382407084, 1e-10);
    for (double x : {1e-3, 0.05, 0.5, 2.0, 7.5, 30.0})
        EXPECT_NEAR(bessel_k0(x), std::cyl_bessel_k(0.0, x), 1e-8 * std::max(1.0, std::cyl_bessel_k(0.0, x))) << x;
}

TEST(BesselK0, LargeArgumentAsymptotics) {
    const double x = 20.0;
    EXPECT_NEAR(bessel_k0(x) * std::sqrt(x) * std::exp(x) / std::sqrt(std::numbers::pi / 2.0), 1.0, 0.01);
    EXPECT_NEAR(bessel_k0(x) / std::cyl_bessel_k(0.0, x), 1.0, 1e-8);
}

TEST(BesselK0, DomainError) {
    for (double x : {0.0, -1.0}) {
        try {
            (void)bessel_k0(x);
            FAIL();
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), ErrorCode::DomainError);
        }
    }
}

TEST(BesselK0, LineIntegralIsPi) { EXPECT_NEAR(k0_line_integral(), std::numbers::pi, 1e-6); }

TEST(BesselK0, ApproximateIdentityMass) {
    for (double eps : {0.1, 0.05, 0.01}) EXPECT_NEAR(exchange_kernel_mass(1.0, eps), 1.0, 1e-4) << eps;
    EXPECT_NEAR(exchange_kernel_mass(2.5, 0.3), 1.0, 1e-4);
}

} // namespace
