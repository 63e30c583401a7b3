#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "wave/residual.hpp"

namespace {

using namespace wave;

const NonlinearitySpec cubic{NonlinearityKind::SmoothCubic, 0.3};

WaveState constant_state(const Grid& g, const HomotopyFamily& fam, double value, double c = 0.7) {
    WaveState s;
    s.c = c;
    s.psi = Vector::Constant(static_cast<Eigen::Index>(g.nodes()), value);
    if (fam.is_exchange()) s.phi = Vector::Constant(static_cast<Eigen::Index>(g.nx), value);
    s.family = fam;
    return s;
}

template <class F>
WaveState field_state(const Grid& g, const HomotopyFamily& fam, double c, F&& psi_of) {
    WaveState s = constant_state(g, fam, 0.0, c);
    for (std::size_t k = 0; k < g.nodes(); ++k) {
        const auto [i, j] = g.ij(k);
        s.psi[static_cast<Eigen::Index>(k)] = psi_of(g.x(i), g.y(j));
    }
    return s;
}

class ConstantStates : public ::testing::TestWithParam<HomotopyFamily> {};

TEST_P(ConstantStates, ZeroState) {
    const ModelParams p{};
    const Grid g = build_grid(p, -2, 2, 9, 5);
    const WaveState s = constant_state(g, GetParam(), 0.0);
    const Vector r = assemble_residual(s, p, cubic, g);
    const DofLayout lay = dof_layout(g, s.family);
    for (Eigen::Index k = 0; k < r.size(); ++k) {
        const auto row = static_cast<std::size_t>(k);
        double expect = 0.0;
        if (row == lay.c_index)
            expect = -0.65;
        else if (row < lay.strip_size && g.ij(row).first == g.nx - 1)
            expect = -1.0;
        else if (lay.line_size > 0 && row == lay.line_offset + g.nx - 1)
            expect = -1.0;
        EXPECT_NEAR(r[k], expect, 1e-14) << "row " << row;
    }
}

TEST_P(ConstantStates, UnitState) {
    const ModelParams p{1.0, 4.0, 2.0, 1.0};
    const Grid g = build_grid(p, -2, 2, 9, 5);
    WaveState s = constant_state(g, GetParam(), 1.0);
    if (s.phi) s.phi->setConstant(1.0 / p.mu);
    const Vector r = assemble_residual(s, p, cubic, g);
    const DofLayout lay = dof_layout(g, s.family);
    for (Eigen::Index k = 0; k < r.size(); ++k) {
        const auto row = static_cast<std::size_t>(k);
        double expect = 0.0;
        if (row == lay.c_index)
            expect = 0.35;
        else if (row < lay.strip_size && g.ij(row).first == 0)
            expect = 1.0;
        else if (lay.line_size > 0 && row == lay.line_offset)
            expect = 1.0;
        EXPECT_NEAR(r[k], expect, 1e-13) << "row " << row;
    }
}

INSTANTIATE_TEST_SUITE_P(Families, ConstantStates,
                         ::testing::Values(HomotopyFamily::wentzell(0.0), HomotopyFamily::wentzell(0.5),
                                           HomotopyFamily::exchange(0.3)));

TEST(Residual, QuadraticIsExactInInterior) {
    const ModelParams p{1.5, 4.0, 1.0, 1.0};
    const Grid g = build_grid(p, -0.5, 0.5, 11, 5);
    const double c = 0.8;
    // Keep psi below theta so f vanishes and only the stencils remain.
    const WaveState s = field_state(g, HomotopyFamily::wentzell(1.0), c, [](double x, double) { return 0.1 * x * x; });
    const Vector r = assemble_residual(s, p, cubic, g);
    for (std::size_t j = 1; j + 1 < g.ny; ++j)
        for (std::size_t i = 1; i + 1 < g.nx; ++i)
            EXPECT_NEAR(r[static_cast<Eigen::Index>(g.node(i, j))], 0.1 * (-2.0 * p.d + 2.0 * c * g.x(i)), 1e-12);
}

TEST(Residual, RejectsWrongShape) {
    const Grid g = build_grid({}, -2, 2, 9, 5);
    WaveState s = constant_state(g, HomotopyFamily::exchange(0.5), 0.2);
    s.phi.reset();
    EXPECT_THROW(assemble_residual(s, {}, cubic, g), Error);
    s = constant_state(g, HomotopyFamily::wentzell(0.5), 0.2);
    s.psi.resize(3);
    try {
        assemble_residual(s, {}, cubic, g);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ShapeMismatch);
    }
}

TEST(Jacobian, SpeedColumnVanishesOnFlatState) {
    const Grid g = build_grid({}, -2, 2, 9, 5);
    for (const auto& fam : {HomotopyFamily::wentzell(0.7), HomotopyFamily::exchange(0.2)}) {
        const WaveState s = constant_state(g, fam, 0.0);
        const SparseMatrix J = assemble_jacobian(s, {}, cubic, g);
        const auto ci = static_cast<Eigen::Index>(dof_layout(g, fam).c_index);
        EXPECT_EQ(Eigen::VectorXd(J.col(ci)).cwiseAbs().maxCoeff(), 0.0);
    }
}

TEST(Jacobian, HandStencilTableOnFiveByFive) {
    const ModelParams p{1.0, 4.0, 1.0, 1.0};
    const Grid g = build_grid(p, -2, 2, 5, 5);  // hx = 1, hy = 0.25
    const WaveState s = constant_state(g, HomotopyFamily::wentzell(1.0), 0.5, 0.5);
    const Eigen::MatrixXd J(assemble_jacobian(s, p, cubic, g));
    const auto n = [&](std::size_t i, std::size_t j) { return static_cast<Eigen::Index>(g.node(i, j)); };
    const auto row = n(2, 2);
    // 2d/hx^2 + 2d/hy^2 - f'(0.5) with f'(0.5) = 2(0.2)(0.5) - 0.2^2.
    EXPECT_NEAR(J(row, n(2, 2)), 2.0 + 32.0 - 0.16, 1e-13);
    EXPECT_NEAR(J(row, n(3, 2)), -1.0 + 0.25, 1e-14);
    EXPECT_NEAR(J(row, n(1, 2)), -1.0 - 0.25, 1e-14);
    EXPECT_NEAR(J(row, n(2, 3)), -16.0, 1e-14);
    EXPECT_NEAR(J(row, n(2, 1)), -16.0, 1e-14);
    // Bottom row: d (-3, 4, -1) / (2 hy).
    EXPECT_NEAR(J(n(2, 0), n(2, 0)), -6.0, 1e-14);
    EXPECT_NEAR(J(n(2, 0), n(2, 1)), 8.0, 1e-14);
    EXPECT_NEAR(J(n(2, 0), n(2, 2)), -2.0, 1e-14);
    // Top row, Wentzell(1): d (3, -4, 1) / (2 hy) plus (D/mu)(2/hx^2) on the diagonal.
    EXPECT_NEAR(J(n(2, 4), n(2, 4)), 6.0 + 8.0, 1e-14);
    EXPECT_NEAR(J(n(2, 4), n(3, 4)), -(4.0 - 0.25), 1e-14);
    EXPECT_NEAR(J(n(2, 4), n(1, 4)), -(4.0 + 0.25), 1e-14);
    EXPECT_NEAR(J(n(0, 3), n(0, 3)), 1.0, 0.0);
}

WaveState random_state(const Grid& g, const HomotopyFamily& fam, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-0.1, 1.1);
    WaveState s = constant_state(g, fam, 0.0, std::uniform_real_distribution<double>(0.05, 1.5)(rng));
    for (Eigen::Index k = 0; k < s.psi.size(); ++k) s.psi[k] = u(rng);
    if (s.phi)
        for (Eigen::Index k = 0; k < s.phi->size(); ++k) (*s.phi)[k] = u(rng);
    return s;
}

double directional_mismatch(const WaveState& s, const ModelParams& p, const NonlinearitySpec& spec, const Grid& g,
                            std::mt19937_64& rng) {
    const Vector u = pack(s, g);
    Vector v(u.size());
    std::normal_distribution<double> n(0.0, 1.0);
    for (Eigen::Index k = 0; k < v.size(); ++k) v[k] = n(rng);
    const double h = 1e-6;
    const Vector rp = assemble_residual(unpack(u + h * v, g, s.family), p, spec, g);
    const Vector rm = assemble_residual(unpack(u - h * v, g, s.family), p, spec, g);
    const Vector fd = (rp - rm) / (2.0 * h);
    const Vector jv = assemble_jacobian(s, p, spec, g) * v;
    return (fd - jv).lpNorm<Eigen::Infinity>() / jv.lpNorm<Eigen::Infinity>();
}

TEST(Jacobian, FiniteDifferenceDirectionalDerivative) {
    const ModelParams p{1.0, 4.0, 1.3, 1.0};
    const Grid g = build_grid(p, -3, 3, 25, 9);
    std::mt19937_64 rng(20240611);
    std::uniform_real_distribution<double> par(0.05, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        const auto w = random_state(g, HomotopyFamily::wentzell(par(rng)), rng);
        EXPECT_LT(directional_mismatch(w, p, cubic, g, rng), 1e-6) << "Wentzell trial " << trial;
        const auto e = random_state(g, HomotopyFamily::exchange(par(rng)), rng);
        EXPECT_LT(directional_mismatch(e, p, cubic, g, rng), 1e-6) << "Exchange trial " << trial;
    }
}

TEST(Jacobian, PatternIndependentOfState) {
    const Grid g = build_grid({}, -3, 3, 13, 5);
    std::mt19937_64 rng(7);
    const auto a = random_state(g, HomotopyFamily::exchange(0.4), rng);
    WaveState b = constant_state(g, HomotopyFamily::exchange(0.4), 0.0);
    const SparseMatrix ja = assemble_jacobian(a, {}, cubic, g);
    const SparseMatrix jb = assemble_jacobian(b, {}, cubic, g);
    EXPECT_EQ(ja.nonZeros(), jb.nonZeros());
}

double smooth_psi(double x, double y) { return 0.5 + 0.4 * std::tanh(x) + 0.1 * std::cos(2.0 * y) * std::sin(x); }

TEST(FamilyContinuity, ExchangeRowsSumToWentzellRow) {
    const ModelParams p{1.2, 3.0, 1.7, 1.0};
    const Grid g = build_grid(p, -3, 3, 31, 9);
    const double c = 0.6;
    const WaveState w = field_state(g, HomotopyFamily::wentzell(1.0), c, smooth_psi);
    const Vector rw = assemble_residual(w, p, cubic, g);
    const auto top = g.top();

    auto exchange_sum_gap = [&](double eps, bool perturb) {
        WaveState e = w;
        e.family = HomotopyFamily::exchange(eps);
        Vector phi(static_cast<Eigen::Index>(g.nx));
        for (std::size_t i = 0; i < g.nx; ++i) {
            const double trace = w.psi[static_cast<Eigen::Index>(g.node(i, top))];
            const double flux = p.d * (3.0 * trace - 4.0 * w.psi[static_cast<Eigen::Index>(g.node(i, top - 1))] +
                                       w.psi[static_cast<Eigen::Index>(g.node(i, top - 2))]) /
                                (2.0 * g.hy);
            phi[static_cast<Eigen::Index>(i)] = (trace + (perturb ? eps * flux : 0.0)) / p.mu;
        }
        e.phi = phi;
        const Vector re = assemble_residual(e, p, cubic, g);
        const DofLayout lay = dof_layout(g, e.family);
        double gap = 0.0;
        for (std::size_t i = 1; i + 1 < g.nx; ++i) {
            const double sum = re[static_cast<Eigen::Index>(g.node(i, top))] + re[static_cast<Eigen::Index>(lay.line_offset + i)];
            gap = std::max(gap, std::abs(sum - rw[static_cast<Eigen::Index>(g.node(i, top))]));
        }
        return gap;
    };

    EXPECT_LT(exchange_sum_gap(0.1, false), 1e-11);
    EXPECT_LT(exchange_sum_gap(1e-3, false), 1e-11);
    const double g1 = exchange_sum_gap(0.02, true);
    const double g2 = exchange_sum_gap(0.01, true);
    EXPECT_GT(g1, 0.0);
    EXPECT_NEAR(g1 / g2, 2.0, 1e-6);
}

TEST(Stencil, SecondOrderConsistency) {
    const ModelParams p{1.0, 4.0, 1.0, 1.0};
    const double c = 0.4;
    const double k = 1.3, m = 2.0;
    auto exact = [&](double x, double y) {
        const double u = std::sin(k * x) * std::cos(m * y);
        return p.d * (k * k + m * m) * u + c * k * std::cos(k * x) * std::cos(m * y) -
               eval_nonlinearity(u, cubic).f;
    };
    auto max_error = [&](std::size_t nx, std::size_t ny) {
        const Grid g = build_grid(p, -2, 2, nx, ny);
        const WaveState s = field_state(g, HomotopyFamily::wentzell(0.0), c, [&](double x, double y) {
            return std::sin(k * x) * std::cos(m * y);
        });
        const Vector r = assemble_residual(s, p, cubic, g);
        double e = 0.0;
        for (std::size_t j = 1; j + 1 < g.ny; ++j)
            for (std::size_t i = 1; i + 1 < g.nx; ++i)
                e = std::max(e, std::abs(r[static_cast<Eigen::Index>(g.node(i, j))] - exact(g.x(i), g.y(j))));
        return e;
    };
    const double ratio = max_error(41, 11) / max_error(81, 21);
    EXPECT_GT(ratio, 3.5);
    EXPECT_LT(ratio, 4.5);
}

} // namespace
