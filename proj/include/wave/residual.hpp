#pragma once

// Discrete travelling-wave problem on the truncated strip. The unknown vector is
// [psi (strip nodes) | phi (line nodes, Exchange only) | c]; the last row is the
// phase condition psi(0, -L/2) = (1 + theta)/2 that removes translation invariance.
//
// Row kinds, all second order:
//   interior      -d (psi_xx + psi_yy) + c psi_x - f(psi)
//   y = -L        d psi_y with the 3-point one-sided stencil (no ghost node is introduced;
//                 the stencil is what eliminating a quadratic ghost value reduces to)
//   y = 0         Wentzell: d psi_y - (s/mu)(D psi_xx - c psi_x)
//                 Exchange: d psi_y - (mu phi - psi)/eps
//   line          -D phi'' + c phi' - (psi(., 0) - mu phi)/eps
//   x ends        psi = 0, mu phi = 0 on the left; psi = 1, mu phi = 1 on the right

#include <Eigen/Sparse>

#include <cstddef>
#include <optional>
#include <vector>

#include "wave/error.hpp"
#include "wave/family.hpp"
#include "wave/grid.hpp"
#include "wave/model.hpp"

namespace wave {

using Vector = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double>;

struct WaveState {
    double c = 0.0;
    Vector psi;                ///< strip field, row-major with x fastest
    std::optional<Vector> phi; ///< line field, present iff family is Exchange
    HomotopyFamily family = HomotopyFamily::wentzell(0.0);
};

inline void check_shape(const WaveState& state, const Grid& grid) {
    if (static_cast<std::size_t>(state.psi.size()) != grid.nodes())
        throw Error(ErrorCode::ShapeMismatch, "psi size does not match the grid");
    if (state.family.is_exchange()) {
        if (!state.phi || static_cast<std::size_t>(state.phi->size()) != grid.nx)
            throw Error(ErrorCode::ShapeMismatch, "Exchange state needs a line field of size nx");
    } else if (state.phi) {
        throw Error(ErrorCode::ShapeMismatch, "Wentzell state must not carry a line field");
    }
}

inline Vector pack(const WaveState& state, const Grid& grid) {
    check_shape(state, grid);
    const DofLayout l = dof_layout(grid, state.family);
    Vector u(static_cast<Eigen::Index>(l.total));
    u.segment(static_cast<Eigen::Index>(l.strip_offset), static_cast<Eigen::Index>(l.strip_size)) = state.psi;
    if (l.line_size > 0)
        u.segment(static_cast<Eigen::Index>(l.line_offset), static_cast<Eigen::Index>(l.line_size)) = *state.phi;
    u[static_cast<Eigen::Index>(l.c_index)] = state.c;
    return u;
}

inline WaveState unpack(const Vector& u, const Grid& grid, const HomotopyFamily& family) {
    const DofLayout l = dof_layout(grid, family);
    if (static_cast<std::size_t>(u.size()) != l.total) throw Error(ErrorCode::ShapeMismatch, "unknown vector has wrong length");
    WaveState s;
    s.family = family;
    s.psi = u.segment(static_cast<Eigen::Index>(l.strip_offset), static_cast<Eigen::Index>(l.strip_size));
    if (l.line_size > 0)
        s.phi = u.segment(static_cast<Eigen::Index>(l.line_offset), static_cast<Eigen::Index>(l.line_size));
    s.c = u[static_cast<Eigen::Index>(l.c_index)];
    return s;
}

namespace detail {

using Triplet = Eigen::Triplet<double>;

// Residual and (optionally) Jacobian triplets in one sweep. The Jacobian pattern does not
// depend on the state: every structurally present entry is emitted even when its value is 0.
inline void assemble(const WaveState& state, const ModelParams& p, const NonlinearitySpec& spec, const Grid& g,
                     Vector* residual, std::vector<Triplet>* triplets) {
    check_shape(state, g);
    const DofLayout lay = dof_layout(g, state.family);
    const bool exchange = state.family.is_exchange();
    const double c = state.c;
    const double hx = g.hx;
    const double hy = g.hy;
    const double ihx2 = 1.0 / (hx * hx);
    const double ihy2 = 1.0 / (hy * hy);
    const double i2hx = 0.5 / hx;
    const double i2hy = 0.5 / hy;
    const auto nx = g.nx;
    const auto ny = g.ny;
    const auto top = g.top();
    const auto ci = static_cast<int>(lay.c_index);
    const Vector& psi = state.psi;

    if (residual) residual->setZero(static_cast<Eigen::Index>(lay.total));
    if (triplets) {
        triplets->clear();
        triplets->reserve(g.nodes() * 6 + lay.line_size * 5 + 1);
    }
    auto R = [&](std::size_t row) -> double& { return (*residual)[static_cast<Eigen::Index>(row)]; };
    auto add = [&](std::size_t row, std::size_t col, double v) {
        triplets->emplace_back(static_cast<int>(row), static_cast<int>(col), v);
    };
    auto P = [&](std::size_t i, std::size_t j) { return psi[static_cast<Eigen::Index>(g.node(i, j))]; };

    for (std::size_t j = 0; j < ny; ++j) {
        for (std::size_t i = 0; i < nx; ++i) {
            const std::size_t row = g.node(i, j);
            if (i == 0 || i == nx - 1) {
                const double target = i == 0 ? 0.0 : 1.0;
                if (residual) R(row) = P(i, j) - target;
                if (triplets) add(row, row, 1.0);
                continue;
            }
            if (j == 0) {
                if (residual) R(row) = p.d * (-3.0 * P(i, 0) + 4.0 * P(i, 1) - P(i, 2)) * i2hy;
                if (triplets) {
                    add(row, g.node(i, 0), -3.0 * p.d * i2hy);
                    add(row, g.node(i, 1), 4.0 * p.d * i2hy);
                    add(row, g.node(i, 2), -p.d * i2hy);
                }
                continue;
            }
            const double dx = (P(i + 1, j) - P(i - 1, j)) * i2hx;
            const double dxx = (P(i + 1, j) - 2.0 * P(i, j) + P(i - 1, j)) * ihx2;
            if (j == top) {
                const double flux = p.d * (3.0 * P(i, j) - 4.0 * P(i, j - 1) + P(i, j - 2)) * i2hy;
                if (triplets) {
                    add(row, g.node(i, j), 3.0 * p.d * i2hy);
                    add(row, g.node(i, j - 1), -4.0 * p.d * i2hy);
                    add(row, g.node(i, j - 2), p.d * i2hy);
                }
                if (!exchange) {
                    const double w = state.family.s() / p.mu;
                    if (residual) R(row) = flux - w * (p.D * dxx - c * dx);
                    if (triplets) {
                        add(row, g.node(i, j), w * p.D * 2.0 * ihx2);
                        add(row, g.node(i + 1, j), -w * (p.D * ihx2 - c * i2hx));
                        add(row, g.node(i - 1, j), -w * (p.D * ihx2 + c * i2hx));
                        add(row, static_cast<std::size_t>(ci), w * dx);
                    }
                } else {
                    const double m = state.family.exchange_rate();
                    const double phi_i = (*state.phi)[static_cast<Eigen::Index>(i)];
                    if (residual) R(row) = flux - m * (p.mu * phi_i - P(i, j));
                    if (triplets) {
                        add(row, g.node(i, j), m);
                        add(row, lay.line_offset + i, -m * p.mu);
                    }
                }
                continue;
            }
            const double dyy = (P(i, j + 1) - 2.0 * P(i, j) + P(i, j - 1)) * ihy2;
            const ReactionValue fr = eval_nonlinearity(P(i, j), spec);
            if (residual) R(row) = -p.d * (dxx + dyy) + c * dx - fr.f;
            if (triplets) {
                add(row, g.node(i, j), p.d * (2.0 * ihx2 + 2.0 * ihy2) - fr.fprime);
                add(row, g.node(i + 1, j), -p.d * ihx2 + c * i2hx);
                add(row, g.node(i - 1, j), -p.d * ihx2 - c * i2hx);
                add(row, g.node(i, j + 1), -p.d * ihy2);
                add(row, g.node(i, j - 1), -p.d * ihy2);
                add(row, static_cast<std::size_t>(ci), dx);
            }
        }
    }

    if (exchange) {
        const Vector& phi = *state.phi;
        const double m = state.family.exchange_rate();
        for (std::size_t i = 0; i < nx; ++i) {
            const std::size_t row = lay.line_offset + i;
            if (i == 0 || i == nx - 1) {
                const double target = i == 0 ? 0.0 : 1.0;
                if (residual) R(row) = p.mu * phi[static_cast<Eigen::Index>(i)] - target;
                if (triplets) add(row, row, p.mu);
                continue;
            }
            const auto ii = static_cast<Eigen::Index>(i);
            const double dx = (phi[ii + 1] - phi[ii - 1]) * i2hx;
            const double dxx = (phi[ii + 1] - 2.0 * phi[ii] + phi[ii - 1]) * ihx2;
            if (residual) R(row) = -p.D * dxx + c * dx - m * (P(i, top) - p.mu * phi[ii]);
            if (triplets) {
                add(row, row, 2.0 * p.D * ihx2 + m * p.mu);
                add(row, row + 1, -p.D * ihx2 + c * i2hx);
                add(row, row - 1, -p.D * ihx2 - c * i2hx);
                add(row, g.node(i, top), -m);
                add(row, static_cast<std::size_t>(ci), dx);
            }
        }
    }

    if (residual) R(lay.c_index) = P(g.anchor_i, g.anchor_j) - 0.5 * (1.0 + spec.theta);
    if (triplets) add(lay.c_index, g.anchor_node(), 1.0);
}

} // namespace detail

inline Vector assemble_residual(const WaveState& state, const ModelParams& params, const NonlinearitySpec& spec,
                                const Grid& grid) {
    Vector r;
    detail::assemble(state, params, spec, grid, &r, nullptr);
    return r;
}

inline SparseMatrix assemble_jacobian(const WaveState& state, const ModelParams& params, const NonlinearitySpec& spec,
                                      const Grid& grid) {
    std::vector<detail::Triplet> t;
    detail::assemble(state, params, spec, grid, nullptr, &t);
    const auto n = static_cast<Eigen::Index>(dof_layout(grid, state.family).total);
    SparseMatrix J(n, n);
    J.setFromTriplets(t.begin(), t.end());
    J.makeCompressed();
    return J;
}

/// Residual and Jacobian from a single sweep.
inline std::pair<Vector, SparseMatrix> assemble_system(const WaveState& state, const ModelParams& params,
                                                       const NonlinearitySpec& spec, const Grid& grid) {
    Vector r;
    std::vector<detail::Triplet> t;
    detail::assemble(state, params, spec, grid, &r, &t);
    const auto n = r.size();
    SparseMatrix J(n, n);
    J.setFromTriplets(t.begin(), t.end());
    J.makeCompressed();
    return {std::move(r), std::move(J)};
}

} // namespace wave
