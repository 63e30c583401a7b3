#pragma once

// Truncated strip (x_left, x_right) x (-L, 0) on a uniform tensor grid and the
// degree-of-freedom layout of each problem family.

#include <cmath>
#include <cstddef>
#include <utility>

#include "wave/error.hpp"
#include "wave/family.hpp"
#include "wave/model.hpp"

namespace wave {

/// Uniform grid; node (i, j) sits at x = (i - anchor_i) hx, y = -L + j hy.
/// j = 0 is the bottom y = -L, j = ny - 1 the top y = 0 where the line lives.
struct Grid {
    double x_left = 0.0;
    double x_right = 0.0;
    double L = 0.0;
    std::size_t nx = 0;
    std::size_t ny = 0;
    double hx = 0.0;
    double hy = 0.0;
    std::size_t anchor_i = 0;  ///< node with x = 0
    std::size_t anchor_j = 0;  ///< node with y = -L/2

    [[nodiscard]] std::size_t nodes() const noexcept { return nx * ny; }
    [[nodiscard]] std::size_t node(std::size_t i, std::size_t j) const noexcept { return j * nx + i; }
    [[nodiscard]] std::pair<std::size_t, std::size_t> ij(std::size_t node_index) const noexcept {
        return {node_index % nx, node_index / nx};
    }
    [[nodiscard]] double x(std::size_t i) const noexcept {
        return (static_cast<double>(i) - static_cast<double>(anchor_i)) * hx;
    }
    [[nodiscard]] double y(std::size_t j) const noexcept {
        return j == ny - 1 ? 0.0 : -L + static_cast<double>(j) * hy;
    }
    [[nodiscard]] std::size_t top() const noexcept { return ny - 1; }
    [[nodiscard]] std::size_t anchor_node() const noexcept { return node(anchor_i, anchor_j); }

    friend bool operator==(const Grid&, const Grid&) = default;
};

namespace detail {

inline bool near_integer(double v, long& out) {
    const double r = std::round(v);
    if (std::abs(v - r) > 1e-9 * std::max(1.0, std::abs(v))) return false;
    out = static_cast<long>(r);
    return true;
}

} // namespace detail

inline Grid build_grid(const ModelParams& params, double x_left, double x_right, std::size_t nx, std::size_t ny) {
    if (!(x_left < 0.0)) throw Error(ErrorCode::BadExtent, "x_left must be negative");
    if (!(x_right > 0.0)) throw Error(ErrorCode::BadExtent, "x_right must be positive");
    if (nx < 3) throw Error(ErrorCode::BadExtent, "nx must be at least 3");
    if (ny < 3) throw Error(ErrorCode::BadExtent, "ny must be at least 3 for one-sided y-derivatives");
    if (!(params.L > 0.0)) throw Error(ErrorCode::BadExtent, "L must be positive");

    Grid g;
    g.x_left = x_left;
    g.x_right = x_right;
    g.L = params.L;
    g.nx = nx;
    g.ny = ny;
    g.hx = (x_right - x_left) / static_cast<double>(nx - 1);
    g.hy = params.L / static_cast<double>(ny - 1);

    long ai = 0;
    if (!detail::near_integer(-x_left / g.hx, ai))
        throw Error(ErrorCode::AnchorNotOnGrid, "x = 0 is not a grid node");
    if ((ny - 1) % 2 != 0) throw Error(ErrorCode::AnchorNotOnGrid, "y = -L/2 is not a grid node (ny - 1 must be even)");
    g.anchor_i = static_cast<std::size_t>(ai);
    g.anchor_j = (ny - 1) / 2;
    return g;
}

/// Contiguous layout: strip field (x fastest), line field (Exchange only), then c.
struct DofLayout {
    FamilyKind family = FamilyKind::Wentzell;
    std::size_t strip_offset = 0;
    std::size_t strip_size = 0;
    std::size_t line_offset = 0;
    std::size_t line_size = 0;
    std::size_t c_index = 0;
    std::size_t total = 0;
};

inline DofLayout dof_layout(const Grid& grid, FamilyKind family) {
    DofLayout l;
    l.family = family;
    l.strip_offset = 0;
    l.strip_size = grid.nodes();
    l.line_offset = l.strip_size;
    l.line_size = family == FamilyKind::Exchange ? grid.nx : 0;
    l.c_index = l.line_offset + l.line_size;
    l.total = l.c_index + 1;
    return l;
}

inline DofLayout dof_layout(const Grid& grid, const HomotopyFamily& family) { return dof_layout(grid, family.kind()); }

} // namespace wave
