#pragma once

// Natural-parameter continuation along the homotopy
//   A: Wentzell(s), s from 0 to 1, started from the y-uniform 1-D wave
//   B: Wentzell(1) -> Exchange(eps0) by the first-order singular-perturbation predictor
//   C: Exchange(eps), eps from eps0 to 1
// c is a single-valued function of the parameter along this path, so a secant predictor with
// step halving is enough; a step that cannot converge above min_step aborts the path.

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "wave/diagnostics.hpp"
#include "wave/error.hpp"
#include "wave/family.hpp"
#include "wave/grid.hpp"
#include "wave/model.hpp"
#include "wave/residual.hpp"
#include "wave/solver.hpp"

namespace wave {

enum class Stage { A, B, C };

inline char stage_letter(Stage s) { return s == Stage::A ? 'A' : (s == Stage::B ? 'B' : 'C'); }

inline Stage stage_from_letter(char c) {
    switch (c) {
    case 'A': return Stage::A;
    case 'B': return Stage::B;
    case 'C': return Stage::C;
    default: throw Error(ErrorCode::Validation, std::string("unknown stage '") + c + "'");
    }
}

struct ContinuationOptions {
    double initial_step = 0.1;
    double min_step = 1e-4;
    double growth = 1.5;
    int fast_iterations = 4;   ///< grow the step after convergence in at most this many iterations
    double max_speed_jump = 0.2;  ///< relative change of c allowed per accepted step
    double extent_factor = 8.0;   ///< required e-folds of the decay at both x ends
    bool enforce_extent = true;
    Tolerances tolerances;

    void validate() const {
        if (!(initial_step > 0.0)) throw Error(ErrorCode::Validation, "continuation.initial_step must be positive");
        if (!(min_step > 0.0 && min_step <= initial_step))
            throw Error(ErrorCode::Validation, "continuation.min_step must lie in (0, initial_step]");
        if (!(growth >= 1.0)) throw Error(ErrorCode::Validation, "continuation.growth must be at least 1");
        if (!(max_speed_jump > 0.0)) throw Error(ErrorCode::Validation, "continuation.max_speed_jump must be positive");
    }
};

struct ContinuationRecord {
    Stage stage = Stage::A;
    HomotopyFamily family = HomotopyFamily::wentzell(0.0);
    double c = 0.0;
    double residual_norm = 0.0;
    int newton_iterations = 0;
    DiagnosticsReport diagnostics;
    std::optional<std::string> checkpoint_ref;
};

struct ContinuationPath {
    std::vector<ContinuationRecord> records;
    WaveState final_state;
};

/// Everything needed to continue a path deterministically: the latest converged state, the
/// one before it (secant predictor) and the next trial step.
struct ContinuationCursor {
    WaveState current;
    std::optional<WaveState> previous;
    double step = 0.1;
    double residual_norm = 0.0;
    int newton_iterations = 0;
};

/// Called for every record appended to a path, the start record included.
using RecordSink = std::function<void(ContinuationRecord&, const WaveState&, const ContinuationCursor&)>;

/// x_right >= k / gamma_pred and |x_left| >= k max(d, D) / c.
inline void check_extent(const Grid& grid, const ModelParams& params, double c, double gamma_pred, double factor) {
    const double left_need = factor * std::max(params.d, params.D) / c;
    if (-grid.x_left < left_need)
        throw Error(ErrorCode::ExtentTooSmall, "|x_left| = " + std::to_string(-grid.x_left) + " < " +
                                                   std::to_string(left_need) + " at c = " + std::to_string(c));
    if (std::isfinite(gamma_pred) && gamma_pred > 0.0) {
        const double right_need = factor / gamma_pred;
        if (grid.x_right < right_need)
            throw Error(ErrorCode::ExtentTooSmall, "x_right = " + std::to_string(grid.x_right) + " < " +
                                                       std::to_string(right_need) +
                                                       " at gamma = " + std::to_string(gamma_pred));
    }
}

class Continuation {
public:
    Continuation(ModelParams params, NonlinearitySpec spec, Grid grid, NewtonOptions newton, ContinuationOptions opts)
        : params_(params), spec_(spec), grid_(grid), newton_(newton), opts_(opts),
          diagnostics_(params, spec, grid, opts.tolerances) {
        opts_.validate();
        newton_.validate();
    }

    [[nodiscard]] const Diagnostics& diagnostics() const noexcept { return diagnostics_; }

    [[nodiscard]] ContinuationRecord make_record(Stage stage, const WaveState& state, double residual_norm,
                                                 int iterations) const {
        ContinuationRecord r;
        r.stage = stage;
        r.family = state.family;
        r.c = state.c;
        r.residual_norm = residual_norm;
        r.newton_iterations = iterations;
        r.diagnostics = diagnostics_.run(state);
        if (opts_.enforce_extent) check_extent(grid_, params_, state.c, r.diagnostics.gamma_pred, opts_.extent_factor);
        return r;
    }

    /// Marches the family parameter of cursor.current up to target. The first record of the
    /// returned path is the cursor's current state.
    ContinuationPath advance(ContinuationCursor cursor, double target, Stage stage, const RecordSink& sink = {}) {
        const HomotopyFamily start_family = cursor.current.family;
        const double p0 = start_family.parameter();
        if (target < p0)
            throw Error(ErrorCode::ParameterNotMonotone, "target " + std::to_string(target) +
                                                             " lies below the current parameter " + std::to_string(p0));
        (void)start_family.with_parameter(target);  // range check

        ContinuationPath path;
        auto emit = [&](const WaveState& s, double rnorm, int iters) {
            ContinuationRecord rec = make_record(stage, s, rnorm, iters);
            if (sink) sink(rec, s, cursor);
            path.records.push_back(std::move(rec));
        };
        emit(cursor.current, cursor.residual_norm, cursor.newton_iterations);

        SparseLuSolver lu;
        std::string last_failure;
        while (cursor.current.family.parameter() < target) {
            const double p = cursor.current.family.parameter();
            const double h = std::min(cursor.step, target - p);
            const double p_new = (target - (p + h) <= 1e-12) ? target : p + h;
            const HomotopyFamily fam = start_family.with_parameter(p_new);

            WaveState guess = predict(cursor, p_new);
            guess.family = fam;
            NewtonReport report;
            std::optional<WaveState> solved;
            try {
                solved = newton_solve(guess, params_, spec_, grid_, newton_, &report, &lu);
                const double jump = std::abs(solved->c - cursor.current.c);
                if (jump > opts_.max_speed_jump * cursor.current.c) {
                    last_failure = "speed jump " + std::to_string(jump) + " exceeds the allowed fraction";
                    solved.reset();
                }
            } catch (const Error& e) {
                last_failure = e.what();
            }

            if (!solved) {
                cursor.step = 0.5 * h;
                if (cursor.step < opts_.min_step)
                    throw Error(ErrorCode::StepCollapse, std::string(to_string(fam.kind())) + " continuation stalled at " +
                                                             std::to_string(p) + " (step " + std::to_string(cursor.step) +
                                                             "): " + last_failure);
                continue;
            }

            cursor.previous = std::move(cursor.current);
            cursor.current = std::move(*solved);
            cursor.residual_norm = report.residual_norm;
            cursor.newton_iterations = report.iterations;
            cursor.step = report.iterations <= opts_.fast_iterations ? h * opts_.growth : h;
            emit(cursor.current, report.residual_norm, report.iterations);
        }
        path.final_state = cursor.current;
        return path;
    }

    ContinuationPath continue_wentzell(const WaveState& start, double target_s, const RecordSink& sink = {}) {
        if (start.family.kind() != FamilyKind::Wentzell)
            throw Error(ErrorCode::WrongFamily, "Wentzell continuation needs a Wentzell start state");
        return advance(start_cursor(start), target_s, Stage::A, sink);
    }

    ContinuationPath continue_exchange(const WaveState& start, double target_eps, const RecordSink& sink = {}) {
        if (start.family.kind() != FamilyKind::Exchange)
            throw Error(ErrorCode::WrongFamily, "exchange continuation needs an Exchange start state");
        return advance(start_cursor(start), target_eps, Stage::C, sink);
    }

    [[nodiscard]] ContinuationCursor start_cursor(const WaveState& start) const {
        ContinuationCursor cur;
        cur.current = start;
        cur.step = opts_.initial_step;
        cur.residual_norm = assemble_residual(start, params_, spec_, grid_).lpNorm<Eigen::Infinity>();
        return cur;
    }

private:
    [[nodiscard]] WaveState predict(const ContinuationCursor& cursor, double p_new) const {
        if (!cursor.previous) return cursor.current;
        const double p = cursor.current.family.parameter();
        const double p_prev = cursor.previous->family.parameter();
        if (p == p_prev) return cursor.current;
        const double w = (p_new - p) / (p - p_prev);
        WaveState guess = cursor.current;
        guess.c += w * (cursor.current.c - cursor.previous->c);
        guess.psi += w * (cursor.current.psi - cursor.previous->psi);
        if (guess.phi && cursor.previous->phi) *guess.phi += w * (*cursor.current.phi - *cursor.previous->phi);
        return guess;
    }

    ModelParams params_;
    NonlinearitySpec spec_;
    Grid grid_;
    NewtonOptions newton_;
    ContinuationOptions opts_;
    Diagnostics diagnostics_;
};

/// One-sided second-order d/dy of psi on the top row y = 0.
inline Vector top_normal_derivative(const WaveState& state, const Grid& grid) {
    Vector out(static_cast<Eigen::Index>(grid.nx));
    const auto t = grid.top();
    for (std::size_t i = 0; i < grid.nx; ++i) {
        const double a = state.psi[static_cast<Eigen::Index>(grid.node(i, t))];
        const double b = state.psi[static_cast<Eigen::Index>(grid.node(i, t - 1))];
        const double c = state.psi[static_cast<Eigen::Index>(grid.node(i, t - 2))];
        out[static_cast<Eigen::Index>(i)] = (3.0 * a - 4.0 * b + c) / (2.0 * grid.hy);
    }
    return out;
}

/// Predictor for Exchange(eps0) from a converged Wentzell(1) state: same psi and c, and the
/// exchange condition solved for the line at first order, mu phi = psi(., 0) + eps0 d psi_y(., 0).
inline WaveState handoff_to_system(const WaveState& wentzell, const ModelParams& params, const Grid& grid,
                                   double epsilon0) {
    check_shape(wentzell, grid);
    if (wentzell.family.kind() != FamilyKind::Wentzell || wentzell.family.s() != 1.0)
        throw Error(ErrorCode::WrongFamily, "handoff needs a Wentzell(1) state");
    if (!(epsilon0 > 0.0 && epsilon0 <= 0.1)) throw Error(ErrorCode::InvalidArgument, "epsilon0 must lie in (0, 0.1]");
    const Vector dy = top_normal_derivative(wentzell, grid);
    Vector phi(static_cast<Eigen::Index>(grid.nx));
    for (std::size_t i = 0; i < grid.nx; ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        const double trace = wentzell.psi[static_cast<Eigen::Index>(grid.node(i, grid.top()))];
        phi[ii] = (trace + epsilon0 * params.d * dy[ii]) / params.mu;
    }
    WaveState out;
    out.c = wentzell.c;
    out.psi = wentzell.psi;
    out.phi = std::move(phi);
    out.family = HomotopyFamily::exchange(epsilon0);
    return out;
}

/// sup_x |mu phi - psi(x, 0)|, the mismatch that vanishes in the Wentzell limit.
inline double exchange_gap(const WaveState& state, const ModelParams& params, const Grid& grid) {
    if (!state.phi) throw Error(ErrorCode::WrongFamily, "exchange gap needs a line field");
    double g = 0.0;
    for (std::size_t i = 0; i < grid.nx; ++i) {
        const double trace = state.psi[static_cast<Eigen::Index>(grid.node(i, grid.top()))];
        g = std::max(g, std::abs(params.mu * (*state.phi)[static_cast<Eigen::Index>(i)] - trace));
    }
    return g;
}

} // namespace wave
