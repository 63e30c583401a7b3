#include <gtest/gtest.h>

#include <cmath>

#include "wave/continuation.hpp"

namespace {

using namespace wave;

const NonlinearitySpec cubic{NonlinearityKind::SmoothCubic, 0.3};
const ModelParams defaults{};

ErrorCode code_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no error raised";
    return ErrorCode::InvalidArgument;
}

// Full default path A -> B -> C, computed once.
class DefaultPath : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        grid = new Grid(build_grid(defaults, -130, 100, 1151, 21));
        const auto w1 = solve_1d_ignition_shooting(defaults.d, cubic, 1e-10);
        start = new WaveState(newton_solve(embed_1d_wave(w1, *grid), defaults, cubic, *grid, {}));
        Continuation cont(defaults, cubic, *grid, {}, {});
        stage_a = new ContinuationPath(cont.continue_wentzell(*start, 1.0));
        NewtonReport rep;
        const WaveState pred = handoff_to_system(stage_a->final_state, defaults, *grid, 0.05);
        handoff = new WaveState(newton_solve(pred, defaults, cubic, *grid, {}, &rep));
        handoff_iterations = rep.iterations;
        stage_c = new ContinuationPath(cont.continue_exchange(*handoff, 1.0));
    }
    static void TearDownTestSuite() {
        delete grid;
        delete start;
        delete stage_a;
        delete handoff;
        delete stage_c;
    }
    static inline Grid* grid = nullptr;
    static inline WaveState* start = nullptr;
    static inline ContinuationPath* stage_a = nullptr;
    static inline WaveState* handoff = nullptr;
    static inline int handoff_iterations = 0;
    static inline ContinuationPath* stage_c = nullptr;
};

TEST_F(DefaultPath, WentzellRegression) {
    EXPECT_EQ(stage_a->final_state.family, HomotopyFamily::wentzell(1.0));
    EXPECT_NEAR(stage_a->final_state.c, 0.2940064752, 1e-9);
}

TEST_F(DefaultPath, SystemRegression) {
    EXPECT_EQ(stage_c->final_state.family, HomotopyFamily::exchange(1.0));
    EXPECT_NEAR(stage_c->final_state.c, 0.2923368185, 1e-9);
}

TEST_F(DefaultPath, HandoffConvergesQuickly) {
    EXPECT_LE(handoff_iterations, 6);
    EXPECT_LT(std::abs(handoff->c - stage_a->final_state.c), 0.05 * stage_a->final_state.c);
}

TEST_F(DefaultPath, ParametersIncreaseAndSpeedIsContinuous) {
    for (const auto* path : {stage_a, stage_c}) {
        ASSERT_GE(path->records.size(), 2u);
        for (std::size_t k = 1; k < path->records.size(); ++k) {
            const auto& a = path->records[k - 1];
            const auto& b = path->records[k];
            EXPECT_GT(b.family.parameter(), a.family.parameter());
            EXPECT_LE(std::abs(b.c - a.c), 0.2 * a.c);
        }
    }
}

TEST_F(DefaultPath, EveryRecordPassesInvariants) {
    for (const auto* path : {stage_a, stage_c}) {
        for (const auto& r : path->records) {
            EXPECT_GT(r.c, 0.0);
            EXPECT_TRUE(r.diagnostics.invariants_ok()) << to_string(r.family.kind()) << " " << r.family.parameter();
            EXPECT_LT(r.diagnostics.speed_identity_gap, 1e-2);
        }
    }
    for (const auto& r : stage_c->records) EXPECT_EQ(r.diagnostics.sandwich_ok, std::optional<bool>(true));
}

TEST_F(DefaultPath, EndpointDecayRatesMatchDispersion) {
    for (const auto* path : {stage_a, stage_c}) {
        const auto& d = path->records.back().diagnostics;
        EXPECT_EQ(d.right_decay_ok, std::optional<bool>(true));
        EXPECT_LT(std::abs(d.gamma_fit - d.gamma_pred), 0.1 * d.gamma_pred);
    }
}

TEST_F(DefaultPath, TargetEqualToStartGivesOneRecord) {
    Continuation cont(defaults, cubic, *grid, {}, {});
    const auto a = cont.continue_wentzell(*start, 0.0);
    ASSERT_EQ(a.records.size(), 1u);
    EXPECT_EQ(a.final_state.c, start->c);
    const auto c = cont.continue_exchange(*handoff, 0.05);
    EXPECT_EQ(c.records.size(), 1u);
}

TEST_F(DefaultPath, DecreasingTargetRejected) {
    Continuation cont(defaults, cubic, *grid, {}, {});
    EXPECT_EQ(code_of([&] { (void)cont.continue_exchange(*handoff, 0.025); }), ErrorCode::ParameterNotMonotone);
}

TEST_F(DefaultPath, WrongStartFamily) {
    Continuation cont(defaults, cubic, *grid, {}, {});
    EXPECT_EQ(code_of([&] { (void)cont.continue_exchange(*start, 1.0); }), ErrorCode::WrongFamily);
    EXPECT_EQ(code_of([&] { (void)cont.continue_wentzell(*handoff, 1.0); }), ErrorCode::WrongFamily);
}

TEST_F(DefaultPath, SinkSeesEveryRecord) {
    Continuation cont(defaults, cubic, *grid, {}, {});
    std::size_t seen = 0;
    const auto path = cont.advance(cont.start_cursor(*start), 0.2, Stage::A,
                                   [&](ContinuationRecord& r, const WaveState& s, const ContinuationCursor& cur) {
                                       EXPECT_EQ(r.c, s.c);
                                       EXPECT_EQ(cur.current.c, s.c);
                                       ++seen;
                                   });
    EXPECT_EQ(seen, path.records.size());
}

TEST(Continuation, StepCollapseWhenNewtonCannotConverge) {
    const Grid g = build_grid(defaults, -130, 100, 576, 11);
    const auto w1 = solve_1d_ignition_shooting(defaults.d, cubic, 1e-10);
    const WaveState s0 = newton_solve(embed_1d_wave(w1, g), defaults, cubic, g, {});
    NewtonOptions one;
    one.max_iters = 1;
    one.tol_residual = 1e-13;
    Continuation cont(defaults, cubic, g, one, {});
    EXPECT_EQ(code_of([&] { (void)cont.continue_wentzell(s0, 1.0); }), ErrorCode::StepCollapse);
}

TEST(Continuation, ExtentTooSmall) {
    const Grid g = build_grid(defaults, -20, 20, 201, 11);
    const auto w1 = solve_1d_ignition_shooting(defaults.d, cubic, 1e-10);
    Continuation cont(defaults, cubic, g, {}, {});
    EXPECT_EQ(code_of([&] { (void)cont.make_record(Stage::A, embed_1d_wave(w1, g), 0.0, 0); }),
              ErrorCode::ExtentTooSmall);
    EXPECT_EQ(code_of([&] { check_extent(g, defaults, 0.3, 0.25, 8.0); }), ErrorCode::ExtentTooSmall);
    EXPECT_NO_THROW(check_extent(build_grid(defaults, -130, 100, 231, 5), defaults, 0.3, 0.25, 8.0));
    EXPECT_EQ(code_of([&] { check_extent(build_grid(defaults, -130, 20, 151, 5), defaults, 0.3, 0.25, 8.0); }),
              ErrorCode::ExtentTooSmall);
}

TEST(Handoff, ManufacturedUnitNormalDerivative) {
    const ModelParams p{2.0, 4.0, 1.0, 1.0};
    const Grid g = build_grid(p, -2, 2, 9, 5);
    WaveState s;
    s.c = 0.3;
    s.family = HomotopyFamily::wentzell(1.0);
    s.psi.resize(static_cast<Eigen::Index>(g.nodes()));
    for (std::size_t k = 0; k < g.nodes(); ++k) {
        const auto [i, j] = g.ij(k);
        s.psi[static_cast<Eigen::Index>(k)] = 0.5 + 0.1 * g.x(i) + g.y(j);
    }
    const WaveState e = handoff_to_system(s, p, g, 0.05);
    ASSERT_TRUE(e.phi.has_value());
    EXPECT_EQ(e.family, HomotopyFamily::exchange(0.05));
    EXPECT_EQ(e.c, s.c);
    for (std::size_t i = 0; i < g.nx; ++i)
        EXPECT_NEAR((*e.phi)[static_cast<Eigen::Index>(i)], 0.5 + 0.1 * g.x(i) + 0.1, 1e-13);
    EXPECT_NEAR(exchange_gap(e, p, g), 0.1, 1e-13);
}

TEST(Handoff, VanishingEpsilonReproducesTrace) {
    const ModelParams p{1.0, 4.0, 2.0, 1.0};
    const Grid g = build_grid(p, -2, 2, 9, 5);
    WaveState s;
    s.c = 0.3;
    s.family = HomotopyFamily::wentzell(1.0);
    s.psi.resize(static_cast<Eigen::Index>(g.nodes()));
    for (std::size_t k = 0; k < g.nodes(); ++k) {
        const auto [i, j] = g.ij(k);
        s.psi[static_cast<Eigen::Index>(k)] = 0.5 + 0.1 * g.x(i) + 0.2 * g.y(j) * g.y(j);
    }
    const WaveState e = handoff_to_system(s, p, g, 1e-300);
    EXPECT_LT(exchange_gap(e, p, g), 1e-15);
}

TEST(Handoff, Preconditions) {
    const Grid g = build_grid(defaults, -2, 2, 9, 5);
    WaveState s;
    s.c = 0.3;
    s.family = HomotopyFamily::wentzell(0.5);
    s.psi = Vector::Constant(static_cast<Eigen::Index>(g.nodes()), 0.5);
    EXPECT_EQ(code_of([&] { (void)handoff_to_system(s, defaults, g, 0.05); }), ErrorCode::WrongFamily);
    s.family = HomotopyFamily::wentzell(1.0);
    EXPECT_EQ(code_of([&] { (void)handoff_to_system(s, defaults, g, 0.2); }), ErrorCode::InvalidArgument);
    EXPECT_EQ(code_of([&] { (void)handoff_to_system(s, defaults, g, 0.0); }), ErrorCode::InvalidArgument);
}

TEST(Stage, LetterRoundTrip) {
    for (Stage s : {Stage::A, Stage::B, Stage::C}) EXPECT_EQ(stage_from_letter(stage_letter(s)), s);
    EXPECT_THROW((void)stage_from_letter('D'), Error);
}

} // namespace
