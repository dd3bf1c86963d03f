#include <cmath>

#include <gtest/gtest.h>

#include "memsq/parabolic.hpp"

namespace {

using namespace memsq;

ProblemSpec interval_spec(double lambda, double pressure, std::size_t n = 128) {
    ProblemSpec s;
    s.lambda = lambda;
    s.pressure = pressure;
    s.resolution = n;
    return s;
}

TEST(Step, EquilibriumStaysPut) {
    const ProblemSpec s = interval_spec(0.0, 0.0, 32);
    SimState st;
    st.u.assign(33, 0.0);
    const SimState next = step(st, s);
    EXPECT_GT(next.t, 0.0);
    for (double v : next.u) EXPECT_EQ(v, 0.0);
}

TEST(Step, PressureLiftsInteriorOnly) {
    const ProblemSpec s = interval_spec(0.0, 1.0, 32);
    SimState st;
    st.u.assign(33, 0.0);
    const SimState next = step(st, s);
    EXPECT_EQ(next.u.front(), 0.0);
    EXPECT_EQ(next.u.back(), 0.0);
    for (std::size_t i = 1; i < 32; ++i) EXPECT_GT(next.u[i], 0.0);
}

TEST(Step, ReactionLimitedStepSize) {
    const ProblemSpec s = interval_spec(5.0, 0.0, 256);
    const Grid g = build_grid(s.domain, s.resolution);
    const ProfileField f = evaluate_profile(s.profile, g);
    Stepper st(s, g, f);
    EXPECT_NEAR(st.proposed_dt(1e-2), 0.1 * 1e-6 / 5.0, 1e-22);
    EXPECT_LE(st.proposed_dt(1e-2), 2e-8);
    // Far from quenching the diffusion cap binds: 10 * 0.1 * h^2.
    EXPECT_DOUBLE_EQ(st.proposed_dt(1.0), std::min(1e-3, g.h * g.h));
}

TEST(Integrate, SubcriticalConvergesToMinimalSteadyState) {
    const ProblemSpec s = interval_spec(0.5, 0.0, 256);
    const auto run = integrate(s);
    const auto* gl = std::get_if<Global>(&run.verdict);
    ASSERT_NE(gl, nullptr);
    const auto steady = std::get<SteadyExists>(solve_minimal_steady(s));
    EXPECT_LE(sup_distance(gl->steady_limit, steady.u_min), 1e-5);
    EXPECT_GE(1.0 - max_value(gl->steady_limit), s.controls.global_gap);
    EXPECT_LE(run.trajectory.samples.back().ut_inf, s.controls.steady_tol);
}

TEST(Integrate, SupercriticalQuenches) {
    const ProblemSpec s = interval_spec(5.0, 0.0, 256);
    const auto run = integrate(s);
    const auto* q = std::get_if<Quenched>(&run.verdict);
    ASSERT_NE(q, nullptr);
    EXPECT_LE(q->final_state.gap, s.controls.quench_gap);
    EXPECT_LT(max_value(q->final_state.u), 1.0);
}

TEST(Integrate, LinearHeatLimit) {
    const ProblemSpec s = interval_spec(0.0, 1.0, 128);
    const auto run = integrate(s);
    const auto* gl = std::get_if<Global>(&run.verdict);
    ASSERT_NE(gl, nullptr);
    EXPECT_NEAR(max_value(gl->steady_limit), 0.125, 1e-5);
}

TEST(Integrate, InadmissibleInitialDataRejected) {
    ProblemSpec s = interval_spec(0.0, 0.0, 64);
    s.initial = BumpInitial{0.9, 0.5, 0.01};
    EXPECT_THROW(integrate(s), ConfigError);
}

TEST(Integrate, TrajectoryInvariants) {
    const ProblemSpec s = interval_spec(5.0, 0.0, 128);
    const auto run = integrate(s);
    const auto& tr = run.trajectory;
    for (std::size_t k = 1; k < tr.samples.size(); ++k) {
        EXPECT_GT(tr.samples[k].t, tr.samples[k - 1].t);
        EXPECT_GE(tr.samples[k].max_u, tr.samples[k - 1].max_u);
    }
    for (std::size_t k = 1; k < tr.snapshots.size(); ++k) {
        const auto& a = tr.snapshots[k - 1].u;
        const auto& b = tr.snapshots[k].u;
        for (std::size_t i = 0; i < a.size(); ++i) EXPECT_GE(b[i], a[i] - 1e-10);
        EXPECT_EQ(b.front(), 0.0);
        EXPECT_EQ(b.back(), 0.0);
        EXPECT_LT(max_value(b), 1.0);
    }
    // u_t blows up: strictly increasing over the last five samples.
    ASSERT_GE(tr.samples.size(), 5u);
    for (std::size_t k = tr.samples.size() - 4; k < tr.samples.size(); ++k)
        EXPECT_GT(tr.samples[k].ut_inf, tr.samples[k - 1].ut_inf);
}

TEST(Integrate, ComparisonInLambdaAndPressure) {
    // Sample both runs at common times via snapshots taken at fixed cadence.
    auto with_cadence = [](double lambda, double p) {
        ProblemSpec s = interval_spec(lambda, p, 64);
        s.controls.t_max = 0.02;
        s.controls.snapshot_interval = 0.002;
        s.controls.dt_max = 1e-4;
        return integrate(s).trajectory;
    };
    const auto check = [](const Trajectory& hi, const Trajectory& lo) {
        std::size_t matched = 0;
        for (const auto& a : hi.snapshots)
            for (const auto& b : lo.snapshots) {
                if (a.t != b.t) continue;
                ++matched;
                for (std::size_t i = 0; i < a.u.size(); ++i) EXPECT_GE(a.u[i], b.u[i] - 1e-12);
            }
        EXPECT_GE(matched, 5u);
    };
    check(with_cadence(3.0, 0.0), with_cadence(2.0, 0.0));
    check(with_cadence(2.0, 1.0), with_cadence(2.0, 0.5));
}

TEST(Integrate, SymmetricDataGivesSymmetricField) {
    ProblemSpec s = interval_spec(5.0, 0.5, 128);
    s.profile = BumpProfile{1.0, 0.5, 0.5, 0.2};
    s.initial = BumpInitial{0.1, 0.5, 0.2};
    const auto run = integrate(s);
    for (const auto& snap : run.trajectory.snapshots) {
        const auto& u = snap.u;
        for (std::size_t i = 0; i < u.size(); ++i) EXPECT_NEAR(u[i], u[u.size() - 1 - i], 1e-12);
    }
}

TEST(Classify, FastPathForSubcritical) {
    const auto c = classify(interval_spec(0.5, 0.0, 128));
    EXPECT_TRUE(std::holds_alternative<Global>(c.verdict));
    EXPECT_TRUE(c.fast_path);
    EXPECT_FALSE(c.run.has_value());
}

TEST(Classify, SupercriticalIntegrates) {
    const auto c = classify(interval_spec(5.0, 0.0, 128));
    EXPECT_TRUE(std::holds_alternative<Quenched>(c.verdict));
    EXPECT_TRUE(c.run.has_value());
    EXPECT_FALSE(c.fast_path);
}

TEST(Classify, ZeroDynamics) {
    const auto c = classify(interval_spec(0.0, 0.0, 64));
    const auto* gl = std::get_if<Global>(&c.verdict);
    ASSERT_NE(gl, nullptr);
    EXPECT_EQ(max_value(gl->steady_limit), 0.0);
}

TEST(Classify, PathsAgreeWhenBothRun) {
    for (double lambda : {0.3, 0.8, 1.2}) {
        const ProblemSpec s = interval_spec(lambda, 0.0, 128);
        const auto c = classify(s);
        const auto run = integrate(s);
        EXPECT_STREQ(verdict_name(c.verdict), verdict_name(run.verdict)) << lambda;
    }
}

TEST(Classify, VerdictStableUnderRefinementAwayFromCriticality) {
    // lambda* ~ 1.40 for f = 1 on the unit interval.
    for (double lambda : {0.9 * 1.40, 1.1 * 1.40}) {
        ProblemSpec coarse = interval_spec(lambda, 0.0, 128);
        coarse.controls.t_max = 40.0;
        ProblemSpec fine = coarse;
        fine.resolution = 256;
        fine.controls.dt_safety /= 2.0;
        EXPECT_STREQ(verdict_name(classify(coarse).verdict), verdict_name(classify(fine).verdict)) << lambda;
    }
}

}  // namespace
