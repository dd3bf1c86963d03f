#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "memsq/elliptic.hpp"
#include "oracles.hpp"

namespace {

using namespace memsq;
constexpr double kPi2 = std::numbers::pi * std::numbers::pi;

using oracle::ball_eigenvalue;

TEST(ShootingOracle, ReproducesIntervalAndSphereValues) {
    // n = 1 gives cos(sqrt(mu) r): first zero at pi/2. n = 3 gives sin(kr)/(kr): pi.
    EXPECT_NEAR(ball_eigenvalue(1, 1.0, 4.0), kPi2 / 4.0, 1e-8);
    EXPECT_NEAR(ball_eigenvalue(3, 8.0, 12.0), kPi2, 1e-7);
}

TEST(Eigen, IntervalUnitLength) {
    const auto e = principal_eigenpair(build_grid(Interval{1.0}, 512));
    EXPECT_NEAR(e.mu0 / kPi2, 1.0, 1e-3);
    EXPECT_LE(e.residual, 1e-10);
}

TEST(Eigen, DiskMatchesShootingOracle) {
    const double oracle = ball_eigenvalue(2, 5.0, 6.5);
    EXPECT_NEAR(oracle, 5.7832, 1e-4);
    const auto e = principal_eigenpair(build_grid(RadialBall{1.0, 2}, 512));
    EXPECT_NEAR(e.mu0 / oracle, 1.0, 1e-3);
}

TEST(Eigen, LongerIntervalScales) {
    const auto e = principal_eigenpair(build_grid(Interval{2.0}, 512));
    EXPECT_NEAR(e.mu0 / (kPi2 / 4.0), 1.0, 1e-3);
    const auto e1 = principal_eigenpair(build_grid(Interval{1.0}, 512));
    EXPECT_LT(e.mu0, e1.mu0);
}

TEST(Eigen, EigenvectorPositiveAndMaxNormalized) {
    for (const DomainSpec d : {DomainSpec{Interval{1.0}}, DomainSpec{RadialBall{1.0, 3}}}) {
        const Grid g = build_grid(d, 128);
        const auto e = principal_eigenpair(g);
        double peak = 0.0;
        for (std::size_t i : g.interior) {
            EXPECT_GT(e.phi0[i], 0.0);
            peak = std::max(peak, e.phi0[i]);
        }
        EXPECT_DOUBLE_EQ(peak, 1.0);
        for (std::size_t i : g.boundary) EXPECT_EQ(e.phi0[i], 0.0);
    }
}

TEST(Torsion, IntervalClosedForm) {
    const Grid g = build_grid(Interval{1.0}, 256);
    const Field phi = solve_torsion(g);
    for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(phi[i], g.x[i] * (1.0 - g.x[i]) / 2.0, 1e-13);
    const auto s = compute_spectral_data(g, evaluate_profile(ConstantProfile{1.0}, g));
    EXPECT_NEAR(s.torsion_integral * 12.0, 1.0, 1e-3);
    EXPECT_NEAR(s.torsion_max, 0.125, 1e-13);
    EXPECT_NEAR(s.volume, 1.0, 1e-14);
}

TEST(Torsion, DiskClosedForm) {
    const Grid g = build_grid(RadialBall{1.0, 2}, 256);
    const Field phi = solve_torsion(g);
    for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(phi[i], (1.0 - g.x[i] * g.x[i]) / 4.0, 1e-12);
    const auto s = compute_spectral_data(g, evaluate_profile(ConstantProfile{1.0}, g));
    EXPECT_NEAR(s.torsion_max, 0.25, 1e-12);
    // int_disk (1 - r^2)/4 = pi/8
    EXPECT_NEAR(s.torsion_integral / (std::numbers::pi / 8.0), 1.0, 1e-3);
}

TEST(Torsion, LongerIntervalMax) {
    const Grid g = build_grid(Interval{2.0}, 256);
    const Field phi = solve_torsion(g);
    EXPECT_NEAR(*std::max_element(phi.begin(), phi.end()), 0.5, 1e-12);
}

TEST(Steady, LinearProblemGivesTorsion) {
    ProblemSpec s;
    s.pressure = 1.0;
    s.resolution = 128;
    const auto r = solve_minimal_steady(s);
    const auto* ex = std::get_if<SteadyExists>(&r);
    ASSERT_NE(ex, nullptr);
    const Grid g = build_grid(s.domain, s.resolution);
    for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(ex->u_min[i], g.x[i] * (1.0 - g.x[i]) / 2.0, 1e-10);
}

TEST(Steady, SubcriticalExistsWithSmallResidualAndMonotoneIterates) {
    ProblemSpec s;
    s.lambda = 0.5;
    const Grid g = build_grid(s.domain, s.resolution);
    const ProfileField f = evaluate_profile(s.profile, g);
    Field prev;
    double worst_drop = 0.0;
    const auto r = solve_minimal_steady(s, g, f, [&](int, std::span<const double> u) {
        if (!prev.empty())
            for (std::size_t i = 0; i < u.size(); ++i) worst_drop = std::max(worst_drop, prev[i] - u[i]);
        prev.assign(u.begin(), u.end());
    });
    const auto* ex = std::get_if<SteadyExists>(&r);
    ASSERT_NE(ex, nullptr);
    EXPECT_LE(worst_drop, 1e-12);
    EXPECT_LE(ex->residual, s.controls.steady_tol);
    const double peak = *std::max_element(ex->u_min.begin(), ex->u_min.end());
    EXPECT_LT(peak, 1.0 - 1e-3);
    for (double v : ex->u_min) EXPECT_GE(v, 0.0);
}

TEST(Steady, SupercriticalNotFound) {
    ProblemSpec s;
    s.lambda = 5.0;
    EXPECT_TRUE(std::holds_alternative<SteadyNotFound>(solve_minimal_steady(s)));
}

TEST(Steady, IterationCapRaisesNumericalError) {
    ProblemSpec s;
    s.lambda = 1.3;
    const Grid g = build_grid(s.domain, 64);
    SteadyOptions opt;
    opt.max_iterations = 3;
    EXPECT_THROW(solve_minimal_steady(s, g, evaluate_profile(s.profile, g), opt), NumericalError);
}

class BoundsTest : public ::testing::Test {
protected:
    Grid grid = build_grid(Interval{1.0}, 512);
    ProfileField f = evaluate_profile(ConstantProfile{1.0}, grid);
    SpectralData s = compute_spectral_data(grid, f);
};

TEST_F(BoundsTest, NoPressure) {
    const auto b = lambda_bounds(0.0, f, s);
    EXPECT_NEAR(b.upper_torsion, 12.0, 12.0 * 1e-4);
    EXPECT_NEAR(b.upper_eigen / kPi2, 1.0, 1e-3);
    ASSERT_TRUE(b.upper_no_pressure.has_value());
    EXPECT_NEAR(*b.upper_no_pressure / (4.0 * kPi2 / 27.0), 1.0, 1e-3);
    EXPECT_FALSE(b.lower_operational.has_value());
    EXPECT_FALSE(b.no_admissible_lambda);
}

TEST_F(BoundsTest, PressureTwo) {
    const auto b = lambda_bounds(2.0, f, s);
    EXPECT_NEAR(b.upper_torsion, 10.0, 1e-3);
    EXPECT_NEAR(b.upper_eigen, kPi2 - 2.0, 1e-2);
    EXPECT_FALSE(b.upper_no_pressure.has_value());
}

TEST_F(BoundsTest, PressureAtEigenvalueFlagged) {
    const auto b = lambda_bounds(s.mu0, f, s);
    EXPECT_EQ(b.upper_eigen, 0.0);
    EXPECT_TRUE(b.no_admissible_lambda);
}

TEST_F(BoundsTest, OperationalLowerBoundFormula) {
    const double p_star = 7.5;
    const auto b = lambda_bounds(1.0, f, s, p_star);
    ASSERT_TRUE(b.lower_operational.has_value());
    EXPECT_NEAR(*b.lower_operational, 4.0 * 6.5 * 6.5 * 6.5 / (27.0 * 56.25), 1e-12);
}

}  // namespace
