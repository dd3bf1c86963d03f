#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "memsq/tridiagonal.hpp"

namespace {

using memsq::TridiagonalFactor;
using memsq::TridiagonalMatrix;

// Dense Gaussian elimination with partial pivoting.
std::vector<double> dense_solve(std::vector<std::vector<double>> a, std::vector<double> b) {
    const std::size_t n = b.size();
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t p = k;
        for (std::size_t i = k + 1; i < n; ++i)
            if (std::abs(a[i][k]) > std::abs(a[p][k])) p = i;
        std::swap(a[k], a[p]);
        std::swap(b[k], b[p]);
        for (std::size_t i = k + 1; i < n; ++i) {
            const double m = a[i][k] / a[k][k];
            for (std::size_t j = k; j < n; ++j) a[i][j] -= m * a[k][j];
            b[i] -= m * b[k];
        }
    }
    std::vector<double> x(n);
    for (std::size_t i = n; i-- > 0;) {
        double s = b[i];
        for (std::size_t j = i + 1; j < n; ++j) s -= a[i][j] * x[j];
        x[i] = s / a[i][i];
    }
    return x;
}

TEST(Tridiagonal, MatchesDenseEliminationOnRandomDominantSystems) {
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 5 + trial * 3;
        TridiagonalMatrix t(n);
        std::vector<std::vector<double>> dense(n, std::vector<double>(n, 0.0));
        std::vector<double> rhs(n);
        for (std::size_t i = 0; i < n; ++i) {
            if (i > 0) t.lower[i] = dense[i][i - 1] = u(rng);
            if (i + 1 < n) t.upper[i] = dense[i][i + 1] = u(rng);
            t.diag[i] = dense[i][i] = 2.5 + std::abs(u(rng));
            rhs[i] = u(rng);
        }
        const auto expected = dense_solve(dense, rhs);
        TridiagonalFactor f(t);
        auto x = rhs;
        f.solve(x);
        for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(x[i], expected[i], 1e-13);

        std::vector<double> back(n);
        t.multiply(x, back);
        for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(back[i], rhs[i], 1e-13);
    }
}

TEST(Tridiagonal, ZeroPivotThrows) {
    TridiagonalMatrix t(3);
    t.diag = {1.0, 1.0, 1.0};
    t.upper = {1.0, 0.0, 0.0};
    t.lower = {0.0, 1.0, 0.0};
    EXPECT_THROW(TridiagonalFactor{t}, memsq::NumericalError);
}

}  // namespace
