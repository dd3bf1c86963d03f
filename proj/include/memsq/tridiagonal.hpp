#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "memsq/errors.hpp"

namespace memsq {

/// Tridiagonal matrix in three-band storage. Row i reads
/// lower[i]*x[i-1] + diag[i]*x[i] + upper[i]*x[i+1]; lower[0] and
/// upper[n-1] are ignored.
struct TridiagonalMatrix {
    std::vector<double> lower;
    std::vector<double> diag;
    std::vector<double> upper;

    explicit TridiagonalMatrix(std::size_t n = 0) : lower(n, 0.0), diag(n, 0.0), upper(n, 0.0) {}

    std::size_t size() const { return diag.size(); }

    void multiply(std::span<const double> x, std::span<double> out) const {
        const std::size_t n = size();
        for (std::size_t i = 0; i < n; ++i) {
            double v = diag[i] * x[i];
            if (i > 0) v += lower[i] * x[i - 1];
            if (i + 1 < n) v += upper[i] * x[i + 1];
            out[i] = v;
        }
    }
};

/// Thomas-algorithm LU factorization without pivoting. Valid for the
/// diagonally dominant systems assembled in this library; a vanishing pivot
/// throws NumericalError.
class TridiagonalFactor {
public:
    TridiagonalFactor() = default;

    explicit TridiagonalFactor(const TridiagonalMatrix& a) { factor(a); }

    void factor(const TridiagonalMatrix& a) {
        const std::size_t n = a.size();
        lower_ = a.lower;
        upper_prime_.assign(n, 0.0);
        inv_pivot_.assign(n, 0.0);
        double prev_upper_prime = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double pivot = a.diag[i] - (i > 0 ? a.lower[i] * prev_upper_prime : 0.0);
            if (pivot == 0.0) throw NumericalError("singular tridiagonal system at row " + std::to_string(i));
            inv_pivot_[i] = 1.0 / pivot;
            upper_prime_[i] = (i + 1 < n) ? a.upper[i] * inv_pivot_[i] : 0.0;
            prev_upper_prime = upper_prime_[i];
        }
    }

    /// Solves in place: rhs becomes the solution.
    void solve(std::span<double> rhs) const {
        const std::size_t n = inv_pivot_.size();
        if (n == 0) return;
        rhs[0] *= inv_pivot_[0];
        for (std::size_t i = 1; i < n; ++i) rhs[i] = (rhs[i] - lower_[i] * rhs[i - 1]) * inv_pivot_[i];
        for (std::size_t i = n - 1; i-- > 0;) rhs[i] -= upper_prime_[i] * rhs[i + 1];
    }

private:
    std::vector<double> lower_;
    std::vector<double> upper_prime_;
    std::vector<double> inv_pivot_;
};

}  // namespace memsq
