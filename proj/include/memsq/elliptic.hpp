#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <optional>
#include <span>
#include <utility>
#include <variant>

#include "memsq/domain.hpp"

namespace memsq {

/// alpha*I - beta*Laplacian on interior rows, identity on Dirichlet rows.
inline TridiagonalMatrix dirichlet_operator(const Grid& grid, double alpha, double beta) {
    TridiagonalMatrix a = laplacian_stencil(grid);
    for (std::size_t i = 0; i < a.size(); ++i) {
        a.lower[i] *= -beta;
        a.upper[i] *= -beta;
        a.diag[i] = alpha - beta * a.diag[i];
    }
    for (std::size_t i : grid.boundary) {
        a.lower[i] = 0.0;
        a.upper[i] = 0.0;
        a.diag[i] = 1.0;
    }
    return a;
}

inline void zero_boundary(Field& u, const Grid& grid) {
    for (std::size_t i : grid.boundary) u[i] = 0.0;
}

// ---------------------------------------------------------------------------
// Principal Dirichlet eigenpair and torsion function
// ---------------------------------------------------------------------------

struct Eigenpair {
    double mu0 = 0.0;
    Field phi0;          ///< positive in the interior, max-normalized
    double residual = 0.0;  ///< ||-Lap(phi0) - mu0 phi0||_inf / mu0
    int iterations = 0;
};

inline Eigenpair principal_eigenpair(const Grid& grid, double tol = 1e-10, int max_iterations = 2000) {
    const TridiagonalFactor minus_lap(dirichlet_operator(grid, 0.0, 1.0));
    const TridiagonalMatrix lap = laplacian_stencil(grid);
    const auto w = quadrature_weights(grid);

    Eigenpair out;
    Field phi(grid.size(), 1.0);
    zero_boundary(phi, grid);
    Field lap_phi(grid.size());
    for (int it = 1; it <= max_iterations; ++it) {
        minus_lap.solve(phi);
        const double peak = *std::max_element(phi.begin(), phi.end());
        for (double& v : phi) v /= peak;

        lap.multiply(phi, lap_phi);
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < phi.size(); ++i) {
            num -= w[i] * phi[i] * lap_phi[i];
            den += w[i] * phi[i] * phi[i];
        }
        const double mu = num / den;
        double res = 0.0;
        for (std::size_t i : grid.interior) res = std::max(res, std::abs(-lap_phi[i] - mu * phi[i]));
        out.mu0 = mu;
        out.residual = res / mu;
        out.iterations = it;
        if (out.residual <= tol) {
            out.phi0 = std::move(phi);
            return out;
        }
    }
    throw NumericalError("principal_eigenpair: inverse iteration did not converge (residual " +
                         std::to_string(out.residual) + ")");
}

/// Solution of -Lap(Phi) = 1 with zero Dirichlet data.
inline Field solve_torsion(const Grid& grid) {
    const TridiagonalFactor minus_lap(dirichlet_operator(grid, 0.0, 1.0));
    Field phi(grid.size(), 1.0);
    zero_boundary(phi, grid);
    minus_lap.solve(phi);
    return phi;
}

struct SpectralData {
    double mu0 = 0.0;
    Field phi0;
    Field torsion;
    double volume = 0.0;              ///< |Omega|
    double torsion_integral = 0.0;    ///< int Phi
    double torsion_f_integral = 0.0;  ///< int Phi f
    double torsion_max = 0.0;
    double phi_integral = 0.0;        ///< int phi0
    double f_phi_integral = 0.0;      ///< int f phi0
    double laplacian_phi_l1 = 0.0;    ///< ||Lap phi0||_1
};

inline SpectralData compute_spectral_data(const Grid& grid, const ProfileField& f) {
    SpectralData s;
    auto eig = principal_eigenpair(grid);
    s.mu0 = eig.mu0;
    s.phi0 = std::move(eig.phi0);
    s.torsion = solve_torsion(grid);
    s.volume = domain_volume(grid.domain);
    s.torsion_integral = integrate(s.torsion, grid);
    s.torsion_max = *std::max_element(s.torsion.begin(), s.torsion.end());
    Field prod(grid.size());
    for (std::size_t i = 0; i < prod.size(); ++i) prod[i] = s.torsion[i] * f.values[i];
    s.torsion_f_integral = integrate(prod, grid);
    s.phi_integral = integrate(s.phi0, grid);
    for (std::size_t i = 0; i < prod.size(); ++i) prod[i] = s.phi0[i] * f.values[i];
    s.f_phi_integral = integrate(prod, grid);
    s.laplacian_phi_l1 = l1_norm(discrete_laplacian(s.phi0, grid), grid);
    return s;
}

// ---------------------------------------------------------------------------
// Minimal steady state by monotone iteration
// ---------------------------------------------------------------------------

struct SteadyExists {
    Field u_min;
    double residual = 0.0;
    int iterations = 0;
};

struct SteadyNotFound {
    double max_u = 0.0;
    int iterations = 0;
};

using SteadyResult = std::variant<SteadyExists, SteadyNotFound>;

struct SteadyOptions {
    double break_gap = 1e-3;   ///< iterates reaching 1 - break_gap mean no steady state
    int max_iterations = 500;
};

inline double steady_residual(std::span<const double> u, const ProblemSpec& spec, const Grid& grid,
                              const ProfileField& f) {
    const Field lap = discrete_laplacian(u, grid);
    double res = 0.0;
    for (std::size_t i : grid.interior)
        res = std::max(res, std::abs(-lap[i] - forcing(spec.lambda, f.values[i], spec.pressure, u[i])));
    return res;
}

/// Picard iteration -Lap u_{k+1} = lambda f/(1-u_k)^2 + P from u_0 = 0.
/// The iterates increase monotonically; their limit below 1 is the minimal
/// steady state. `on_iterate(k, u_k)` sees every iterate.
template <std::invocable<int, std::span<const double>> Observer>
SteadyResult solve_minimal_steady(const ProblemSpec& spec, const Grid& grid, const ProfileField& f,
                                  Observer&& on_iterate, const SteadyOptions& opt = {}) {
    const double tol = spec.controls.steady_tol;
    const TridiagonalFactor minus_lap(dirichlet_operator(grid, 0.0, 1.0));
    Field u(grid.size(), 0.0), next(grid.size());
    on_iterate(0, std::as_const(u));
    for (int k = 1; k <= opt.max_iterations; ++k) {
        for (std::size_t i = 0; i < u.size(); ++i) next[i] = forcing(spec.lambda, f.values[i], spec.pressure, u[i]);
        zero_boundary(next, grid);
        minus_lap.solve(next);
        on_iterate(k, std::as_const(next));

        const double peak = *std::max_element(next.begin(), next.end());
        if (!(peak < 1.0 - opt.break_gap)) return SteadyNotFound{peak, k};
        const double change = sup_distance(next, u);
        u.swap(next);
        if (change <= tol * (1.0 - peak)) {
            const double res = steady_residual(u, spec, grid, f);
            if (res <= tol) return SteadyExists{u, res, k};
        }
    }
    throw NumericalError("solve_minimal_steady: no convergence within " + std::to_string(opt.max_iterations) +
                         " iterations (max u = " + std::to_string(*std::max_element(u.begin(), u.end())) + ")");
}

inline SteadyResult solve_minimal_steady(const ProblemSpec& spec, const Grid& grid, const ProfileField& f,
                                         const SteadyOptions& opt = {}) {
    return solve_minimal_steady(spec, grid, f, [](int, std::span<const double>) {}, opt);
}

inline SteadyResult solve_minimal_steady(const ProblemSpec& spec) {
    validate_problem(spec);
    const Grid grid = build_grid(spec.domain, spec.resolution);
    return solve_minimal_steady(spec, grid, evaluate_profile(spec.profile, grid));
}

// ---------------------------------------------------------------------------
// Closed-form bounds on the pull-in voltage
// ---------------------------------------------------------------------------

struct LambdaBounds {
    /// 4(P*-P)^3/(27 P*^2 sup f) with an operationally computed P*.
    std::optional<double> lower_operational;
    /// (|Omega| - P int Phi) / int Phi f.
    double upper_torsion = 0.0;
    /// (mu0 - P)/c0.
    double upper_eigen = 0.0;
    /// (4/27) mu0, reported for P = 0 only.
    std::optional<double> upper_no_pressure;
    bool no_admissible_lambda = false;

    double upper() const { return std::min(upper_torsion, upper_eigen); }
};

inline LambdaBounds lambda_bounds(double pressure, const ProfileField& f, const SpectralData& s,
                                  std::optional<double> p_star = std::nullopt) {
    LambdaBounds b;
    b.upper_torsion = std::max(0.0, (s.volume - pressure * s.torsion_integral) / s.torsion_f_integral);
    if (pressure >= s.mu0) {
        b.upper_eigen = 0.0;
        b.no_admissible_lambda = true;
    } else {
        b.upper_eigen = (s.mu0 - pressure) / f.c0;
    }
    if (pressure == 0.0) b.upper_no_pressure = 4.0 / 27.0 * s.mu0;
    if (p_star && *p_star > 0.0) {
        const double d = std::max(0.0, *p_star - pressure);
        b.lower_operational = 4.0 * d * d * d / (27.0 * (*p_star) * (*p_star) * f.sup);
    }
    return b;
}

}  // namespace memsq
