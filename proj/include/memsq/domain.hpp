#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "memsq/errors.hpp"
#include "memsq/tridiagonal.hpp"

namespace memsq {

using Field = std::vector<double>;

// ---------------------------------------------------------------------------
// Domains and grids
// ---------------------------------------------------------------------------

struct Interval {
    double length = 1.0;
    bool operator==(const Interval&) const = default;
};

/// Radially symmetric ball in R^n, discretized on r in [0, radius].
struct RadialBall {
    double radius = 1.0;
    int dimension = 2;
    bool operator==(const RadialBall&) const = default;
};

using DomainSpec = std::variant<Interval, RadialBall>;

inline bool is_radial(const DomainSpec& d) { return std::holds_alternative<RadialBall>(d); }

inline double domain_extent(const DomainSpec& d) {
    return std::visit([](const auto& v) {
        if constexpr (std::is_same_v<std::decay_t<decltype(v)>, Interval>) return v.length;
        else return v.radius;
    }, d);
}

/// Spatial dimension of the physical domain (1 for an interval).
inline int spatial_dimension(const DomainSpec& d) {
    if (const auto* b = std::get_if<RadialBall>(&d)) return b->dimension;
    return 1;
}

inline void validate_domain(const DomainSpec& d) {
    if (const auto* i = std::get_if<Interval>(&d)) {
        if (!(i->length > 0.0) || !std::isfinite(i->length)) throw ConfigError("interval length must be > 0");
    } else {
        const auto& b = std::get<RadialBall>(d);
        if (!(b.radius > 0.0) || !std::isfinite(b.radius)) throw ConfigError("ball radius must be > 0");
        if (b.dimension < 1) throw ConfigError("ball dimension must be >= 1");
    }
}

/// Surface area of the unit sphere in R^n.
inline double unit_sphere_area(int n) {
    return 2.0 * std::pow(std::numbers::pi, 0.5 * n) / std::tgamma(0.5 * n);
}

/// Lebesgue measure |Omega| of the physical domain.
inline double domain_volume(const DomainSpec& d) {
    if (const auto* i = std::get_if<Interval>(&d)) return i->length;
    const auto& b = std::get<RadialBall>(d);
    return unit_sphere_area(b.dimension) * std::pow(b.radius, b.dimension) / b.dimension;
}

inline constexpr std::size_t kMinResolution = 16;

/// Uniform node set x_0 < ... < x_N. Boundary nodes carry the Dirichlet
/// value 0; for a ball only r = R is a boundary node (r = 0 is the
/// symmetry axis).
struct Grid {
    DomainSpec domain;
    std::vector<double> x;
    double h = 0.0;
    std::vector<std::size_t> boundary;
    std::vector<std::size_t> interior;

    std::size_t size() const { return x.size(); }
    std::size_t intervals() const { return x.size() - 1; }

    bool is_boundary(std::size_t i) const {
        return std::find(boundary.begin(), boundary.end(), i) != boundary.end();
    }

    /// Distance from node i to the boundary of the physical domain.
    double boundary_distance(std::size_t i) const {
        const double extent = domain_extent(domain);
        if (is_radial(domain)) return extent - x[i];
        return std::min(x[i], extent - x[i]);
    }
};

inline Grid build_grid(const DomainSpec& domain, std::size_t resolution) {
    validate_domain(domain);
    if (resolution < kMinResolution)
        throw ConfigError("resolution N must be >= " + std::to_string(kMinResolution) + ", got " +
                          std::to_string(resolution));
    Grid g;
    g.domain = domain;
    const double extent = domain_extent(domain);
    g.h = extent / static_cast<double>(resolution);
    g.x.resize(resolution + 1);
    for (std::size_t i = 0; i <= resolution; ++i) g.x[i] = g.h * static_cast<double>(i);
    g.x.back() = extent;
    if (is_radial(domain)) {
        g.boundary = {resolution};
        for (std::size_t i = 0; i < resolution; ++i) g.interior.push_back(i);
    } else {
        g.boundary = {0, resolution};
        for (std::size_t i = 1; i < resolution; ++i) g.interior.push_back(i);
    }
    return g;
}

// ---------------------------------------------------------------------------
// Discrete Laplacian
// ---------------------------------------------------------------------------

/// Three-point stencil of the Dirichlet Laplacian. Boundary rows are zero.
/// Ball interior nodes use the centered radial form
///   (u[i+1] - 2u[i] + u[i-1])/h^2 + (n-1)/r_i (u[i+1] - u[i-1])/(2h),
/// and the axis node uses the symmetry limit 2n (u[1] - u[0])/h^2.
inline TridiagonalMatrix laplacian_stencil(const Grid& grid) {
    const std::size_t n = grid.size();
    TridiagonalMatrix a(n);
    const double inv_h2 = 1.0 / (grid.h * grid.h);
    const bool radial = is_radial(grid.domain);
    const int dim = spatial_dimension(grid.domain);
    for (std::size_t i : grid.interior) {
        if (radial && i == 0) {
            a.diag[0] = -2.0 * dim * inv_h2;
            a.upper[0] = 2.0 * dim * inv_h2;
            continue;
        }
        double lo = inv_h2, up = inv_h2;
        if (radial) {
            const double drift = (dim - 1) / (2.0 * grid.x[i] * grid.h);
            lo -= drift;
            up += drift;
        }
        a.lower[i] = lo;
        a.diag[i] = -2.0 * inv_h2;
        a.upper[i] = up;
    }
    return a;
}

inline void check_field_size(std::span<const double> u, const Grid& grid, const char* what) {
    if (u.size() != grid.size())
        throw ConfigError(std::string(what) + ": field has " + std::to_string(u.size()) + " entries, grid has " +
                          std::to_string(grid.size()) + " nodes");
}

inline Field discrete_laplacian(std::span<const double> u, const Grid& grid) {
    check_field_size(u, grid, "discrete_laplacian");
    const TridiagonalMatrix a = laplacian_stencil(grid);
    Field out(u.size());
    a.multiply(u, out);
    return out;
}

// ---------------------------------------------------------------------------
// Quadrature
// ---------------------------------------------------------------------------

/// Trapezoid weights for the physical measure: dx on an interval,
/// |S^{n-1}| r^{n-1} dr on a ball.
inline std::vector<double> quadrature_weights(const Grid& grid) {
    const std::size_t n = grid.size();
    std::vector<double> w(n, grid.h);
    w.front() *= 0.5;
    w.back() *= 0.5;
    if (const auto* b = std::get_if<RadialBall>(&grid.domain)) {
        const double area = unit_sphere_area(b->dimension);
        for (std::size_t i = 0; i < n; ++i) w[i] *= area * std::pow(grid.x[i], b->dimension - 1);
    }
    return w;
}

inline double integrate(std::span<const double> u, const Grid& grid) {
    check_field_size(u, grid, "integrate");
    const auto w = quadrature_weights(grid);
    double sum = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) sum += w[i] * u[i];
    return sum;
}

inline double l1_norm(std::span<const double> u, const Grid& grid) {
    check_field_size(u, grid, "l1_norm");
    const auto w = quadrature_weights(grid);
    double sum = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) sum += w[i] * std::abs(u[i]);
    return sum;
}

inline double sup_norm(std::span<const double> u) {
    double m = 0.0;
    for (double v : u) m = std::max(m, std::abs(v));
    return m;
}

inline double sup_distance(std::span<const double> a, std::span<const double> b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

// ---------------------------------------------------------------------------
// Permittivity profile f
// ---------------------------------------------------------------------------

struct ConstantProfile {
    double value = 1.0;
    bool operator==(const ConstantProfile&) const = default;
};

/// f(x) = base + amplitude * exp(-|x - center|^2 / width^2). On a ball the
/// distance is measured along r.
struct BumpProfile {
    double base = 1.0;
    double amplitude = 0.0;
    double center = 0.0;
    double width = 1.0;
    bool operator==(const BumpProfile&) const = default;
};

struct AffineProfile {
    double base = 1.0;
    double slope = 0.0;
    bool operator==(const AffineProfile&) const = default;
};

using ProfileSpec = std::variant<ConstantProfile, BumpProfile, AffineProfile>;

inline double profile_value(const ProfileSpec& p, double x) {
    return std::visit([x](const auto& v) -> double {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, ConstantProfile>) return v.value;
        else if constexpr (std::is_same_v<T, BumpProfile>) {
            const double d = (x - v.center) / v.width;
            return v.base + v.amplitude * std::exp(-d * d);
        } else return v.base + v.slope * x;
    }, p);
}

inline double profile_derivative(const ProfileSpec& p, double x) {
    return std::visit([x](const auto& v) -> double {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, ConstantProfile>) return 0.0;
        else if constexpr (std::is_same_v<T, BumpProfile>) {
            const double d = (x - v.center) / v.width;
            return -2.0 * v.amplitude * d / v.width * std::exp(-d * d);
        } else return v.slope;
    }, p);
}

/// f sampled on the grid together with the two structural hypotheses on f
/// that appear in the quenching-set results. Neither is enforced; analyses
/// assert the one they need.
struct ProfileField {
    Field values;
    double c0 = 0.0;          ///< min over nodes
    double sup = 0.0;         ///< max over nodes
    bool normal_derivative_nonpositive = false;  ///< df/dn <= 0 on the boundary
    bool gradient_positive = false;              ///< f' > 0 at every node
};

inline ProfileField evaluate_profile(const ProfileSpec& profile, const Grid& grid) {
    if (const auto* b = std::get_if<BumpProfile>(&profile); b && !(b->width > 0.0))
        throw ConfigError("bump profile width must be > 0");
    ProfileField out;
    out.values.resize(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double v = profile_value(profile, grid.x[i]);
        if (!std::isfinite(v) || v <= 0.0)
            throw ConfigError("profile f must be positive on the grid: f(x[" + std::to_string(i) +
                              "] = " + std::to_string(grid.x[i]) + ") = " + std::to_string(v));
        out.values[i] = v;
    }
    out.c0 = *std::min_element(out.values.begin(), out.values.end());
    out.sup = *std::max_element(out.values.begin(), out.values.end());

    // Outward normal derivative at each boundary node.
    const double tol = 1e-14;
    out.normal_derivative_nonpositive = true;
    for (std::size_t i : grid.boundary) {
        double dn = profile_derivative(profile, grid.x[i]);
        if (!is_radial(grid.domain) && i == 0) dn = -dn;
        if (dn > tol) out.normal_derivative_nonpositive = false;
    }
    out.gradient_positive = true;
    for (std::size_t i = 0; i < grid.size(); ++i)
        if (!(profile_derivative(profile, grid.x[i]) > 0.0)) out.gradient_positive = false;
    return out;
}

// ---------------------------------------------------------------------------
// Initial data, controls, problem
// ---------------------------------------------------------------------------

struct ZeroInitial {
    bool operator==(const ZeroInitial&) const = default;
};

/// u0 = factor * u_min with u_min the minimal steady state.
struct ScaledSteadyInitial {
    double factor = 0.5;
    bool operator==(const ScaledSteadyInitial&) const = default;
};

/// u0 = amplitude * exp(-|x - center|^2/width^2) * b(x) with b the boundary
/// taper 4x(L-x)/L^2 (interval) or 1 - (r/R)^2 (ball).
struct BumpInitial {
    double amplitude = 0.5;
    double center = 0.5;
    double width = 0.2;
    bool operator==(const BumpInitial&) const = default;
};

using InitialSpec = std::variant<ZeroInitial, ScaledSteadyInitial, BumpInitial>;

struct SolverControls {
    double dt_max = 1e-3;
    double dt_safety = 0.1;         ///< sigma_dt in the step-size rule
    double diffusion_dt_factor = 10.0;  ///< dt <= factor * dt_safety * h^2; inf lifts the cap
    double quench_gap = 1e-4;       ///< declare quenching once 1 - max u <= this
    double steady_tol = 1e-7;       ///< steady residual / |u_t| threshold
    double global_gap = 0.05;       ///< minimum gap for a Global verdict
    std::optional<double> t_max;    ///< defaults to 50 / mu_0
    std::optional<double> snapshot_interval;  ///< defaults to t_max / 50
    double snapshots_per_decade = 20.0;       ///< gap-driven snapshots once gap < dense_gap
    double dense_gap = 0.2;

    bool operator==(const SolverControls&) const = default;
};

inline void validate_controls(const SolverControls& c) {
    auto positive = [](double v, const char* name) {
        if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string(name) + " must be > 0");
    };
    positive(c.dt_max, "dt_max");
    positive(c.dt_safety, "dt_safety");
    if (!(c.diffusion_dt_factor > 0.0)) throw ConfigError("diffusion_dt_factor must be > 0");
    positive(c.quench_gap, "quench_gap");
    positive(c.steady_tol, "steady_tol");
    positive(c.global_gap, "global_gap");
    positive(c.snapshots_per_decade, "snapshots_per_decade");
    positive(c.dense_gap, "dense_gap");
    if (c.t_max) positive(*c.t_max, "t_max");
    if (c.snapshot_interval) positive(*c.snapshot_interval, "snapshot_interval");
    if (!(c.quench_gap < c.global_gap && c.global_gap < 1.0))
        throw ConfigError("controls must satisfy quench_gap < global_gap < 1");
}

struct ProblemSpec {
    DomainSpec domain = Interval{1.0};
    std::size_t resolution = 256;
    ProfileSpec profile = ConstantProfile{1.0};
    double lambda = 0.0;
    double pressure = 0.0;
    InitialSpec initial = ZeroInitial{};
    SolverControls controls{};

    bool operator==(const ProblemSpec&) const = default;
};

inline void validate_problem(const ProblemSpec& spec) {
    validate_domain(spec.domain);
    if (spec.resolution < kMinResolution)
        throw ConfigError("resolution N must be >= " + std::to_string(kMinResolution));
    if (!(spec.lambda >= 0.0) || !std::isfinite(spec.lambda)) throw ConfigError("lambda must be >= 0");
    if (!(spec.pressure >= 0.0) || !std::isfinite(spec.pressure)) throw ConfigError("pressure must be >= 0");
    validate_controls(spec.controls);
    if (const auto* s = std::get_if<ScaledSteadyInitial>(&spec.initial)) {
        if (!(s->factor >= 0.0 && s->factor < 1.0)) throw ConfigError("scaled_steady factor must lie in [0, 1)");
    } else if (const auto* b = std::get_if<BumpInitial>(&spec.initial)) {
        if (!(b->amplitude >= 0.0 && b->amplitude < 1.0)) throw ConfigError("bump initial amplitude must lie in [0, 1)");
        if (!(b->width > 0.0)) throw ConfigError("bump initial width must be > 0");
    }
}

/// Right-hand side lambda f/(1-u)^2 + P of the MEMS equation.
inline double forcing(double lambda, double f, double pressure, double u) {
    const double g = 1.0 - u;
    return lambda * f / (g * g) + pressure;
}

// ---------------------------------------------------------------------------
// Admissibility of initial data
// ---------------------------------------------------------------------------

struct Admissibility {
    bool admissible = true;
    std::string reason;
    std::optional<std::size_t> worst_node;
    double worst_value = 0.0;   ///< min over interior of Laplacian(u0) + forcing
    double tolerance = 0.0;
};

/// Checks 0 <= u0 < 1, u0 = 0 on the boundary, and
/// Laplacian(u0) + lambda f/(1-u0)^2 + P >= -eps at interior nodes with
/// eps = 10 h^2 (lambda max f + P).
inline Admissibility check_admissible_initial(std::span<const double> u0, const ProblemSpec& spec, const Grid& grid,
                                              const ProfileField& f) {
    check_field_size(u0, grid, "check_admissible_initial");
    Admissibility out;
    out.tolerance = 10.0 * grid.h * grid.h * (spec.lambda * f.sup + spec.pressure);
    for (std::size_t i = 0; i < u0.size(); ++i) {
        if (!std::isfinite(u0[i]) || u0[i] < 0.0 || u0[i] >= 1.0) {
            out.admissible = false;
            out.worst_node = i;
            out.reason = "u0 outside [0, 1) at node " + std::to_string(i);
            return out;
        }
    }
    for (std::size_t i : grid.boundary) {
        if (u0[i] != 0.0) {
            out.admissible = false;
            out.worst_node = i;
            out.reason = "u0 nonzero on boundary node " + std::to_string(i);
            return out;
        }
    }
    const Field lap = discrete_laplacian(u0, grid);
    out.worst_value = std::numeric_limits<double>::infinity();
    for (std::size_t i : grid.interior) {
        const double v = lap[i] + forcing(spec.lambda, f.values[i], spec.pressure, u0[i]);
        if (v < out.worst_value) {
            out.worst_value = v;
            out.worst_node = i;
        }
    }
    if (out.worst_value < -out.tolerance) {
        out.admissible = false;
        out.reason = "Laplacian(u0) + forcing = " + std::to_string(out.worst_value) + " < -" +
                     std::to_string(out.tolerance) + " at node " + std::to_string(*out.worst_node);
    }
    return out;
}

}  // namespace memsq
