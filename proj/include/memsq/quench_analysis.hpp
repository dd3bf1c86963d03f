#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "memsq/domain.hpp"
#include "memsq/elliptic.hpp"
#include "memsq/parabolic.hpp"

namespace memsq {

// ---------------------------------------------------------------------------
// Least-squares helpers
// ---------------------------------------------------------------------------

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
};

/// Weighted least-squares line y = intercept + slope * x.
inline LineFit fit_line(std::span<const double> x, std::span<const double> y, std::span<const double> w = {}) {
    const std::size_t n = x.size();
    if (n < 2 || y.size() != n || (!w.empty() && w.size() != n)) throw AnalysisError("fit_line: need >= 2 points");
    auto weight = [&](std::size_t i) { return w.empty() ? 1.0 : w[i]; };
    double sw = 0.0, sx = 0.0, sy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sw += weight(i);
        sx += weight(i) * x[i];
        sy += weight(i) * y[i];
    }
    const double mx = sx / sw, my = sy / sw;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = x[i] - mx, dy = y[i] - my;
        sxx += weight(i) * dx * dx;
        sxy += weight(i) * dx * dy;
        syy += weight(i) * dy * dy;
    }
    if (sxx <= 0.0) throw AnalysisError("fit_line: degenerate abscissae");
    LineFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double ss_res = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = y[i] - (f.intercept + f.slope * x[i]);
        ss_res += weight(i) * r * r;
    }
    f.r_squared = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
    return f;
}

// ---------------------------------------------------------------------------
// Quenching time
// ---------------------------------------------------------------------------

inline constexpr std::size_t kMinWindowSamples = 8;

/// The asymptotic window spans the two gap decades above the quench gap.
inline double rate_window_gap(const SolverControls& c) { return 100.0 * c.quench_gap; }
/// Envelope constants and similarity frames use snapshots with gap <= 0.1.
inline constexpr double kSimilarityWindowGap = 0.1;
/// The quenching time is extrapolated from the last gap decade.
inline double time_fit_gap(const SolverControls& c) { return 10.0 * c.quench_gap; }
inline constexpr double kMinQuenchTimeR2 = 0.999;

struct QuenchTimeFit {
    double t_hat = 0.0;
    double slope = 0.0;          ///< d(1-U)^3/dt, approximately -3 lambda f(a)
    double r_squared = 0.0;
    std::size_t samples = 0;
    double gap_lo = 0.0;
    double gap_hi = 0.0;
};

/// Fits (1-U)^3 linearly in t over the samples with gap <= window_gap and
/// returns the root of the fitted line. Residuals are weighted by 1/(1-U)^6
/// so the fit is relative and the tail near touchdown pins the root.
inline QuenchTimeFit estimate_quench_time(const Trajectory& traj, double window_gap,
                                          double min_r_squared = kMinQuenchTimeR2) {
    std::vector<double> t, y, w;
    QuenchTimeFit out;
    out.gap_hi = 0.0;
    out.gap_lo = 1.0;
    for (const auto& s : traj.samples) {
        if (s.gap > window_gap || s.gap <= 0.0 || s.t == 0.0) continue;
        const double cube = s.gap * s.gap * s.gap;
        t.push_back(s.t);
        y.push_back(cube);
        w.push_back(1.0 / (cube * cube));
        out.gap_hi = std::max(out.gap_hi, s.gap);
        out.gap_lo = std::min(out.gap_lo, s.gap);
    }
    out.samples = t.size();
    if (out.samples < kMinWindowSamples)
        throw AnalysisError("estimate_quench_time: only " + std::to_string(out.samples) +
                            " samples with gap <= " + std::to_string(window_gap) + "; reduce quench_gap");
    // Center time for conditioning.
    const double t0 = t.back();
    for (double& v : t) v -= t0;
    const LineFit fit = fit_line(t, y, w);
    out.slope = fit.slope;
    out.r_squared = fit.r_squared;
    if (!(fit.slope < 0.0)) throw AnalysisError("estimate_quench_time: (1-U)^3 is not decreasing");
    if (fit.r_squared < min_r_squared)
        throw AnalysisError("estimate_quench_time: poor fit, R^2 = " + std::to_string(fit.r_squared));
    out.t_hat = t0 - fit.intercept / fit.slope;
    if (!(out.t_hat > traj.samples.back().t))
        throw AnalysisError("estimate_quench_time: extrapolated time does not exceed the last sample");
    return out;
}

struct QuenchTimeBound {
    bool applicable = false;
    double value = 0.0;
    double numerator = 0.0;     ///< ||phi||_1
    double denominator = 0.0;   ///< 3 lambda ||f phi||_1 - ||Lap phi||_1
};

/// T <= ||phi||_1 / (3 lambda ||f phi||_1 - ||Lap phi||_1) for a test
/// function phi >= 0 vanishing on the boundary.
inline QuenchTimeBound quench_time_upper_bound(const ProblemSpec& spec, const Grid& grid, const ProfileField& f,
                                               std::span<const double> phi) {
    check_field_size(phi, grid, "quench_time_upper_bound");
    bool nonzero = false;
    for (double v : phi) {
        if (v < 0.0) throw ConfigError("quench_time_upper_bound: test function must be >= 0");
        nonzero = nonzero || v > 0.0;
    }
    for (std::size_t i : grid.boundary)
        if (phi[i] != 0.0) throw ConfigError("quench_time_upper_bound: test function must vanish on the boundary");
    if (!nonzero) throw ConfigError("quench_time_upper_bound: test function is identically zero");
    Field fphi(phi.size());
    for (std::size_t i = 0; i < phi.size(); ++i) fphi[i] = f.values[i] * phi[i];
    QuenchTimeBound b;
    b.numerator = l1_norm(phi, grid);
    b.denominator = 3.0 * spec.lambda * l1_norm(fphi, grid) - l1_norm(discrete_laplacian(phi, grid), grid);
    b.applicable = b.denominator > 0.0;
    if (b.applicable) b.value = b.numerator / b.denominator;
    return b;
}

/// Same bound with the principal eigenfunction as test function.
inline QuenchTimeBound quench_time_upper_bound(const ProblemSpec& spec) {
    const Grid grid = build_grid(spec.domain, spec.resolution);
    const ProfileField f = evaluate_profile(spec.profile, grid);
    return quench_time_upper_bound(spec, grid, f, principal_eigenpair(grid).phi0);
}

// ---------------------------------------------------------------------------
// Quenching set
// ---------------------------------------------------------------------------

inline constexpr double kQuenchSetFactor = 3.0;

struct QuenchSet {
    std::vector<std::size_t> nodes;   ///< nodes with final gap <= 3 * min gap
    double margin = 0.0;              ///< distance from the set to the boundary
    std::size_t center = 0;           ///< argmax of the final snapshot
    double center_x = 0.0;
    bool at_origin = false;           ///< ball only: minimal gap exactly at r = 0
};

inline QuenchSet locate_quench_set(const Trajectory& traj) {
    if (traj.snapshots.empty()) throw AnalysisError("locate_quench_set: no snapshots");
    const Field& u = traj.snapshots.back().u;
    const Grid& grid = traj.grid;
    QuenchSet q;
    q.center = argmax_index(u);
    q.center_x = grid.x[q.center];
    const double min_gap = 1.0 - u[q.center];
    q.margin = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < u.size(); ++i) {
        if (1.0 - u[i] <= kQuenchSetFactor * min_gap) {
            q.nodes.push_back(i);
            q.margin = std::min(q.margin, grid.boundary_distance(i));
        }
    }
    q.at_origin = is_radial(grid.domain) && q.center == 0;
    return q;
}

// ---------------------------------------------------------------------------
// Rate fit and envelopes
// ---------------------------------------------------------------------------

struct RateFit {
    double exponent = 0.0;
    double amplitude = 0.0;
    double predicted_amplitude = 0.0;   ///< (3 lambda f(a))^(1/3)
    double gap_lo = 0.0;
    double gap_hi = 0.0;
    double r_squared = 0.0;
    std::size_t samples = 0;
};

inline double limit_amplitude(double lambda, double f_at_center) { return std::cbrt(3.0 * lambda * f_at_center); }

/// Regresses log(1 - u(a,t)) on log(T - t) over snapshots with
/// 1 - u(a,t) <= window_gap.
inline RateFit fit_rate(const Trajectory& traj, double t_hat, std::size_t center, double lambda, double f_center,
                        double window_gap) {
    std::vector<double> lx, ly;
    RateFit r;
    r.gap_lo = 1.0;
    for (const auto& snap : traj.snapshots) {
        const double gap = 1.0 - snap.u[center];
        const double tau = t_hat - snap.t;
        if (gap > window_gap || gap <= 0.0 || tau <= 0.0) continue;
        lx.push_back(std::log(tau));
        ly.push_back(std::log(gap));
        r.gap_lo = std::min(r.gap_lo, gap);
        r.gap_hi = std::max(r.gap_hi, gap);
    }
    r.samples = lx.size();
    if (r.samples < kMinWindowSamples || std::log10(r.gap_hi / r.gap_lo) < 1.5)
        throw AnalysisError("fit_rate: window needs >= 8 samples spanning >= 1.5 gap decades");
    const LineFit fit = fit_line(lx, ly);
    r.exponent = fit.slope;
    r.amplitude = std::exp(fit.intercept);
    r.r_squared = fit.r_squared;
    r.predicted_amplitude = limit_amplitude(lambda, f_center);
    return r;
}

struct Envelopes {
    double lower_constant = 0.0;     ///< M: M (T-t)^(1/3) <= 1 - u(a,t)
    double upper_constant = 0.0;     ///< C: 1 - max u <= C (T-t)^(1/3)
    double gradient_constant = 0.0;  ///< M'_1: |grad u| (T-t)^(1/6)
    double hessian_constant = 0.0;   ///< M'_2: |D^2 u| (T-t)^(2/3)
    std::size_t samples = 0;
    bool pass = false;
};

namespace detail {

/// max over nodes of |u'| and of the largest Hessian eigenvalue magnitude.
inline std::pair<double, double> derivative_norms(std::span<const double> u, const Grid& grid) {
    const std::size_t n = u.size();
    const double h = grid.h;
    const bool radial = is_radial(grid.domain);
    const int dim = spatial_dimension(grid.domain);
    double d1 = 0.0, d2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double ux, uxx;
        if (i == 0) {
            if (radial) {
                ux = 0.0;
                uxx = 2.0 * (u[1] - u[0]) / (h * h);
            } else {
                ux = (u[1] - u[0]) / h;
                uxx = (u[2] - 2.0 * u[1] + u[0]) / (h * h);
            }
        } else if (i + 1 == n) {
            ux = (u[i] - u[i - 1]) / h;
            uxx = (u[i] - 2.0 * u[i - 1] + u[i - 2]) / (h * h);
        } else {
            ux = (u[i + 1] - u[i - 1]) / (2.0 * h);
            uxx = (u[i + 1] - 2.0 * u[i] + u[i - 1]) / (h * h);
        }
        double hess = std::abs(uxx);
        if (radial && dim > 1 && i > 0) hess = std::max(hess, std::abs(ux / grid.x[i]));
        d1 = std::max(d1, std::abs(ux));
        d2 = std::max(d2, hess);
    }
    return {d1, d2};
}

}  // namespace detail

/// Envelope constants over the snapshots with 1 - max u <= window_gap. The two
/// rate constants are the tightest ones for which the one-sided bounds hold
/// at every window sample.
inline Envelopes check_envelopes(const Trajectory& traj, double t_hat, std::size_t center, double window_gap) {
    Envelopes e;
    e.lower_constant = std::numeric_limits<double>::infinity();
    for (const auto& snap : traj.snapshots) {
        const double tau = t_hat - snap.t;
        const double big_gap = 1.0 - max_value(snap.u);
        if (big_gap > window_gap || tau <= 0.0) continue;
        const double scale = std::cbrt(tau);
        e.lower_constant = std::min(e.lower_constant, (1.0 - snap.u[center]) / scale);
        e.upper_constant = std::max(e.upper_constant, big_gap / scale);
        const auto [d1, d2] = detail::derivative_norms(snap.u, traj.grid);
        e.gradient_constant = std::max(e.gradient_constant, d1 * std::pow(tau, 1.0 / 6.0));
        e.hessian_constant = std::max(e.hessian_constant, d2 * std::pow(tau, 2.0 / 3.0));
        ++e.samples;
    }
    if (e.samples == 0) throw AnalysisError("check_envelopes: no snapshots in the asymptotic window");
    e.pass = std::isfinite(e.lower_constant) && std::isfinite(e.upper_constant) &&
             std::isfinite(e.gradient_constant) && std::isfinite(e.hessian_constant) && e.lower_constant > 0.0 &&
             e.lower_constant <= e.upper_constant;
    return e;
}

// ---------------------------------------------------------------------------
// Similarity variables
// ---------------------------------------------------------------------------

/// One rescaled profile w(y, s) = (1 - u(a + y sqrt(T-t), t)) (T-t)^(-1/3)
/// on a uniform y-grid covering B_s intersected with the rescaled domain.
struct SimilaritySlice {
    double t = 0.0;
    double s = 0.0;
    double tau = 0.0;           ///< T - t
    double radius = 0.0;        ///< half-width of the y-window
    std::vector<double> y;
    std::vector<double> w;
    double w0 = 0.0;            ///< w at y = 0
};

struct SimilarityFrame {
    double center = 0.0;
    double t_hat = 0.0;
    int dimension = 1;          ///< radial measure exponent + 1; 1 for symmetric 1D windows
    bool radial = false;        ///< y >= 0 only, measure |S^{n-1}| y^{n-1} dy
    std::vector<SimilaritySlice> slices;
    std::vector<std::string> notes;
};

struct SimilarityOptions {
    std::size_t points = 257;
    double window_gap = kSimilarityWindowGap;
};

namespace detail {

inline double interpolate(const Grid& grid, std::span<const double> u, double x) {
    const double extent = domain_extent(grid.domain);
    x = std::clamp(x, 0.0, extent);
    const double pos = x / grid.h;
    std::size_t i = static_cast<std::size_t>(pos);
    if (i >= grid.intervals()) i = grid.intervals() - 1;
    const double frac = pos - static_cast<double>(i);
    return u[i] * (1.0 - frac) + u[i + 1] * frac;
}

}  // namespace detail

/// Rescales the snapshots with gap below `window_gap` around `center`
/// (a coordinate). On a ball with center 0 the window is radial; otherwise a
/// symmetric 1D window along x (or r) is used.
inline SimilarityFrame rescale_similarity(const Trajectory& traj, double t_hat, double center,
                                          const SimilarityOptions& opt = {}) {
    const Grid& grid = traj.grid;
    SimilarityFrame frame;
    frame.center = center;
    frame.t_hat = t_hat;
    frame.radial = is_radial(grid.domain) && center == 0.0;
    frame.dimension = frame.radial ? spatial_dimension(grid.domain) : 1;
    const double extent = domain_extent(grid.domain);
    const double dist = frame.radial ? extent : std::min(center, extent - center);
    if (!(dist > 0.0)) throw AnalysisError("rescale_similarity: center must lie inside the domain");
    const std::size_t m = std::max<std::size_t>(opt.points | 1, 5);

    for (const auto& snap : traj.snapshots) {
        if (1.0 - max_value(snap.u) > opt.window_gap) continue;
        const double tau = t_hat - snap.t;
        if (!(tau > 0.0)) {
            frame.notes.push_back("skipped snapshot at t = " + std::to_string(snap.t) + ": T - t <= 0");
            continue;
        }
        SimilaritySlice sl;
        sl.t = snap.t;
        sl.tau = tau;
        sl.s = -std::log(tau);
        const double root = std::sqrt(tau);
        sl.radius = std::min(sl.s, dist / root);
        const double scale = std::cbrt(tau);
        sl.y.resize(m);
        sl.w.resize(m);
        for (std::size_t j = 0; j < m; ++j) {
            const double y = frame.radial ? sl.radius * static_cast<double>(j) / static_cast<double>(m - 1)
                                          : sl.radius * (2.0 * static_cast<double>(j) / static_cast<double>(m - 1) - 1.0);
            sl.y[j] = y;
            sl.w[j] = (1.0 - detail::interpolate(grid, snap.u, center + y * root)) / scale;
        }
        sl.w0 = frame.radial ? sl.w.front() : sl.w[m / 2];
        frame.slices.push_back(std::move(sl));
    }
    return frame;
}

// ---------------------------------------------------------------------------
// Weighted energy
// ---------------------------------------------------------------------------

/// E[w] = 1/2 int rho |grad w|^2 - 1/6 int rho w^2 - lambda f(a) int rho / w
/// over the slice window, rho = exp(-|y|^2/4).
inline double slice_energy(const SimilaritySlice& sl, bool radial, int dimension, double lambda, double f_center) {
    const std::size_t m = sl.y.size();
    if (m < 3) throw AnalysisError("slice_energy: need >= 3 points");
    const double dy = sl.y[1] - sl.y[0];
    const double area = radial ? unit_sphere_area(dimension) : 1.0;
    double e = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
        const double w = sl.w[j];
        if (!(w > 0.0)) throw AnalysisError("slice_energy: w <= 0 in frame");
        double dw;
        if (j == 0) dw = radial ? 0.0 : (sl.w[1] - sl.w[0]) / dy;
        else if (j + 1 == m) dw = (sl.w[j] - sl.w[j - 1]) / dy;
        else dw = (sl.w[j + 1] - sl.w[j - 1]) / (2.0 * dy);
        const double y = sl.y[j];
        const double rho = std::exp(-0.25 * y * y);
        double weight = dy * ((j == 0 || j + 1 == m) ? 0.5 : 1.0);
        if (radial) weight *= area * std::pow(std::abs(y), dimension - 1);
        e += weight * rho * (0.5 * dw * dw - w * w / 6.0 - lambda * f_center / w);
    }
    return e;
}

struct EnergyReport {
    std::vector<double> s;
    std::vector<double> energy;
    std::vector<double> tolerance;   ///< C_G s^n e^{-s^2/4} + C_P e^{-2s/3}
    double c_boundary = 0.0;         ///< C_G
    double c_pressure = 0.0;         ///< C_P
    std::size_t transient = 0;       ///< samples excluded from the decay check
    bool decay_ok = true;
    std::vector<std::size_t> violations;   ///< k with E[k+1] > E[k] + tol[k]
};

inline double energy_envelope_boundary(double s, int n) { return std::pow(s, n) * std::exp(-0.25 * s * s); }
inline double energy_envelope_pressure(double s) { return std::exp(-2.0 * s / 3.0); }

/// Energy series of a frame. Increases of E during the first quarter of the
/// series fix the constants of the non-dissipative envelope; after the first
/// 20% of samples every increase must stay below that envelope.
inline EnergyReport energy_of_frame(const SimilarityFrame& frame, double lambda, double f_center) {
    const std::size_t k = frame.slices.size();
    if (k < 5) throw AnalysisError("energy_of_frame: need >= 5 s-samples, have " + std::to_string(k));
    EnergyReport r;
    const int n = frame.dimension;
    for (const auto& sl : frame.slices) {
        r.s.push_back(sl.s);
        r.energy.push_back(slice_energy(sl, frame.radial, n, lambda, f_center));
    }
    const std::size_t fit_end = std::max<std::size_t>(1, k / 4);
    for (std::size_t i = 0; i + 1 < k && i < fit_end; ++i) {
        const double rise = r.energy[i + 1] - r.energy[i];
        if (rise <= 0.0) continue;
        r.c_boundary = std::max(r.c_boundary, rise / energy_envelope_boundary(r.s[i], n));
        r.c_pressure = std::max(r.c_pressure, rise / energy_envelope_pressure(r.s[i]));
    }
    r.tolerance.resize(k);
    for (std::size_t i = 0; i < k; ++i)
        r.tolerance[i] = r.c_boundary * energy_envelope_boundary(r.s[i], n) +
                         r.c_pressure * energy_envelope_pressure(r.s[i]);
    r.transient = static_cast<std::size_t>(std::ceil(0.2 * static_cast<double>(k)));
    for (std::size_t i = r.transient; i + 1 < k; ++i) {
        if (r.energy[i + 1] > r.energy[i] + r.tolerance[i]) {
            r.decay_ok = false;
            r.violations.push_back(i);
        }
    }
    return r;
}

// ---------------------------------------------------------------------------
// Nondegeneracy
// ---------------------------------------------------------------------------

struct NondegeneracyVerdict {
    double center = 0.0;
    double final_w0 = 0.0;
    double reference = 0.0;     ///< (3 lambda f(a))^(1/3) at the quench center
    bool bounded = false;       ///< w(0,s) stays below 3x reference
    bool increasing = false;    ///< w(0,s) increases over the last decade of s
};

/// w(0,s) at a quenching point stays bounded; at a non-quenching point it
/// grows like e^{s/3}.
inline NondegeneracyVerdict nondegeneracy_probe(const SimilarityFrame& frame, double reference) {
    if (frame.slices.empty()) throw AnalysisError("nondegeneracy_probe: empty frame");
    NondegeneracyVerdict v;
    v.center = frame.center;
    v.reference = reference;
    v.final_w0 = frame.slices.back().w0;
    const double s_end = frame.slices.back().s;
    double first_in_decade = v.final_w0;
    for (const auto& sl : frame.slices)
        if (sl.s >= s_end - std::numbers::ln10) {
            first_in_decade = sl.w0;
            break;
        }
    v.increasing = v.final_w0 > first_in_decade;
    v.bounded = v.final_w0 <= 3.0 * reference;
    return v;
}

// ---------------------------------------------------------------------------
// Full report
// ---------------------------------------------------------------------------

struct QuenchReport {
    QuenchTimeFit time;
    QuenchTimeBound bound;
    bool bound_ok = true;
    QuenchSet set;
    RateFit rate;
    Envelopes envelopes;
};

inline QuenchReport analyze_quench(const Trajectory& traj, const ProblemSpec& spec) {
    const Grid& grid = traj.grid;
    const ProfileField f = evaluate_profile(spec.profile, grid);
    QuenchReport r;
    r.time = estimate_quench_time(traj, time_fit_gap(spec.controls));
    r.bound = quench_time_upper_bound(spec, grid, f, principal_eigenpair(grid).phi0);
    r.bound_ok = !r.bound.applicable || r.time.t_hat <= r.bound.value;
    r.set = locate_quench_set(traj);
    const double window = rate_window_gap(spec.controls);
    r.rate = fit_rate(traj, r.time.t_hat, r.set.center, spec.lambda, f.values[r.set.center], window);
    r.envelopes = check_envelopes(traj, r.time.t_hat, r.set.center, kSimilarityWindowGap);
    return r;
}

}  // namespace memsq
