#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "memsq/domain.hpp"
#include "memsq/elliptic.hpp"

namespace memsq {

struct SimState {
    double t = 0.0;
    Field u;
    double dt = 0.0;   ///< size of the last accepted step
    std::size_t steps = 0;
    double gap = 1.0;  ///< 1 - max u
};

struct Sample {
    double t = 0.0;
    double max_u = 0.0;
    double gap = 1.0;
    double argmax = 0.0;           ///< coordinate of the maximum
    std::size_t argmax_index = 0;
    double dt = 0.0;
    double ut_inf = 0.0;           ///< max_x |u_t| estimate over the last step
};

struct Snapshot {
    double t = 0.0;
    Field u;
};

struct Trajectory {
    Grid grid;
    std::vector<Sample> samples;
    std::vector<Snapshot> snapshots;
};

struct Quenched {
    double t_stop = 0.0;
    SimState final_state;
    bool dt_underflow = false;
};

struct Global {
    Field steady_limit;
    double residual = 0.0;
    bool fast_path = false;   ///< decided by the steady solver without time stepping
};

struct Undecided {
    double horizon = 0.0;
    double final_gap = 1.0;
};

using RunVerdict = std::variant<Quenched, Global, Undecided>;

inline const char* verdict_name(const RunVerdict& v) {
    if (std::holds_alternative<Quenched>(v)) return "quenched";
    if (std::holds_alternative<Global>(v)) return "global";
    return "undecided";
}

inline std::size_t argmax_index(std::span<const double> u) {
    // first maximum: ties go to the smallest coordinate
    return static_cast<std::size_t>(std::max_element(u.begin(), u.end()) - u.begin());
}

inline double max_value(std::span<const double> u) { return *std::max_element(u.begin(), u.end()); }

// ---------------------------------------------------------------------------
// Initial data
// ---------------------------------------------------------------------------

inline Field make_initial_field(const ProblemSpec& spec, const Grid& grid, const ProfileField& f) {
    Field u0(grid.size(), 0.0);
    if (const auto* s = std::get_if<ScaledSteadyInitial>(&spec.initial)) {
        const SteadyResult steady = solve_minimal_steady(spec, grid, f);
        const auto* ex = std::get_if<SteadyExists>(&steady);
        if (!ex) throw ConfigError("scaled_steady initial data needs a steady state, none found for this lambda/P");
        for (std::size_t i = 0; i < u0.size(); ++i) u0[i] = s->factor * ex->u_min[i];
    } else if (const auto* b = std::get_if<BumpInitial>(&spec.initial)) {
        const double extent = domain_extent(grid.domain);
        const bool radial = is_radial(grid.domain);
        for (std::size_t i = 0; i < u0.size(); ++i) {
            const double x = grid.x[i];
            const double d = (x - b->center) / b->width;
            const double taper = radial ? 1.0 - (x / extent) * (x / extent) : 4.0 * x * (extent - x) / (extent * extent);
            u0[i] = b->amplitude * std::exp(-d * d) * std::max(0.0, taper);
        }
    }
    zero_boundary(u0, grid);
    return u0;
}

// ---------------------------------------------------------------------------
// Time stepping
// ---------------------------------------------------------------------------

inline constexpr double kMinTimeStep = 1e-15;
inline constexpr double kMonotoneSlack = 1e-12;

/// IMEX step for u_t = Lap u + lambda f/(1-u)^2 + P: backward Euler on the
/// diffusion, explicit reaction with a Heun corrector
///   (I - dt Lap) u* = u + dt F(u)
///   (I - dt Lap) u' = u + dt (F(u) + F(u*)) / 2.
/// The step size is min(dt_max, sigma g^3/(lambda max f), k sigma h^2) with
/// k = diffusion_dt_factor (10 by default) and is halved until max u' < 1 and
/// u' >= u nodewise (within 1e-12).
class Stepper {
public:
    struct Outcome {
        bool accepted = false;
        bool underflow = false;
        double ut_inf = 0.0;
    };

    Stepper(const ProblemSpec& spec, const Grid& grid, const ProfileField& f)
        : spec_(spec), grid_(grid), f_(f), work_(grid.size()), predictor_(grid.size()), rhs_(grid.size()) {}

    double proposed_dt(double gap) const {
        const auto& c = spec_.controls;
        double dt = std::min(c.dt_max, c.diffusion_dt_factor * c.dt_safety * grid_.h * grid_.h);
        const double rate = spec_.lambda * f_.sup;
        if (rate > 0.0) dt = std::min(dt, c.dt_safety * gap * gap * gap / rate);
        return dt;
    }

    /// Advances `s` by one accepted step no longer than `dt_limit`.
    Outcome advance(SimState& s, double dt_limit = std::numeric_limits<double>::infinity()) {
        Outcome out;
        double dt = std::min(proposed_dt(s.gap), dt_limit);
        while (dt >= kMinTimeStep) {
            if (try_step(s.u, dt)) {
                double ut = 0.0;
                for (std::size_t i = 0; i < work_.size(); ++i) ut = std::max(ut, std::abs(work_[i] - s.u[i]));
                out.ut_inf = ut / dt;
                s.u.swap(work_);
                s.t += dt;
                s.dt = dt;
                ++s.steps;
                s.gap = 1.0 - max_value(s.u);
                out.accepted = true;
                return out;
            }
            dt *= 0.5;
        }
        out.underflow = true;
        return out;
    }

private:
    void factor_for(double dt) {
        if (dt == factored_dt_) return;
        factor_.factor(dirichlet_operator(grid_, 1.0, dt));
        factored_dt_ = dt;
    }

    bool admissible_update(std::span<const double> u, std::span<const double> next) const {
        for (std::size_t i = 0; i < u.size(); ++i) {
            if (!(next[i] < 1.0) || next[i] < u[i] - kMonotoneSlack) return false;
        }
        return true;
    }

    bool try_step(std::span<const double> u, double dt) {
        factor_for(dt);
        const double lambda = spec_.lambda, p = spec_.pressure;
        for (std::size_t i = 0; i < u.size(); ++i) {
            rhs_[i] = forcing(lambda, f_.values[i], p, u[i]);
            predictor_[i] = u[i] + dt * rhs_[i];
        }
        zero_boundary(predictor_, grid_);
        factor_.solve(predictor_);
        if (!admissible_update(u, predictor_)) return false;
        for (std::size_t i = 0; i < u.size(); ++i)
            work_[i] = u[i] + 0.5 * dt * (rhs_[i] + forcing(lambda, f_.values[i], p, predictor_[i]));
        zero_boundary(work_, grid_);
        factor_.solve(work_);
        return admissible_update(u, work_);
    }

    const ProblemSpec& spec_;
    const Grid& grid_;
    const ProfileField& f_;
    TridiagonalFactor factor_;
    double factored_dt_ = -1.0;
    Field work_;
    Field predictor_;
    Field rhs_;
};

/// One step from `state` (gap must exceed quench_gap). Returns the new state;
/// a step-size underflow is reported through `underflow`.
inline SimState step(const SimState& state, const ProblemSpec& spec, bool* underflow = nullptr) {
    validate_problem(spec);
    const Grid grid = build_grid(spec.domain, spec.resolution);
    const ProfileField f = evaluate_profile(spec.profile, grid);
    check_field_size(state.u, grid, "step");
    SimState next = state;
    next.gap = 1.0 - max_value(next.u);
    Stepper stepper(spec, grid, f);
    const auto out = stepper.advance(next);
    if (underflow) *underflow = out.underflow;
    return next;
}

// ---------------------------------------------------------------------------
// Integration and classification
// ---------------------------------------------------------------------------

struct IntegrationResult {
    Trajectory trajectory;
    RunVerdict verdict;
    double t_max = 0.0;
};

/// Default horizon: 50 slowest-mode relaxation times.
inline double default_horizon(const Grid& grid) { return 50.0 / principal_eigenpair(grid).mu0; }

inline double resolve_horizon(const ProblemSpec& spec, const Grid& grid) {
    return spec.controls.t_max ? *spec.controls.t_max : default_horizon(grid);
}

/// Runs from the initial data until quenching (gap <= quench_gap), a steady
/// state (|u_t|_inf <= steady_tol with gap >= global_gap), or t_max.
inline IntegrationResult integrate(const ProblemSpec& spec) {
    validate_problem(spec);
    const auto& c = spec.controls;
    const Grid grid = build_grid(spec.domain, spec.resolution);
    const ProfileField f = evaluate_profile(spec.profile, grid);

    SimState s;
    s.u = make_initial_field(spec, grid, f);
    const Admissibility adm = check_admissible_initial(s.u, spec, grid, f);
    if (!adm.admissible) throw ConfigError("inadmissible initial data: " + adm.reason);
    s.gap = 1.0 - max_value(s.u);

    IntegrationResult result;
    result.t_max = resolve_horizon(spec, grid);
    const double t_max = result.t_max;
    const double snapshot_interval = c.snapshot_interval ? *c.snapshot_interval : t_max / 50.0;
    const double sample_interval = t_max / 4000.0;
    Trajectory& traj = result.trajectory;
    traj.grid = grid;

    auto record_sample = [&](double dt, double ut) {
        const std::size_t k = argmax_index(s.u);
        traj.samples.push_back(Sample{s.t, s.u[k], s.gap, grid.x[k], k, dt, ut});
    };
    auto take_snapshot = [&] {
        if (traj.snapshots.empty() || traj.snapshots.back().t != s.t) traj.snapshots.push_back(Snapshot{s.t, s.u});
    };

    record_sample(0.0, 0.0);
    take_snapshot();
    double next_snapshot_t = snapshot_interval;
    int gap_level = 0;  // next gap threshold is dense_gap * 10^(-gap_level/spd)
    auto gap_threshold = [&] { return c.dense_gap * std::pow(10.0, -gap_level / c.snapshots_per_decade); };

    Stepper stepper(spec, grid, f);
    double last_sample_t = 0.0;
    if (s.gap <= c.quench_gap) {
        result.verdict = Quenched{s.t, s, false};
        return result;
    }
    while (true) {
        const auto out = stepper.advance(s, t_max - s.t);
        if (!out.accepted) {
            record_sample(s.dt, std::numeric_limits<double>::infinity());
            take_snapshot();
            result.verdict = Quenched{s.t, s, true};
            return result;
        }
        const bool dense = s.gap < c.dense_gap;
        bool snap = false;
        if (s.t >= next_snapshot_t) {
            snap = true;
            while (next_snapshot_t <= s.t) next_snapshot_t += snapshot_interval;
        }
        if (dense && s.gap <= gap_threshold()) {
            snap = true;
            while (s.gap <= gap_threshold()) ++gap_level;
        }

        const bool quenched = s.gap <= c.quench_gap;
        const bool steady = out.ut_inf <= c.steady_tol && s.gap >= c.global_gap;
        const bool horizon = s.t >= t_max;
        if (dense || quenched || steady || horizon || s.t - last_sample_t >= sample_interval) {
            record_sample(s.dt, out.ut_inf);
            last_sample_t = s.t;
        }
        if (snap || quenched || steady || horizon) take_snapshot();

        if (quenched) {
            result.verdict = Quenched{s.t, s, false};
            return result;
        }
        if (steady) {
            result.verdict = Global{s.u, steady_residual(s.u, spec, grid, f), false};
            return result;
        }
        if (horizon) {
            result.verdict = Undecided{t_max, s.gap};
            return result;
        }
    }
}

struct Classification {
    RunVerdict verdict;
    std::optional<IntegrationResult> run;   ///< present when time stepping was needed
    bool fast_path = false;
    std::optional<SteadyResult> steady;     ///< steady-solver outcome, if it finished
};

/// Steady-solver fast path, falling back to time integration. A minimal
/// steady state that dominates u0 implies global convergence to it.
inline Classification classify(const ProblemSpec& spec) {
    validate_problem(spec);
    const Grid grid = build_grid(spec.domain, spec.resolution);
    const ProfileField f = evaluate_profile(spec.profile, grid);
    Classification out;
    try {
        out.steady = solve_minimal_steady(spec, grid, f);
    } catch (const NumericalError&) {
        out.steady.reset();
    }
    if (out.steady) {
        if (const auto* ex = std::get_if<SteadyExists>(&*out.steady)) {
            const Field u0 = make_initial_field(spec, grid, f);
            bool dominated = true;
            for (std::size_t i = 0; i < u0.size(); ++i) dominated = dominated && u0[i] <= ex->u_min[i];
            if (dominated) {
                out.verdict = Global{ex->u_min, ex->residual, true};
                out.fast_path = true;
                return out;
            }
        }
    }
    out.run = integrate(spec);
    out.verdict = out.run->verdict;
    return out;
}

}  // namespace memsq
