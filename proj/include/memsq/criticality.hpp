#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <tuple>
#include <utility>
#include <vector>

#include "memsq/elliptic.hpp"
#include "memsq/parabolic.hpp"
#include "memsq/quench_analysis.hpp"

namespace memsq {

// ---------------------------------------------------------------------------
// Probing
// ---------------------------------------------------------------------------

struct CriticalityOptions {
    double rel_tol = 1e-3;          ///< stop once (hi - lo) / hi <= rel_tol
    double horizon_factor = 200.0;  ///< probe horizon in units of 1 / mu_0
    double bracket_margin = 0.1;    ///< upper endpoint = (1 + margin) * analytic bound
    int max_probes = 200;
    bool relax_diffusion_dt = true; ///< probes step with dt_max instead of the h^2 cap
};

struct ProbeRecord {
    double value = 0.0;
    std::string verdict;
    double horizon = 0.0;   ///< horizon of the deciding run (0 for the steady fast path)
};

namespace detail {

enum class Side { global, quenched, undecided };

struct ProbeOutcome {
    Side side = Side::undecided;
    double horizon = 0.0;
};

/// classify() at horizon H, retried once at 2H when undecided.
inline ProbeOutcome probe(ProblemSpec spec, double horizon, bool relax_dt) {
    if (relax_dt) spec.controls.diffusion_dt_factor = std::numeric_limits<double>::infinity();
    ProbeOutcome out;
    for (int attempt = 0; attempt < 2; ++attempt) {
        spec.controls.t_max = horizon;
        const Classification c = classify(spec);
        out.horizon = c.fast_path ? 0.0 : horizon;
        if (std::holds_alternative<Global>(c.verdict)) {
            out.side = Side::global;
            return out;
        }
        if (std::holds_alternative<Quenched>(c.verdict)) {
            out.side = Side::quenched;
            return out;
        }
        horizon *= 2.0;
    }
    out.side = Side::undecided;
    return out;
}

inline const char* side_name(Side s) {
    switch (s) {
        case Side::global: return "global";
        case Side::quenched: return "quenched";
        default: return "undecided";
    }
}

struct Bisection {
    double lo = 0.0, hi = 0.0;
    std::vector<ProbeRecord> log;
    bool horizon_limited = false;
    bool converged = false;
};

/// Bisection with lo classified Global and hi Quenched. An undecided midpoint
/// is followed by probes at the two quarter points; whichever decides moves
/// its own endpoint. If both stay undecided the search stops.
template <typename Probe>
Bisection bisect(double lo, double hi, Probe&& probe_at, const CriticalityOptions& opt) {
    Bisection b;
    b.lo = lo;
    b.hi = hi;
    auto run = [&](double v) {
        const ProbeOutcome o = probe_at(v);
        b.log.push_back(ProbeRecord{v, side_name(o.side), o.horizon});
        return o.side;
    };
    const Side lo_side = run(lo), hi_side = run(hi);
    if (lo_side != Side::global || hi_side != Side::quenched)
        throw ConfigError("bracket endpoints do not straddle the threshold: [" + std::to_string(lo) + ", " +
                          std::to_string(hi) + "] -> " + b.log[0].verdict + ", " + b.log[1].verdict);

    int probes = 2;
    while ((b.hi - b.lo) > opt.rel_tol * b.hi && probes < opt.max_probes) {
        const double mid = 0.5 * (b.lo + b.hi);
        const Side s = run(mid);
        ++probes;
        if (s == Side::global) {
            b.lo = mid;
            continue;
        }
        if (s == Side::quenched) {
            b.hi = mid;
            continue;
        }
        b.horizon_limited = true;
        bool moved = false;
        const double upper_q = 0.5 * (mid + b.hi), lower_q = 0.5 * (b.lo + mid);
        if (run(upper_q) == Side::quenched) {
            b.hi = upper_q;
            moved = true;
        }
        if (run(lower_q) == Side::global) {
            b.lo = lower_q;
            moved = true;
        }
        probes += 2;
        if (!moved) break;
    }
    b.converged = (b.hi - b.lo) <= opt.rel_tol * b.hi;
    return b;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// lambda*_P
// ---------------------------------------------------------------------------

struct CriticalityResult {
    double pressure = 0.0;
    double estimate = 0.0;   ///< bracket midpoint
    double lo = 0.0;         ///< classified global
    double hi = 0.0;         ///< classified quenched
    std::vector<ProbeRecord> log;
    LambdaBounds bounds;
    double mu0 = 0.0;
    double horizon = 0.0;    ///< base probe horizon; undecided probes retry at twice this
    bool horizon_limited = false;
    bool converged = false;
    bool no_admissible_lambda = false;

    double relative_width() const { return hi > 0.0 ? (hi - lo) / hi : 0.0; }
};

/// Bisection on lambda at fixed pressure with zero initial data. The bracket
/// starts at [0, (1 + margin) min(torsion bound, eigen bound)].
inline CriticalityResult find_lambda_star(double pressure, const ProblemSpec& tmpl,
                                          const CriticalityOptions& opt = {},
                                          std::optional<double> p_star = std::nullopt) {
    ProblemSpec spec = tmpl;
    spec.pressure = pressure;
    spec.initial = ZeroInitial{};
    spec.lambda = 0.0;
    validate_problem(spec);
    const Grid grid = build_grid(spec.domain, spec.resolution);
    const ProfileField f = evaluate_profile(spec.profile, grid);
    const SpectralData sd = compute_spectral_data(grid, f);

    CriticalityResult r;
    r.pressure = pressure;
    r.mu0 = sd.mu0;
    r.bounds = lambda_bounds(pressure, f, sd, p_star);
    r.horizon = opt.horizon_factor / sd.mu0;
    if (pressure >= sd.mu0) {
        r.no_admissible_lambda = true;
        return r;
    }
    const double upper = (1.0 + opt.bracket_margin) * r.bounds.upper();
    auto probe_at = [&](double lambda) {
        ProblemSpec s = spec;
        s.lambda = lambda;
        return detail::probe(s, r.horizon, opt.relax_diffusion_dt);
    };
    detail::Bisection b = detail::bisect(0.0, upper, probe_at, opt);
    r.lo = b.lo;
    r.hi = b.hi;
    r.estimate = 0.5 * (b.lo + b.hi);
    r.log = std::move(b.log);
    r.horizon_limited = b.horizon_limited;
    r.converged = b.converged;
    return r;
}

// ---------------------------------------------------------------------------
// Operational P*
// ---------------------------------------------------------------------------

struct PStarResult {
    double estimate = 0.0;
    double lo = 0.0;
    double hi = 0.0;
    double lambda_tiny = 0.0;
    double mu0 = 0.0;
    double horizon = 0.0;
    std::vector<ProbeRecord> log;
    bool horizon_limited = false;
    bool converged = false;
    std::string label;

    double relative_width() const { return hi > 0.0 ? (hi - lo) / hi : 0.0; }
};

inline constexpr double kTinyLambdaFactor = 1e-4;

/// Threshold in P between global and quenching runs at lambda = 1e-4 mu_0.
/// The true P* is not computed; this is its operational stand-in.
inline PStarResult find_p_star(const ProblemSpec& tmpl, const CriticalityOptions& opt = {}) {
    ProblemSpec spec = tmpl;
    spec.initial = ZeroInitial{};
    spec.pressure = 0.0;
    validate_problem(spec);
    const Grid grid = build_grid(spec.domain, spec.resolution);
    const double mu0 = principal_eigenpair(grid).mu0;

    PStarResult r;
    r.mu0 = mu0;
    r.lambda_tiny = kTinyLambdaFactor * mu0;
    r.horizon = opt.horizon_factor / mu0;
    spec.lambda = r.lambda_tiny;
    char buf[96];
    std::snprintf(buf, sizeof buf, "operational P* at lambda_tiny = %.6g", r.lambda_tiny);
    r.label = buf;

    auto probe_at = [&](double p) {
        ProblemSpec s = spec;
        s.pressure = p;
        return detail::probe(s, r.horizon, opt.relax_diffusion_dt);
    };
    detail::Bisection b = detail::bisect(0.0, (1.0 + opt.bracket_margin) * mu0, probe_at, opt);
    r.lo = b.lo;
    r.hi = b.hi;
    r.estimate = 0.5 * (b.lo + b.hi);
    r.log = std::move(b.log);
    r.horizon_limited = b.horizon_limited;
    r.converged = b.converged;
    if (r.estimate > mu0)
        throw AnalysisError("operational P* = " + std::to_string(r.estimate) + " exceeds mu_0 = " + std::to_string(mu0));
    return r;
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

/// Worker count for concurrent runs: MEMSQ_THREADS if set, else the hardware
/// concurrency, never more than `jobs`.
inline std::size_t worker_count(std::size_t jobs) {
    std::size_t n = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("MEMSQ_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && v > 0) n = static_cast<std::size_t>(v);
    }
    return std::max<std::size_t>(1, std::min(n, jobs));
}

/// out[i] = fn(i) for i < n, evaluated on worker_count(n) threads. The first
/// exception thrown by any job is rethrown after all workers join.
template <typename Fn>
auto parallel_map(std::size_t n, Fn&& fn) -> std::vector<decltype(fn(std::size_t{}))> {
    using T = decltype(fn(std::size_t{}));
    std::vector<T> out(n);
    std::vector<std::exception_ptr> errors(n);
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < n;) {
            try {
                out[i] = fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const std::size_t workers = worker_count(n);
    if (workers <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return out;
}

inline std::string format_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string domain_tag(const DomainSpec& d) {
    if (const auto* i = std::get_if<Interval>(&d)) return "interval:L=" + format_number(i->length);
    const auto& b = std::get<RadialBall>(d);
    return "ball:n=" + std::to_string(b.dimension) + ",R=" + format_number(b.radius);
}

inline std::string profile_tag(const ProfileSpec& p) {
    if (const auto* c = std::get_if<ConstantProfile>(&p)) return "constant:" + format_number(c->value);
    if (const auto* b = std::get_if<BumpProfile>(&p))
        return "bump:" + format_number(b->base) + "," + format_number(b->amplitude) + "," + format_number(b->center) +
               "," + format_number(b->width);
    const auto& a = std::get<AffineProfile>(p);
    return "affine:" + format_number(a.base) + "," + format_number(a.slope);
}

struct SweepKey {
    double lambda = 0.0;
    double pressure = 0.0;
    std::string domain;
    std::string profile;
    std::size_t resolution = 0;

    auto tie() const { return std::tie(lambda, pressure, domain, profile, resolution); }
    bool operator==(const SweepKey& o) const { return tie() == o.tie(); }
    bool operator<(const SweepKey& o) const { return tie() < o.tie(); }

    std::string str() const {
        return "lambda=" + format_number(lambda) + ";P=" + format_number(pressure) + ";" + domain + ";" + profile +
               ";N=" + std::to_string(resolution);
    }
};

inline SweepKey sweep_key(const ProblemSpec& spec) {
    return SweepKey{spec.lambda, spec.pressure, domain_tag(spec.domain), profile_tag(spec.profile), spec.resolution};
}

struct SweepRecord {
    SweepKey key;
    std::string verdict;
    std::optional<double> t_hat;
    std::string digest;   ///< hex FNV-1a of the sampled (t, U) series

    bool operator==(const SweepRecord& o) const {
        return key == o.key && verdict == o.verdict && t_hat == o.t_hat && digest == o.digest;
    }
};

inline std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 1469598103934665603ull) {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string trajectory_digest(const Trajectory& traj) {
    std::uint64_t h = fnv1a("memsq");
    for (const auto& s : traj.samples) {
        h = fnv1a(format_number(s.t), h);
        h = fnv1a(",", h);
        h = fnv1a(format_number(s.max_u), h);
        h = fnv1a("\n", h);
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

/// Default sweep runner: classify, then extrapolate T when quenched.
inline SweepRecord run_quench_time(const ProblemSpec& spec) {
    SweepRecord rec;
    rec.key = sweep_key(spec);
    const Classification c = classify(spec);
    rec.verdict = verdict_name(c.verdict);
    if (c.run) rec.digest = trajectory_digest(c.run->trajectory);
    if (std::holds_alternative<Quenched>(c.verdict))
        rec.t_hat = estimate_quench_time(c.run->trajectory, time_fit_gap(spec.controls)).t_hat;
    return rec;
}

struct SweepResult {
    std::vector<SweepRecord> records;   ///< sorted by key
    std::vector<std::string> notes;
    std::optional<LineFit> scaling;     ///< log T against log lambda over the top decade
    bool monotone = true;               ///< T strictly decreasing in lambda
};

/// Quench times over a lambda list at fixed pressure. `run` maps a spec to a
/// record; non-quenching points are excluded with a note.
template <typename Runner>
SweepResult sweep_T_vs_lambda(const std::vector<double>& lambdas, double pressure, const ProblemSpec& tmpl,
                              Runner&& run) {
    SweepResult out;
    out.records = parallel_map(lambdas.size(), [&](std::size_t i) {
        ProblemSpec s = tmpl;
        s.lambda = lambdas[i];
        s.pressure = pressure;
        return run(s);
    });
    std::sort(out.records.begin(), out.records.end(),
              [](const SweepRecord& a, const SweepRecord& b) { return a.key < b.key; });

    std::vector<std::pair<double, double>> points;
    for (const auto& r : out.records) {
        if (r.t_hat) points.emplace_back(r.key.lambda, *r.t_hat);
        else out.notes.push_back("lambda = " + format_number(r.key.lambda) + " excluded: " + r.verdict);
    }
    for (std::size_t i = 1; i < points.size(); ++i)
        if (!(points[i].second < points[i - 1].second)) out.monotone = false;
    if (!points.empty()) {
        const double top = points.back().first;
        std::vector<double> x, y;
        for (const auto& [l, t] : points)
            if (l >= top / 10.0) {
                x.push_back(std::log(l));
                y.push_back(std::log(t));
            }
        if (x.size() >= 2) out.scaling = fit_line(x, y);
        else out.notes.push_back("fewer than two quenched points in the top decade; no scaling fit");
    }
    return out;
}

inline SweepResult sweep_T_vs_lambda(const std::vector<double>& lambdas, double pressure, const ProblemSpec& tmpl) {
    return sweep_T_vs_lambda(lambdas, pressure, tmpl, run_quench_time);
}

struct MonotonicityViolation {
    std::string along;   ///< "lambda" or "P"
    SweepKey first, second;
    double t_first = 0.0, t_second = 0.0;
};

struct MonotonicityTable {
    std::vector<double> lambdas, pressures;
    std::vector<SweepRecord> records;   ///< row-major: pressure index major, lambda index minor
    std::vector<MonotonicityViolation> violations;
    std::vector<std::string> notes;
    bool pass = true;

    const SweepRecord& at(std::size_t li, std::size_t pi) const { return records[pi * lambdas.size() + li]; }
};

/// T strictly decreasing along lambda at each P and along P at each lambda.
/// Inputs are sorted ascending before evaluation.
template <typename Runner>
MonotonicityTable monotonicity_matrix(std::vector<double> lambdas, std::vector<double> pressures,
                                      const ProblemSpec& tmpl, Runner&& run) {
    std::sort(lambdas.begin(), lambdas.end());
    std::sort(pressures.begin(), pressures.end());
    MonotonicityTable t;
    t.lambdas = lambdas;
    t.pressures = pressures;
    const std::size_t nl = lambdas.size();
    t.records = parallel_map(nl * pressures.size(), [&](std::size_t k) {
        ProblemSpec s = tmpl;
        s.lambda = lambdas[k % nl];
        s.pressure = pressures[k / nl];
        return run(s);
    });
    for (const auto& r : t.records)
        if (!r.t_hat) {
            t.pass = false;
            t.notes.push_back(r.key.str() + " did not quench (" + r.verdict + ")");
        }
    auto compare = [&](const SweepRecord& a, const SweepRecord& b, const char* along) {
        if (!a.t_hat || !b.t_hat || a.key == b.key) return;
        if (!(*b.t_hat < *a.t_hat)) {
            t.pass = false;
            t.violations.push_back(MonotonicityViolation{along, a.key, b.key, *a.t_hat, *b.t_hat});
        }
    };
    for (std::size_t pi = 0; pi < pressures.size(); ++pi)
        for (std::size_t li = 0; li + 1 < nl; ++li) compare(t.at(li, pi), t.at(li + 1, pi), "lambda");
    for (std::size_t li = 0; li < nl; ++li)
        for (std::size_t pi = 0; pi + 1 < pressures.size(); ++pi) compare(t.at(li, pi), t.at(li, pi + 1), "P");
    return t;
}

inline MonotonicityTable monotonicity_matrix(std::vector<double> lambdas, std::vector<double> pressures,
                                             const ProblemSpec& tmpl) {
    return monotonicity_matrix(std::move(lambdas), std::move(pressures), tmpl, run_quench_time);
}

}  // namespace memsq
