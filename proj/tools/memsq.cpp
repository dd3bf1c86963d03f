// memsq: command-line front end.
//
//   memsq <command> CONFIG [--out DIR]
//
// Exit codes: 0 success, 2 undecided verdict, 3 configuration error,
// 4 I/O error. Other failures (numerical, analysis) exit with 1.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "memsq/memsq.hpp"

namespace {

using namespace memsq;
using nlohmann::json;
namespace fs = std::filesystem;

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUndecided = 2;
constexpr int kExitConfig = 3;
constexpr int kExitIo = 4;

const char* kConfigHelp = R"(Configuration file (key = value, '#' comments):
  lambda = 0                      top level
  pressure = 0                    top level
  [domain]   type = interval|ball, length = 1 | radius = 1, dimension = 2,
             resolution = 256
  [profile]  type = constant (value = 1) | bump (base amplitude center width)
             | affine (base slope)
  [initial]  type = zero | scaled_steady (factor) | bump (amplitude center width)
  [solver]   dt_max = 1e-3, dt_safety = 0.1, diffusion_dt_factor = 10,
             quench_gap = 1e-4, steady_tol = 1e-7, global_gap = 0.05,
             t_max = 50/mu0, snapshot_interval = t_max/50,
             snapshots_per_decade = 20, dense_gap = 0.2
  [command]  output = DIR, lambdas = a,b,..., pressures = a,b,...,
             rel_tol = 1e-3, horizon_factor = 200, store = FILE,
             control_offset = 0.3, with_pstar = false
Exit codes: 0 ok, 2 undecided, 3 config error, 4 I/O error.)";

struct Context {
    std::string command;
    io::Config cfg;
    std::optional<fs::path> out;
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

    double elapsed() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }

    io::RunManifest manifest(const std::string& verdict) const {
        io::RunManifest m;
        m.command = command;
        m.spec = cfg.spec;
        m.verdict = verdict;
        m.wall_seconds = elapsed();
        return m;
    }

    void write(const std::string& name, const std::string& text) const {
        if (!out) return;
        io::ensure_directory(*out);
        io::write_file(*out / name, text);
    }
};

void print(const json& j) { std::cout << j.dump(2) << "\n"; }

json bounds_json(const LambdaBounds& b) {
    json j{{"upper_torsion", b.upper_torsion}, {"upper_eigen", b.upper_eigen},
           {"no_admissible_lambda", b.no_admissible_lambda}};
    j["lower_operational"] = b.lower_operational ? json(*b.lower_operational) : json(nullptr);
    j["upper_no_pressure"] = b.upper_no_pressure ? json(*b.upper_no_pressure) : json(nullptr);
    return j;
}

json probes_json(const std::vector<ProbeRecord>& log) {
    json j = json::array();
    for (const auto& p : log) j.push_back({{"value", p.value}, {"verdict", p.verdict}, {"horizon", p.horizon}});
    return j;
}

CriticalityOptions criticality_options(const io::CommandOptions& c) {
    CriticalityOptions o;
    o.rel_tol = c.rel_tol;
    o.horizon_factor = c.horizon_factor;
    return o;
}

struct QuenchBundle {
    QuenchReport report;
    io::SimilarityOutput similarity;
    NondegeneracyVerdict center, control;
};

QuenchBundle analyze_all(const Trajectory& traj, const ProblemSpec& spec, double control_offset) {
    QuenchBundle b;
    b.report = analyze_quench(traj, spec);
    const Grid& grid = traj.grid;
    const ProfileField f = evaluate_profile(spec.profile, grid);
    const double fa = f.values[b.report.set.center];
    b.similarity.frame = rescale_similarity(traj, b.report.time.t_hat, b.report.set.center_x);
    b.similarity.energy = energy_of_frame(b.similarity.frame, spec.lambda, fa);
    const double ref = limit_amplitude(spec.lambda, fa);
    b.center = nondegeneracy_probe(b.similarity.frame, ref);
    const double extent = domain_extent(grid.domain);
    double control_x = b.report.set.center_x + control_offset;
    if (control_x >= extent) control_x = b.report.set.center_x - control_offset;
    if (control_x > 0.0 && control_x < extent)
        b.control = nondegeneracy_probe(rescale_similarity(traj, b.report.time.t_hat, control_x), ref);
    return b;
}

json quench_json(const QuenchBundle& b) {
    const auto& r = b.report;
    return json{{"t_hat", r.time.t_hat},
                {"t_hat_r_squared", r.time.r_squared},
                {"t_upper_bound", r.bound.applicable ? json(r.bound.value) : json(nullptr)},
                {"t_bound_ok", r.bound_ok},
                {"quench_center", r.set.center_x},
                {"quench_set_nodes", r.set.nodes.size()},
                {"boundary_margin", r.set.margin},
                {"rate", {{"exponent", r.rate.exponent},
                          {"amplitude", r.rate.amplitude},
                          {"predicted_amplitude", r.rate.predicted_amplitude},
                          {"r_squared", r.rate.r_squared},
                          {"samples", r.rate.samples}}},
                {"envelopes", {{"M", r.envelopes.lower_constant},
                               {"C", r.envelopes.upper_constant},
                               {"M1", r.envelopes.gradient_constant},
                               {"M2", r.envelopes.hessian_constant},
                               {"pass", r.envelopes.pass}}},
                {"similarity", {{"slices", b.similarity.frame.slices.size()},
                                {"final_w0", b.center.final_w0},
                                {"energy_decay_ok", b.similarity.energy.decay_ok},
                                {"energy_violations", b.similarity.energy.violations.size()},
                                {"control_final_w0", b.control.final_w0},
                                {"control_bounded", b.control.bounded}}}};
}

void fill_headline(io::RunManifest& m, const QuenchBundle& b) {
    m.headline["t_hat"] = b.report.time.t_hat;
    m.headline["rate_exponent"] = b.report.rate.exponent;
    m.headline["rate_amplitude"] = b.report.rate.amplitude;
    m.headline["predicted_amplitude"] = b.report.rate.predicted_amplitude;
    if (b.report.bound.applicable) m.headline["t_upper_bound"] = b.report.bound.value;
}

int verdict_exit(const RunVerdict& v) { return std::holds_alternative<Undecided>(v) ? kExitUndecided : kExitOk; }

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

int cmd_simulate(const Context& ctx, bool analysis_only, bool similarity_only) {
    const ProblemSpec& spec = ctx.cfg.spec;
    const IntegrationResult run = integrate(spec);
    io::RunManifest m = ctx.manifest(verdict_name(run.verdict));
    m.headline["t_max"] = run.t_max;
    json out{{"verdict", m.verdict}, {"t_max", run.t_max}, {"samples", run.trajectory.samples.size()}};
    std::optional<io::SimilarityOutput> sim;
    if (const auto* q = std::get_if<Quenched>(&run.verdict)) {
        out["t_stop"] = q->t_stop;
        out["dt_underflow"] = q->dt_underflow;
        const QuenchBundle b = analyze_all(run.trajectory, spec, ctx.cfg.command.control_offset);
        fill_headline(m, b);
        out["quench"] = quench_json(b);
        sim = b.similarity;
    } else if (const auto* g = std::get_if<Global>(&run.verdict)) {
        out["steady_residual"] = g->residual;
        out["steady_max"] = max_value(g->steady_limit);
        m.headline["steady_max"] = max_value(g->steady_limit);
    }
    if (analysis_only && out.contains("quench")) out = json{{"verdict", m.verdict}, {"quench", out["quench"]}};
    if (similarity_only && sim) {
        json series = json::array();
        for (std::size_t k = 0; k < sim->frame.slices.size(); ++k)
            series.push_back({{"s", sim->frame.slices[k].s},
                              {"w0", sim->frame.slices[k].w0},
                              {"E", sim->energy.energy[k]},
                              {"tolE", sim->energy.tolerance[k]}});
        out["similarity_series"] = series;
    }
    if (ctx.out) {
        m.wall_seconds = ctx.elapsed();
        io::write_run_outputs(*ctx.out, run.trajectory, sim, m);
    }
    print(out);
    return verdict_exit(run.verdict);
}

int cmd_steady(const Context& ctx) {
    const ProblemSpec& spec = ctx.cfg.spec;
    const Grid grid = build_grid(spec.domain, spec.resolution);
    const ProfileField f = evaluate_profile(spec.profile, grid);
    SteadyResult r;
    try {
        r = solve_minimal_steady(spec, grid, f);
    } catch (const NumericalError& e) {
        print(json{{"result", "undecided"}, {"reason", e.what()}});
        return kExitUndecided;
    }
    if (const auto* ex = std::get_if<SteadyExists>(&r)) {
        io::CsvWriter w({"x", "u"});
        for (std::size_t i = 0; i < grid.size(); ++i) w.row({grid.x[i], ex->u_min[i]});
        ctx.write("steady.csv", w.str());
        print(json{{"result", "exists"},
                   {"max_u", max_value(ex->u_min)},
                   {"residual", ex->residual},
                   {"iterations", ex->iterations}});
    } else {
        const auto& nf = std::get<SteadyNotFound>(r);
        print(json{{"result", "not_found"}, {"max_u", nf.max_u}, {"iterations", nf.iterations}});
    }
    return kExitOk;
}

int cmd_eigen(const Context& ctx) {
    const ProblemSpec& spec = ctx.cfg.spec;
    const Grid grid = build_grid(spec.domain, spec.resolution);
    const ProfileField f = evaluate_profile(spec.profile, grid);
    const SpectralData s = compute_spectral_data(grid, f);
    io::CsvWriter w({"x", "phi0", "torsion"});
    for (std::size_t i = 0; i < grid.size(); ++i) w.row({grid.x[i], s.phi0[i], s.torsion[i]});
    ctx.write("eigen.csv", w.str());
    print(json{{"mu0", s.mu0},
               {"volume", s.volume},
               {"torsion_integral", s.torsion_integral},
               {"torsion_max", s.torsion_max},
               {"torsion_f_integral", s.torsion_f_integral}});
    return kExitOk;
}

int cmd_bounds(const Context& ctx) {
    const ProblemSpec& spec = ctx.cfg.spec;
    const Grid grid = build_grid(spec.domain, spec.resolution);
    const ProfileField f = evaluate_profile(spec.profile, grid);
    const SpectralData s = compute_spectral_data(grid, f);
    std::optional<double> p_star;
    json out;
    if (ctx.cfg.command.with_pstar) {
        const PStarResult ps = find_p_star(spec, criticality_options(ctx.cfg.command));
        p_star = ps.estimate;
        out["p_star"] = {{"estimate", ps.estimate}, {"label", ps.label}};
    }
    out["pressure"] = spec.pressure;
    out["mu0"] = s.mu0;
    out["bounds"] = bounds_json(lambda_bounds(spec.pressure, f, s, p_star));
    out["hypotheses"] = {{"normal_derivative_nonpositive", f.normal_derivative_nonpositive},
                         {"gradient_positive", f.gradient_positive}};
    print(out);
    return kExitOk;
}

int cmd_critical(const Context& ctx) {
    const auto& c = ctx.cfg.command;
    std::vector<double> pressures = c.pressures;
    if (pressures.empty()) pressures.push_back(ctx.cfg.spec.pressure);
    std::optional<double> p_star;
    if (c.with_pstar) p_star = find_p_star(ctx.cfg.spec, criticality_options(c)).estimate;
    json results = json::array();
    std::string csv = "P,lambda_star,lo,hi,relative_width,converged,horizon_limited,no_admissible\n";
    bool all_decided = true;
    for (double p : pressures) {
        const CriticalityResult r = find_lambda_star(p, ctx.cfg.spec, criticality_options(c), p_star);
        all_decided = all_decided && (r.converged || r.no_admissible_lambda);
        results.push_back({{"pressure", r.pressure},
                           {"estimate", r.estimate},
                           {"lo", r.lo},
                           {"hi", r.hi},
                           {"relative_width", r.relative_width()},
                           {"converged", r.converged},
                           {"horizon_limited", r.horizon_limited},
                           {"no_admissible_lambda", r.no_admissible_lambda},
                           {"horizon", r.horizon},
                           {"bounds", bounds_json(r.bounds)},
                           {"probes", probes_json(r.log)}});
        csv += io::csv_number(r.pressure) + "," + io::csv_number(r.estimate) + "," + io::csv_number(r.lo) + "," +
               io::csv_number(r.hi) + "," + io::csv_number(r.relative_width()) + "," + (r.converged ? "1" : "0") +
               "," + (r.horizon_limited ? "1" : "0") + "," + (r.no_admissible_lambda ? "1" : "0") + "\n";
    }
    ctx.write("critical.csv", csv);
    print(json{{"results", results}});
    return all_decided ? kExitOk : kExitUndecided;
}

int cmd_pstar(const Context& ctx) {
    const PStarResult r = find_p_star(ctx.cfg.spec, criticality_options(ctx.cfg.command));
    print(json{{"label", r.label},
               {"estimate", r.estimate},
               {"lo", r.lo},
               {"hi", r.hi},
               {"relative_width", r.relative_width()},
               {"mu0", r.mu0},
               {"lambda_tiny", r.lambda_tiny},
               {"converged", r.converged},
               {"horizon_limited", r.horizon_limited},
               {"probes", probes_json(r.log)}});
    return r.converged ? kExitOk : kExitUndecided;
}

int cmd_sweep(const Context& ctx) {
    const auto& c = ctx.cfg.command;
    std::vector<double> lambdas = c.lambdas.empty() ? std::vector<double>{ctx.cfg.spec.lambda} : c.lambdas;
    std::vector<double> pressures = c.pressures.empty() ? std::vector<double>{ctx.cfg.spec.pressure} : c.pressures;
    std::map<SweepKey, SweepRecord> done;
    if (c.store) done = io::index_store(*c.store);

    std::vector<ProblemSpec> todo;
    std::vector<SweepRecord> records;
    for (double p : pressures)
        for (double l : lambdas) {
            ProblemSpec s = ctx.cfg.spec;
            s.lambda = l;
            s.pressure = p;
            auto it = done.find(sweep_key(s));
            if (it != done.end()) records.push_back(it->second);
            else todo.push_back(s);
        }
    std::vector<SweepRecord> fresh = parallel_map(todo.size(), [&](std::size_t i) { return run_quench_time(todo[i]); });
    json out;
    if (c.store) {
        const io::MergeResult mr = io::merge_sweep(*c.store, fresh);
        if (mr.warning) std::cerr << "warning: " << *mr.warning << "\n";
        out["store"] = {{"appended", mr.appended}, {"skipped", mr.skipped}, {"resumed", records.size()}};
    }
    records.insert(records.end(), fresh.begin(), fresh.end());
    ctx.write("sweep.csv", io::sweep_csv(records));

    json per_p = json::array();
    for (double p : pressures) {
        std::vector<std::pair<double, double>> pts;
        for (const auto& r : records)
            if (r.key.pressure == p && r.t_hat) pts.emplace_back(r.key.lambda, *r.t_hat);
        std::sort(pts.begin(), pts.end());
        bool monotone = true;
        for (std::size_t i = 1; i < pts.size(); ++i) monotone = monotone && pts[i].second < pts[i - 1].second;
        json entry{{"pressure", p}, {"quenched", pts.size()}, {"monotone_in_lambda", monotone}};
        if (pts.size() >= 2) {
            std::vector<double> x, y;
            for (const auto& [l, t] : pts)
                if (l >= pts.back().first / 10.0) {
                    x.push_back(std::log(l));
                    y.push_back(std::log(t));
                }
            if (x.size() >= 2) entry["loglog_slope"] = fit_line(x, y).slope;
        }
        per_p.push_back(entry);
    }
    out["pressures"] = per_p;
    out["runs"] = records.size();
    print(out);
    return kExitOk;
}

int cmd_report(const fs::path& dir) {
    const io::RunManifest m = io::read_manifest((dir / "manifest.json").string());
    for (const auto& f : m.files)
        if (!fs::exists(dir / f)) throw IoError("manifest lists missing file " + f);
    const io::CsvTable run = io::parse_csv(io::read_file(dir / "run.csv"));
    json out{{"command", m.command},
             {"verdict", m.verdict},
             {"software", m.software},
             {"lambda", m.spec.lambda},
             {"pressure", m.spec.pressure},
             {"resolution", m.spec.resolution},
             {"samples", run.rows.size()},
             {"files", m.files.size()},
             {"wall_seconds", m.wall_seconds}};
    json headline = json::object();
    for (const auto& [k, v] : m.headline) headline[k] = v;
    out["headline"] = headline;
    print(out);
    return m.verdict == "undecided" ? kExitUndecided : kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Numerical lab for u_t - Lap u = lambda f(x)/(1-u)^2 + P"};
    app.footer(kConfigHelp);
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    const std::vector<std::pair<const char*, const char*>> commands{
        {"simulate", "integrate in time, classify and write run outputs"},
        {"steady", "minimal steady state by monotone iteration"},
        {"eigen", "principal Dirichlet eigenpair and torsion function"},
        {"bounds", "closed-form bounds on lambda*_P"},
        {"critical", "bisection for lambda*_P (one per entry of pressures)"},
        {"pstar", "operational P* at tiny lambda"},
        {"sweep", "quench times over lambdas x pressures with a resumable store"},
        {"rate", "quench-time, rate and envelope fits"},
        {"similarity", "similarity-variable profiles and the weighted energy"},
    };
    for (const auto& [name, help] : commands) {
        CLI::App* sub = app.add_subcommand(name, help);
        sub->add_option("config", config_path, "configuration file")->required();
        sub->add_option("-o,--out", out_dir, "output directory (overrides [command] output)");
    }
    std::string report_dir;
    CLI::App* report = app.add_subcommand("report", "summarize an output directory");
    report->add_option("dir", report_dir, "directory written by simulate")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    try {
        if (report->parsed()) return cmd_report(report_dir);

        Context ctx;
        ctx.command = app.get_subcommands().front()->get_name();
        ctx.cfg = io::parse_config(io::read_file(config_path));
        if (!out_dir.empty()) ctx.out = fs::path(out_dir);
        else if (ctx.cfg.command.output) ctx.out = fs::path(*ctx.cfg.command.output);

        const std::string& cmd = ctx.command;
        if (cmd == "simulate") return cmd_simulate(ctx, false, false);
        if (cmd == "rate") return cmd_simulate(ctx, true, false);
        if (cmd == "similarity") return cmd_simulate(ctx, true, true);
        if (cmd == "steady") return cmd_steady(ctx);
        if (cmd == "eigen") return cmd_eigen(ctx);
        if (cmd == "bounds") return cmd_bounds(ctx);
        if (cmd == "critical") return cmd_critical(ctx);
        if (cmd == "pstar") return cmd_pstar(ctx);
        if (cmd == "sweep") return cmd_sweep(ctx);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const IoError& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return kExitIo;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFailure;
    }
    return kExitFailure;
}
