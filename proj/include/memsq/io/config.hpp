#pragma once

// Line-oriented configuration:
//
//   # comment
//   lambda = 5
//   pressure = 0
//   [domain]
//   type = interval        # or ball
//   length = 1             # ball: radius = 1, dimension = 2
//   resolution = 256
//   [profile]
//   type = constant        # constant: value | bump: base amplitude center width | affine: base slope
//   value = 1
//   [initial]
//   type = zero            # zero | scaled_steady: factor | bump: amplitude center width
//   [solver]
//   quench_gap = 1e-4
//   [command]
//   output = out/
//
// Unknown keys, duplicate keys and malformed values are errors that carry the
// line number.

#include <charconv>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "memsq/domain.hpp"
#include "memsq/errors.hpp"

namespace memsq::io {

struct CommandOptions {
    std::optional<std::string> output;
    std::vector<double> lambdas;     ///< sweep / monotonicity lists
    std::vector<double> pressures;   ///< critical / sweep lists
    double rel_tol = 1e-3;
    double horizon_factor = 200.0;   ///< criticality probe horizon, units of 1/mu_0
    std::optional<std::string> store;
    double control_offset = 0.3;     ///< distance of the off-center nondegeneracy probe
    bool with_pstar = false;         ///< bounds: compute the operational P* first

    bool operator==(const CommandOptions&) const = default;
};

struct Config {
    ProblemSpec spec;
    CommandOptions command;

    bool operator==(const Config&) const = default;
};

namespace detail {

struct Entry {
    std::string value;
    int line = 0;
};

using Section = std::map<std::string, Entry>;

inline std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

[[noreturn]] inline void fail(int line, const std::string& msg) {
    throw ConfigError("line " + std::to_string(line) + ": " + msg);
}

inline double to_double(const Entry& e, const std::string& key) {
    const std::string_view v = trim(e.value);
    double out = 0.0;
    if (v == "inf") return std::numeric_limits<double>::infinity();
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size() || !std::isfinite(out))
        fail(e.line, "'" + key + "' expects a number, got '" + std::string(v) + "'");
    return out;
}

inline long to_integer(const Entry& e, const std::string& key) {
    const std::string_view v = trim(e.value);
    long out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size())
        fail(e.line, "'" + key + "' expects an integer, got '" + std::string(v) + "'");
    return out;
}

inline bool to_bool(const Entry& e, const std::string& key) {
    const std::string_view v = trim(e.value);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    fail(e.line, "'" + key + "' expects true or false, got '" + std::string(v) + "'");
}

inline std::vector<double> to_list(const Entry& e, const std::string& key) {
    std::vector<double> out;
    std::string_view rest = e.value;
    while (!rest.empty()) {
        const auto comma = rest.find(',');
        const std::string_view item = trim(rest.substr(0, comma));
        if (item.empty()) fail(e.line, "'" + key + "' has an empty list item");
        out.push_back(to_double(Entry{std::string(item), e.line}, key));
        if (comma == std::string_view::npos) break;
        rest = rest.substr(comma + 1);
    }
    if (out.empty()) fail(e.line, "'" + key + "' expects a comma-separated list");
    return out;
}

/// Pops typed values out of a section and rejects whatever is left over.
class Reader {
public:
    Reader(Section section, std::string name) : s_(std::move(section)), name_(std::move(name)) {}

    std::optional<Entry> take(const std::string& key) {
        auto it = s_.find(key);
        if (it == s_.end()) return std::nullopt;
        Entry e = it->second;
        s_.erase(it);
        return e;
    }

    void number(const std::string& key, double& out) {
        if (auto e = take(key)) out = to_double(*e, key);
    }
    void number(const std::string& key, std::optional<double>& out) {
        if (auto e = take(key)) out = to_double(*e, key);
    }
    void list(const std::string& key, std::vector<double>& out) {
        if (auto e = take(key)) out = to_list(*e, key);
    }
    void text(const std::string& key, std::optional<std::string>& out) {
        if (auto e = take(key)) out = std::string(trim(e->value));
    }
    void flag(const std::string& key, bool& out) {
        if (auto e = take(key)) out = to_bool(*e, key);
    }

    void finish() const {
        if (s_.empty()) return;
        const auto& [key, e] = *s_.begin();
        fail(e.line, "unknown key '" + key + "'" + (name_.empty() ? "" : " in [" + name_ + "]"));
    }

private:
    Section s_;
    std::string name_;
};

inline const std::set<std::string>& known_sections() {
    static const std::set<std::string> s{"", "domain", "profile", "initial", "solver", "command"};
    return s;
}

}  // namespace detail

inline Config parse_config(std::string_view text) {
    using namespace detail;
    std::map<std::string, Section> sections;
    std::map<std::string, int> section_lines;
    std::string current;
    sections[current];
    std::istringstream in{std::string(text)};
    std::string raw;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        std::string_view l = raw;
        if (const auto hash = l.find('#'); hash != std::string_view::npos) l = l.substr(0, hash);
        l = trim(l);
        if (l.empty()) continue;
        if (l.front() == '[') {
            if (l.back() != ']') fail(line, "malformed section header");
            current = std::string(trim(l.substr(1, l.size() - 2)));
            if (!known_sections().count(current) || current.empty()) fail(line, "unknown section [" + current + "]");
            if (section_lines.count(current)) fail(line, "duplicate section [" + current + "]");
            section_lines[current] = line;
            sections[current];
            continue;
        }
        const auto eq = l.find('=');
        if (eq == std::string_view::npos) fail(line, "expected 'key = value'");
        const std::string key(trim(l.substr(0, eq)));
        const std::string value(trim(l.substr(eq + 1)));
        if (key.empty()) fail(line, "missing key");
        if (value.empty()) fail(line, "missing value for '" + key + "'");
        auto& sec = sections[current];
        if (auto it = sec.find(key); it != sec.end())
            fail(line, "duplicate key '" + key + "' (first set on line " + std::to_string(it->second.line) + ")");
        sec.emplace(key, Entry{value, line});
    }

    Config cfg;
    ProblemSpec& spec = cfg.spec;
    int spec_line = 1;

    {
        Reader top(sections[""], "");
        if (auto e = top.take("lambda")) {
            spec.lambda = to_double(*e, "lambda");
            if (spec.lambda < 0.0) fail(e->line, "lambda must be >= 0");
        }
        if (auto e = top.take("pressure")) {
            spec.pressure = to_double(*e, "pressure");
            if (spec.pressure < 0.0) fail(e->line, "pressure must be >= 0");
        }
        top.finish();
    }
    {
        Reader r(sections["domain"], "domain");
        std::string type = "interval";
        int type_line = section_lines.count("domain") ? section_lines["domain"] : 1;
        if (auto e = r.take("type")) {
            type = trim(e->value);
            type_line = e->line;
        }
        if (type == "interval") {
            Interval d;
            r.number("length", d.length);
            spec.domain = d;
        } else if (type == "ball") {
            RadialBall d;
            r.number("radius", d.radius);
            if (auto e = r.take("dimension")) d.dimension = static_cast<int>(to_integer(*e, "dimension"));
            spec.domain = d;
        } else {
            fail(type_line, "unknown domain type '" + type + "' (interval, ball)");
        }
        if (auto e = r.take("resolution")) {
            const long n = to_integer(*e, "resolution");
            if (n < static_cast<long>(kMinResolution)) fail(e->line, "resolution must be >= " + std::to_string(kMinResolution));
            spec.resolution = static_cast<std::size_t>(n);
        }
        r.finish();
        try {
            validate_domain(spec.domain);
        } catch (const ConfigError& err) {
            fail(type_line, err.what());
        }
    }
    {
        Reader r(sections["profile"], "profile");
        std::string type = "constant";
        int type_line = section_lines.count("profile") ? section_lines["profile"] : 1;
        if (auto e = r.take("type")) {
            type = trim(e->value);
            type_line = e->line;
        }
        if (type == "constant") {
            ConstantProfile p;
            r.number("value", p.value);
            spec.profile = p;
        } else if (type == "bump") {
            BumpProfile p;
            r.number("base", p.base);
            r.number("amplitude", p.amplitude);
            r.number("center", p.center);
            r.number("width", p.width);
            spec.profile = p;
        } else if (type == "affine") {
            AffineProfile p;
            r.number("base", p.base);
            r.number("slope", p.slope);
            spec.profile = p;
        } else {
            fail(type_line, "unknown profile type '" + type + "' (constant, bump, affine)");
        }
        r.finish();
        spec_line = type_line;
    }
    {
        Reader r(sections["initial"], "initial");
        std::string type = "zero";
        int type_line = section_lines.count("initial") ? section_lines["initial"] : 1;
        if (auto e = r.take("type")) {
            type = trim(e->value);
            type_line = e->line;
        }
        if (type == "zero") {
            spec.initial = ZeroInitial{};
        } else if (type == "scaled_steady") {
            ScaledSteadyInitial i;
            r.number("factor", i.factor);
            spec.initial = i;
        } else if (type == "bump") {
            BumpInitial i;
            r.number("amplitude", i.amplitude);
            r.number("center", i.center);
            r.number("width", i.width);
            spec.initial = i;
        } else {
            fail(type_line, "unknown initial type '" + type + "' (zero, scaled_steady, bump)");
        }
        r.finish();
    }
    {
        Reader r(sections["solver"], "solver");
        SolverControls& c = spec.controls;
        r.number("dt_max", c.dt_max);
        r.number("dt_safety", c.dt_safety);
        r.number("diffusion_dt_factor", c.diffusion_dt_factor);
        r.number("quench_gap", c.quench_gap);
        r.number("steady_tol", c.steady_tol);
        r.number("global_gap", c.global_gap);
        r.number("t_max", c.t_max);
        r.number("snapshot_interval", c.snapshot_interval);
        r.number("snapshots_per_decade", c.snapshots_per_decade);
        r.number("dense_gap", c.dense_gap);
        r.finish();
        try {
            validate_controls(c);
        } catch (const ConfigError& err) {
            fail(section_lines.count("solver") ? section_lines["solver"] : 1, err.what());
        }
    }
    {
        Reader r(sections["command"], "command");
        CommandOptions& o = cfg.command;
        r.text("output", o.output);
        r.list("lambdas", o.lambdas);
        r.list("pressures", o.pressures);
        r.number("rel_tol", o.rel_tol);
        r.number("horizon_factor", o.horizon_factor);
        r.text("store", o.store);
        r.number("control_offset", o.control_offset);
        r.flag("with_pstar", o.with_pstar);
        r.finish();
        const int l = section_lines.count("command") ? section_lines["command"] : 1;
        if (!(o.rel_tol > 0.0 && o.rel_tol < 1.0)) fail(l, "rel_tol must lie in (0, 1)");
        if (!(o.horizon_factor > 0.0)) fail(l, "horizon_factor must be > 0");
        for (double p : o.pressures)
            if (p < 0.0) fail(l, "pressures must be >= 0");
        for (double v : o.lambdas)
            if (v < 0.0) fail(l, "lambdas must be >= 0");
    }

    try {
        validate_problem(spec);
    } catch (const ConfigError& err) {
        fail(spec_line, err.what());
    }
    return cfg;
}

/// Inverse of parse_config up to formatting.
inline std::string format_config(const Config& cfg) {
    std::ostringstream o;
    o.precision(17);
    const ProblemSpec& s = cfg.spec;
    o << "lambda = " << s.lambda << "\npressure = " << s.pressure << "\n\n[domain]\n";
    if (const auto* i = std::get_if<Interval>(&s.domain)) {
        o << "type = interval\nlength = " << i->length << "\n";
    } else {
        const auto& b = std::get<RadialBall>(s.domain);
        o << "type = ball\nradius = " << b.radius << "\ndimension = " << b.dimension << "\n";
    }
    o << "resolution = " << s.resolution << "\n\n[profile]\n";
    if (const auto* p = std::get_if<ConstantProfile>(&s.profile)) {
        o << "type = constant\nvalue = " << p->value << "\n";
    } else if (const auto* p = std::get_if<BumpProfile>(&s.profile)) {
        o << "type = bump\nbase = " << p->base << "\namplitude = " << p->amplitude << "\ncenter = " << p->center
          << "\nwidth = " << p->width << "\n";
    } else {
        const auto& a = std::get<AffineProfile>(s.profile);
        o << "type = affine\nbase = " << a.base << "\nslope = " << a.slope << "\n";
    }
    o << "\n[initial]\n";
    if (const auto* i = std::get_if<ScaledSteadyInitial>(&s.initial)) {
        o << "type = scaled_steady\nfactor = " << i->factor << "\n";
    } else if (const auto* i = std::get_if<BumpInitial>(&s.initial)) {
        o << "type = bump\namplitude = " << i->amplitude << "\ncenter = " << i->center << "\nwidth = " << i->width
          << "\n";
    } else {
        o << "type = zero\n";
    }
    const SolverControls& c = s.controls;
    o << "\n[solver]\ndt_max = " << c.dt_max << "\ndt_safety = " << c.dt_safety << "\ndiffusion_dt_factor = "
      << c.diffusion_dt_factor << "\nquench_gap = " << c.quench_gap << "\nsteady_tol = " << c.steady_tol
      << "\nglobal_gap = " << c.global_gap << "\nsnapshots_per_decade = " << c.snapshots_per_decade
      << "\ndense_gap = " << c.dense_gap << "\n";
    if (c.t_max) o << "t_max = " << *c.t_max << "\n";
    if (c.snapshot_interval) o << "snapshot_interval = " << *c.snapshot_interval << "\n";

    const CommandOptions& cmd = cfg.command;
    auto list = [&](const char* key, const std::vector<double>& v) {
        if (v.empty()) return;
        o << key << " = ";
        for (std::size_t i = 0; i < v.size(); ++i) o << (i ? ", " : "") << v[i];
        o << "\n";
    };
    o << "\n[command]\nrel_tol = " << cmd.rel_tol << "\nhorizon_factor = " << cmd.horizon_factor
      << "\ncontrol_offset = " << cmd.control_offset << "\nwith_pstar = " << (cmd.with_pstar ? "true" : "false")
      << "\n";
    if (cmd.output) o << "output = " << *cmd.output << "\n";
    if (cmd.store) o << "store = " << *cmd.store << "\n";
    list("lambdas", cmd.lambdas);
    list("pressures", cmd.pressures);
    return o.str();
}

}  // namespace memsq::io
