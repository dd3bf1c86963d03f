#pragma once

#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "memsq/domain.hpp"
#include "memsq/errors.hpp"

namespace memsq::io {

using nlohmann::json;

inline constexpr const char* kSoftwareVersion = "memsq 0.1.0";

namespace detail {

// JSON has no infinity; non-finite numbers travel as strings.
inline json number(double v) {
    if (std::isfinite(v)) return v;
    if (std::isnan(v)) return "nan";
    return v > 0 ? "inf" : "-inf";
}

inline double number_from(const json& j) {
    if (j.is_number()) return j.get<double>();
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "inf") return std::numeric_limits<double>::infinity();
        if (s == "-inf") return -std::numeric_limits<double>::infinity();
        if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    }
    throw ConfigError("expected a number, got " + j.dump());
}

inline json optional_number(const std::optional<double>& v) { return v ? number(*v) : json(nullptr); }

inline std::optional<double> optional_from(const json& j) {
    if (j.is_null()) return std::nullopt;
    return number_from(j);
}

}  // namespace detail

inline json to_json(const ProblemSpec& s) {
    using detail::number;
    json j;
    if (const auto* i = std::get_if<Interval>(&s.domain)) {
        j["domain"] = {{"type", "interval"}, {"length", number(i->length)}};
    } else {
        const auto& b = std::get<RadialBall>(s.domain);
        j["domain"] = {{"type", "ball"}, {"radius", number(b.radius)}, {"dimension", b.dimension}};
    }
    j["resolution"] = s.resolution;
    if (const auto* p = std::get_if<ConstantProfile>(&s.profile)) {
        j["profile"] = {{"type", "constant"}, {"value", number(p->value)}};
    } else if (const auto* p = std::get_if<BumpProfile>(&s.profile)) {
        j["profile"] = {{"type", "bump"},
                        {"base", number(p->base)},
                        {"amplitude", number(p->amplitude)},
                        {"center", number(p->center)},
                        {"width", number(p->width)}};
    } else {
        const auto& a = std::get<AffineProfile>(s.profile);
        j["profile"] = {{"type", "affine"}, {"base", number(a.base)}, {"slope", number(a.slope)}};
    }
    j["lambda"] = number(s.lambda);
    j["pressure"] = number(s.pressure);
    if (const auto* i = std::get_if<ScaledSteadyInitial>(&s.initial)) {
        j["initial"] = {{"type", "scaled_steady"}, {"factor", number(i->factor)}};
    } else if (const auto* i = std::get_if<BumpInitial>(&s.initial)) {
        j["initial"] = {{"type", "bump"},
                        {"amplitude", number(i->amplitude)},
                        {"center", number(i->center)},
                        {"width", number(i->width)}};
    } else {
        j["initial"] = {{"type", "zero"}};
    }
    const SolverControls& c = s.controls;
    j["controls"] = {{"dt_max", number(c.dt_max)},
                     {"dt_safety", number(c.dt_safety)},
                     {"diffusion_dt_factor", number(c.diffusion_dt_factor)},
                     {"quench_gap", number(c.quench_gap)},
                     {"steady_tol", number(c.steady_tol)},
                     {"global_gap", number(c.global_gap)},
                     {"t_max", detail::optional_number(c.t_max)},
                     {"snapshot_interval", detail::optional_number(c.snapshot_interval)},
                     {"snapshots_per_decade", number(c.snapshots_per_decade)},
                     {"dense_gap", number(c.dense_gap)}};
    return j;
}

inline ProblemSpec spec_from_json(const json& j) {
    using detail::number_from;
    try {
        ProblemSpec s;
        const json& d = j.at("domain");
        if (d.at("type") == "interval") s.domain = Interval{number_from(d.at("length"))};
        else if (d.at("type") == "ball") s.domain = RadialBall{number_from(d.at("radius")), d.at("dimension").get<int>()};
        else throw ConfigError("unknown domain type " + d.at("type").dump());
        s.resolution = j.at("resolution").get<std::size_t>();
        const json& p = j.at("profile");
        const std::string pt = p.at("type");
        if (pt == "constant") s.profile = ConstantProfile{number_from(p.at("value"))};
        else if (pt == "bump")
            s.profile = BumpProfile{number_from(p.at("base")), number_from(p.at("amplitude")),
                                    number_from(p.at("center")), number_from(p.at("width"))};
        else if (pt == "affine") s.profile = AffineProfile{number_from(p.at("base")), number_from(p.at("slope"))};
        else throw ConfigError("unknown profile type " + pt);
        s.lambda = number_from(j.at("lambda"));
        s.pressure = number_from(j.at("pressure"));
        const json& i = j.at("initial");
        const std::string it = i.at("type");
        if (it == "zero") s.initial = ZeroInitial{};
        else if (it == "scaled_steady") s.initial = ScaledSteadyInitial{number_from(i.at("factor"))};
        else if (it == "bump")
            s.initial = BumpInitial{number_from(i.at("amplitude")), number_from(i.at("center")),
                                    number_from(i.at("width"))};
        else throw ConfigError("unknown initial type " + it);
        const json& c = j.at("controls");
        SolverControls& sc = s.controls;
        sc.dt_max = number_from(c.at("dt_max"));
        sc.dt_safety = number_from(c.at("dt_safety"));
        sc.diffusion_dt_factor = number_from(c.at("diffusion_dt_factor"));
        sc.quench_gap = number_from(c.at("quench_gap"));
        sc.steady_tol = number_from(c.at("steady_tol"));
        sc.global_gap = number_from(c.at("global_gap"));
        sc.t_max = detail::optional_from(c.at("t_max"));
        sc.snapshot_interval = detail::optional_from(c.at("snapshot_interval"));
        sc.snapshots_per_decade = number_from(c.at("snapshots_per_decade"));
        sc.dense_gap = number_from(c.at("dense_gap"));
        return s;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed spec JSON: ") + e.what());
    }
}

struct RunManifest {
    std::string command;
    ProblemSpec spec;
    std::string software = kSoftwareVersion;
    std::string verdict;
    std::map<std::string, double> headline;   ///< t_hat, lambda_star, rate_exponent, bounds, ...
    std::vector<std::string> files;           ///< paths relative to the output directory
    std::vector<std::string> notes;
    double wall_seconds = 0.0;

    bool operator==(const RunManifest&) const = default;
};

inline json to_json(const RunManifest& m) {
    json headline = json::object();
    for (const auto& [k, v] : m.headline) headline[k] = detail::number(v);
    return json{{"command", m.command},   {"spec", to_json(m.spec)}, {"software", m.software},
                {"verdict", m.verdict},   {"headline", headline},    {"files", m.files},
                {"notes", m.notes},       {"wall_seconds", m.wall_seconds}};
}

inline RunManifest manifest_from_json(const json& j) {
    try {
        RunManifest m;
        m.command = j.at("command");
        m.spec = spec_from_json(j.at("spec"));
        m.software = j.at("software");
        m.verdict = j.at("verdict");
        for (const auto& [k, v] : j.at("headline").items()) m.headline[k] = detail::number_from(v);
        m.files = j.at("files").get<std::vector<std::string>>();
        m.notes = j.at("notes").get<std::vector<std::string>>();
        m.wall_seconds = j.at("wall_seconds").get<double>();
        return m;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed manifest: ") + e.what());
    }
}

inline std::string serialize_manifest(const RunManifest& m) { return to_json(m).dump(2) + "\n"; }

inline RunManifest parse_manifest(std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("manifest is not valid JSON: ") + e.what());
    }
    return manifest_from_json(j);
}

inline RunManifest read_manifest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_manifest(buf.str());
}

}  // namespace memsq::io
