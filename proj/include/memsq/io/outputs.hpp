#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "memsq/errors.hpp"
#include "memsq/io/manifest.hpp"
#include "memsq/parabolic.hpp"
#include "memsq/quench_analysis.hpp"

namespace memsq::io {

namespace fs = std::filesystem;

/// 17 significant digits: every double re-parses to itself.
inline std::string csv_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// Writes `text` to `path` byte for byte (no newline translation).
inline void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    out.flush();
    if (!out) throw IoError("write failed: " + path.string());
}

inline std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

class CsvWriter {
public:
    explicit CsvWriter(std::initializer_list<const char*> header) {
        bool first = true;
        for (const char* h : header) {
            if (!first) text_ += ',';
            text_ += h;
            first = false;
        }
        text_ += '\n';
    }

    void row(std::initializer_list<double> values) {
        bool first = true;
        for (double v : values) {
            if (!first) text_ += ',';
            text_ += csv_number(v);
            first = false;
        }
        text_ += '\n';
    }

    const std::string& str() const { return text_; }

private:
    std::string text_;
};

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    std::vector<double> column(const std::string& name) const {
        for (std::size_t c = 0; c < header.size(); ++c) {
            if (header[c] != name) continue;
            std::vector<double> out;
            out.reserve(rows.size());
            for (const auto& r : rows) out.push_back(r[c]);
            return out;
        }
        throw IoError("no column '" + name + "'");
    }
};

inline CsvTable parse_csv(std::string_view text) {
    CsvTable t;
    std::size_t pos = 0;
    int line_no = 0;
    while (pos < text.size()) {
        auto end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        const std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::size_t b = 0;
        while (true) {
            const auto comma = line.find(',', b);
            cells.emplace_back(line.substr(b, comma == std::string_view::npos ? std::string_view::npos : comma - b));
            if (comma == std::string_view::npos) break;
            b = comma + 1;
        }
        if (t.header.empty()) {
            t.header = std::move(cells);
            continue;
        }
        if (cells.size() != t.header.size())
            throw IoError("csv line " + std::to_string(line_no) + ": expected " + std::to_string(t.header.size()) +
                          " fields, got " + std::to_string(cells.size()));
        std::vector<double> row;
        for (const auto& c : cells) {
            char* e = nullptr;
            const double v = std::strtod(c.c_str(), &e);
            if (e == c.c_str() || *e != '\0') throw IoError("csv line " + std::to_string(line_no) + ": bad number '" + c + "'");
            row.push_back(v);
        }
        t.rows.push_back(std::move(row));
    }
    if (t.header.empty()) throw IoError("csv has no header");
    return t;
}

// ---------------------------------------------------------------------------
// Run artifacts
// ---------------------------------------------------------------------------

inline std::string run_csv(const Trajectory& traj) {
    CsvWriter w({"t", "U", "gap", "argmax", "dt", "ut_inf"});
    for (const auto& s : traj.samples) w.row({s.t, s.max_u, s.gap, s.argmax, s.dt, s.ut_inf});
    return w.str();
}

inline std::string snapshot_csv(const Grid& grid, const Snapshot& snap) {
    CsvWriter w({"x", "u"});
    for (std::size_t i = 0; i < grid.size(); ++i) w.row({grid.x[i], snap.u[i]});
    return w.str();
}

inline std::string similarity_csv(const SimilarityFrame& frame, const EnergyReport& energy) {
    CsvWriter w({"s", "w0", "E", "tolE"});
    for (std::size_t k = 0; k < frame.slices.size(); ++k)
        w.row({frame.slices[k].s, frame.slices[k].w0, energy.energy[k], energy.tolerance[k]});
    return w.str();
}

inline std::string snapshot_name(std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "snapshots/%04zu.csv", index);
    return buf;
}

struct SimilarityOutput {
    SimilarityFrame frame;
    EnergyReport energy;
};

inline void ensure_directory(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

/// Writes run.csv, snapshots/NNNN.csv, similarity.csv (when given) and
/// manifest.json into `dir`. The manifest's file list is filled in here.
inline RunManifest write_run_outputs(const fs::path& dir, const Trajectory& traj,
                                     const std::optional<SimilarityOutput>& similarity, RunManifest manifest) {
    ensure_directory(dir);
    std::error_code ec;
    fs::remove_all(dir / "snapshots", ec);
    ensure_directory(dir / "snapshots");
    manifest.files.clear();
    write_file(dir / "run.csv", run_csv(traj));
    manifest.files.push_back("run.csv");
    for (std::size_t k = 0; k < traj.snapshots.size(); ++k) {
        const std::string name = snapshot_name(k);
        write_file(dir / name, snapshot_csv(traj.grid, traj.snapshots[k]));
        manifest.files.push_back(name);
    }
    if (similarity) {
        write_file(dir / "similarity.csv", similarity_csv(similarity->frame, similarity->energy));
        manifest.files.push_back("similarity.csv");
    } else {
        fs::remove(dir / "similarity.csv", ec);
    }
    manifest.files.push_back("manifest.json");
    write_file(dir / "manifest.json", serialize_manifest(manifest));
    return manifest;
}

}  // namespace memsq::io
