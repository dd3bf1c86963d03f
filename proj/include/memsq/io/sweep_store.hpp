#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "memsq/criticality.hpp"
#include "memsq/errors.hpp"
#include "memsq/io/outputs.hpp"

namespace memsq::io {

// One JSON object per line, keys sorted, newline terminated. Records are
// only ever appended; a key already in the file is never rewritten.

inline json to_json(const SweepRecord& r) {
    return json{{"key",
                 {{"lambda", r.key.lambda},
                  {"pressure", r.key.pressure},
                  {"domain", r.key.domain},
                  {"profile", r.key.profile},
                  {"resolution", r.key.resolution}}},
                {"verdict", r.verdict},
                {"t_hat", r.t_hat ? json(*r.t_hat) : json(nullptr)},
                {"digest", r.digest}};
}

inline SweepRecord record_from_json(const json& j) {
    SweepRecord r;
    const json& k = j.at("key");
    r.key.lambda = k.at("lambda").get<double>();
    r.key.pressure = k.at("pressure").get<double>();
    r.key.domain = k.at("domain").get<std::string>();
    r.key.profile = k.at("profile").get<std::string>();
    r.key.resolution = k.at("resolution").get<std::size_t>();
    r.verdict = j.at("verdict").get<std::string>();
    if (!j.at("t_hat").is_null()) r.t_hat = j.at("t_hat").get<double>();
    r.digest = j.at("digest").get<std::string>();
    return r;
}

inline std::string record_line(const SweepRecord& r) { return to_json(r).dump() + "\n"; }

struct StoreContents {
    std::vector<SweepRecord> records;   ///< file order
    std::size_t valid_bytes = 0;        ///< length of the well-formed prefix
    bool corrupt_tail = false;
};

/// Parses a store. Only the last line may be damaged (an interrupted write);
/// damage anywhere else is an IoError.
inline StoreContents parse_store(std::string_view text) {
    StoreContents out;
    std::size_t pos = 0;
    int line_no = 0;
    while (pos < text.size()) {
        const auto nl = text.find('\n', pos);
        const bool last = nl == std::string_view::npos || nl + 1 >= text.size();
        const std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        ++line_no;
        bool ok = nl != std::string_view::npos;
        SweepRecord rec;
        if (ok) {
            try {
                rec = record_from_json(json::parse(line));
            } catch (const json::exception&) {
                ok = false;
            }
        }
        if (!ok) {
            if (!last) throw IoError("sweep store line " + std::to_string(line_no) + " is corrupt");
            out.corrupt_tail = true;
            return out;
        }
        out.records.push_back(std::move(rec));
        pos = nl + 1;
        out.valid_bytes = pos;
    }
    return out;
}

inline StoreContents load_store(const fs::path& path) {
    if (!fs::exists(path)) return {};
    return parse_store(read_file(path));
}

struct MergeResult {
    std::size_t appended = 0;
    std::size_t skipped = 0;
    std::optional<std::string> warning;
};

/// Appends the records whose keys are not yet stored, in key order.
/// Duplicate keys within `incoming` keep their first occurrence.
inline MergeResult merge_sweep(const fs::path& path, std::vector<SweepRecord> incoming) {
    MergeResult r;
    StoreContents store = load_store(path);
    if (store.corrupt_tail) {
        std::error_code ec;
        fs::resize_file(path, store.valid_bytes, ec);
        if (ec) throw IoError("cannot truncate " + path.string() + ": " + ec.message());
        r.warning = "truncated corrupt trailing line in " + path.string();
    }
    std::set<SweepKey> present;
    for (const auto& rec : store.records) present.insert(rec.key);
    std::stable_sort(incoming.begin(), incoming.end(),
                     [](const SweepRecord& a, const SweepRecord& b) { return a.key < b.key; });
    std::string text;
    for (const auto& rec : incoming) {
        if (!present.insert(rec.key).second) {
            ++r.skipped;
            continue;
        }
        text += record_line(rec);
        ++r.appended;
    }
    if (text.empty()) return r;
    if (path.has_parent_path()) ensure_directory(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::app);
    if (!out) throw IoError("cannot open " + path.string() + " for appending");
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    out.flush();
    if (!out) throw IoError("append failed: " + path.string());
    return r;
}

/// Records of a store keyed for lookup (resume).
inline std::map<SweepKey, SweepRecord> index_store(const fs::path& path) {
    std::map<SweepKey, SweepRecord> out;
    for (auto& rec : load_store(path).records) out.emplace(rec.key, std::move(rec));
    return out;
}

inline std::string sweep_csv(std::vector<SweepRecord> records) {
    std::sort(records.begin(), records.end(), [](const SweepRecord& a, const SweepRecord& b) { return a.key < b.key; });
    std::string text = "lambda,P,N,verdict,T_hat\n";
    for (const auto& r : records) {
        text += csv_number(r.key.lambda) + "," + csv_number(r.key.pressure) + "," + std::to_string(r.key.resolution) +
                "," + r.verdict + "," + (r.t_hat ? csv_number(*r.t_hat) : std::string("nan")) + "\n";
    }
    return text;
}

}  // namespace memsq::io
