#pragma once

// Dataset manifests: {dataset_name, meter, entries: [{id, audio, annotations}]}.
// Relative paths are resolved against the manifest's directory.

#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "meter/core.hpp"
#include "meter/io.hpp"

namespace meter {

struct ManifestEntry {
    std::string id;
    std::filesystem::path audio;
    std::filesystem::path annotations;
};

struct DatasetManifest {
    std::string dataset_name;
    int beats_per_bar = 4;
    std::vector<ManifestEntry> entries;

    void validate(bool check_files = true) const {
        if (beats_per_bar <= 0) throw Error("bad_manifest", "meter must be positive");
        std::set<std::string> ids;
        for (const auto& e : entries) {
            if (!ids.insert(e.id).second) throw Error("bad_manifest", "duplicate track id " + e.id);
            if (!check_files) continue;
            if (!std::filesystem::exists(e.audio)) throw Error("missing_file", e.audio.string());
            if (!std::filesystem::exists(e.annotations)) throw Error("missing_file", e.annotations.string());
        }
    }
};

inline DatasetManifest manifest_from_json(const nlohmann::json& j, const std::filesystem::path& base = {}) {
    DatasetManifest m;
    try {
        m.dataset_name = j.at("dataset_name").get<std::string>();
        m.beats_per_bar = j.at("meter").get<int>();
        for (const auto& e : j.at("entries")) {
            ManifestEntry entry;
            entry.id = e.at("id").get<std::string>();
            entry.audio = e.at("audio").get<std::string>();
            entry.annotations = e.at("annotations").get<std::string>();
            if (entry.audio.is_relative()) entry.audio = base / entry.audio;
            if (entry.annotations.is_relative()) entry.annotations = base / entry.annotations;
            m.entries.push_back(std::move(entry));
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error("bad_manifest", e.what());
    }
    return m;
}

inline DatasetManifest load_manifest(const std::filesystem::path& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(io::read_text(path));
    } catch (const nlohmann::json::exception& e) {
        throw Error("bad_manifest", path.string() + ": " + e.what());
    }
    auto m = manifest_from_json(j, path.parent_path());
    m.validate();
    return m;
}

// Paths are written relative to the manifest directory when possible.
inline void save_manifest(const std::filesystem::path& path, const DatasetManifest& m) {
    const auto base = path.parent_path();
    auto rel = [&](const std::filesystem::path& p) {
        const auto r = base.empty() ? p : p.lexically_relative(base);
        return (r.empty() ? p : r).generic_string();
    };
    nlohmann::json j;
    j["dataset_name"] = m.dataset_name;
    j["meter"] = m.beats_per_bar;
    j["entries"] = nlohmann::json::array();
    for (const auto& e : m.entries)
        j["entries"].push_back({{"id", e.id}, {"audio", rel(e.audio)}, {"annotations", rel(e.annotations)}});
    io::write_text(path, j.dump(2) + "\n");
}

}  // namespace meter
