#pragma once

// Nested JSON configuration for the command-line tool. Every key is optional;
// missing keys keep their defaults and unknown keys are rejected. The same
// field list drives parsing and the dump of defaults, so the two cannot drift.

#include <cstdlib>
#include <functional>
#include <set>
#include <string>

#include "meter/harness.hpp"
#include "meter/profile.hpp"

namespace meter::config {

struct CliConfig {
    harness::ExperimentConfig experiment;
    profile::ProfileConfig profile;
    std::vector<int> track_meters{3, 4};  // candidate meters when tracking with a TCN model

    void validate() const {
        const auto& e = experiment;
        e.tcn.validate();
        e.scratch_schedule.validate();
        e.finetune_schedule.validate();
        e.bayes.grid.validate();
        if (e.tempo) e.tempo->validate();
        if (!(e.features.frame_rate > 0.0 && e.features.window_seconds > 0.0))
            throw Error("invalid_config", "features.frame_rate and features.window_seconds must be positive");
        if (!(e.features.fmin > 0.0 && e.features.fmin < e.features.fmax))
            throw Error("invalid_config", "features.fmin must be positive and below features.fmax");
        if (e.bayes.position_bins <= 0 || e.bayes.max_tempo_bins <= 0 || e.bayes.gmm_components == 0)
            throw Error("invalid_config", "bayes sizes must be positive");
        if (!(e.bayes.tempo_change_prob >= 0.0 && e.bayes.tempo_change_prob < 1.0) ||
            !(e.dbn.tempo_change_prob >= 0.0 && e.dbn.tempo_change_prob < 1.0))
            throw Error("invalid_config", "tempo_change_prob must be in [0, 1)");
        if (!(e.dbn.observation_lambda > 1.0) || e.dbn.max_tempi < 2)
            throw Error("invalid_config", "dbn.observation_lambda must exceed 1 and dbn.max_tempi must be at least 2");
        if (!(e.snippets.snippet_seconds > 0.0) || !(e.load.excerpt_seconds > 0.0) || e.load.max_excerpts == 0)
            throw Error("invalid_config", "data lengths and counts must be positive");
        if (!(e.snippets.all_val_fraction > 0.0 && e.snippets.all_val_fraction < 1.0))
            throw Error("invalid_config", "data.all_val_fraction must be in (0, 1)");
        if (track_meters.empty()) throw Error("invalid_config", "track.beats_per_bar must not be empty");
        for (int m : track_meters)
            if (m <= 0) throw Error("invalid_config", "track.beats_per_bar entries must be positive");
    }
};

namespace detail {

using nlohmann::json;

class Reader {
public:
    Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw Error("bad_config", where() + "expected an object");
    }

    template <class T>
    void field(const char* key, T& value) {
        seen_.insert(key);
        if (!j_.contains(key)) return;
        try {
            value = j_.at(key).get<T>();
        } catch (const json::exception&) {
            throw Error("bad_config", where() + key + ": wrong type");
        }
    }

    void section(const char* key, const std::function<void(Reader&)>& body) {
        seen_.insert(key);
        if (!j_.contains(key)) return;
        Reader sub(j_.at(key), path_ + key + ".");
        body(sub);
        sub.finish();
    }

    void tempo(const char* key, std::optional<TempoRange>& value) {
        seen_.insert(key);
        if (!j_.contains(key) || j_.at(key).is_null()) return;
        TempoRange r;
        Reader sub(j_.at(key), path_ + key + ".");
        sub.field("min_bpm", r.min_bpm);
        sub.field("max_bpm", r.max_bpm);
        sub.finish();
        value = r;
    }

    void finish() const {
        for (const auto& [k, v] : j_.items())
            if (!seen_.count(k)) throw Error("unknown_config_key", path_ + k);
    }

private:
    std::string where() const { return path_.empty() ? "" : path_; }

    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

class Writer {
public:
    template <class T>
    void field(const char* key, T& value) {
        j[key] = value;
    }

    void section(const char* key, const std::function<void(Writer&)>& body) {
        Writer sub;
        body(sub);
        j[key] = sub.j;
    }

    void tempo(const char* key, std::optional<TempoRange>& value) {
        j[key] = value ? json{{"min_bpm", value->min_bpm}, {"max_bpm", value->max_bpm}} : json(nullptr);
    }

    json j = json::object();
};

template <class Io>
void schedule_fields(Io& s, tcn::TrainSchedule& v) {
    s.field("initial_lr", v.initial_lr);
    s.field("plateau_patience", v.plateau_patience);
    s.field("lr_factor", v.lr_factor);
    s.field("max_epochs", v.max_epochs);
    s.field("early_stop_patience", v.early_stop_patience);
    s.field("min_delta", v.min_delta);
}

template <class Io>
void visit(Io& io, CliConfig& c) {
    auto& e = c.experiment;
    io.section("features", [&](Io& s) {
        s.field("frame_rate", e.features.frame_rate);
        s.field("window_seconds", e.features.window_seconds);
        s.field("log_lambda", e.features.log_lambda);
        s.field("bands_per_octave", e.features.bands_per_octave);
        s.field("fmin", e.features.fmin);
        s.field("fmax", e.features.fmax);
    });
    io.section("tcn", [&](Io& s) {
        s.field("n_inputs", e.tcn.n_inputs);
        s.field("n_layers", e.tcn.n_layers);
        s.field("channels", e.tcn.base_channels);
        s.field("kernel_size", e.tcn.kernel_size);
        s.field("dilations", e.tcn.dilations);
        s.field("dropout", e.tcn.dropout_rate);
    });
    io.section("schedule", [&](Io& s) {
        s.section("scratch", [&](Io& t) { schedule_fields(t, e.scratch_schedule); });
        s.section("finetune", [&](Io& t) { schedule_fields(t, e.finetune_schedule); });
    });
    io.section("bayes", [&](Io& s) {
        s.field("bins_per_bar", e.bayes.grid.bins_per_bar);
        s.field("position_bins", e.bayes.position_bins);
        s.field("tempo_bins", e.bayes.max_tempo_bins);
        s.field("tempo_change_prob", e.bayes.tempo_change_prob);
        s.field("gmm_components", e.bayes.gmm_components);
        s.field("tempo_margin", e.bayes.tempo_margin);
    });
    io.section("dbn", [&](Io& s) {
        s.field("observation_lambda", e.dbn.observation_lambda);
        s.field("tempo_change_prob", e.dbn.tempo_change_prob);
        s.field("max_tempi", e.dbn.max_tempi);
        s.field("activation_floor", e.dbn.activation_floor);
    });
    io.tempo("tempo", e.tempo);
    io.section("eval", [&](Io& s) {
        s.field("window", e.eval.window);
        s.field("phase_tol", e.eval.phase_tol);
        s.field("period_tol", e.eval.period_tol);
        s.field("skip_seconds", e.eval.skip_seconds);
    });
    io.section("data", [&](Io& s) {
        s.field("excerpt_seconds", e.load.excerpt_seconds);
        s.field("max_excerpts", e.load.max_excerpts);
        s.field("sample_seed", e.load.seed);
        s.field("snippet_seconds", e.snippets.snippet_seconds);
        s.field("all_val_fraction", e.snippets.all_val_fraction);
    });
    io.section("paths", [&](Io& s) { s.field("pretrained", e.pretrained); });
    io.section("experiment", [&](Io& s) { s.field("bootstrap_resamples", e.bootstrap_resamples); });
    io.section("profile", [&](Io& s) {
        s.field("half_window_seconds", c.profile.half_window_seconds);
        s.field("anchor_variance", c.profile.anchor_variance);
    });
    io.section("track", [&](Io& s) { s.field("beats_per_bar", c.track_meters); });
}

}  // namespace detail

// Relative paths inside the file resolve against the file's directory.
inline CliConfig parse(const nlohmann::json& j, const std::filesystem::path& base = {}) {
    CliConfig c;
    detail::Reader r(j, "");
    detail::visit(r, c);
    r.finish();
    c.experiment.snippets.excerpt_seconds = c.experiment.load.excerpt_seconds;
    if (!c.experiment.pretrained.empty() && std::filesystem::path(c.experiment.pretrained).is_relative() && !base.empty())
        c.experiment.pretrained = (base / c.experiment.pretrained).string();
    c.validate();
    return c;
}

inline CliConfig load(const std::filesystem::path& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(io::read_text(path));
    } catch (const nlohmann::json::exception& e) {
        throw Error("bad_config", path.string() + ": " + e.what());
    }
    return parse(j, path.parent_path());
}

inline nlohmann::json to_json(CliConfig c) {
    detail::Writer w;
    detail::visit(w, c);
    return w.j;
}

// Explicit value, else the MT_SEED environment variable, else 0.
inline std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag) {
    if (flag) return *flag;
    const char* env = std::getenv("MT_SEED");
    if (!env || !*env) return 0;
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
        v = std::stoull(env, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != std::strlen(env) || env[0] == '-') throw Error("bad_seed", std::string("MT_SEED=") + env);
    return v;
}

}  // namespace meter::config
