#pragma once

// Command-line front end. Every subcommand either writes all of its outputs
// and returns 0, or prints one "error: code=<code> message=<text>" line and
// returns nonzero.

#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "meter/config.hpp"
#include "meter/synth.hpp"

namespace meter::cli {

namespace fs = std::filesystem;

struct Streams {
    std::ostream& out;
    std::ostream& err;
};

inline std::string one_line(std::string s) {
    for (auto& c : s)
        if (c == '\n' || c == '\r') c = ' ';
    return s;
}

inline config::CliConfig load_config(const std::string& path) {
    return path.empty() ? config::CliConfig{} : config::load(path);
}

inline std::vector<std::string> split_list(const std::vector<std::string>& items) {
    std::vector<std::string> out;
    for (const auto& item : items) {
        std::stringstream ss(item);
        std::string tok;
        while (std::getline(ss, tok, ','))
            if (!tok.empty()) out.push_back(tok);
    }
    return out;
}

inline harness::Dataset dataset_from(const std::string& manifest, const config::CliConfig& cfg) {
    return harness::load_dataset(load_manifest(manifest), cfg.experiment.load);
}

inline nlohmann::json read_json(const std::string& path) {
    try {
        return nlohmann::json::parse(io::read_text(path));
    } catch (const nlohmann::json::exception& e) {
        throw Error("bad_model", path + ": " + e.what());
    }
}

// Shared option values; CLI11 binds into these.
struct Options {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string suite, out, model, strategy = "fs", manifest, subset = "all", audio, est, ann, task = "beat",
                                   pretrained;
    int count = 93;
    double seconds = 30.0;
    int sample_rate = 22050;
    int seeds = 10;
    std::size_t workers = 1;
    std::vector<std::string> strategies{"bayes", "fs", "ft", "fsa", "fta"};
    std::vector<std::string> subsets{"4", "9", "18", "37", "55", "74"};
};

inline void cmd_synth(const Options& o, Streams io) {
    synth::SuiteOptions so;
    so.n_excerpts = o.count;
    so.excerpt_seconds = o.seconds;
    so.sample_rate = o.sample_rate;
    so.seed = config::resolve_seed(o.seed);
    if (so.n_excerpts <= 0 || !(so.excerpt_seconds > 0.0) || so.sample_rate <= 0)
        throw Error("invalid_argument", "count, seconds and sample rate must be positive");
    const auto m = synth::make_suite(synth::parse_suite(o.suite), o.out, so);
    io.out << "wrote " << m.entries.size() << " excerpts to " << (fs::path(o.out) / "manifest.json").string() << '\n';
}

inline void cmd_train(const Options& o, Streams io) {
    auto cfg = load_config(o.config);
    if (!o.pretrained.empty()) cfg.experiment.pretrained = o.pretrained;
    const auto seed = config::resolve_seed(o.seed);
    harness::Strategy strategy;
    if (o.model == "bayes") {
        strategy = harness::Strategy::bayes;
    } else if (o.model == "tcn") {
        strategy = harness::parse_strategy(o.strategy);
        if (strategy == harness::Strategy::bayes) throw Error("invalid_argument", "strategy must be fs, ft, fsa or fta");
    } else {
        throw Error("invalid_argument", "unknown model " + o.model);
    }
    const auto ds = dataset_from(o.manifest, cfg);
    harness::FeatureCache cache(ds, cfg.experiment.features);
    harness::Context ctx{ds, cfg.experiment, cache, std::nullopt};
    if (harness::is_finetuned(strategy)) ctx.pretrained = harness::load_pretrained(cfg.experiment.pretrained);
    harness::RunRecord rec;
    const auto model = harness::train_strategy(strategy, harness::parse_subset(o.subset), seed, ctx, rec);

    nlohmann::json j;
    if (model.bayes) {
        j = bayes::to_json(*model.bayes);
    } else {
        j = tcn::to_json(*model.tcn);
        const auto range = harness::tempo_range_for(cfg.experiment, ds.name);
        j["decode"] = {{"beats_per_bar", std::vector<int>{ds.beats_per_bar}},
                       {"tempo", {{"min_bpm", range.min_bpm}, {"max_bpm", range.max_bpm}}},
                       {"frame_rate", cfg.experiment.features.frame_rate}};
        auto hist = fs::path(o.out);
        hist.replace_extension(".history.csv");
        io::write_text(hist, tcn::history_csv(rec.history));
    }
    io::write_text(o.out, j.dump(1) + "\n");
    io.out << "trained model=" << o.model << " strategy=" << harness::to_string(strategy)
           << " subset=" << harness::subset_label(rec.n_tracks) << " minutes=" << harness::minutes_label(rec.subset_minutes)
           << " seed=" << seed << " epochs=" << rec.epochs << " train_seconds=" << io::fmt(rec.train_seconds, 3) << '\n';
}

inline BeatList track_audio(const nlohmann::json& j, const AudioBuffer& audio, const config::CliConfig& cfg) {
    const auto& e = cfg.experiment;
    const std::string kind = j.value("kind", "");
    if (kind == "bayes") {
        const auto model = bayes::model_from_json(j);
        const auto env = features::onset_envelope(audio, features::observation_bands(audio.sample_rate / 2.0),
                                                  e.features, model.frame_rate);
        return bayes::bayes_track(model, env);
    }
    if (kind != "tcn") throw Error("bad_model", "unknown model kind '" + kind + "'");
    const auto w = tcn::weights_from_json<float>(j);
    auto meters = cfg.track_meters;
    TempoRange range = TempoRange::generic();
    double fps = e.features.frame_rate;
    if (j.contains("decode")) {
        const auto& d = j.at("decode");
        meters = d.at("beats_per_bar").get<std::vector<int>>();
        range = {d.at("tempo").at("min_bpm").get<double>(), d.at("tempo").at("max_bpm").get<double>()};
        fps = d.value("frame_rate", fps);
    }
    if (e.tempo) range = *e.tempo;
    const auto f = features::network_features(audio, e.features, fps);
    const auto act = tcn::forward(w, f.values, f.frame_rate);
    return decode::dbn_downbeat_decode(act, meters, range, e.dbn);
}

inline void cmd_track(const Options& o, Streams io) {
    const auto cfg = load_config(o.config);
    const auto audio = io::read_wav(o.audio);
    const auto beats = track_audio(read_json(o.model), audio, cfg);
    io::write_beats(o.out, beats);
    io.out << "tracked " << beats.events.size() << " beats, " << beats.downbeats().events.size() << " downbeats\n";
}

inline void cmd_evaluate(const Options& o, Streams io) {
    const auto cfg = load_config(o.config);
    metrics::Task task;
    if (o.task == "beat") task = metrics::Task::beat;
    else if (o.task == "downbeat") task = metrics::Task::downbeat;
    else throw Error("invalid_argument", "task must be beat or downbeat");
    const auto r = metrics::evaluate(io::read_beats(o.est), io::read_beats(o.ann), task, cfg.experiment.eval);
    io.out << "f=" << io::fmt(r.f_measure, 3) << " cmlt=" << io::fmt(r.cmlt, 3) << " amlt=" << io::fmt(r.amlt, 3)
           << '\n';
}

inline void cmd_experiment(const Options& o, Streams io) {
    auto cfg = load_config(o.config);
    if (!o.pretrained.empty()) cfg.experiment.pretrained = o.pretrained;
    if (o.seeds <= 0) throw Error("invalid_argument", "seeds must be positive");
    std::vector<harness::Strategy> strategies;
    for (const auto& s : split_list(o.strategies)) strategies.push_back(harness::parse_strategy(s));
    std::vector<int> subsets;
    for (const auto& s : split_list(o.subsets)) subsets.push_back(harness::parse_subset(s));
    if (strategies.empty() || subsets.empty()) throw Error("invalid_argument", "no strategies or subsets given");
    const auto base = config::resolve_seed(o.seed);
    std::vector<std::uint64_t> seeds;
    for (int i = 0; i < o.seeds; ++i) seeds.push_back(base + static_cast<std::uint64_t>(i));

    const auto ds = dataset_from(o.manifest, cfg);
    harness::FeatureCache cache(ds, cfg.experiment.features);
    harness::Context ctx{ds, cfg.experiment, cache, harness::load_pretrained(cfg.experiment.pretrained)};
    std::size_t failed = 0;
    const auto runs = harness::run_matrix(strategies, subsets, seeds, ctx, o.workers, [&](const harness::RunRecord& r) {
        failed += !r.ok();
        io.err << "done " << harness::cell_name(r) << (r.ok() ? "" : " failed: " + one_line(r.error)) << '\n';
    });
    fs::create_directories(o.out);
    harness::write_outputs(o.out, runs, o.workers, cfg.experiment.bootstrap_resamples);
    io::write_text(fs::path(o.out) / "config.json", config::to_json(cfg).dump(2) + "\n");
    io.out << "cells=" << runs.size() << " failed=" << failed << " out=" << o.out << '\n';
}

inline void cmd_profile(const Options& o, Streams io) {
    const auto cfg = load_config(o.config);
    const auto m = load_manifest(o.manifest);
    std::vector<std::pair<features::OnsetEnvelope, BeatList>> ex;
    for (const auto& e : m.entries)
        ex.emplace_back(profile::profile_envelope(io::read_wav(e.audio), cfg.experiment.features, cfg.profile),
                        io::read_beats(e.annotations));
    const auto p = profile::compute_profile(ex, m.beats_per_bar);
    const auto st = profile::profile_stats(p, cfg.profile.anchor_variance);
    fs::create_directories(o.out);
    io::write_text(fs::path(o.out) / "profile.csv", profile::stats_csv(st));
    io::write_text(fs::path(o.out) / "profile_raw.csv", profile::raw_csv(p));
    io.out << "bars=" << p.bars << " skipped=" << p.skipped_excerpts;
    for (std::size_t b = 0; b < st.size(); ++b)
        io.out << ' ' << profile::band_name(b) << "_strongest=" << profile::strongest_tatum(st[b]);
    io.out << '\n';
}

inline void cmd_config(const Options& o, Streams io) {
    const auto text = config::to_json(load_config(o.config)).dump(2) + "\n";
    if (o.out.empty()) io.out << text;
    else io::write_text(o.out, text);
}

inline int run(int argc, const char* const* argv, Streams io = {std::cout, std::cerr}) {
    CLI::App app{"Beat, downbeat and meter tracking toolkit"};
    app.require_subcommand(1);
    Options o;
    app.add_option("--config", o.config, "JSON config overriding defaults (see `meter config`)");

    auto seed_opt = [&](CLI::App* c) {
        c->add_option("--seed", o.seed, "seed (falls back to MT_SEED, then 0)");
    };
    auto* synth = app.add_subcommand("synth", "generate a synthetic corpus and manifest");
    synth->add_option("--suite", o.suite, "candombe_like, samba_like or ballroom_like")->required();
    synth->add_option("--out", o.out, "output directory")->required();
    synth->add_option("--count", o.count, "number of excerpts");
    synth->add_option("--seconds", o.seconds, "excerpt length");
    synth->add_option("--sample-rate", o.sample_rate, "sample rate in Hz");
    seed_opt(synth);

    auto* train = app.add_subcommand("train", "train a model on a subset of a dataset's training split");
    train->add_option("--model", o.model, "tcn or bayes")->required();
    train->add_option("--strategy", o.strategy, "fs, ft, fsa or fta (tcn only)");
    train->add_option("--manifest", o.manifest, "dataset manifest")->required();
    train->add_option("--subset", o.subset, "number of training tracks or 'all'");
    train->add_option("--out", o.out, "model file")->required();
    train->add_option("--pretrained", o.pretrained, "checkpoint for ft/fta");
    seed_opt(train);

    auto* track = app.add_subcommand("track", "track beats and downbeats in one recording");
    track->add_option("--model", o.model, "model file")->required();
    track->add_option("--audio", o.audio, "WAV file")->required();
    track->add_option("--out", o.out, "beats file")->required();

    auto* evaluate = app.add_subcommand("evaluate", "score an estimate against an annotation");
    evaluate->add_option("--est", o.est, "estimated beats file")->required();
    evaluate->add_option("--ann", o.ann, "annotated beats file")->required();
    evaluate->add_option("--task", o.task, "beat or downbeat");

    auto* experiment = app.add_subcommand("experiment", "run the strategy x subset x seed matrix");
    experiment->add_option("--manifest", o.manifest, "dataset manifest")->required();
    experiment->add_option("--strategies", o.strategies, "comma separated strategies");
    experiment->add_option("--subsets", o.subsets, "comma separated track counts or 'all'");
    experiment->add_option("--seeds", o.seeds, "number of consecutive seeds");
    experiment->add_option("--workers", o.workers, "parallel cells");
    experiment->add_option("--out", o.out, "output directory")->required();
    experiment->add_option("--pretrained", o.pretrained, "checkpoint for ft/fta");
    seed_opt(experiment);

    auto* prof = app.add_subcommand("profile", "tatum onset profiles of an annotated dataset");
    prof->add_option("--manifest", o.manifest, "dataset manifest")->required();
    prof->add_option("--out", o.out, "output directory")->required();

    auto* cfg = app.add_subcommand("config", "print the effective configuration");
    cfg->add_option("--out", o.out, "write to a file instead of stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        io.out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp& e) {
        io.out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        io.err << "error: code=usage message=" << one_line(e.what()) << '\n';
        return 2;
    }

    try {
        if (synth->parsed()) cmd_synth(o, io);
        else if (train->parsed()) cmd_train(o, io);
        else if (track->parsed()) cmd_track(o, io);
        else if (evaluate->parsed()) cmd_evaluate(o, io);
        else if (experiment->parsed()) cmd_experiment(o, io);
        else if (prof->parsed()) cmd_profile(o, io);
        else cmd_config(o, io);
    } catch (const Error& e) {
        io.err << "error: code=" << e.code() << " message=" << one_line(e.what()) << '\n';
        return 1;
    } catch (const std::exception& e) {
        io.err << "error: code=internal message=" << one_line(e.what()) << '\n';
        return 1;
    }
    return 0;
}

}  // namespace meter::cli
