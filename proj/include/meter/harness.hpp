#pragma once

// Small-data experiment protocol: dataset ingestion and segmentation, seeded
// train/test split, nested subset ladder, snippet extraction, per-strategy
// training with wall-clock timing, evaluation of every test excerpt, and the
// matrix runner with its CSV outputs.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "meter/bayesbeat.hpp"
#include "meter/decoders.hpp"
#include "meter/features.hpp"
#include "meter/io.hpp"
#include "meter/manifest.hpp"
#include "meter/metrics.hpp"
#include "meter/train.hpp"

namespace meter::harness {

// ---------------------------------------------------------------- dataset

struct DatasetExcerpt {
    std::string id;      // excerpt id; "<track>_<k>" when a recording was segmented
    std::string source;  // manifest track id
    AudioBuffer audio;
    BeatList beats;
};

struct Dataset {
    std::string name;
    int beats_per_bar = 4;
    std::vector<DatasetExcerpt> excerpts;
};

struct LoadOptions {
    double excerpt_seconds = 30.0;
    std::size_t max_excerpts = 93;
    std::uint64_t seed = 0;
};

// Seeded Fisher-Yates permutation of 0..n-1 (same sequence on every platform).
inline std::vector<std::size_t> permutation(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> p(n);
    for (std::size_t i = 0; i < n; ++i) p[i] = i;
    std::mt19937_64 rng(seed);
    for (std::size_t i = n; i > 1; --i) std::swap(p[i - 1], p[rng() % i]);
    return p;
}

// Segment boundaries for a recording: floor(len / L) non-overlapping pieces,
// or the whole recording when it is shorter than one piece.
inline std::vector<std::pair<double, double>> segment_bounds(double duration, double excerpt_seconds) {
    const auto n = static_cast<std::size_t>(std::floor(duration / excerpt_seconds + 1e-9));
    if (n == 0) return {{0.0, duration}};
    std::vector<std::pair<double, double>> out;
    for (std::size_t k = 0; k < n; ++k) out.emplace_back(k * excerpt_seconds, (k + 1) * excerpt_seconds);
    return out;
}

inline Dataset load_dataset(const DatasetManifest& manifest, const LoadOptions& opt = {}) {
    manifest.validate();
    Dataset ds;
    ds.name = manifest.dataset_name;
    ds.beats_per_bar = manifest.beats_per_bar;
    for (const auto& entry : manifest.entries) {
        const auto beats = io::read_beats(entry.annotations);
        const auto audio = io::read_wav(entry.audio);
        const auto bounds = segment_bounds(audio.duration(), opt.excerpt_seconds);
        for (std::size_t k = 0; k < bounds.size(); ++k) {
            const auto [b, e] = bounds[k];
            DatasetExcerpt ex;
            ex.id = bounds.size() == 1 ? entry.id : entry.id + "_" + std::to_string(k + 1);
            ex.source = entry.id;
            ex.audio = bounds.size() == 1 ? audio : audio.slice(b, e);
            ex.beats = beats.window(b, e);
            if (ex.beats.size() < 2) continue;
            ds.excerpts.push_back(std::move(ex));
        }
    }
    if (ds.excerpts.size() > opt.max_excerpts) {
        auto pick = permutation(ds.excerpts.size(), opt.seed);
        pick.resize(opt.max_excerpts);
        std::sort(pick.begin(), pick.end());
        std::vector<DatasetExcerpt> kept;
        for (std::size_t i : pick) kept.push_back(std::move(ds.excerpts[i]));
        ds.excerpts = std::move(kept);
    }
    return ds;
}

// ------------------------------------------------------------------ split

struct Split {
    std::vector<std::size_t> train;  // in seeded order; subsets are prefixes
    std::vector<std::size_t> test;
};

inline Split split_train_test(std::size_t n, std::uint64_t seed, double test_fraction = 0.2) {
    if (n < 5) throw Error("too_few_excerpts", "need at least 5 excerpts, have " + std::to_string(n));
    const auto order = permutation(n, seed);
    const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));
    Split s;
    s.test.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
    s.train.assign(order.begin() + static_cast<std::ptrdiff_t>(n_test), order.end());
    std::sort(s.test.begin(), s.test.end());
    return s;
}

// ---------------------------------------------------------------- subsets

inline constexpr int all_tracks = 0;

inline const std::vector<int>& paper_subsets() {
    static const std::vector<int> s{4, 9, 18, 37, 55, 74};
    return s;
}

inline std::string subset_label(int n) { return n == all_tracks ? "all" : std::to_string(n); }

inline int parse_subset(const std::string& s) {
    if (s == "all") return all_tracks;
    try {
        std::size_t used = 0;
        const int n = std::stoi(s, &used);
        if (used == s.size() && n > 0) return n;
    } catch (const std::logic_error&) {
    }
    throw Error("invalid_argument", "subset must be a positive track count or 'all', got '" + s + "'");
}

enum class Mode { tcn, bayes };

// One piece of audio used for training or validation, tagged with the
// excerpt it came from.
struct Snippet {
    std::size_t excerpt = 0;
    std::string source;  // excerpt id
    double begin = 0.0, end = 0.0;
};

struct SnippetSet {
    std::vector<Snippet> train, val;
    double annotated_seconds = 0.0;  // audio available to the method
};

struct SnippetOptions {
    double snippet_seconds = 10.0;
    double excerpt_seconds = 30.0;  // used by the "all" subset
    double all_val_fraction = 0.25;
};

// Prefix subset of the seeded train order. TCN: first half of the snippet
// trains, second half validates; Bayes: the whole snippet trains. The "all"
// subset uses whole excerpts, split 75/25 for the TCN.
inline SnippetSet make_snippets(const Dataset& ds, const std::vector<std::size_t>& train_order, int n_tracks,
                                Mode mode, const SnippetOptions& opt = {}) {
    SnippetSet out;
    if (n_tracks == all_tracks) {
        const std::size_t n = train_order.size();
        const auto n_val =
            mode == Mode::tcn ? static_cast<std::size_t>(std::llround(opt.all_val_fraction * static_cast<double>(n)))
                              : 0;
        for (std::size_t i = 0; i < n; ++i) {
            const auto idx = train_order[i];
            const auto& ex = ds.excerpts[idx];
            const double len = std::min(opt.excerpt_seconds, ex.audio.duration());
            Snippet s{idx, ex.id, 0.0, len};
            (i < n - n_val ? out.train : out.val).push_back(s);
            out.annotated_seconds += len;
        }
        return out;
    }
    if (n_tracks < 0 || static_cast<std::size_t>(n_tracks) > train_order.size())
        throw Error("subset_too_large", "subset of " + std::to_string(n_tracks) + " tracks but only " +
                                            std::to_string(train_order.size()) + " training excerpts");
    for (int i = 0; i < n_tracks; ++i) {
        const auto idx = train_order[i];
        const auto& ex = ds.excerpts[idx];
        if (ex.audio.duration() + 1e-9 < opt.snippet_seconds)
            throw Error("excerpt_too_short", ex.id + " is shorter than " + io::fmt(opt.snippet_seconds, 1) + " s");
        const double half = opt.snippet_seconds / 2.0;
        if (mode == Mode::tcn) {
            out.train.push_back({idx, ex.id, 0.0, half});
            out.val.push_back({idx, ex.id, half, opt.snippet_seconds});
        } else {
            out.train.push_back({idx, ex.id, 0.0, opt.snippet_seconds});
        }
        out.annotated_seconds += opt.snippet_seconds;
    }
    return out;
}

// ------------------------------------------------------------- strategies

enum class Strategy { fs, ft, fsa, fta, bayes };

inline std::string to_string(Strategy s) {
    switch (s) {
        case Strategy::fs: return "FS";
        case Strategy::ft: return "FT";
        case Strategy::fsa: return "FSA";
        case Strategy::fta: return "FTA";
        case Strategy::bayes: return "BAYES";
    }
    return "?";
}

inline Strategy parse_strategy(std::string s) {
    for (auto& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    for (auto st : {Strategy::fs, Strategy::ft, Strategy::fsa, Strategy::fta, Strategy::bayes})
        if (to_string(st) == s) return st;
    throw Error("invalid_argument", "unknown strategy '" + s + "' (expected fs, ft, fsa, fta or bayes)");
}

inline bool is_augmented(Strategy s) { return s == Strategy::fsa || s == Strategy::fta; }
inline bool is_finetuned(Strategy s) { return s == Strategy::ft || s == Strategy::fta; }

struct ExperimentConfig {
    features::FeatureConfig features;
    tcn::TcnConfig tcn;
    tcn::TrainSchedule scratch_schedule;
    tcn::TrainSchedule finetune_schedule = tcn::TrainSchedule::finetune();
    bayes::BayesConfig bayes;
    decode::DbnConfig dbn;
    std::optional<TempoRange> tempo;  // decoder range; chosen from the dataset name when unset
    metrics::EvalOptions eval;
    SnippetOptions snippets;
    LoadOptions load;
    std::string pretrained;  // TCN checkpoint for FT/FTA
    std::size_t bootstrap_resamples = 1000;
};

inline TempoRange tempo_range_for(const ExperimentConfig& cfg, const std::string& dataset_name) {
    if (cfg.tempo) return *cfg.tempo;
    std::string n = dataset_name;
    for (auto& c : n) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (n.find("candombe") != std::string::npos) return TempoRange::candombe_like();
    if (n.find("samba") != std::string::npos) return TempoRange::samba_like();
    return TempoRange::generic();
}

// ------------------------------------------------------------------ cache

// Features are computed once per (excerpt, span, frame rate) and shared
// between cells. Thread safe.
class FeatureCache {
public:
    FeatureCache(const Dataset& ds, features::FeatureConfig cfg) : ds_(ds), cfg_(std::move(cfg)) {}

    std::shared_ptr<const features::FramedFeatures> network(std::size_t excerpt, double begin, double end,
                                                            double fps) {
        return get(net_, {excerpt, begin, end, fps}, [&] {
            return features::network_features(slice(excerpt, begin, end), cfg_, fps);
        });
    }

    std::shared_ptr<const features::OnsetEnvelope> envelope(std::size_t excerpt, double begin, double end) {
        return get(env_, {excerpt, begin, end, cfg_.frame_rate}, [&] {
            const auto a = slice(excerpt, begin, end);
            return features::onset_envelope(a, features::observation_bands(a.sample_rate / 2.0), cfg_,
                                            cfg_.frame_rate);
        });
    }

    const features::FeatureConfig& config() const { return cfg_; }

private:
    using Key = std::tuple<std::size_t, double, double, double>;

    AudioBuffer slice(std::size_t excerpt, double begin, double end) const {
        const auto& a = ds_.excerpts.at(excerpt).audio;
        return begin <= 0.0 && end >= a.duration() ? a : a.slice(begin, end);
    }

    template <class T, class Make>
    std::shared_ptr<const T> get(std::map<Key, std::shared_ptr<const T>>& m, const Key& k, Make make) {
        {
            std::lock_guard<std::mutex> lock(mu_);
            if (auto it = m.find(k); it != m.end()) return it->second;
        }
        auto v = std::make_shared<const T>(make());
        std::lock_guard<std::mutex> lock(mu_);
        return m.emplace(k, std::move(v)).first->second;
    }

    const Dataset& ds_;
    features::FeatureConfig cfg_;
    std::mutex mu_;
    std::map<Key, std::shared_ptr<const features::FramedFeatures>> net_;
    std::map<Key, std::shared_ptr<const features::OnsetEnvelope>> env_;
};

// ------------------------------------------------------------------- runs

struct TrackScores {
    std::string track_id;
    metrics::MetricReport beat, downbeat;
};

struct RunRecord {
    Strategy strategy = Strategy::fs;
    int n_tracks = 0;
    double subset_minutes = 0.0;
    std::uint64_t seed = 0;
    double train_seconds = 0.0;
    double infer_seconds = 0.0;
    int epochs = 0;                   // TCN epochs run (excluding the evaluation-only epoch 0)
    std::size_t snippets_per_epoch = 0;
    std::vector<tcn::EpochRecord> history;
    std::vector<std::string> train_sources, val_sources, test_ids;  // provenance
    std::vector<TrackScores> tracks;
    std::string error;  // non-empty when the cell failed

    bool ok() const { return error.empty(); }
};

inline std::string minutes_label(double m) { return io::fmt(m, 2); }

// Everything a cell needs besides its own parameters.
struct Context {
    const Dataset& dataset;
    const ExperimentConfig& config;
    FeatureCache& cache;
    std::optional<tcn::TcnWeights<float>> pretrained;
};

inline std::optional<tcn::TcnWeights<float>> load_pretrained(const std::string& path) {
    if (path.empty()) return std::nullopt;
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(io::read_text(path));
    } catch (const nlohmann::json::exception& e) {
        throw Error("bad_model", path + ": " + e.what());
    }
    return tcn::weights_from_json<float>(j);
}

inline metrics::MetricReport score(const BeatList& est, const BeatList& ann, metrics::Task task,
                                   const metrics::EvalOptions& opt) {
    return metrics::evaluate(est, ann, task, opt);
}

using Clock = std::chrono::steady_clock;

inline double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Trains one strategy on one subset for one seed and evaluates every test
// excerpt at full length. Timing covers the training call only.
struct TrainedModel {
    std::optional<bayes::BarPointerModel> bayes;
    std::optional<tcn::TcnWeights<float>> tcn;
};

// Trains one cell and fills the record's provenance, sizes and training time.
inline TrainedModel train_strategy(Strategy strategy, int n_tracks, std::uint64_t seed, Context& ctx,
                                   RunRecord& rec) {
    const auto& ds = ctx.dataset;
    const auto& cfg = ctx.config;
    rec.strategy = strategy;
    rec.n_tracks = n_tracks;
    rec.seed = seed;
    const auto split = split_train_test(ds.excerpts.size(), seed);
    const Mode mode = strategy == Strategy::bayes ? Mode::bayes : Mode::tcn;
    const auto snippets = make_snippets(ds, split.train, n_tracks, mode, cfg.snippets);
    rec.subset_minutes = snippets.annotated_seconds / 60.0;
    for (const auto& s : snippets.train) rec.train_sources.push_back(s.source);
    for (const auto& s : snippets.val) rec.val_sources.push_back(s.source);
    for (auto i : split.test) rec.test_ids.push_back(ds.excerpts[i].id);
    const double base_fps = cfg.features.frame_rate;

    TrainedModel model;
    if (mode == Mode::bayes) {
        std::vector<bayes::Excerpt> train;
        for (const auto& s : snippets.train)
            train.push_back({*ctx.cache.envelope(s.excerpt, s.begin, s.end),
                             ds.excerpts[s.excerpt].beats.window(s.begin, s.end)});
        auto bc = cfg.bayes;
        bc.grid.beats_per_bar = ds.beats_per_bar;
        bc.seed = seed;
        const auto t0 = Clock::now();
        model.bayes = bayes::bayes_train(train, bc);
        rec.train_seconds = seconds_since(t0);
        return model;
    }
    if (is_finetuned(strategy) && !ctx.pretrained)
        throw Error("missing_checkpoint", to_string(strategy) + " needs a pretrained TCN checkpoint");
    const auto rates = is_augmented(strategy) ? features::frame_rate_variants(base_fps) : std::vector{base_fps};
    auto build = [&](const std::vector<Snippet>& set, const std::vector<double>& fps_list) {
        std::vector<tcn::TrainingSnippet> out;
        for (const auto& s : set)
            for (double fps : fps_list) {
                const auto f = ctx.cache.network(s.excerpt, s.begin, s.end, fps);
                tcn::TrainingSnippet t;
                t.features = f->values;
                t.frame_rate = f->frame_rate;
                t.targets = tcn::targets_from_annotations(ds.excerpts[s.excerpt].beats.window(s.begin, s.end),
                                                          f->frame_rate, f->values.rows);
                t.source = s.source;
                out.push_back(std::move(t));
            }
        return out;
    };
    const auto train = build(snippets.train, rates);
    const auto val = build(snippets.val, {base_fps});
    const auto t0 = Clock::now();
    tcn::TrainResult<float> res;
    if (is_finetuned(strategy)) {
        res = tcn::finetune(*ctx.pretrained, cfg.finetune_schedule, train, val, seed);
    } else {
        auto tc = cfg.tcn;
        tc.seed = seed;
        res = tcn::train_from_scratch<float>(tc, cfg.scratch_schedule, train, val);
    }
    rec.train_seconds = seconds_since(t0);
    rec.epochs = static_cast<int>(res.history.size()) - 1;
    rec.snippets_per_epoch = res.history.size() > 1 ? res.history[1].snippets : train.size();
    rec.history = std::move(res.history);
    model.tcn = std::move(res.weights);
    return model;
}

// Beats and downbeats for one whole excerpt.
inline std::pair<BeatList, BeatList> track_excerpt(const TrainedModel& model, std::size_t i, Context& ctx) {
    if (model.bayes) {
        auto b = bayes::bayes_track(*model.bayes, *ctx.cache.envelope(i, 0.0, 1e9));
        return {b, b};
    }
    const auto range = tempo_range_for(ctx.config, ctx.dataset.name);
    const auto f = ctx.cache.network(i, 0.0, 1e9, ctx.config.features.frame_rate);
    const auto act = tcn::forward(*model.tcn, f->values, f->frame_rate);
    return {decode::dbn_beat_decode(act.beat, act.frame_rate, range, ctx.config.dbn),
            decode::dbn_downbeat_decode(act, {ctx.dataset.beats_per_bar}, range, ctx.config.dbn)};
}

inline RunRecord run_strategy(Strategy strategy, int n_tracks, std::uint64_t seed, Context& ctx) {
    RunRecord rec;
    const auto model = train_strategy(strategy, n_tracks, seed, ctx, rec);
    const auto split = split_train_test(ctx.dataset.excerpts.size(), seed);
    const auto t1 = Clock::now();
    for (auto i : split.test) {
        const auto [beats, downbeats] = track_excerpt(model, i, ctx);
        const auto& ann = ctx.dataset.excerpts[i].beats;
        rec.tracks.push_back({ctx.dataset.excerpts[i].id, score(beats, ann, metrics::Task::beat, ctx.config.eval),
                              score(downbeats, ann, metrics::Task::downbeat, ctx.config.eval)});
    }
    rec.infer_seconds = seconds_since(t1);
    return rec;
}

// Training and validation sources that also appear among the test ids.
inline std::vector<std::string> leaked_ids(const RunRecord& r) {
    const std::set<std::string> test(r.test_ids.begin(), r.test_ids.end());
    std::set<std::string> bad;
    for (const auto* v : {&r.train_sources, &r.val_sources})
        for (const auto& s : *v)
            if (test.count(s)) bad.insert(s);
    return {bad.begin(), bad.end()};
}

struct Cell {
    Strategy strategy;
    int n_tracks;
    std::uint64_t seed;
};

// Runs the full cross product on a pool of `workers` threads. Each cell runs
// start to finish on one worker. Records come back in cross-product order;
// failed cells carry their error and the matrix continues.
inline std::vector<RunRecord> run_matrix(const std::vector<Strategy>& strategies, const std::vector<int>& subsets,
                                         const std::vector<std::uint64_t>& seeds, Context& ctx,
                                         std::size_t workers = 1,
                                         const std::function<void(const RunRecord&)>& on_done = {}) {
    std::vector<Cell> cells;
    for (auto st : strategies)
        for (int n : subsets)
            for (auto seed : seeds) cells.push_back({st, n, seed});
    std::vector<RunRecord> out(cells.size());
    std::atomic<std::size_t> next{0};
    std::mutex done_mu;
    auto work = [&] {
        for (std::size_t i = next++; i < cells.size(); i = next++) {
            const auto& c = cells[i];
            try {
                out[i] = run_strategy(c.strategy, c.n_tracks, c.seed, ctx);
            } catch (const std::exception& e) {
                RunRecord r;
                r.strategy = c.strategy;
                r.n_tracks = c.n_tracks;
                r.seed = c.seed;
                r.error = e.what();
                out[i] = std::move(r);
            }
            if (on_done) {
                std::lock_guard<std::mutex> lock(done_mu);
                on_done(out[i]);
            }
        }
    };
    workers = std::max<std::size_t>(1, std::min(workers, cells.size()));
    std::vector<std::thread> pool;
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();
    return out;
}

// ---------------------------------------------------------------- outputs

// Per-track metrics; deterministic given seeds.
inline std::string results_csv(const std::vector<RunRecord>& runs) {
    std::ostringstream os;
    os << "strategy,subset_minutes,seed,track_id,task,f,cmlt,amlt\n";
    for (const auto& r : runs) {
        if (!r.ok()) continue;
        for (const auto& t : r.tracks)
            for (auto task : {metrics::Task::beat, metrics::Task::downbeat}) {
                const auto& m = task == metrics::Task::beat ? t.beat : t.downbeat;
                os << to_string(r.strategy) << ',' << minutes_label(r.subset_minutes) << ',' << r.seed << ','
                   << t.track_id << ',' << metrics::to_string(task) << ',' << io::fmt(m.f_measure, 6) << ','
                   << io::fmt(m.cmlt, 6) << ',' << io::fmt(m.amlt, 6) << '\n';
            }
    }
    return os.str();
}

// One row per cell: status, training effort and provenance counts.
inline std::string runs_csv(const std::vector<RunRecord>& runs) {
    std::ostringstream os;
    os << "strategy,subset,subset_minutes,seed,status,epochs,snippets_per_epoch,train_snippets,val_snippets,"
          "test_tracks,leaked,error\n";
    for (const auto& r : runs) {
        std::string err = r.error;
        std::replace(err.begin(), err.end(), ',', ';');
        std::replace(err.begin(), err.end(), '\n', ' ');
        os << to_string(r.strategy) << ',' << subset_label(r.n_tracks) << ',' << minutes_label(r.subset_minutes)
           << ',' << r.seed << ',' << (r.ok() ? "ok" : "failed") << ',' << r.epochs << ',' << r.snippets_per_epoch
           << ',' << r.train_sources.size() << ',' << r.val_sources.size() << ',' << r.test_ids.size() << ','
           << leaked_ids(r).size() << ',' << err << '\n';
    }
    return os.str();
}

// Wall-clock timings, kept apart from the reproducible results.
inline std::string timings_csv(const std::vector<RunRecord>& runs, std::size_t workers) {
    std::ostringstream os;
    os << "strategy,subset_minutes,seed,train_seconds,infer_seconds,workers\n";
    for (const auto& r : runs) {
        if (!r.ok()) continue;
        os << to_string(r.strategy) << ',' << minutes_label(r.subset_minutes) << ',' << r.seed << ','
           << io::fmt(r.train_seconds, 6) << ',' << io::fmt(r.infer_seconds, 6) << ',' << workers << '\n';
    }
    return os.str();
}

inline std::string provenance_csv(const std::vector<RunRecord>& runs) {
    std::ostringstream os;
    os << "strategy,subset,seed,role,track_id\n";
    for (const auto& r : runs) {
        const std::string head =
            to_string(r.strategy) + "," + subset_label(r.n_tracks) + "," + std::to_string(r.seed) + ",";
        for (const auto& s : r.train_sources) os << head << "train," << s << '\n';
        for (const auto& s : r.val_sources) os << head << "val," << s << '\n';
        for (const auto& s : r.test_ids) os << head << "test," << s << '\n';
    }
    return os.str();
}

struct Aggregate {
    Strategy strategy;
    int n_tracks;
    double subset_minutes;
    metrics::Task task;
    std::string metric;
    metrics::BootstrapSummary summary;
    std::size_t seeds = 0;
};

// Bootstrap over the pooled per-track scores of all seeds of a
// (strategy, subset) group.
inline std::vector<Aggregate> aggregate(const std::vector<RunRecord>& runs, std::size_t resamples = 1000,
                                        std::uint64_t seed = 0) {
    struct Group {
        double minutes = 0.0;
        std::size_t seeds = 0;
        std::map<std::pair<int, int>, std::vector<double>> scores;  // (task, metric) -> values
    };
    std::map<std::pair<int, int>, Group> groups;  // ordered by (strategy, subset)
    for (const auto& r : runs) {
        if (!r.ok()) continue;
        auto& g = groups[{static_cast<int>(r.strategy), r.n_tracks == all_tracks ? 1 << 30 : r.n_tracks}];
        g.minutes = r.subset_minutes;
        ++g.seeds;
        for (const auto& t : r.tracks)
            for (int task = 0; task < 2; ++task) {
                const auto& m = task == 0 ? t.beat : t.downbeat;
                g.scores[{task, 0}].push_back(m.f_measure);
                g.scores[{task, 1}].push_back(m.cmlt);
                g.scores[{task, 2}].push_back(m.amlt);
            }
    }
    static const char* names[] = {"f", "cmlt", "amlt"};
    std::vector<Aggregate> out;
    for (const auto& [key, g] : groups)
        for (const auto& [tm, values] : g.scores)
            out.push_back({static_cast<Strategy>(key.first), key.second == 1 << 30 ? all_tracks : key.second,
                           g.minutes, tm.first == 0 ? metrics::Task::beat : metrics::Task::downbeat,
                           names[tm.second], metrics::bootstrap_mean(values, resamples, 0.95, seed), g.seeds});
    return out;
}

inline std::string plotdata_perf_csv(const std::vector<Aggregate>& agg) {
    std::ostringstream os;
    os << "strategy,subset,subset_minutes,task,metric,mean,ci_low,ci_high,n_tracks,n_seeds\n";
    for (const auto& a : agg)
        os << to_string(a.strategy) << ',' << subset_label(a.n_tracks) << ',' << minutes_label(a.subset_minutes)
           << ',' << metrics::to_string(a.task) << ',' << a.metric << ',' << io::fmt(a.summary.mean, 6) << ','
           << io::fmt(a.summary.ci_low, 6) << ',' << io::fmt(a.summary.ci_high, 6) << ',' << a.summary.n << ','
           << a.seeds << '\n';
    return os.str();
}

// Mean training time per (strategy, subset) with the per-seed values.
inline std::string plotdata_time_csv(const std::vector<RunRecord>& runs, std::size_t workers) {
    std::ostringstream os;
    os << "strategy,subset,subset_minutes,seed,train_seconds,workers\n";
    for (const auto& r : runs)
        if (r.ok())
            os << to_string(r.strategy) << ',' << subset_label(r.n_tracks) << ',' << minutes_label(r.subset_minutes)
               << ',' << r.seed << ',' << io::fmt(r.train_seconds, 6) << ',' << workers << '\n';
    return os.str();
}

// Table of means: one row per (strategy, subset), F/CMLt/AMLt per task.
inline std::string summary_csv(const std::vector<Aggregate>& agg) {
    std::map<std::pair<int, int>, std::map<std::string, double>> rows;
    std::map<std::pair<int, int>, double> minutes;
    for (const auto& a : agg) {
        const std::pair key{static_cast<int>(a.strategy), a.n_tracks == all_tracks ? 1 << 30 : a.n_tracks};
        rows[key][metrics::to_string(a.task) + "_" + a.metric] = a.summary.mean;
        minutes[key] = a.subset_minutes;
    }
    std::ostringstream os;
    os << "strategy,subset,subset_minutes,beat_cmlt,beat_amlt,beat_f,downbeat_cmlt,downbeat_amlt,downbeat_f\n";
    for (const auto& [key, m] : rows) {
        os << to_string(static_cast<Strategy>(key.first)) << ','
           << subset_label(key.second == 1 << 30 ? all_tracks : key.second) << ',' << minutes_label(minutes[key]);
        for (const char* c : {"beat_cmlt", "beat_amlt", "beat_f", "downbeat_cmlt", "downbeat_amlt", "downbeat_f"})
            os << ',' << io::fmt(m.count(c) ? m.at(c) : 0.0, 4);
        os << '\n';
    }
    return os.str();
}

inline std::string cell_name(const RunRecord& r) {
    return to_string(r.strategy) + "_" + subset_label(r.n_tracks) + "_seed" + std::to_string(r.seed);
}

// Writes every output file of a matrix run into `dir`.
inline void write_outputs(const std::filesystem::path& dir, const std::vector<RunRecord>& runs,
                          std::size_t workers, std::size_t resamples = 1000) {
    const auto agg = aggregate(runs, resamples);
    io::write_text(dir / "results.csv", results_csv(runs));
    io::write_text(dir / "runs.csv", runs_csv(runs));
    io::write_text(dir / "timings.csv", timings_csv(runs, workers));
    io::write_text(dir / "provenance.csv", provenance_csv(runs));
    io::write_text(dir / "plotdata_perf.csv", plotdata_perf_csv(agg));
    io::write_text(dir / "plotdata_time.csv", plotdata_time_csv(runs, workers));
    io::write_text(dir / "summary.csv", summary_csv(agg));
    for (const auto& r : runs)
        if (r.ok() && !r.history.empty())
            io::write_text(dir / "histories" / (cell_name(r) + ".csv"), tcn::history_csv(r.history));
}

}  // namespace meter::harness
