#pragma once

// Bar-pointer HMM: the hidden state is (position within the bar, tempo). The
// position advances by the tempo every frame; the observation model is one
// GMM per bar-grid bin over the two-band onset feature. Training fits the
// GMMs to annotated bars; tracking is a Viterbi pass over the whole excerpt.

#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "meter/core.hpp"
#include "meter/features.hpp"
#include "meter/gmm.hpp"
#include "meter/viterbi.hpp"

namespace meter::bayes {

struct BarGrid {
    int bins_per_bar = 64;
    int beats_per_bar = 4;

    void validate() const {
        if (bins_per_bar <= 0 || beats_per_bar <= 0 || bins_per_bar % beats_per_bar != 0)
            throw Error("invalid_grid", "bins_per_bar must be a positive multiple of beats_per_bar");
    }
    friend bool operator==(const BarGrid&, const BarGrid&) = default;
};

// Per complete bar, per grid bin, per band: mean onset value of the frames in that bin.
struct GridSamples {
    BarGrid grid;
    std::size_t n_bands = 0;
    std::size_t n_bars = 0;
    std::vector<double> values;  // bars x bins x bands

    double at(std::size_t bar, std::size_t bin, std::size_t band) const {
        return values[(bar * static_cast<std::size_t>(grid.bins_per_bar) + bin) * n_bands + band];
    }
};

// A complete bar: consecutive annotated beats with positions 1..beats_per_bar
// and the next downbeat closing it.
struct AnnotatedBar {
    std::vector<double> beat_times;  // beats_per_bar + 1 entries, last = next downbeat
};

inline std::vector<AnnotatedBar> complete_bars(const BeatList& ann, int beats_per_bar) {
    std::vector<AnnotatedBar> bars;
    const auto& ev = ann.events;
    const std::size_t bpb = static_cast<std::size_t>(beats_per_bar);
    for (std::size_t i = 0; i + bpb < ev.size(); ++i) {
        if (ev[i].position != 1) continue;
        bool ok = true;
        for (std::size_t j = 0; j <= bpb && ok; ++j) {
            const int expected = static_cast<int>(j % bpb) + 1;
            ok = ev[i + j].position == expected;
        }
        if (!ok) continue;
        AnnotatedBar bar;
        for (std::size_t j = 0; j <= bpb; ++j) bar.beat_times.push_back(ev[i + j].time);
        bars.push_back(std::move(bar));
    }
    return bars;
}

namespace detail {

inline double interpolate_frame(const features::OnsetEnvelope& env, double frame, std::size_t band) {
    if (frame <= 0.0) return env.values(0, band);
    const double last = static_cast<double>(env.n_frames() - 1);
    if (frame >= last) return env.values(env.n_frames() - 1, band);
    const auto i = static_cast<std::size_t>(frame);
    const double frac = frame - static_cast<double>(i);
    return (1.0 - frac) * env.values(i, band) + frac * env.values(i + 1, band);
}

}  // namespace detail

// Frames are mapped to bar positions by linear interpolation between the
// annotated beats. A bin that receives no frame in a bar takes the envelope
// interpolated at the bin centre time. Bars running past the envelope end are skipped.
inline GridSamples quantize_to_grid(const features::OnsetEnvelope& env, const BeatList& ann, const BarGrid& grid) {
    grid.validate();
    if (env.n_frames() == 0) throw Error("no_complete_bar", "empty envelope");
    const auto bars = complete_bars(ann, grid.beats_per_bar);
    const std::size_t bins = static_cast<std::size_t>(grid.bins_per_bar);
    const std::size_t bands = env.n_bands();
    const std::size_t bpb = static_cast<std::size_t>(grid.beats_per_bar);
    const double fps = env.frame_rate;

    GridSamples out;
    out.grid = grid;
    out.n_bands = bands;
    std::vector<double> sum(bins * bands);
    std::vector<std::size_t> count(bins);
    for (const auto& bar : bars) {
        const double start = bar.beat_times.front(), stop = bar.beat_times.back();
        if (stop * fps > static_cast<double>(env.n_frames() - 1)) continue;
        std::fill(sum.begin(), sum.end(), 0.0);
        std::fill(count.begin(), count.end(), 0);
        const auto first = static_cast<std::size_t>(std::ceil(start * fps - 1e-9));
        for (std::size_t t = first; static_cast<double>(t) / fps < stop && t < env.n_frames(); ++t) {
            const double time = static_cast<double>(t) / fps;
            std::size_t beat = 0;
            while (beat + 1 < bpb && time >= bar.beat_times[beat + 1]) ++beat;
            const double frac = (time - bar.beat_times[beat]) / (bar.beat_times[beat + 1] - bar.beat_times[beat]);
            const double pos = (static_cast<double>(beat) + frac) / static_cast<double>(bpb);
            const auto bin = std::min(bins - 1, static_cast<std::size_t>(std::floor(pos * static_cast<double>(bins) + 1e-9)));
            for (std::size_t b = 0; b < bands; ++b) sum[bin * bands + b] += env.values(t, b);
            ++count[bin];
        }
        for (std::size_t bin = 0; bin < bins; ++bin) {
            for (std::size_t b = 0; b < bands; ++b) {
                double v;
                if (count[bin] > 0) {
                    v = sum[bin * bands + b] / static_cast<double>(count[bin]);
                } else {
                    const double centre = (static_cast<double>(bin) + 0.5) / static_cast<double>(bins) * static_cast<double>(bpb);
                    const auto beat = static_cast<std::size_t>(centre);
                    const double time = bar.beat_times[beat] + (centre - static_cast<double>(beat)) *
                                                                   (bar.beat_times[beat + 1] - bar.beat_times[beat]);
                    v = detail::interpolate_frame(env, time * fps, b);
                }
                out.values.push_back(v);
            }
        }
        ++out.n_bars;
    }
    if (out.n_bars == 0) throw Error("no_complete_bar", "annotations contain no complete bar inside the envelope");
    return out;
}

struct GmmObservationModel {
    BarGrid grid;
    std::size_t n_bands = 0;
    std::vector<Gmm> bins;  // one mixture per grid bin

    bool trained() const { return !bins.empty(); }

    // Log-likelihood of one frame under each grid bin's mixture.
    std::vector<double> bin_loglik(std::span<const double> frame) const {
        std::vector<double> out(bins.size());
        for (std::size_t i = 0; i < bins.size(); ++i) out[i] = bins[i].log_pdf(frame);
        return out;
    }
};

// Pools the grid samples of several excerpts and fits one GMM per bin.
inline GmmObservationModel fit_observation_model(const std::vector<GridSamples>& pooled, std::size_t k,
                                                 std::uint64_t seed, const GmmOptions& opt = {}) {
    if (pooled.empty()) throw Error("no_complete_bar", "no grid samples to fit");
    GmmObservationModel model;
    model.grid = pooled.front().grid;
    model.n_bands = pooled.front().n_bands;
    const std::size_t bins = static_cast<std::size_t>(model.grid.bins_per_bar);
    std::size_t total_bars = 0;
    for (const auto& g : pooled) {
        if (!(g.grid == model.grid) || g.n_bands != model.n_bands)
            throw Error("shape", "grid samples disagree on grid or band count");
        total_bars += g.n_bars;
    }
    for (std::size_t bin = 0; bin < bins; ++bin) {
        Matrix<double> x(total_bars, model.n_bands);
        std::size_t r = 0;
        for (const auto& g : pooled)
            for (std::size_t bar = 0; bar < g.n_bars; ++bar, ++r)
                for (std::size_t b = 0; b < model.n_bands; ++b) x(r, b) = g.at(bar, bin, b);
        model.bins.push_back(fit_gmm(x, k, seed + bin, opt, "grid bin " + std::to_string(bin)).model);
    }
    return model;
}

struct BarPointerModel {
    int position_bins = 1216;          // M
    std::vector<int> tempi;            // position bins advanced per frame, ascending
    double tempo_change_prob = 0.02;
    int n_patterns = 1;
    double frame_rate = 100.0;
    BarGrid grid;
    GmmObservationModel obs;

    void validate() const {
        grid.validate();
        if (position_bins <= 0) throw Error("invalid_model", "position_bins must be positive");
        if (n_patterns != 1) throw Error("invalid_model", "only one rhythmic pattern is supported");
        if (tempi.empty()) throw Error("invalid_model", "empty tempo set");
        for (std::size_t i = 0; i < tempi.size(); ++i) {
            if (tempi[i] <= 0) throw Error("invalid_model", "tempo must advance at least one bin per frame");
            if (i > 0 && tempi[i] <= tempi[i - 1]) throw Error("invalid_model", "tempi must be strictly increasing");
        }
        if (tempi.back() >= position_bins / grid.beats_per_bar)
            throw Error("invalid_model", "fastest tempo skips whole beats");
        if (!(tempo_change_prob >= 0.0 && tempo_change_prob <= 1.0))
            throw Error("invalid_model", "tempo_change_prob must be a probability");
    }

    // Beats per minute implied by a tempo value.
    double bpm(int tempo) const {
        return static_cast<double>(tempo) * frame_rate * 60.0 * grid.beats_per_bar / position_bins;
    }
};

struct BarStateSpace {
    std::vector<int> position;     // per state
    std::vector<int> tempo_index;  // per state
    std::vector<std::uint16_t> grid_bin;
    TransitionModel transitions;

    std::size_t size() const { return position.size(); }
};

// State index = tempo_index * M + position. From (m, j) the position moves to
// (m + tempo_j) mod M; the tempo keeps its bin with 1 - p or moves to each
// neighbouring bin with p / 2, renormalised at the range edges.
inline BarStateSpace build_state_space(const BarPointerModel& model) {
    model.validate();
    const std::size_t M = static_cast<std::size_t>(model.position_bins);
    const std::size_t n_tempi = model.tempi.size();
    const double p = model.tempo_change_prob;
    BarStateSpace ss;
    ss.position.resize(M * n_tempi);
    ss.tempo_index.resize(M * n_tempi);
    ss.grid_bin.resize(M * n_tempi);
    std::vector<TransitionModel::Edge> edges;
    edges.reserve(M * n_tempi * 3);
    for (std::size_t j = 0; j < n_tempi; ++j) {
        std::vector<std::pair<std::size_t, double>> moves{{j, 1.0 - p}};
        if (j > 0) moves.emplace_back(j - 1, p / 2.0);
        if (j + 1 < n_tempi) moves.emplace_back(j + 1, p / 2.0);
        double total = 0.0;
        for (const auto& mv : moves) total += mv.second;
        for (std::size_t m = 0; m < M; ++m) {
            const std::size_t s = j * M + m;
            ss.position[s] = static_cast<int>(m);
            ss.tempo_index[s] = static_cast<int>(j);
            ss.grid_bin[s] = static_cast<std::uint16_t>(m * static_cast<std::size_t>(model.grid.bins_per_bar) / M);
            const std::size_t next = (m + static_cast<std::size_t>(model.tempi[j])) % M;
            for (const auto& [j2, prob] : moves)
                edges.push_back({static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(j2 * M + next), prob / total});
        }
    }
    ss.transitions = TransitionModel::from_edges(M * n_tempi, std::move(edges));
    return ss;
}

// Per-state observation log-likelihood of one frame; states share the GMM of
// their grid bin floor(m * bins_per_bar / M).
inline std::vector<double> observation_loglik(const BarPointerModel& model, const BarStateSpace& ss,
                                              std::span<const double> frame) {
    if (!model.obs.trained()) throw Error("untrained_model", "observation model is not trained");
    const auto per_bin = model.obs.bin_loglik(frame);
    std::vector<double> out(ss.size());
    for (std::size_t s = 0; s < ss.size(); ++s) out[s] = per_bin[ss.grid_bin[s]];
    return out;
}

// One beat per crossing of a beat boundary (multiples of M / beats_per_bar)
// between consecutive frames, timed by linear interpolation of the crossing.
// Position = index of the beat just entered + 1.
inline BeatList decode_events(std::span<const int> positions, double frame_rate, const BarGrid& grid,
                              int position_bins) {
    BeatList out;
    out.beats_per_bar = grid.beats_per_bar;
    const double M = position_bins;
    const int bpb = grid.beats_per_bar;
    auto beat_of = [&](int m) { return static_cast<int>(static_cast<long>(m) * bpb / position_bins); };
    for (std::size_t t = 1; t < positions.size(); ++t) {
        const int prev = positions[t - 1], cur = positions[t];
        const int b_prev = beat_of(prev), b_cur = beat_of(cur);
        if (b_prev == b_cur && cur >= prev) continue;
        double advance = cur - prev;
        if (advance <= 0) advance += M;
        double boundary = b_cur * M / bpb;
        if (boundary < prev) boundary += M;
        const double frac = std::clamp((boundary - prev) / advance, 0.0, 1.0);
        const double time = (static_cast<double>(t - 1) + frac) / frame_rate;
        if (!out.events.empty() && !(time > out.events.back().time)) continue;
        out.events.push_back({time, b_cur + 1});
    }
    return out;
}

struct BayesConfig {
    BarGrid grid{64, 4};
    int position_bins = 1216;
    int max_tempo_bins = 23;
    double tempo_change_prob = 0.02;
    std::size_t gmm_components = 2;
    double tempo_margin = 0.2;
    std::uint64_t seed = 0;
};

struct Excerpt {
    features::OnsetEnvelope envelope;
    BeatList annotations;
};

// Integer tempo set covering [min_bpm, max_bpm]; thinned to at most
// max_bins geometrically spaced values.
inline std::vector<int> tempo_set(double min_bpm, double max_bpm, double frame_rate, const BayesConfig& cfg) {
    const double per_bpm = cfg.position_bins / (frame_rate * 60.0 * cfg.grid.beats_per_bar);
    const int lo = std::max(1, static_cast<int>(std::floor(min_bpm * per_bpm)));
    const int hi = std::max(lo, static_cast<int>(std::ceil(max_bpm * per_bpm)));
    std::vector<int> all;
    for (int t = lo; t <= hi; ++t) all.push_back(t);
    if (static_cast<int>(all.size()) <= cfg.max_tempo_bins || cfg.max_tempo_bins < 2) return all;
    std::vector<int> thin;
    for (int i = 0; i < cfg.max_tempo_bins; ++i) {
        const double x = lo * std::pow(static_cast<double>(hi) / lo, static_cast<double>(i) / (cfg.max_tempo_bins - 1));
        const int v = static_cast<int>(std::lround(x));
        if (thin.empty() || v > thin.back()) thin.push_back(v);
    }
    return thin;
}

// Quantise, pool and fit. Envelopes are max-normalised per band first; the
// tempo range is the span of annotated bar tempi widened by tempo_margin.
inline BarPointerModel bayes_train(const std::vector<Excerpt>& excerpts, const BayesConfig& cfg) {
    if (excerpts.empty()) throw Error("empty_training_set", "no training excerpts");
    cfg.grid.validate();
    const double fps = excerpts.front().envelope.frame_rate;
    std::vector<GridSamples> pooled;
    double min_bpm = std::numeric_limits<double>::infinity(), max_bpm = 0.0;
    for (const auto& ex : excerpts) {
        if (std::abs(ex.envelope.frame_rate - fps) > 1e-9 * fps)
            throw Error("frame_rate_mismatch", "training excerpts have different frame rates");
        const auto env = features::normalize_global(ex.envelope);
        GridSamples g;
        try {
            g = quantize_to_grid(env, ex.annotations, cfg.grid);
        } catch (const Error& e) {
            if (e.code() == "no_complete_bar" && excerpts.size() > 1) continue;
            throw;
        }
        pooled.push_back(std::move(g));
        for (const auto& bar : complete_bars(ex.annotations, cfg.grid.beats_per_bar)) {
            const double beat = (bar.beat_times.back() - bar.beat_times.front()) / cfg.grid.beats_per_bar;
            min_bpm = std::min(min_bpm, 60.0 / beat);
            max_bpm = std::max(max_bpm, 60.0 / beat);
        }
    }
    if (pooled.empty()) throw Error("no_complete_bar", "no excerpt contains a complete bar");

    BarPointerModel model;
    model.position_bins = cfg.position_bins;
    model.tempo_change_prob = cfg.tempo_change_prob;
    model.frame_rate = fps;
    model.grid = cfg.grid;
    model.tempi = tempo_set(min_bpm * (1.0 - cfg.tempo_margin), max_bpm * (1.0 + cfg.tempo_margin), fps, cfg);
    model.obs = fit_observation_model(pooled, cfg.gmm_components, cfg.seed);
    model.validate();
    return model;
}

struct TrackResult {
    BeatList beats;
    std::vector<int> positions;
    std::vector<int> tempo_indices;
    double log_prob = 0.0;
};

inline TrackResult bayes_track_detailed(const BarPointerModel& model, const features::OnsetEnvelope& envelope) {
    if (!model.obs.trained()) throw Error("untrained_model", "observation model is not trained");
    if (std::abs(envelope.frame_rate - model.frame_rate) > 1e-9 * model.frame_rate)
        throw Error("frame_rate_mismatch", "envelope frame rate " + io::fmt(envelope.frame_rate, 3) +
                                               " differs from model frame rate " + io::fmt(model.frame_rate, 3));
    if (envelope.n_bands() != model.obs.n_bands) throw Error("shape", "envelope band count differs from model");
    if (envelope.n_frames() == 0) throw Error("invalid_argument", "empty envelope");
    const auto env = features::normalize_global(envelope);
    const auto ss = build_state_space(model);
    std::vector<double> per_bin;
    const auto path = viterbi(ss.transitions, env.n_frames(), [&](std::size_t t, std::span<double> out) {
        per_bin = model.obs.bin_loglik(env.values.row(t));
        for (std::size_t s = 0; s < out.size(); ++s) out[s] = per_bin[ss.grid_bin[s]];
    });
    TrackResult res;
    res.log_prob = path.log_prob;
    for (auto s : path.states) {
        res.positions.push_back(ss.position[s]);
        res.tempo_indices.push_back(ss.tempo_index[s]);
    }
    res.beats = decode_events(res.positions, model.frame_rate, model.grid, model.position_bins);
    return res;
}

inline BeatList bayes_track(const BarPointerModel& model, const features::OnsetEnvelope& envelope) {
    return bayes_track_detailed(model, envelope).beats;
}

// JSON container for trained models.
inline nlohmann::json to_json(const BarPointerModel& m) {
    nlohmann::json j;
    j["kind"] = "bayes";
    j["version"] = 1;
    j["frame_rate"] = m.frame_rate;
    j["position_bins"] = m.position_bins;
    j["tempi"] = m.tempi;
    j["tempo_change_prob"] = m.tempo_change_prob;
    j["n_patterns"] = m.n_patterns;
    j["grid"] = {{"bins_per_bar", m.grid.bins_per_bar}, {"beats_per_bar", m.grid.beats_per_bar}};
    j["n_bands"] = m.obs.n_bands;
    auto& bins = j["gmm"] = nlohmann::json::array();
    for (const auto& g : m.obs.bins)
        bins.push_back({{"weights", g.weights}, {"means", g.means.data}, {"variances", g.variances.data}});
    return j;
}

inline BarPointerModel model_from_json(const nlohmann::json& j) {
    if (j.value("kind", "") != "bayes") throw Error("bad_model", "not a bayes model file");
    if (j.value("version", 0) != 1) throw Error("bad_model", "unsupported bayes model version");
    BarPointerModel m;
    m.frame_rate = j.at("frame_rate").get<double>();
    m.position_bins = j.at("position_bins").get<int>();
    m.tempi = j.at("tempi").get<std::vector<int>>();
    m.tempo_change_prob = j.at("tempo_change_prob").get<double>();
    m.n_patterns = j.at("n_patterns").get<int>();
    m.grid.bins_per_bar = j.at("grid").at("bins_per_bar").get<int>();
    m.grid.beats_per_bar = j.at("grid").at("beats_per_bar").get<int>();
    m.obs.grid = m.grid;
    m.obs.n_bands = j.at("n_bands").get<std::size_t>();
    for (const auto& b : j.at("gmm")) {
        Gmm g;
        g.weights = b.at("weights").get<std::vector<double>>();
        const std::size_t k = g.weights.size();
        g.means = Matrix<double>(k, m.obs.n_bands);
        g.variances = Matrix<double>(k, m.obs.n_bands);
        g.means.data = b.at("means").get<std::vector<double>>();
        g.variances.data = b.at("variances").get<std::vector<double>>();
        if (g.means.data.size() != k * m.obs.n_bands || g.variances.data.size() != k * m.obs.n_bands)
            throw Error("bad_model", "GMM parameter size mismatch");
        m.obs.bins.push_back(std::move(g));
    }
    if (m.obs.bins.size() != static_cast<std::size_t>(m.grid.bins_per_bar))
        throw Error("bad_model", "GMM count differs from bins_per_bar");
    m.validate();
    return m;
}

}  // namespace meter::bayes
