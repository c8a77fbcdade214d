#pragma once

// Activation post-processing: a beat DBN over (phase, tempo), a downbeat DBN
// over (beat in bar, phase, tempo) run once per meter option, and the Ellis
// global-tempo dynamic-programming tracker on onset envelopes.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "meter/core.hpp"
#include "meter/features.hpp"
#include "meter/viterbi.hpp"

namespace meter::decode {

struct DbnConfig {
    double observation_lambda = 16.0;  // 1/lambda of each beat period is "beat"
    double tempo_change_prob = 0.02;   // at each beat boundary, split over the two neighbours
    int max_tempi = 60;                // beat intervals are thinned to this many, log spaced
    double activation_floor = 1e-5;    // activations are clipped to [floor, 1 - floor]
};

// Integer beat intervals in frames whose tempo lies inside the range.
inline std::vector<int> beat_intervals(const TempoRange& range, double frame_rate, int max_tempi) {
    range.validate();
    const int lo = std::max(1, static_cast<int>(std::ceil(60.0 * frame_rate / range.max_bpm - 1e-9)));
    const int hi = static_cast<int>(std::floor(60.0 * frame_rate / range.min_bpm + 1e-9));
    if (hi < lo) throw Error("invalid_tempo_range", "tempo range admits no whole-frame beat interval");
    std::vector<int> all;
    for (int d = lo; d <= hi; ++d) all.push_back(d);
    if (max_tempi < 2 || static_cast<int>(all.size()) <= max_tempi) return all;
    std::vector<int> thin;
    for (int i = 0; i < max_tempi; ++i) {
        const double x = lo * std::pow(static_cast<double>(hi) / lo, static_cast<double>(i) / (max_tempi - 1));
        const int d = std::clamp(static_cast<int>(std::lround(x)), lo, hi);
        if (thin.empty() || d > thin.back()) thin.push_back(d);
    }
    return thin;
}

namespace detail {

inline double clip(double a, double floor) { return std::clamp(a, floor, 1.0 - floor); }

// Tempo moves at a beat boundary: stay with 1 - p, neighbours p / 2 each,
// renormalised at the ends of the tempo list.
inline std::vector<std::pair<std::size_t, double>> tempo_moves(std::size_t i, std::size_t n, double p) {
    std::vector<std::pair<std::size_t, double>> moves{{i, 1.0 - p}};
    if (i > 0) moves.emplace_back(i - 1, p / 2.0);
    if (i + 1 < n) moves.emplace_back(i + 1, p / 2.0);
    double total = 0.0;
    for (const auto& m : moves) total += m.second;
    for (auto& m : moves) m.second /= total;
    return moves;
}

}  // namespace detail

struct BeatStateSpace {
    std::vector<int> intervals;
    std::vector<std::uint32_t> tempo_of;  // per state
    std::vector<std::uint16_t> phase;     // per state, frames since the beat
    TransitionModel transitions;
};

inline BeatStateSpace beat_state_space(const std::vector<int>& intervals, double tempo_change_prob) {
    BeatStateSpace ss;
    ss.intervals = intervals;
    std::vector<std::uint32_t> base;
    for (std::size_t i = 0; i < intervals.size(); ++i) {
        base.push_back(static_cast<std::uint32_t>(ss.phase.size()));
        for (int p = 0; p < intervals[i]; ++p) {
            ss.tempo_of.push_back(static_cast<std::uint32_t>(i));
            ss.phase.push_back(static_cast<std::uint16_t>(p));
        }
    }
    std::vector<TransitionModel::Edge> edges;
    for (std::size_t i = 0; i < intervals.size(); ++i) {
        for (int p = 0; p + 1 < intervals[i]; ++p) edges.push_back({base[i] + p, base[i] + p + 1, 1.0});
        for (const auto& [j, prob] : detail::tempo_moves(i, intervals.size(), tempo_change_prob))
            edges.push_back({base[i] + static_cast<std::uint32_t>(intervals[i] - 1), base[j], prob});
    }
    ss.transitions = TransitionModel::from_edges(ss.phase.size(), std::move(edges));
    return ss;
}

// Beats from a beat activation. States in the first 1/lambda of a beat period
// observe the activation; the others share (1 - activation) / (lambda - 1).
inline BeatList dbn_beat_decode(std::span<const double> beat_act, double frame_rate, const TempoRange& range,
                                const DbnConfig& cfg = {}) {
    if (beat_act.empty()) throw Error("empty_activation", "no activation frames");
    const auto ss = beat_state_space(beat_intervals(range, frame_rate, cfg.max_tempi), cfg.tempo_change_prob);
    const double lambda = cfg.observation_lambda;
    std::vector<char> beat_region(ss.phase.size());
    for (std::size_t s = 0; s < ss.phase.size(); ++s)
        beat_region[s] = ss.phase[s] * lambda < ss.intervals[ss.tempo_of[s]];
    const auto path = viterbi(ss.transitions, beat_act.size(), [&](std::size_t t, std::span<double> out) {
        const double a = detail::clip(beat_act[t], cfg.activation_floor);
        const double on = std::log(a), off = std::log((1.0 - a) / (lambda - 1.0));
        for (std::size_t s = 0; s < out.size(); ++s) out[s] = beat_region[s] ? on : off;
    });
    BeatList out;
    for (std::size_t t = 0; t < path.states.size(); ++t) {
        const auto s = path.states[t];
        if (!beat_region[s] || (t > 0 && beat_region[path.states[t - 1]] && ss.phase[s] > 0)) continue;
        // start of a beat run: refine to the activation maximum inside the run
        std::size_t best = t;
        for (std::size_t u = t + 1; u < path.states.size(); ++u) {
            const auto v = path.states[u];
            if (!beat_region[v] || ss.phase[v] == 0) break;
            if (beat_act[u] > beat_act[best]) best = u;
        }
        const double time = static_cast<double>(best) / frame_rate;
        if (out.events.empty() || time > out.events.back().time) out.events.push_back({time, 0});
    }
    return out;
}

struct DownbeatStateSpace {
    std::vector<int> intervals;
    int beats_per_bar = 0;
    std::vector<std::uint32_t> tempo_of;
    std::vector<std::uint8_t> beat_of;
    std::vector<std::uint16_t> phase;
    TransitionModel transitions;
};

inline DownbeatStateSpace downbeat_state_space(const std::vector<int>& intervals, int beats_per_bar,
                                               double tempo_change_prob) {
    if (beats_per_bar < 1 || beats_per_bar > 255) throw Error("invalid_argument", "beats_per_bar out of range");
    DownbeatStateSpace ss;
    ss.intervals = intervals;
    ss.beats_per_bar = beats_per_bar;
    // state = base[i] + b * d_i + p
    std::vector<std::uint32_t> base;
    for (std::size_t i = 0; i < intervals.size(); ++i) {
        base.push_back(static_cast<std::uint32_t>(ss.phase.size()));
        for (int b = 0; b < beats_per_bar; ++b)
            for (int p = 0; p < intervals[i]; ++p) {
                ss.tempo_of.push_back(static_cast<std::uint32_t>(i));
                ss.beat_of.push_back(static_cast<std::uint8_t>(b));
                ss.phase.push_back(static_cast<std::uint16_t>(p));
            }
    }
    std::vector<TransitionModel::Edge> edges;
    for (std::size_t i = 0; i < intervals.size(); ++i) {
        const auto d = static_cast<std::uint32_t>(intervals[i]);
        for (int b = 0; b < beats_per_bar; ++b) {
            const std::uint32_t first = base[i] + static_cast<std::uint32_t>(b) * d;
            for (std::uint32_t p = 0; p + 1 < d; ++p) edges.push_back({first + p, first + p + 1, 1.0});
            const auto next_beat = static_cast<std::uint32_t>((b + 1) % beats_per_bar);
            for (const auto& [j, prob] : detail::tempo_moves(i, intervals.size(), tempo_change_prob))
                edges.push_back({first + d - 1, base[j] + next_beat * static_cast<std::uint32_t>(intervals[j]), prob});
        }
    }
    ss.transitions = TransitionModel::from_edges(ss.phase.size(), std::move(edges));
    return ss;
}

struct DownbeatResult {
    BeatList beats;
    double log_prob = -std::numeric_limits<double>::infinity();
};

// Joint observation: downbeat-region states see the downbeat activation,
// other beat-region states see beat * (1 - downbeat), interior states share
// (1 - beat) / (lambda - 1).
inline DownbeatResult dbn_downbeat_decode_meter(const ActivationPair& acts, int beats_per_bar, const TempoRange& range,
                                                const DbnConfig& cfg = {}) {
    acts.validate();
    if (acts.size() == 0) throw Error("empty_activation", "no activation frames");
    const auto ss = downbeat_state_space(beat_intervals(range, acts.frame_rate, cfg.max_tempi), beats_per_bar,
                                         cfg.tempo_change_prob);
    const double lambda = cfg.observation_lambda;
    enum : std::uint8_t { interior, downbeat, beat };
    std::vector<std::uint8_t> kind(ss.phase.size());
    for (std::size_t s = 0; s < kind.size(); ++s) {
        const bool region = ss.phase[s] * lambda < ss.intervals[ss.tempo_of[s]];
        kind[s] = !region ? interior : (ss.beat_of[s] == 0 ? downbeat : beat);
    }
    const auto path = viterbi(ss.transitions, acts.size(), [&](std::size_t t, std::span<double> out) {
        const double b = detail::clip(acts.beat[t], cfg.activation_floor);
        const double d = detail::clip(acts.downbeat[t], cfg.activation_floor);
        const double scores[3] = {std::log((1.0 - b) / (lambda - 1.0)), std::log(d),
                                  std::log(std::max(b * (1.0 - d), cfg.activation_floor))};
        for (std::size_t s = 0; s < out.size(); ++s) out[s] = scores[kind[s]];
    });
    DownbeatResult res;
    res.log_prob = path.log_prob;
    res.beats.beats_per_bar = beats_per_bar;
    for (std::size_t t = 0; t < path.states.size(); ++t) {
        const auto s = path.states[t];
        if (kind[s] == interior || (t > 0 && kind[path.states[t - 1]] != interior && ss.phase[s] > 0)) continue;
        std::size_t best = t;
        for (std::size_t u = t + 1; u < path.states.size(); ++u) {
            const auto v = path.states[u];
            if (kind[v] == interior || ss.phase[v] == 0) break;
            if (acts.beat[u] > acts.beat[best]) best = u;
        }
        const double time = static_cast<double>(best) / acts.frame_rate;
        if (res.beats.events.empty() || time > res.beats.events.back().time)
            res.beats.events.push_back({time, ss.beat_of[s] + 1});
    }
    return res;
}

// Runs one decoder per meter option and keeps the best-scoring path (first
// option on ties).
inline BeatList dbn_downbeat_decode(const ActivationPair& acts, const std::vector<int>& beats_per_bar_options,
                                    const TempoRange& range, const DbnConfig& cfg = {}) {
    if (beats_per_bar_options.empty()) throw Error("invalid_argument", "no meter options");
    DownbeatResult best;
    for (int bpb : beats_per_bar_options) {
        auto r = dbn_downbeat_decode_meter(acts, bpb, range, cfg);
        if (r.log_prob > best.log_prob) best = std::move(r);
    }
    return best.beats;
}

struct EllisConfig {
    double tightness = 680.0;      // alpha
    double prior_bpm = 120.0;      // centre of the log-Gaussian tempo weighting
    double prior_octaves = 1.0;    // its standard deviation
    double trim_ratio = 0.5;       // leading/trailing beats below ratio * RMS strength are dropped
    double min_seconds = 2.0;
};

struct EllisResult {
    BeatList beats;
    double tempo_bpm = 0.0;
};

namespace detail {

inline std::vector<double> band_sum(const features::OnsetEnvelope& env) {
    std::vector<double> x(env.n_frames(), 0.0);
    for (std::size_t t = 0; t < env.n_frames(); ++t)
        for (std::size_t b = 0; b < env.n_bands(); ++b) x[t] += env.values(t, b);
    return x;
}

}  // namespace detail

// Global tempo: the lag maximising the mean-removed, overlap-normalised
// autocorrelation weighted by a log-Gaussian tempo window. Equal scores go to
// the longest lag, i.e. the slowest tempo.
inline double ellis_tempo(const std::vector<double>& onset, double frame_rate, const TempoRange& range,
                          const EllisConfig& cfg = {}) {
    range.validate();
    const std::size_t n = onset.size();
    double mean = 0.0;
    for (double v : onset) mean += v / static_cast<double>(n);
    const auto [mn, mx] = std::minmax_element(onset.begin(), onset.end());
    const bool flat = *mx - *mn <= 1e-12 * (1.0 + std::abs(*mx));
    std::vector<double> x(n, 0.0);
    if (!flat)
        for (std::size_t i = 0; i < n; ++i) x[i] = onset[i] - mean;
    const auto lo = static_cast<std::size_t>(std::max(1.0, std::ceil(60.0 * frame_rate / range.max_bpm - 1e-9)));
    const auto hi = std::min(n - 1, static_cast<std::size_t>(std::floor(60.0 * frame_rate / range.min_bpm + 1e-9)));
    if (hi < lo) throw Error("input_too_short", "envelope too short for the tempo range");
    double best_score = -std::numeric_limits<double>::infinity();
    std::size_t best_lag = hi;
    for (std::size_t lag = lo; lag <= hi; ++lag) {
        double acc = 0.0;
        for (std::size_t i = lag; i < n; ++i) acc += x[i] * x[i - lag];
        acc /= static_cast<double>(n - lag);
        const double bpm = 60.0 * frame_rate / static_cast<double>(lag);
        const double z = std::log2(bpm / cfg.prior_bpm) / cfg.prior_octaves;
        const double score = acc * std::exp(-0.5 * z * z);
        if (score >= best_score) {
            best_score = score;
            best_lag = lag;
        }
    }
    return 60.0 * frame_rate / static_cast<double>(best_lag);
}

// Dynamic programming over frames: score(t) = onset(t) + max over predecessors
// tau in [t - 2p, t - p/2] of score(tau) - alpha * log((t - tau) / p)^2,
// or onset(t) alone when that maximum is not positive.
inline EllisResult ellis_track(const features::OnsetEnvelope& env, const TempoRange& range,
                               const EllisConfig& cfg = {}) {
    if (env.n_frames() == 0 || env.duration() < cfg.min_seconds)
        throw Error("input_too_short", "the DP tracker needs at least " + io::fmt(cfg.min_seconds, 1) + " s");
    const double fps = env.frame_rate;
    auto onset = detail::band_sum(env);
    double sq = 0.0, mean = 0.0;
    for (double v : onset) mean += v / static_cast<double>(onset.size());
    for (double v : onset) sq += (v - mean) * (v - mean) / static_cast<double>(onset.size());
    const double sd = std::sqrt(sq);
    if (sd > 1e-12 * (1.0 + std::abs(mean)))
        for (double& v : onset) v /= sd;

    EllisResult res;
    res.tempo_bpm = ellis_tempo(onset, fps, range, cfg);
    const double period = 60.0 * fps / res.tempo_bpm;
    const std::size_t n = onset.size();
    std::vector<double> score(n);
    std::vector<std::ptrdiff_t> back(n, -1);
    const auto min_step = static_cast<std::ptrdiff_t>(std::round(period / 2.0));
    const auto max_step = static_cast<std::ptrdiff_t>(std::round(2.0 * period));
    for (std::size_t t = 0; t < n; ++t) {
        double best = -std::numeric_limits<double>::infinity();
        std::ptrdiff_t arg = -1;
        for (std::ptrdiff_t step = std::max<std::ptrdiff_t>(1, min_step); step <= max_step; ++step) {
            const auto tau = static_cast<std::ptrdiff_t>(t) - step;
            if (tau < 0) break;
            const double l = std::log(static_cast<double>(step) / period);
            const double v = score[tau] - cfg.tightness * l * l;
            if (v > best) {
                best = v;
                arg = tau;
            }
        }
        // A chain may also start fresh at t when no predecessor adds value.
        if (arg >= 0 && best > 0.0) {
            score[t] = onset[t] + best;
            back[t] = arg;
        } else {
            score[t] = onset[t];
        }
    }
    // Best end point within the last period, then backtrace.
    const auto last_start = n > static_cast<std::size_t>(period) ? n - static_cast<std::size_t>(period) : 0;
    std::size_t end = last_start;
    for (std::size_t t = last_start; t < n; ++t)
        if (score[t] > score[end]) end = t;
    std::vector<std::size_t> frames;
    for (auto t = static_cast<std::ptrdiff_t>(end); t >= 0; t = back[t]) frames.push_back(static_cast<std::size_t>(t));
    std::reverse(frames.begin(), frames.end());

    // Trim weak beats at both ends (leading or trailing silence).
    double rms = 0.0;
    for (std::size_t f : frames) rms += onset[f] * onset[f];
    rms = frames.empty() ? 0.0 : std::sqrt(rms / static_cast<double>(frames.size()));
    const double threshold = cfg.trim_ratio * rms;
    std::size_t first = 0, last = frames.size();
    while (first < last && onset[frames[first]] < threshold) ++first;
    while (last > first && onset[frames[last - 1]] < threshold) --last;
    for (std::size_t i = first; i < last; ++i) res.beats.events.push_back({static_cast<double>(frames[i]) / fps, 0});
    return res;
}

}  // namespace meter::decode
