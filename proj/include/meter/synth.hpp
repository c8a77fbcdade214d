#pragma once

// Synthetic percussion with exact beat and downbeat ground truth. Strokes sit
// on a grid of four tatums per beat: low strokes are decaying 80-180 Hz tones,
// high strokes are high-passed noise bursts.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "meter/core.hpp"
#include "meter/io.hpp"
#include "meter/manifest.hpp"

namespace meter::synth {

constexpr int tatums_per_beat = 4;

enum class Voice { low, high };

struct Accent {
    int tatum = 0;  // 0-based index within the bar
    double probability = 1.0;
    double strength = 1.0;
    Voice voice = Voice::low;
};

struct RhythmSpec {
    int beats_per_bar = 4;
    double tempo_start_bpm = 120.0;
    double tempo_end_bpm = 120.0;  // linear drift over the beat sequence
    std::vector<Accent> accents;
    int n_bars = 8;
    double start_seconds = 0.0;    // time of the first downbeat
    double max_seconds = 0.0;      // cut the recording here (0 = natural length)
    double timing_jitter = 0.0;    // stroke onset std in seconds
    double strength_jitter = 0.0;  // relative stroke strength std
    double low_freq_hz = 120.0;
    double noise_level = 0.001;
    std::uint64_t seed = 0;

    void validate() const {
        if (beats_per_bar <= 0 || n_bars <= 0) throw Error("invalid_rhythm", "bars and beats must be positive");
        if (!(tempo_start_bpm > 0.0 && tempo_end_bpm > 0.0)) throw Error("invalid_rhythm", "tempo must be positive");
        if (start_seconds < 0.0) throw Error("invalid_rhythm", "negative start time");
        for (const auto& a : accents) {
            if (a.tatum < 0 || a.tatum >= beats_per_bar * tatums_per_beat)
                throw Error("invalid_rhythm", "accent tatum outside the bar");
            if (!(a.probability >= 0.0 && a.probability <= 1.0))
                throw Error("invalid_rhythm", "accent probability outside [0, 1]");
        }
    }
};

struct Recording {
    AudioBuffer audio;
    BeatList beats;
};

namespace detail {

inline void add_low_stroke(std::vector<double>& out, int sr, double onset, double amp, double freq) {
    const auto start = static_cast<std::ptrdiff_t>(std::llround(onset * sr));
    const auto length = static_cast<std::ptrdiff_t>(0.35 * sr);
    const double attack = 0.002 * sr;
    for (std::ptrdiff_t i = 0; i < length; ++i) {
        const auto n = start + i;
        if (n < 0 || n >= static_cast<std::ptrdiff_t>(out.size())) continue;
        const double t = static_cast<double>(i) / sr;
        const double env = std::min(1.0, i / attack) * std::exp(-t / 0.07);
        out[n] += amp * env * std::sin(2.0 * std::numbers::pi * freq * t);
    }
}

inline void add_high_stroke(std::vector<double>& out, int sr, double onset, double amp, std::mt19937_64& rng) {
    const auto start = static_cast<std::ptrdiff_t>(std::llround(onset * sr));
    const auto length = static_cast<std::ptrdiff_t>(0.12 * sr);
    std::normal_distribution<double> noise(0.0, 1.0);
    double prev = 0.0;
    for (std::ptrdiff_t i = 0; i < length; ++i) {
        const double w = noise(rng);
        const double hp = 0.5 * (w - prev);  // first difference pushes energy upwards
        prev = w;
        const auto n = start + i;
        if (n < 0 || n >= static_cast<std::ptrdiff_t>(out.size())) continue;
        const double t = static_cast<double>(i) / sr;
        out[n] += amp * 0.35 * std::exp(-t / 0.025) * hp;
    }
}

}  // namespace detail

// Beat times follow the tempo curve; tatums split each beat interval evenly.
// Deterministic per spec.seed. The output is scaled down if it would clip.
inline Recording generate(const RhythmSpec& spec, int sample_rate = 22050) {
    spec.validate();
    if (sample_rate <= 0) throw Error("invalid_argument", "sample rate must be positive");
    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);

    const int n_beats = spec.n_bars * spec.beats_per_bar;
    std::vector<double> beat_times(n_beats + 1);
    beat_times[0] = spec.start_seconds;
    for (int k = 0; k < n_beats; ++k) {
        const double frac = n_beats > 1 ? static_cast<double>(k) / (n_beats - 1) : 0.0;
        const double bpm = spec.tempo_start_bpm + (spec.tempo_end_bpm - spec.tempo_start_bpm) * frac;
        beat_times[k + 1] = beat_times[k] + 60.0 / bpm;
    }
    double duration = spec.max_seconds > 0.0 ? spec.max_seconds : beat_times[n_beats] + 0.3;

    Recording rec;
    rec.audio.sample_rate = sample_rate;
    rec.audio.samples.assign(static_cast<std::size_t>(std::ceil(duration * sample_rate)), 0.0);
    rec.beats.beats_per_bar = spec.beats_per_bar;
    for (int k = 0; k < n_beats; ++k)
        if (beat_times[k] < duration) rec.beats.events.push_back({beat_times[k], k % spec.beats_per_bar + 1});

    for (int bar = 0; bar < spec.n_bars; ++bar) {
        for (const auto& a : spec.accents) {
            const bool hit = unit(rng) < a.probability;
            const double jit = gauss(rng), sj = gauss(rng);
            if (!hit) continue;
            const int beat = bar * spec.beats_per_bar + a.tatum / tatums_per_beat;
            const int sub = a.tatum % tatums_per_beat;
            const double interval = beat_times[beat + 1] - beat_times[beat];
            const double onset = beat_times[beat] + interval * sub / tatums_per_beat + spec.timing_jitter * jit;
            if (onset >= duration) continue;
            const double amp = std::max(0.0, a.strength * (1.0 + spec.strength_jitter * sj));
            if (a.voice == Voice::low)
                detail::add_low_stroke(rec.audio.samples, sample_rate, onset, amp, spec.low_freq_hz);
            else
                detail::add_high_stroke(rec.audio.samples, sample_rate, onset, amp, rng);
        }
    }
    for (auto& s : rec.audio.samples) s += spec.noise_level * gauss(rng);
    double peak = 0.0;
    for (double s : rec.audio.samples) peak = std::max(peak, std::abs(s));
    if (peak > 0.99)
        for (auto& s : rec.audio.samples) s *= 0.99 / peak;
    return rec;
}

enum class Suite { candombe_like, samba_like, ballroom_like };

inline std::string to_string(Suite s) {
    switch (s) {
        case Suite::candombe_like: return "candombe_like";
        case Suite::samba_like: return "samba_like";
        case Suite::ballroom_like: return "ballroom_like";
    }
    return "";
}

inline Suite parse_suite(const std::string& name) {
    if (name == "candombe_like") return Suite::candombe_like;
    if (name == "samba_like") return Suite::samba_like;
    if (name == "ballroom_like") return Suite::ballroom_like;
    throw Error("invalid_argument", "unknown suite '" + name + "'");
}

inline int suite_meter(Suite s) { return s == Suite::samba_like ? 2 : 4; }

struct SuiteOptions {
    int n_excerpts = 93;
    double excerpt_seconds = 30.0;
    int sample_rate = 22050;
    std::uint64_t seed = 0;
};

// Excerpt `index` of a suite. Accent designs are hand-made test fixtures:
// samba_like puts the strongest low stroke on beat 2 of a 2/4 bar;
// candombe_like has fixed low accents on beats 3 and 4 plus tatum 4, a fixed
// high pattern, and a tempo that rises within the excerpt; ballroom_like
// mixes a few kick/snare/hi-hat patterns with beat-level emphasis.
inline RhythmSpec suite_spec(Suite suite, int index, const SuiteOptions& opt = {}) {
    std::mt19937_64 rng(opt.seed * 1000003ULL + static_cast<std::uint64_t>(index) * 7919ULL +
                        static_cast<std::uint64_t>(suite));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto uniform = [&](double a, double b) { return a + (b - a) * unit(rng); };

    RhythmSpec s;
    s.beats_per_bar = suite_meter(suite);
    s.start_seconds = uniform(0.05, 0.6);
    s.max_seconds = opt.excerpt_seconds;
    s.timing_jitter = 0.004;
    s.strength_jitter = 0.1;
    s.low_freq_hz = uniform(80.0, 180.0);
    s.seed = rng();
    using V = Voice;
    switch (suite) {
        case Suite::samba_like: {
            s.tempo_start_bpm = s.tempo_end_bpm = uniform(80.0, 112.0);
            s.accents = {{4, 1.0, 1.0, V::low}, {0, 0.7, 0.35, V::low}, {7, 0.25, 0.3, V::low}};
            for (int t = 0; t < 8; ++t) {
                const bool accent = t == 2 || t == 5 || t == 7;
                s.accents.push_back({t, accent ? 0.9 : 0.75, accent ? 0.6 : 0.35, V::high});
            }
            break;
        }
        case Suite::candombe_like: {
            s.tempo_start_bpm = uniform(105.0, 125.0);
            s.tempo_end_bpm = s.tempo_start_bpm + uniform(6.0, 14.0);
            s.accents = {{8, 1.0, 0.9, V::low}, {12, 1.0, 1.0, V::low}, {3, 1.0, 0.8, V::low},
                         {0, 0.3, 0.4, V::low}, {14, 0.4, 0.5, V::low}};
            for (int beat = 0; beat < 4; ++beat) {
                s.accents.push_back({beat * 4 + 1, 1.0, 0.5, V::high});
                s.accents.push_back({beat * 4 + 2, 1.0, 0.5, V::high});
                s.accents.push_back({beat * 4, 0.2, 0.3, V::high});
            }
            break;
        }
        case Suite::ballroom_like: {
            s.tempo_start_bpm = s.tempo_end_bpm = uniform(90.0, 135.0);
            const int pattern = static_cast<int>(unit(rng) * 3.0);
            for (int beat = 0; beat < 4; ++beat) {
                const int t = beat * 4;
                const bool backbeat = beat % 2 == 1;
                s.accents.push_back({t, 1.0, backbeat && pattern == 1 ? 0.6 : 0.9, V::low});
                s.accents.push_back({t, 1.0, backbeat ? 0.8 : 0.6, V::high});
                s.accents.push_back({t + 2, pattern == 2 ? 0.6 : 0.85, 0.35, V::high});
                s.accents.push_back({t + 2, 0.15, 0.4, V::low});
                if (pattern == 2) {
                    s.accents.push_back({t + 1, 0.3, 0.2, V::high});
                    s.accents.push_back({t + 3, 0.5, 0.25, V::high});
                }
            }
            break;
        }
    }
    const double max_bpm = std::max(s.tempo_start_bpm, s.tempo_end_bpm);
    s.n_bars = static_cast<int>(std::ceil(opt.excerpt_seconds * max_bpm / 60.0 / s.beats_per_bar)) + 2;
    return s;
}

// Writes `<out>/<id>.wav`, `<out>/<id>.beats` and `<out>/manifest.json`.
inline DatasetManifest make_suite(Suite suite, const std::filesystem::path& out_dir, const SuiteOptions& opt = {}) {
    DatasetManifest m;
    m.dataset_name = to_string(suite);
    m.beats_per_bar = suite_meter(suite);
    for (int i = 0; i < opt.n_excerpts; ++i) {
        char id[64];
        std::snprintf(id, sizeof id, "%s_%03d", m.dataset_name.c_str(), i);
        const auto rec = generate(suite_spec(suite, i, opt), opt.sample_rate);
        ManifestEntry e{id, out_dir / (std::string(id) + ".wav"), out_dir / (std::string(id) + ".beats")};
        std::filesystem::create_directories(out_dir);
        io::write_wav(e.audio, rec.audio);
        io::write_beats(e.annotations, rec.beats);
        m.entries.push_back(std::move(e));
    }
    save_manifest(out_dir / "manifest.json", m);
    return m;
}

}  // namespace meter::synth
