#pragma once

// Tatum profiles: per frequency band and tatum, the distribution over bars
// of the strongest locally normalised onset strength near that tatum.

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "meter/bayesbeat.hpp"
#include "meter/features.hpp"

namespace meter::profile {

inline constexpr int tatums_per_beat = 4;

struct ProfileConfig {
    double half_window_seconds = 1.5;  // local normalisation
    double anchor_variance = 0.02;     // tatums below this variance are flagged as anchors
};

struct TatumProfile {
    int beats_per_bar = 0;
    std::vector<features::Band> bands;
    std::vector<std::vector<std::vector<double>>> samples;  // [band][tatum] -> values in [0, 1]
    std::size_t bars = 0;
    std::size_t skipped_excerpts = 0;  // excerpts without a complete bar

    int n_tatums() const { return beats_per_bar * tatums_per_beat; }
};

// Two-band envelope normalised to [0, 1] over a sliding window.
inline features::OnsetEnvelope profile_envelope(const AudioBuffer& audio, const features::FeatureConfig& cfg = {},
                                                const ProfileConfig& pc = {}) {
    const auto env =
        features::onset_envelope(audio, features::profile_bands(audio.sample_rate / 2.0), cfg, cfg.frame_rate);
    return features::normalize_local(env, pc.half_window_seconds);
}

// Tatum instants split each beat span into four equal parts. A tatum owns the
// frames closer to it than to its neighbours, and its sample is the maximum
// strength over those frames.
inline TatumProfile compute_profile(const std::vector<std::pair<features::OnsetEnvelope, BeatList>>& excerpts,
                                    int beats_per_bar) {
    if (beats_per_bar < 1) throw Error("invalid_argument", "beats_per_bar must be positive");
    TatumProfile p;
    p.beats_per_bar = beats_per_bar;
    const int n_tatums = p.n_tatums();
    for (const auto& [env, ann] : excerpts) {
        if (p.bands.empty()) {
            p.bands = env.band_edges;
            p.samples.assign(env.n_bands(), std::vector<std::vector<double>>(n_tatums));
        } else if (env.n_bands() != p.samples.size()) {
            throw Error("shape", "excerpts disagree on the number of bands");
        }
        const auto bars = bayes::complete_bars(ann, beats_per_bar);
        if (bars.empty() || env.n_frames() == 0) {
            ++p.skipped_excerpts;
            continue;
        }
        for (const auto& bar : bars) {
            std::vector<double> tatum;  // n_tatums + 1 instants, the last is the next downbeat
            for (int b = 0; b < beats_per_bar; ++b)
                for (int k = 0; k < tatums_per_beat; ++k) {
                    const double t0 = bar.beat_times[b], t1 = bar.beat_times[b + 1];
                    tatum.push_back(t0 + (t1 - t0) * k / tatums_per_beat);
                }
            tatum.push_back(bar.beat_times.back());
            for (int j = 0; j < n_tatums; ++j) {
                const double before = j > 0 ? tatum[j] - tatum[j - 1] : tatum[1] - tatum[0];
                const double lo = (tatum[j] - before / 2.0) * env.frame_rate;
                const double hi = (tatum[j] + tatum[j + 1]) / 2.0 * env.frame_rate;
                const auto f0 = static_cast<std::ptrdiff_t>(std::ceil(lo));
                const auto f1 = static_cast<std::ptrdiff_t>(std::ceil(hi));  // exclusive
                const auto first = std::max<std::ptrdiff_t>(f0, 0);
                const auto last = std::min<std::ptrdiff_t>(f1, static_cast<std::ptrdiff_t>(env.n_frames()));
                for (std::size_t band = 0; band < env.n_bands(); ++band) {
                    double m = 0.0;
                    for (auto f = first; f < last; ++f)
                        m = std::max(m, env.values(static_cast<std::size_t>(f), band));
                    p.samples[band][j].push_back(std::clamp(m, 0.0, 1.0));
                }
            }
            ++p.bars;
        }
    }
    if (p.bars == 0) throw Error("no_complete_bar", "no excerpt contains a complete annotated bar");
    return p;
}

struct TatumStats {
    double median = 0.0, q1 = 0.0, q3 = 0.0;
    double variance = 0.0;  // population
    std::size_t n = 0;
    bool anchor = false;
};

// Quantile with linear interpolation between order statistics.
inline double quantile(std::vector<double> v, double q) {
    if (v.empty()) throw Error("empty_tatum", "quantile of an empty sample");
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto i = static_cast<std::size_t>(std::floor(pos));
    const double frac = pos - static_cast<double>(i);
    return i + 1 < v.size() ? v[i] + frac * (v[i + 1] - v[i]) : v[i];
}

inline TatumStats tatum_stats(const std::vector<double>& v, double anchor_variance = 0.02) {
    TatumStats s;
    s.n = v.size();
    s.median = quantile(v, 0.5);
    s.q1 = quantile(v, 0.25);
    s.q3 = quantile(v, 0.75);
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    for (double x : v) s.variance += (x - mean) * (x - mean);
    s.variance /= static_cast<double>(v.size());
    s.anchor = s.variance < anchor_variance;
    return s;
}

// [band][tatum]
inline std::vector<std::vector<TatumStats>> profile_stats(const TatumProfile& p, double anchor_variance = 0.02) {
    std::vector<std::vector<TatumStats>> out(p.samples.size());
    for (std::size_t b = 0; b < p.samples.size(); ++b)
        for (std::size_t j = 0; j < p.samples[b].size(); ++j) {
            if (p.samples[b][j].empty())
                throw Error("empty_tatum", "band " + std::to_string(b) + " tatum " + std::to_string(j + 1) +
                                               " has no samples");
            out[b].push_back(tatum_stats(p.samples[b][j], anchor_variance));
        }
    return out;
}

// 1-based tatum with the largest median in a band (lowest index on ties).
inline int strongest_tatum(const std::vector<TatumStats>& band) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < band.size(); ++j)
        if (band[j].median > band[best].median) best = j;
    return static_cast<int>(best) + 1;
}

inline std::string band_name(std::size_t band) { return band == 0 ? "low" : band == 1 ? "high" : std::to_string(band); }

// Tatums are numbered from 1 in both files.
inline std::string stats_csv(const std::vector<std::vector<TatumStats>>& stats) {
    std::ostringstream os;
    os << "band,tatum,median,q1,q3,variance,n,anchor\n";
    for (std::size_t b = 0; b < stats.size(); ++b)
        for (std::size_t j = 0; j < stats[b].size(); ++j) {
            const auto& s = stats[b][j];
            os << band_name(b) << ',' << j + 1 << ',' << io::fmt(s.median, 6) << ',' << io::fmt(s.q1, 6) << ','
               << io::fmt(s.q3, 6) << ',' << io::fmt(s.variance, 6) << ',' << s.n << ',' << (s.anchor ? 1 : 0)
               << '\n';
        }
    return os.str();
}

inline std::string raw_csv(const TatumProfile& p) {
    std::ostringstream os;
    os << "band,tatum,value\n";
    for (std::size_t b = 0; b < p.samples.size(); ++b)
        for (std::size_t j = 0; j < p.samples[b].size(); ++j)
            for (double v : p.samples[b][j]) os << band_name(b) << ',' << j + 1 << ',' << io::fmt(v, 6) << '\n';
    return os.str();
}

}  // namespace meter::profile
