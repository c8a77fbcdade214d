#pragma once

// Audio front end: magnitude STFT, band-wise spectral flux, local min/max
// normalization, the logarithmic filterbank used as network input, and the
// frame-rate variants used for augmentation.

#include <fftw3.h>

#include <array>
#include <cmath>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "meter/core.hpp"
#include "meter/io.hpp"
#include "meter/matrix.hpp"

namespace meter::features {

struct Spectrogram {
    Matrix<float> magnitudes;  // frames x bins
    double frame_rate = 0.0;
    std::vector<double> bin_freqs;
    int sample_rate = 0;

    std::size_t n_frames() const { return magnitudes.rows; }
    std::size_t n_bins() const { return magnitudes.cols; }
};

struct Band {
    double low_hz = 0.0;
    double high_hz = 0.0;
    friend bool operator==(const Band&, const Band&) = default;
};

struct OnsetEnvelope {
    Matrix<double> values;  // frames x bands
    double frame_rate = 0.0;
    std::vector<Band> band_edges;

    std::size_t n_frames() const { return values.rows; }
    std::size_t n_bands() const { return values.cols; }
    double duration() const { return frame_rate > 0 ? static_cast<double>(n_frames()) / frame_rate : 0.0; }

    OnsetEnvelope slice_seconds(double begin_s, double end_s) const {
        OnsetEnvelope out = *this;
        const auto b = static_cast<std::size_t>(std::max(0.0, std::round(begin_s * frame_rate)));
        const auto e = static_cast<std::size_t>(std::max(0.0, std::round(end_s * frame_rate)));
        out.values = values.slice_rows(b, e);
        return out;
    }
};

// Observation bands for the bar-pointer tracker (split at 250 Hz).
inline std::vector<Band> observation_bands(double nyquist) {
    return {{0.0, 250.0}, {250.0, nyquist}};
}

// Bands used for tatum profiles: 20-200 Hz and everything above.
inline std::vector<Band> profile_bands(double nyquist) {
    return {{20.0, 200.0}, {200.0, nyquist}};
}

namespace detail {

// FFTW planning is not thread-safe; plans are created once per size under a
// lock and executed with the new-array interface afterwards.
class FftPlans {
public:
    static fftw_plan get(int n) {
        static FftPlans instance;
        std::lock_guard lock(instance.mutex_);
        auto it = instance.plans_.find(n);
        if (it != instance.plans_.end()) return it->second;
        double* in = fftw_alloc_real(static_cast<std::size_t>(n));
        fftw_complex* out = fftw_alloc_complex(static_cast<std::size_t>(n / 2 + 1));
        fftw_plan plan = fftw_plan_dft_r2c_1d(n, in, out, FFTW_ESTIMATE);
        fftw_free(in);
        fftw_free(out);
        instance.plans_.emplace(n, plan);
        return plan;
    }

    FftPlans(const FftPlans&) = delete;
    FftPlans& operator=(const FftPlans&) = delete;

private:
    FftPlans() = default;
    ~FftPlans() {
        for (auto& [n, p] : plans_) fftw_destroy_plan(p);
    }
    std::mutex mutex_;
    std::map<int, fftw_plan> plans_;
};

struct FftwFree {
    void operator()(void* p) const { fftw_free(p); }
};

}  // namespace detail

// Symmetric Hann window.
inline std::vector<double> hann_window(std::size_t n) {
    std::vector<double> w(n, 1.0);
    if (n < 2) return w;
    for (std::size_t i = 0; i < n; ++i)
        w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n - 1));
    return w;
}

// Magnitude STFT without padding: frame i covers samples [i*hop, i*hop + window).
inline Spectrogram stft(const AudioBuffer& audio, std::size_t window_size, std::size_t hop_size) {
    if (audio.sample_rate <= 0) throw Error("invalid_audio", "sample_rate must be positive");
    if (hop_size < 1 || window_size < hop_size)
        throw Error("invalid_argument", "stft requires window_size >= hop_size >= 1");
    if (audio.samples.size() < window_size)
        throw Error("input_too_short", "input too short: " + std::to_string(audio.samples.size()) +
                                           " samples for a window of " + std::to_string(window_size));

    const std::size_t n_frames = (audio.samples.size() - window_size) / hop_size + 1;
    const std::size_t n_bins = window_size / 2 + 1;
    Spectrogram spec;
    spec.sample_rate = audio.sample_rate;
    spec.frame_rate = static_cast<double>(audio.sample_rate) / static_cast<double>(hop_size);
    spec.magnitudes = Matrix<float>(n_frames, n_bins);
    spec.bin_freqs.resize(n_bins);
    for (std::size_t k = 0; k < n_bins; ++k)
        spec.bin_freqs[k] = static_cast<double>(k) * audio.sample_rate / static_cast<double>(window_size);

    const auto window = hann_window(window_size);
    fftw_plan plan = detail::FftPlans::get(static_cast<int>(window_size));
    std::unique_ptr<double, detail::FftwFree> in(fftw_alloc_real(window_size));
    std::unique_ptr<fftw_complex, detail::FftwFree> out(fftw_alloc_complex(n_bins));
    for (std::size_t f = 0; f < n_frames; ++f) {
        const double* src = audio.samples.data() + f * hop_size;
        for (std::size_t i = 0; i < window_size; ++i) in.get()[i] = src[i] * window[i];
        fftw_execute_dft_r2c(plan, in.get(), out.get());
        auto row = spec.magnitudes.row(f);
        for (std::size_t k = 0; k < n_bins; ++k)
            row[k] = static_cast<float>(std::hypot(out.get()[k][0], out.get()[k][1]));
    }
    return spec;
}

// STFT with window/2 zeros on both sides so that frame i is centred on
// t = i / frame_rate. This is the framing used by every feature pipeline.
inline Spectrogram centered_stft(const AudioBuffer& audio, std::size_t window_size, std::size_t hop_size) {
    AudioBuffer padded;
    padded.sample_rate = audio.sample_rate;
    const std::size_t pad = window_size / 2;
    padded.samples.assign(audio.samples.size() + 2 * pad, 0.0);
    std::copy(audio.samples.begin(), audio.samples.end(), padded.samples.begin() + static_cast<std::ptrdiff_t>(pad));
    return stft(padded, window_size, hop_size);
}

inline void validate_bands(const std::vector<Band>& bands, double nyquist) {
    if (bands.empty()) throw Error("invalid_bands", "at least one band is required");
    for (std::size_t b = 0; b < bands.size(); ++b) {
        const auto& band = bands[b];
        if (band.low_hz < 0.0 || band.high_hz > nyquist + 1e-9 || !(band.low_hz < band.high_hz))
            throw Error("invalid_bands", "band " + std::to_string(b) + " outside [0, sample_rate/2] or empty range");
        if (b > 0 && band.low_hz < bands[b - 1].high_hz)
            throw Error("invalid_bands", "bands must be ordered and non-overlapping");
    }
}

// Half-wave rectified frame difference, summed over the bins of each band.
// A bin belongs to a band when low <= f < high (the top band also takes f == high).
inline OnsetEnvelope spectral_flux(const Spectrogram& spec, const std::vector<Band>& bands, bool log_compress,
                                   double lambda = 1.0) {
    const double nyquist = spec.sample_rate / 2.0;
    validate_bands(bands, nyquist);

    std::vector<std::pair<std::size_t, std::size_t>> ranges;  // [first, last) bin per band
    for (std::size_t b = 0; b < bands.size(); ++b) {
        const bool last_band = b + 1 == bands.size();
        std::size_t first = spec.n_bins(), last = 0;
        for (std::size_t k = 0; k < spec.n_bins(); ++k) {
            const double f = spec.bin_freqs[k];
            const bool inside = f >= bands[b].low_hz && (f < bands[b].high_hz || (last_band && f <= bands[b].high_hz));
            if (inside) {
                first = std::min(first, k);
                last = k + 1;
            }
        }
        if (last <= first)
            throw Error("empty_band", "empty band: no bins in [" + io::fmt(bands[b].low_hz, 1) + ", " +
                                          io::fmt(bands[b].high_hz, 1) + ") Hz");
        ranges.emplace_back(first, last);
    }

    OnsetEnvelope env;
    env.frame_rate = spec.frame_rate;
    env.band_edges = bands;
    env.values = Matrix<double>(spec.n_frames(), bands.size(), 0.0);
    auto level = [&](float m) { return log_compress ? std::log1p(lambda * static_cast<double>(m)) : static_cast<double>(m); };
    for (std::size_t t = 1; t < spec.n_frames(); ++t) {
        const auto cur = spec.magnitudes.row(t);
        const auto prev = spec.magnitudes.row(t - 1);
        for (std::size_t b = 0; b < ranges.size(); ++b) {
            double acc = 0.0;
            for (std::size_t k = ranges[b].first; k < ranges[b].second; ++k)
                acc += std::max(0.0, level(cur[k]) - level(prev[k]));
            env.values(t, b) = acc;
        }
    }
    return env;
}

namespace detail {

// Sliding-window extremum over [t - h, t + h] with a monotonic deque.
template <class Better>
std::vector<double> running_extreme(const std::vector<double>& x, std::size_t h, Better better) {
    std::vector<double> out(x.size());
    std::deque<std::size_t> q;
    std::size_t next = 0;
    for (std::size_t t = 0; t < x.size(); ++t) {
        const std::size_t hi = std::min(x.size() - 1, t + h);
        while (next <= hi) {
            while (!q.empty() && !better(x[q.back()], x[next])) q.pop_back();
            q.push_back(next++);
        }
        while (q.front() + h < t) q.pop_front();
        out[t] = x[q.front()];
    }
    return out;
}

}  // namespace detail

// Rescales each band to [0, 1] with the running min/max over a centred
// window of 2*half_window seconds. Flat windows map to 0.
inline OnsetEnvelope normalize_local(const OnsetEnvelope& env, double half_window_s) {
    if (!(half_window_s > 0.0)) throw Error("invalid_argument", "half_window must be positive");
    const auto h = static_cast<std::size_t>(std::max(1.0, std::round(half_window_s * env.frame_rate)));
    OnsetEnvelope out = env;
    std::vector<double> col(env.n_frames());
    for (std::size_t b = 0; b < env.n_bands(); ++b) {
        for (std::size_t t = 0; t < env.n_frames(); ++t) col[t] = env.values(t, b);
        const auto lo = detail::running_extreme(col, h, [](double a, double c) { return a < c; });
        const auto hi = detail::running_extreme(col, h, [](double a, double c) { return a > c; });
        for (std::size_t t = 0; t < env.n_frames(); ++t) {
            const double range = hi[t] - lo[t];
            out.values(t, b) = range > 0.0 ? (col[t] - lo[t]) / range : 0.0;
        }
    }
    return out;
}

// Divides each band by its maximum; all-zero bands stay zero.
inline OnsetEnvelope normalize_global(const OnsetEnvelope& env) {
    OnsetEnvelope out = env;
    for (std::size_t b = 0; b < env.n_bands(); ++b) {
        double peak = 0.0;
        for (std::size_t t = 0; t < env.n_frames(); ++t) peak = std::max(peak, env.values(t, b));
        if (peak > 0.0)
            for (std::size_t t = 0; t < env.n_frames(); ++t) out.values(t, b) = env.values(t, b) / peak;
    }
    return out;
}

// The five augmentation frame rates: -5 %, -2.5 %, 0, +2.5 %, +5 %.
inline std::vector<double> frame_rate_variants(double base_fps) {
    if (!(base_fps > 0.0)) throw Error("invalid_argument", "base frame rate must be positive");
    return {base_fps * 0.95, base_fps * 0.975, base_fps, base_fps * 1.025, base_fps * 1.05};
}

// Triangular filterbank on a logarithmic frequency axis (bands_per_octave
// centre frequencies referenced to 440 Hz, snapped to FFT bins, duplicates
// removed). With a 2048-point frame at 44.1 kHz, 12 bands/octave and
// 30 Hz - 17 kHz this gives 81 filters.
class LogFilterbank {
public:
    LogFilterbank(const std::vector<double>& bin_freqs, int bands_per_octave = 12, double fmin = 30.0,
                  double fmax = 17000.0) {
        if (bin_freqs.size() < 3) throw Error("invalid_argument", "filterbank needs at least three bins");
        constexpr double fref = 440.0;
        const double left = std::floor(std::log2(fmin / fref) * bands_per_octave);
        const double right = std::ceil(std::log2(fmax / fref) * bands_per_octave);
        std::vector<double> freqs;
        for (double k = left; k < right; k += 1.0) {
            const double f = fref * std::pow(2.0, k / bands_per_octave);
            if (f >= fmin && f <= fmax) freqs.push_back(f);
        }
        std::vector<std::size_t> bins;
        for (double f : freqs) {
            auto it = std::lower_bound(bin_freqs.begin(), bin_freqs.end(), f);
            auto idx = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(it - bin_freqs.begin(), 1,
                                                                         static_cast<std::ptrdiff_t>(bin_freqs.size()) - 1));
            if (f - bin_freqs[idx - 1] < bin_freqs[idx] - f) --idx;
            if (bins.empty() || bins.back() != idx) bins.push_back(idx);
        }
        for (std::size_t i = 0; i + 2 < bins.size(); ++i) {
            std::size_t start = bins[i], center = bins[i + 1], stop = bins[i + 2];
            if (stop - start < 2) {
                center = start;
                stop = start + 1;
            }
            Filter filt;
            filt.start = start;
            filt.weights.resize(stop - start);
            const std::size_t rise = center - start;
            for (std::size_t j = 0; j < rise; ++j) filt.weights[j] = static_cast<double>(j) / static_cast<double>(rise);
            const std::size_t fall = stop - center;
            for (std::size_t j = 0; j < fall; ++j)
                filt.weights[rise + j] = 1.0 - static_cast<double>(j) / static_cast<double>(fall);
            double sum = 0.0;
            for (double w : filt.weights) sum += w;
            if (sum > 0.0)
                for (double& w : filt.weights) w /= sum;
            filters_.push_back(std::move(filt));
        }
    }

    std::size_t n_bands() const { return filters_.size(); }

    // log(1 + filtered magnitude), frames x bands.
    Matrix<float> apply_log(const Spectrogram& spec) const {
        Matrix<float> out(spec.n_frames(), filters_.size());
        for (std::size_t t = 0; t < spec.n_frames(); ++t) {
            const auto row = spec.magnitudes.row(t);
            for (std::size_t b = 0; b < filters_.size(); ++b) {
                const auto& f = filters_[b];
                double acc = 0.0;
                const std::size_t n = std::min(f.weights.size(), row.size() > f.start ? row.size() - f.start : 0);
                for (std::size_t j = 0; j < n; ++j) acc += f.weights[j] * row[f.start + j];
                out(t, b) = static_cast<float>(std::log1p(acc));
            }
        }
        return out;
    }

private:
    struct Filter {
        std::size_t start = 0;
        std::vector<double> weights;
    };
    std::vector<Filter> filters_;
};

// Analysis parameters shared by the feature pipelines.
struct FeatureConfig {
    double frame_rate = 100.0;
    double window_seconds = 2048.0 / 44100.0;  // 2048 samples at 44.1 kHz
    double log_lambda = 1.0;
    int bands_per_octave = 12;
    double fmin = 30.0;
    double fmax = 17000.0;

    std::size_t window_size(int sample_rate) const {
        return static_cast<std::size_t>(std::lround(window_seconds * sample_rate));
    }
    std::size_t hop_size(int sample_rate, double fps) const {
        return static_cast<std::size_t>(std::max(1L, std::lround(sample_rate / fps)));
    }
};

// Centred spectrogram at the requested frame rate. The realised rate is
// sample_rate / round(sample_rate / fps).
inline Spectrogram analysis_spectrogram(const AudioBuffer& audio, const FeatureConfig& cfg, double fps) {
    return centered_stft(audio, cfg.window_size(audio.sample_rate), cfg.hop_size(audio.sample_rate, fps));
}

inline OnsetEnvelope onset_envelope(const AudioBuffer& audio, const std::vector<Band>& bands,
                                    const FeatureConfig& cfg, double fps) {
    return spectral_flux(analysis_spectrogram(audio, cfg, fps), bands, true, cfg.log_lambda);
}

struct FramedFeatures {
    Matrix<float> values;  // frames x bands
    double frame_rate = 0.0;
};

// The filterbank is laid out on the bin grid extended past Nyquist up to
// fmax, so the band count does not depend on the sample rate; bands above
// Nyquist see no energy and stay 0.
inline FramedFeatures network_features(const AudioBuffer& audio, const FeatureConfig& cfg, double fps) {
    const auto spec = analysis_spectrogram(audio, cfg, fps);
    auto grid = spec.bin_freqs;
    const double df = grid[1] - grid[0];
    while (grid.back() < cfg.fmax + 2.0 * df) grid.push_back(grid.back() + df);
    const LogFilterbank fb(grid, cfg.bands_per_octave, cfg.fmin, cfg.fmax);
    return {fb.apply_log(spec), spec.frame_rate};
}

// CSV debug export: "frame,v0,v1,...".
template <class T>
std::string to_csv(const Matrix<T>& m) {
    std::ostringstream os;
    os << "frame";
    for (std::size_t c = 0; c < m.cols; ++c) os << ",v" << c;
    os << '\n';
    for (std::size_t r = 0; r < m.rows; ++r) {
        os << r;
        for (std::size_t c = 0; c < m.cols; ++c) os << ',' << io::fmt(static_cast<double>(m(r, c)), 6);
        os << '\n';
    }
    return os.str();
}

}  // namespace meter::features
