#pragma once

// Shared value types: errors, audio buffers, beat lists, activations, tempo ranges.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace meter {

// Every failure carries a short machine-readable code ("input_too_short",
// "shape", ...) next to the human message.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& message)
        : std::runtime_error(message), code_(std::move(code)) {}

    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

struct AudioBuffer {
    std::vector<double> samples;
    int sample_rate = 44100;

    double duration() const {
        return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
    }

    void validate() const {
        if (sample_rate <= 0) throw Error("invalid_audio", "sample_rate must be positive");
        for (double s : samples)
            if (!std::isfinite(s)) throw Error("invalid_audio", "non-finite sample value");
    }

    // Copy of [begin_s, end_s) clipped to the buffer.
    AudioBuffer slice(double begin_s, double end_s) const {
        AudioBuffer out;
        out.sample_rate = sample_rate;
        auto clamp_index = [&](double t) {
            auto i = static_cast<std::ptrdiff_t>(std::llround(t * sample_rate));
            return static_cast<std::size_t>(
                std::clamp<std::ptrdiff_t>(i, 0, static_cast<std::ptrdiff_t>(samples.size())));
        };
        const std::size_t b = clamp_index(begin_s);
        const std::size_t e = clamp_index(end_s);
        if (e > b) out.samples.assign(samples.begin() + b, samples.begin() + e);
        return out;
    }
};

struct BeatEvent {
    double time = 0.0;  // seconds
    int position = 0;   // metrical position, 1 = downbeat, 0 = unset

    friend bool operator==(const BeatEvent&, const BeatEvent&) = default;
};

struct BeatList {
    std::vector<BeatEvent> events;
    std::optional<int> beats_per_bar;

    std::size_t size() const { return events.size(); }
    bool empty() const { return events.empty(); }

    std::vector<double> times() const {
        std::vector<double> t;
        t.reserve(events.size());
        for (const auto& e : events) t.push_back(e.time);
        return t;
    }

    // Events with metrical position 1.
    BeatList downbeats() const {
        BeatList out;
        out.beats_per_bar = beats_per_bar;
        for (const auto& e : events)
            if (e.position == 1) out.events.push_back(e);
        return out;
    }

    bool has_positions() const {
        return !events.empty() &&
               std::all_of(events.begin(), events.end(), [](const BeatEvent& e) { return e.position > 0; });
    }

    // Events in [begin_s, end_s), shifted so that begin_s becomes 0.
    BeatList window(double begin_s, double end_s) const {
        BeatList out;
        out.beats_per_bar = beats_per_bar;
        for (const auto& e : events)
            if (e.time >= begin_s && e.time < end_s) out.events.push_back({e.time - begin_s, e.position});
        return out;
    }

    BeatList shifted(double offset_s) const {
        BeatList out = *this;
        for (auto& e : out.events) e.time += offset_s;
        return out;
    }

    void validate() const {
        for (std::size_t i = 1; i < events.size(); ++i)
            if (!(events[i].time > events[i - 1].time))
                throw Error("invalid_beats", "beat times must be strictly increasing");
        for (const auto& e : events)
            if (e.position < 0) throw Error("invalid_beats", "negative metrical position");
    }

    friend bool operator==(const BeatList&, const BeatList&) = default;
};

// Per-frame beat and downbeat likelihoods of a neural front end.
struct ActivationPair {
    std::vector<double> beat;
    std::vector<double> downbeat;
    double frame_rate = 0.0;

    std::size_t size() const { return beat.size(); }

    void validate() const {
        if (beat.size() != downbeat.size()) throw Error("shape", "beat and downbeat activations differ in length");
        if (!(frame_rate > 0.0)) throw Error("invalid_argument", "activation frame rate must be positive");
        for (std::size_t i = 0; i < beat.size(); ++i)
            if (!std::isfinite(beat[i]) || !std::isfinite(downbeat[i]))
                throw Error("invalid_activation", "non-finite activation at frame " + std::to_string(i));
    }
};

struct TempoRange {
    double min_bpm = 55.0;
    double max_bpm = 215.0;

    void validate() const {
        if (!(min_bpm > 0.0 && min_bpm < max_bpm))
            throw Error("invalid_tempo_range", "tempo range requires 0 < min_bpm < max_bpm");
    }

    static TempoRange candombe_like() { return {100.0, 170.0}; }
    static TempoRange samba_like() { return {60.0, 140.0}; }
    static TempoRange generic() { return {55.0, 215.0}; }
};

}  // namespace meter
