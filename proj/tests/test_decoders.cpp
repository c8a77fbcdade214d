#include <gtest/gtest.h>

#include <random>

#include "meter/decoders.hpp"

using namespace meter;
using namespace meter::decode;

namespace {

constexpr double fps = 100.0;

// Activation spikes every `period` frames starting at `first`, with a small
// floor elsewhere; every `bar`-th spike also fires the downbeat channel.
ActivationPair spikes(std::size_t frames, double period, double first, int bar = 0, double floor = 0.02) {
    ActivationPair a;
    a.frame_rate = fps;
    a.beat.assign(frames, floor);
    a.downbeat.assign(frames, floor);
    int k = 0;
    for (double t = first; t < static_cast<double>(frames); t += period, ++k) {
        const auto f = static_cast<std::size_t>(std::lround(t));
        if (f >= frames) break;
        a.beat[f] = 0.95;
        if (bar > 0 && k % bar == 0) a.downbeat[f] = 0.9;
    }
    return a;
}

features::OnsetEnvelope clicks(std::size_t frames, double period, double first) {
    features::OnsetEnvelope env;
    env.frame_rate = fps;
    env.values = Matrix<double>(frames, 1, 0.0);
    env.band_edges = {{0.0, 11025.0}};
    for (double t = first; t < static_cast<double>(frames); t += period) {
        const auto f = static_cast<std::size_t>(std::lround(t));
        if (f < frames) env.values(f, 0) = 1.0;
    }
    return env;
}

void expect_valid(const BeatList& b, double duration) {
    for (std::size_t i = 0; i < b.size(); ++i) {
        EXPECT_GE(b.events[i].time, 0.0);
        EXPECT_LE(b.events[i].time, duration);
        if (i > 0) {
            EXPECT_GT(b.events[i].time, b.events[i - 1].time);
        }
    }
}

}  // namespace

TEST(BeatIntervals, CoverTheRangeInWholeFrames) {
    const auto d = beat_intervals({60.0, 180.0}, fps, 1000);
    EXPECT_EQ(d.front(), 34);  // 100 * 60 / 180 = 33.3 -> 34
    EXPECT_EQ(d.back(), 100);
    const auto thin = beat_intervals({55.0, 215.0}, fps, 20);
    EXPECT_LE(thin.size(), 20u);
    EXPECT_TRUE(std::is_sorted(thin.begin(), thin.end()));
}

TEST(DbnBeat, PeriodicSpikesAt120Bpm) {
    const auto a = spikes(3000, 50.0, 37.0);
    const auto beats = dbn_beat_decode(a.beat, fps, {60.0, 180.0});
    expect_valid(beats, 30.0);
    ASSERT_GT(beats.size(), 50u);
    for (std::size_t i = 1; i < beats.size(); ++i)
        EXPECT_NEAR(beats.events[i].time - beats.events[i - 1].time, 0.5, 0.01 + 1e-9);
}

TEST(DbnBeat, UniformActivationIsDeterministicAndInRange) {
    const std::vector<double> flat(2000, 0.5);
    const TempoRange range{60.0, 180.0};
    const auto a = dbn_beat_decode(flat, fps, range), b = dbn_beat_decode(flat, fps, range);
    EXPECT_EQ(a, b);
    ASSERT_GT(a.size(), 2u);
    for (std::size_t i = 1; i < a.size(); ++i) {
        const double bpm = 60.0 / (a.events[i].time - a.events[i - 1].time);
        EXPECT_GE(bpm, 60.0 - 1e-6);
        EXPECT_LE(bpm, 180.0 + 1e-6);
    }
}

TEST(DbnBeat, FastSpikesFallBackToSubharmonic) {
    const auto a = spikes(3000, 25.0, 10.0);  // 240 BPM
    const auto beats = dbn_beat_decode(a.beat, fps, {60.0, 150.0});
    ASSERT_GT(beats.size(), 10u);
    std::vector<double> ibi;
    for (std::size_t i = 1; i < beats.size(); ++i) ibi.push_back(beats.events[i].time - beats.events[i - 1].time);
    std::sort(ibi.begin(), ibi.end());
    const double bpm = 60.0 / ibi[ibi.size() / 2];
    EXPECT_GE(bpm, 60.0);
    EXPECT_LE(bpm, 150.0);
    EXPECT_NEAR(bpm, 120.0, 3.0);
}

TEST(DbnBeat, ClippedActivationsDecodeIdentically) {
    auto a = spikes(2000, 45.0, 20.0, 0, 0.0);
    auto b = a;
    for (auto& v : b.beat) v = std::clamp(v, 1e-5, 1.0 - 1e-5);
    for (auto& v : a.beat)
        if (v == 0.0) v = 1e-9;
    EXPECT_EQ(dbn_beat_decode(a.beat, fps, {60.0, 180.0}), dbn_beat_decode(b.beat, fps, {60.0, 180.0}));
}

TEST(DbnBeat, EmptyActivationIsAnError) {
    EXPECT_THROW(dbn_beat_decode(std::vector<double>{}, fps, {60.0, 180.0}), Error);
}

TEST(DbnDownbeat, TwoFourPattern) {
    const auto a = spikes(3000, 55.0, 30.0, 2);
    const auto beats = dbn_downbeat_decode(a, {2}, {60.0, 180.0});
    expect_valid(beats, 30.0);
    ASSERT_GT(beats.size(), 40u);
    for (const auto& e : beats.events) {
        const auto f = static_cast<std::size_t>(std::lround(e.time * fps));
        const bool true_downbeat = a.downbeat[f] > 0.5;
        EXPECT_EQ(e.position == 1, true_downbeat) << e.time;
    }
}

TEST(DbnDownbeat, SelectsFourFourForFourFourInput) {
    const auto a = spikes(3000, 50.0, 20.0, 4);
    const auto beats = dbn_downbeat_decode(a, {2, 4}, {60.0, 180.0});
    ASSERT_TRUE(beats.beats_per_bar.has_value());
    EXPECT_EQ(*beats.beats_per_bar, 4);
    const auto b2 = dbn_downbeat_decode(spikes(3000, 50.0, 20.0, 2), {2, 4}, {60.0, 180.0});
    EXPECT_EQ(*b2.beats_per_bar, 2);
}

TEST(DbnDownbeat, ZeroDownbeatActivationStaysCyclic) {
    auto a = spikes(2500, 50.0, 20.0);
    std::fill(a.downbeat.begin(), a.downbeat.end(), 0.0);
    const auto x = dbn_downbeat_decode(a, {3}, {60.0, 180.0});
    EXPECT_EQ(x, dbn_downbeat_decode(a, {3}, {60.0, 180.0}));
    ASSERT_GT(x.size(), 6u);
    for (std::size_t i = 1; i < x.size(); ++i) EXPECT_EQ(x.events[i].position, x.events[i - 1].position % 3 + 1);
}

TEST(DbnDownbeat, EmptyOptionsIsAnError) {
    EXPECT_THROW(dbn_downbeat_decode(spikes(500, 50.0, 10.0), {}, {60.0, 180.0}), Error);
}

TEST(Ellis, MetronomeAt100Bpm) {
    const auto env = clicks(2000, 60.0, 33.0);
    const auto r = ellis_track(env, TempoRange::generic());
    EXPECT_NEAR(r.tempo_bpm, 100.0, 2.0);
    expect_valid(r.beats, env.duration());
    ASSERT_GT(r.beats.size(), 25u);
    for (const auto& e : r.beats.events) {
        const double k = std::round((e.time * fps - 33.0) / 60.0);
        EXPECT_NEAR(e.time, (33.0 + 60.0 * k) / fps, 0.02 + 1e-9);
    }
}

TEST(Ellis, ConstantEnvelopePicksSlowestTempo) {
    features::OnsetEnvelope env;
    env.frame_rate = fps;
    env.values = Matrix<double>(1000, 2, 0.4);
    const TempoRange range{60.0, 180.0};
    EXPECT_NEAR(ellis_track(env, range).tempo_bpm, 60.0, 1e-9);
}

TEST(Ellis, ShiftEquivariance) {
    const auto env = clicks(2000, 55.0, 20.0);
    const auto shifted = clicks(2010, 55.0, 30.0);
    const auto a = ellis_track(env, TempoRange::generic()).beats;
    const auto b = ellis_track(shifted, TempoRange::generic()).beats;
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(b.events[i].time - a.events[i].time, 0.1, 0.01 + 1e-9);
}

TEST(Ellis, ShortInputIsAnError) { EXPECT_THROW(ellis_track(clicks(150, 50.0, 0.0), TempoRange::generic()), Error); }
