#include <gtest/gtest.h>

#include "meter/profile.hpp"
#include "meter/synth.hpp"

using namespace meter;
using namespace meter::profile;

namespace {

constexpr double fps = 100.0;

BeatList steady(double first, double interval, int n, int bpb) {
    BeatList b;
    b.beats_per_bar = bpb;
    for (int i = 0; i < n; ++i) b.events.push_back({first + interval * i, i % bpb + 1});
    return b;
}

// Two-band envelope with value 1 at the frames of the given times in `band`.
features::OnsetEnvelope impulses(std::size_t frames, const std::vector<double>& times, std::size_t band) {
    features::OnsetEnvelope env;
    env.frame_rate = fps;
    env.values = Matrix<double>(frames, 2, 0.0);
    env.band_edges = {{20.0, 200.0}, {200.0, 11025.0}};
    for (double t : times) env.values(static_cast<std::size_t>(std::lround(t * fps)), band) = 1.0;
    return env;
}

}  // namespace

TEST(TatumStats, ConstantSamples) {
    const auto s = tatum_stats({0.3, 0.3, 0.3});
    EXPECT_DOUBLE_EQ(s.median, 0.3);
    EXPECT_DOUBLE_EQ(s.q1, 0.3);
    EXPECT_DOUBLE_EQ(s.variance, 0.0);
    EXPECT_TRUE(s.anchor);
}

TEST(TatumStats, HandComputedQuartilesAndVariance) {
    const auto s = tatum_stats({1.0, 0.0, 1.0, 0.0});
    EXPECT_DOUBLE_EQ(s.median, 0.5);
    EXPECT_DOUBLE_EQ(s.variance, 0.25);
    EXPECT_DOUBLE_EQ(s.q1, 0.0);
    EXPECT_DOUBLE_EQ(s.q3, 1.0);
    EXPECT_FALSE(s.anchor);
    EXPECT_DOUBLE_EQ(quantile({4.0, 1.0, 3.0, 2.0, 5.0}, 0.25), 2.0);
    EXPECT_THROW(quantile({}, 0.5), Error);
}

TEST(Profile, FourFourHasSixteenTatums) {
    const auto ann = steady(0.2, 0.5, 13, 4);
    const auto p = compute_profile({{impulses(700, ann.times(), 0), ann}}, 4);
    EXPECT_EQ(p.n_tatums(), 16);
    ASSERT_EQ(p.samples.size(), 2u);
    EXPECT_EQ(p.samples[0].size(), 16u);
    EXPECT_EQ(p.bars, 3u);
}

TEST(Profile, AccentOnSecondBeatOfTwoFour) {
    const auto ann = steady(0.3, 0.6, 21, 2);
    std::vector<double> accents;
    for (const auto& e : ann.events)
        if (e.position == 2) accents.push_back(e.time);
    const auto p = compute_profile({{impulses(1400, accents, 0), ann}}, 2);
    const auto st = profile_stats(p);
    EXPECT_EQ(strongest_tatum(st[0]), 5);
    for (int j = 0; j < 8; ++j) EXPECT_DOUBLE_EQ(st[0][j].median, j == 4 ? 1.0 : 0.0) << j;
    for (int j = 0; j < 8; ++j) EXPECT_DOUBLE_EQ(st[1][j].median, 0.0);
}

TEST(Profile, FrameJustBeforeTatumBelongsToIt) {
    // Onset peaks one frame early still land in their own tatum.
    const auto ann = steady(0.5, 0.5, 9, 4);
    std::vector<double> early;
    for (double t : ann.times()) early.push_back(t - 0.01);
    const auto st = profile_stats(compute_profile({{impulses(600, early, 1), ann}}, 4));
    for (int j = 0; j < 16; ++j) EXPECT_DOUBLE_EQ(st[1][j].median, j % 4 == 0 ? 1.0 : 0.0) << j;
}

TEST(Profile, PoolingDuplicatesAndOrder) {
    const auto a_ann = steady(0.1, 0.55, 11, 2), b_ann = steady(0.4, 0.48, 12, 2);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    auto noise = [&](const BeatList& ann) {
        auto env = impulses(700, {}, 0);
        for (auto& v : env.values.data) v = u(rng);
        return std::pair{env, ann};
    };
    const auto a = noise(a_ann), b = noise(b_ann);
    const auto once = compute_profile({a, b}, 2), twice = compute_profile({a, b, a, b}, 2),
               swapped = compute_profile({b, a}, 2);
    const auto s1 = profile_stats(once), s2 = profile_stats(twice), s3 = profile_stats(swapped);
    for (std::size_t band = 0; band < 2; ++band)
        for (std::size_t j = 0; j < 8; ++j) {
            EXPECT_EQ(s2[band][j].n, 2 * s1[band][j].n);
            EXPECT_DOUBLE_EQ(s2[band][j].median, s1[band][j].median);
            EXPECT_DOUBLE_EQ(s3[band][j].median, s1[band][j].median);
            EXPECT_DOUBLE_EQ(s3[band][j].variance, s1[band][j].variance);
            EXPECT_GE(s1[band][j].q1, 0.0);
            EXPECT_LE(s1[band][j].q3, 1.0);
            EXPECT_LE(s1[band][j].variance, 0.25);
        }
}

TEST(Profile, ExcerptsWithoutBarsAreSkipped) {
    const auto ann = steady(0.2, 0.5, 9, 4);
    BeatList beats_only;
    beats_only.events = {{0.5, 0}, {1.0, 0}};
    const auto p = compute_profile({{impulses(500, {}, 0), beats_only}, {impulses(500, {}, 0), ann}}, 4);
    EXPECT_EQ(p.skipped_excerpts, 1u);
    EXPECT_EQ(p.bars, 2u);
    EXPECT_THROW(compute_profile({{impulses(500, {}, 0), beats_only}}, 4), Error);
}

TEST(Profile, CsvHasOneRowPerBandAndTatum) {
    const auto ann = steady(0.2, 0.5, 9, 4);
    const auto p = compute_profile({{impulses(500, ann.times(), 0), ann}}, 4);
    const auto csv = stats_csv(profile_stats(p));
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 2 * 16);
    EXPECT_EQ(csv.rfind("band,tatum,median,q1,q3,variance,n", 0), 0u);
    EXPECT_NE(csv.find("\nlow,1,1.000000,"), std::string::npos);
    const auto raw = raw_csv(p);
    EXPECT_EQ(std::count(raw.begin(), raw.end(), '\n'), 1 + 2 * 16 * 2);
}

TEST(ProfileClosedLoop, SynthSuitesShowTheirDesignedAccents) {
    const synth::SuiteOptions opt;
    auto suite_profile = [&](synth::Suite s) {
        std::vector<std::pair<features::OnsetEnvelope, BeatList>> ex;
        for (int i = 0; i < 4; ++i) {
            const auto rec = synth::generate(synth::suite_spec(s, i, opt), opt.sample_rate);
            ex.emplace_back(profile_envelope(rec.audio), rec.beats);
        }
        return profile_stats(compute_profile(ex, synth::suite_meter(s)));
    };
    EXPECT_EQ(strongest_tatum(suite_profile(synth::Suite::samba_like)[0]), 5);
    const auto candombe = suite_profile(synth::Suite::candombe_like);
    int anchors = 0;
    for (const auto& band : candombe)
        for (const auto& s : band) anchors += s.anchor;
    EXPECT_GE(anchors, 8);
}
