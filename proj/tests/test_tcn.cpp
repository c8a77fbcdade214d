#include <gtest/gtest.h>

#include <random>

#include "meter/tcn.hpp"
#include "tcn_oracle.hpp"

using namespace meter;
using namespace meter::tcn;

namespace {

TcnConfig small_config(std::uint64_t seed = 1) {
    TcnConfig c;
    c.n_inputs = 6;
    c.n_layers = 3;
    c.base_channels = 5;
    c.kernel_size = 3;
    c.dilations = {1, 2, 4};
    c.seed = seed;
    return c;
}

Matrix<double> random_features(std::size_t frames, int bands, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    Matrix<double> f(frames, bands);
    for (auto& v : f.data) v = n(rng);
    return f;
}

Targets uniform_targets(std::size_t n, double beat, double downbeat) {
    Targets t;
    t.beat.assign(n, beat);
    t.downbeat.assign(n, downbeat);
    t.beat_mask.assign(n, 1.0);
    t.downbeat_mask.assign(n, 1.0);
    return t;
}

}  // namespace

TEST(TcnConfig, Validation) {
    EXPECT_NO_THROW(TcnConfig{}.validate());
    auto c = small_config();
    c.kernel_size = 4;
    EXPECT_THROW(c.validate(), Error);
    c = small_config();
    c.dilations = {1, 4, 2};
    EXPECT_THROW(c.validate(), Error);
    c = small_config();
    c.dropout_rate = 1.0;
    EXPECT_THROW(c.validate(), Error);
    EXPECT_EQ(TcnConfig{}.receptive_field(), 2 * 255);
}

TEST(TcnInit, SameSeedIdenticalOtherSeedDiffers) {
    const auto a = init_weights(small_config(3)), b = init_weights(small_config(3)), c = init_weights(small_config(4));
    EXPECT_EQ(a.params, b.params);
    EXPECT_NE(a.params, c.params);
}

TEST(TcnInit, KernelMeanWithinThreeSigma) {
    const TcnConfig c;
    const auto w = init_weights<double>(c);
    const Layout lay(c);
    for (int l = 0; l < c.n_layers; ++l) {
        const std::size_t n = lay.bias[l] - lay.weight[l];
        const double fan_in = static_cast<double>(n) / c.base_channels;
        const double sigma = std::sqrt(2.0 / fan_in);
        double mean = 0.0;
        for (std::size_t i = lay.weight[l]; i < lay.bias[l]; ++i) mean += w.params[i] / n;
        EXPECT_LT(std::abs(mean), 3.0 * sigma / std::sqrt(static_cast<double>(n))) << "layer " << l;
    }
}

TEST(TcnForward, ZeroWeightsGiveOneHalf) {
    auto w = init_weights<double>(small_config());
    std::fill(w.params.begin(), w.params.end(), 0.0);
    const auto a = forward(w, random_features(40, 6, 1), 100.0);
    for (std::size_t t = 0; t < a.size(); ++t) {
        EXPECT_DOUBLE_EQ(a.beat[t], 0.5);
        EXPECT_DOUBLE_EQ(a.downbeat[t], 0.5);
    }
}

TEST(TcnForward, OutputLengthMatchesInput) {
    const auto w = init_weights(small_config());
    std::mt19937_64 rng(9);
    std::uniform_int_distribution<int> len(50, 500);
    for (int i = 0; i < 10; ++i) {
        const auto n = static_cast<std::size_t>(len(rng));
        const auto a = forward(w, random_features(n, 6, i), 100.0);
        EXPECT_EQ(a.beat.size(), n);
        EXPECT_EQ(a.downbeat.size(), n);
        for (double v : a.beat) {
            EXPECT_GT(v, 0.0);
            EXPECT_LT(v, 1.0);
        }
    }
}

TEST(TcnForward, BandMismatchIsAShapeError) {
    const auto w = init_weights(small_config());
    try {
        forward(w, random_features(30, 5, 1), 100.0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), "shape");
    }
}

TEST(TcnForward, PerturbationStaysInsideReceptiveField) {
    const auto c = small_config();
    const auto w = init_weights<double>(c);
    const int R = c.receptive_field();  // 1 + 2 + 4
    ASSERT_EQ(R, 7);
    const auto x = random_features(80, 6, 2);
    auto y = x;
    const std::size_t probe = 40;
    for (int b = 0; b < 6; ++b) y(probe, b) += 1.0;
    const auto fx = forward_cache(w, x), fy = forward_cache(w, y);
    for (std::size_t t = 0; t < 80; ++t) {
        const bool inside = std::abs(static_cast<long>(t) - static_cast<long>(probe)) <= R;
        const bool changed = fx.logits[0][t] != fy.logits[0][t] || fx.logits[1][t] != fy.logits[1][t];
        if (!inside) {
            EXPECT_FALSE(changed) << t;
        }
    }
    EXPECT_NE(fx.logits[0][probe + R], fy.logits[0][probe + R]);
    EXPECT_NE(fx.logits[0][probe - R], fy.logits[0][probe - R]);
}

TEST(TcnForward, TranslationConsistentInTheInterior) {
    const auto c = small_config();
    const auto w = init_weights<double>(c);
    const int R = c.receptive_field();
    const auto x = random_features(120, 6, 5);
    const std::size_t s = 9;
    Matrix<double> shifted(120, 6);
    for (std::size_t t = 0; t + s < 120; ++t)
        for (int b = 0; b < 6; ++b) shifted(t + s, b) = x(t, b);
    const auto a = forward_cache(w, x), b = forward_cache(w, shifted);
    for (std::size_t t = R; t + s + R < 120; ++t) EXPECT_NEAR(b.logits[0][t + s], a.logits[0][t], 1e-12);
}

TEST(TcnForward, DropoutOnlyWithRng) {
    auto c = small_config();
    c.dropout_rate = 0.5;
    const auto w = init_weights<double>(c);
    const auto x = random_features(60, 6, 3);
    EXPECT_EQ(forward(w, x, 100.0).beat, forward(w, x, 100.0).beat);
    std::mt19937_64 r1(1), r2(1);
    const auto d1 = forward(w, x, 100.0, &r1), d2 = forward(w, x, 100.0, &r2);
    EXPECT_EQ(d1.beat, d2.beat);
    EXPECT_NE(d1.beat, forward(w, x, 100.0).beat);
}

TEST(TcnLoss, OneHalfGivesLn2PerHead) {
    ActivationPair a{std::vector<double>(50, 0.5), std::vector<double>(50, 0.5), 100.0};
    std::mt19937_64 rng(2);
    auto t = uniform_targets(50, 0.0, 0.0);
    for (std::size_t i = 0; i < 50; ++i) {
        t.beat[i] = rng() % 2;
        t.downbeat[i] = rng() % 2;
    }
    EXPECT_NEAR(loss(a, t), 2.0 * std::log(2.0), 1e-12);
}

TEST(TcnLoss, PerfectActivationsAreBoundedByEpsilon) {
    auto t = uniform_targets(20, 0.0, 0.0);
    for (std::size_t i = 0; i < 20; i += 3) t.beat[i] = t.downbeat[i] = 1.0;
    ActivationPair a{t.beat, t.downbeat, 100.0};
    EXPECT_LE(loss(a, t), 2.0 * -std::log(1.0 - activation_eps) + 1e-15);
}

TEST(TcnLoss, MaskScaleInvariance) {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0.01, 0.99);
    ActivationPair a;
    a.frame_rate = 100.0;
    auto t = uniform_targets(30, 0.0, 0.0);
    for (std::size_t i = 0; i < 30; ++i) {
        a.beat.push_back(u(rng));
        a.downbeat.push_back(u(rng));
        t.beat[i] = u(rng) > 0.7;
        t.beat_mask[i] = u(rng);
        t.downbeat_mask[i] = u(rng);
    }
    auto t2 = t;
    for (auto& m : t2.beat_mask) m *= 2.0;
    for (auto& m : t2.downbeat_mask) m *= 2.0;
    EXPECT_NEAR(loss(a, t), loss(a, t2), 1e-12);
}

TEST(TcnLoss, LengthMismatchIsAnError) {
    ActivationPair a{std::vector<double>(10, 0.5), std::vector<double>(10, 0.5), 100.0};
    EXPECT_THROW(loss(a, uniform_targets(11, 0.0, 0.0)), Error);
}

TEST(TcnLoss, LogitLossAgreesWithActivationLoss) {
    const auto w = init_weights<double>(small_config());
    const auto x = random_features(40, 6, 4);
    auto t = uniform_targets(40, 0.0, 0.0);
    for (std::size_t i = 0; i < 40; i += 7) t.beat[i] = 1.0;
    const auto fc = forward_cache(w, x);
    EXPECT_NEAR(loss_from_logits(fc, t), loss(activations_from(fc, 100.0), t), 1e-9);
}

TEST(TcnGradients, MatchCentralDifferences) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto p = meter::testing::random_toy(seed);
        EXPECT_LT(meter::testing::max_gradient_error(p), 1e-4) << "seed " << seed;
    }
}

TEST(TcnGradients, HeadsAreStationaryWhenTargetsEqualActivations) {
    const auto w = init_weights<double>(small_config());
    const auto x = random_features(50, 6, 6);
    const auto a = forward(w, x, 100.0);
    auto t = uniform_targets(50, 0.0, 0.0);
    t.beat = a.beat;
    t.downbeat = a.downbeat;
    const auto g = gradients(w, x, t);
    for (double v : g) EXPECT_NEAR(v, 0.0, 1e-6);
}

TEST(TcnGradients, MaskedHeadHasZeroGradient) {
    const auto c = small_config();
    const auto w = init_weights<double>(c);
    const auto x = random_features(50, 6, 7);
    auto t = uniform_targets(50, 0.0, 1.0);
    for (std::size_t i = 0; i < 50; i += 5) t.beat[i] = 1.0;
    std::fill(t.downbeat_mask.begin(), t.downbeat_mask.end(), 0.0);
    const auto g = gradients(w, x, t);
    const Layout lay(c);
    for (std::size_t i = lay.head_weight[1]; i <= lay.head_bias[1]; ++i) EXPECT_EQ(g[i], 0.0);
    EXPECT_NE(g[lay.head_bias[0]], 0.0);
}

TEST(TcnAdam, ZeroGradientLeavesWeightsUnchanged) {
    auto w = init_weights<double>(small_config());
    const auto before = w.params;
    AdamState st;
    for (int i = 0; i < 3; ++i) adam_step(w, std::vector<double>(w.size(), 0.0), st, 0.01);
    EXPECT_EQ(w.params, before);
}

TEST(TcnAdam, FirstStepMovesByLearningRate) {
    auto w = init_weights<double>(small_config());
    const auto before = w.params;
    std::vector<double> g(w.size());
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = i % 2 ? 0.3 : -2.0;
    AdamState st;
    adam_step(w, g, st, 0.005);
    for (std::size_t i = 0; i < g.size(); ++i)
        EXPECT_NEAR(w.params[i] - before[i], g[i] > 0 ? -0.005 : 0.005, 1e-9);
}

TEST(TcnAdam, IdenticalRunsIdenticalTrajectories) {
    auto run = [] {
        auto w = init_weights<double>(small_config());
        const auto x = random_features(40, 6, 1);
        auto t = uniform_targets(40, 0.0, 0.0);
        for (std::size_t i = 0; i < 40; i += 6) t.beat[i] = t.downbeat[i] = 1.0;
        AdamState st;
        for (int i = 0; i < 5; ++i) adam_step(w, gradients(w, x, t), st, 0.01);
        return w.params;
    };
    EXPECT_EQ(run(), run());
}

TEST(TcnTargets, NearestFrameAndWidening) {
    BeatList ann;
    ann.events = {{1.0, 1}};
    const auto t = targets_from_annotations(ann, 100.0, 300);
    EXPECT_EQ(t.beat[100], 1.0);
    EXPECT_EQ(t.beat_mask[100], 1.0);
    for (std::size_t f : {98, 99, 101, 102}) {
        EXPECT_EQ(t.beat[f], 1.0);
        EXPECT_EQ(t.beat_mask[f], 0.5);
        EXPECT_EQ(t.downbeat_mask[f], 0.5);
    }
    EXPECT_EQ(t.beat[97], 0.0);
    EXPECT_EQ(t.beat_mask[97], 1.0);
    EXPECT_EQ(t.downbeat[100], 1.0);

    BeatList b;
    b.events = {{0.25, 0}};
    EXPECT_EQ(targets_from_annotations(b, 100.0, 100).beat[25], 1.0);
}

TEST(TcnTargets, EmptyAndPositionless) {
    const auto t = targets_from_annotations(BeatList{}, 100.0, 50);
    for (std::size_t i = 0; i < 50; ++i) {
        EXPECT_EQ(t.beat[i], 0.0);
        EXPECT_EQ(t.downbeat[i], 0.0);
        EXPECT_EQ(t.beat_mask[i], 1.0);
        EXPECT_EQ(t.downbeat_mask[i], 1.0);
    }
    BeatList beats_only;
    beats_only.events = {{0.1, 0}, {0.3, 0}};
    const auto u = targets_from_annotations(beats_only, 100.0, 50);
    for (double m : u.downbeat_mask) EXPECT_EQ(m, 0.0);
}

TEST(TcnTargets, OutOfRangeNamesTheTime) {
    BeatList ann;
    ann.events = {{0.5, 1}, {3.25, 2}};
    try {
        targets_from_annotations(ann, 100.0, 200);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), "annotation_out_of_range");
        EXPECT_NE(std::string(e.what()).find("3.250"), std::string::npos);
    }
}

TEST(TcnCheckpoint, JsonRoundTrip) {
    const auto w = init_weights<double>(small_config(12));
    const auto back = weights_from_json<double>(nlohmann::json::parse(to_json(w).dump()));
    EXPECT_EQ(back.config, w.config);
    EXPECT_EQ(back.params, w.params);
    auto j = to_json(w);
    j["layers"][0]["bias"].push_back(1.0);
    EXPECT_THROW(weights_from_json(j), Error);
}
