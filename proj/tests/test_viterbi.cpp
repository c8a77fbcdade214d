#include <gtest/gtest.h>

#include <random>

#include "meter/viterbi.hpp"
#include "viterbi_oracle.hpp"

using namespace meter;
using namespace meter::testing;

TEST(Viterbi, SingleFrameIsArgmaxOfInitialPlusObservation) {
    Matrix<double> obs(1, 3);
    obs(0, 0) = std::log(0.2);
    obs(0, 1) = std::log(0.5);
    obs(0, 2) = std::log(0.3);
    const std::vector<double> init{std::log(0.7), std::log(0.1), std::log(0.2)};
    const auto tm = TransitionModel::from_dense(Matrix<double>(3, 3, 1.0 / 3.0));
    const auto path = viterbi(tm, obs, init);
    ASSERT_EQ(path.states.size(), 1u);
    EXPECT_EQ(path.states[0], 0u);  // 0.14 beats 0.05 and 0.06
    EXPECT_DOUBLE_EQ(path.log_prob, init[0] + obs(0, 0));
}

TEST(Viterbi, TwoStateThreeFrameMatchesEnumeration) {
    Hmm h;
    h.states = 2;
    h.frames = 3;
    h.log_init = {std::log(0.6), std::log(0.4)};
    h.log_trans = Matrix<double>(2, 2);
    h.log_trans(0, 0) = std::log(0.7);
    h.log_trans(0, 1) = std::log(0.3);
    h.log_trans(1, 0) = std::log(0.4);
    h.log_trans(1, 1) = std::log(0.6);
    h.log_obs = Matrix<double>(3, 2);
    const double o[3][2] = {{0.5, 0.1}, {0.4, 0.3}, {0.1, 0.6}};
    for (int t = 0; t < 3; ++t)
        for (int s = 0; s < 2; ++s) h.log_obs(t, s) = std::log(o[t][s]);
    const auto [best, best_path] = brute_force(h);
    const auto path = viterbi(transitions_of(h), h.log_obs, h.log_init);
    EXPECT_EQ(path.log_prob, best);
    EXPECT_EQ(path.states, best_path);
}

TEST(Viterbi, RandomInstancesMatchEnumeration) {
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 100; ++trial) {
        const auto h = random_hmm(rng, 4, 6, trial % 2 == 1);
        const auto [best, best_path] = brute_force(h);
        const auto path = viterbi(transitions_of(h), h.log_obs, h.log_init);
        ASSERT_EQ(path.log_prob, best) << "trial " << trial;
        ASSERT_EQ(path.states, best_path) << "trial " << trial;
    }
}

TEST(Viterbi, SmallInstancesExhaustiveProperty) {
    std::mt19937_64 rng(99);
    for (std::size_t states = 1; states <= 5; ++states)
        for (std::size_t frames = 1; frames <= 8; ++frames) {
            const auto h = random_hmm(rng, states, frames, (states + frames) % 2 == 0);
            const auto [best, best_path] = brute_force(h);
            const auto path = viterbi(transitions_of(h), h.log_obs, h.log_init);
            ASSERT_EQ(path.log_prob, best) << states << "x" << frames;
            ASSERT_EQ(path.states, best_path) << states << "x" << frames;
        }
}

TEST(Viterbi, TiesGoToLowerStateIndex) {
    const auto tm = TransitionModel::from_dense(Matrix<double>(3, 3, 1.0 / 3.0));
    const auto path = viterbi(tm, Matrix<double>(4, 3, 0.0));
    for (auto s : path.states) EXPECT_EQ(s, 0u);
}

TEST(Viterbi, ImpossibleObservationIsAnError) {
    const auto tm = TransitionModel::from_dense(Matrix<double>(2, 2, 0.5));
    Matrix<double> obs(3, 2, 0.0);
    obs(1, 0) = obs(1, 1) = -std::numeric_limits<double>::infinity();
    try {
        viterbi(tm, obs);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), "impossible_observation");
    }
}

TEST(TransitionModel, OutgoingMassFromEdges) {
    const auto tm = TransitionModel::from_edges(3, {{0, 1, 0.25}, {0, 2, 0.75}, {1, 1, 1.0}, {2, 0, 0.5}, {2, 0, 0.5}});
    const auto mass = tm.outgoing_mass();
    for (double m : mass) EXPECT_NEAR(m, 1.0, 1e-12);
    EXPECT_EQ(tm.max_in_degree(), 2u);
}
