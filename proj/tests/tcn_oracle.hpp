#pragma once

// Central-difference gradient oracle for the TCN, shared by the unit and
// acceptance tests.

#include <algorithm>
#include <cmath>
#include <random>

#include "meter/tcn.hpp"

namespace meter::testing {

struct ToyProblem {
    tcn::TcnWeights<double> weights;
    Matrix<double> features;
    tcn::Targets targets;
};

// Random small network, input and targets drawn from `seed`.
inline ToyProblem random_toy(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> inputs(1, 4), channels(2, 4), layers(1, 3), frames(20, 48);
    tcn::TcnConfig c;
    c.n_inputs = inputs(rng);
    c.base_channels = channels(rng);
    c.n_layers = layers(rng);
    c.kernel_size = rng() % 2 ? 3 : 5;
    c.dilations.clear();
    for (int l = 0; l < c.n_layers; ++l) c.dilations.push_back(1 << l);
    c.seed = seed;
    ToyProblem p{tcn::init_weights<double>(c), {}, {}};
    std::normal_distribution<double> n(0.0, 1.0);
    for (auto& v : p.weights.params) v += 0.1 * n(rng);  // non-zero biases too
    const auto T = static_cast<std::size_t>(frames(rng));
    p.features = Matrix<double>(T, c.n_inputs);
    for (auto& v : p.features.data) v = n(rng);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    p.targets.beat.resize(T);
    p.targets.downbeat.resize(T);
    p.targets.beat_mask.resize(T);
    p.targets.downbeat_mask.resize(T);
    for (std::size_t t = 0; t < T; ++t) {
        p.targets.beat[t] = u(rng) < 0.2 ? 1.0 : 0.0;
        p.targets.downbeat[t] = u(rng) < 0.1 ? 1.0 : 0.0;
        p.targets.beat_mask[t] = u(rng) < 0.2 ? 0.5 : 1.0;
        p.targets.downbeat_mask[t] = u(rng) < 0.2 ? 0.5 : 1.0;
    }
    return p;
}

// Largest relative error between the analytic gradient and central
// differences with step eps. Near-zero pairs are compared on an absolute
// scale of `floor`.
inline double max_gradient_error(const ToyProblem& p, double eps = 1e-5, double floor = 1e-6) {
    const auto analytic = tcn::gradients(p.weights, p.features, p.targets);
    auto w = p.weights;
    double worst = 0.0;
    for (std::size_t i = 0; i < w.params.size(); ++i) {
        const double saved = w.params[i];
        w.params[i] = saved + eps;
        const double up = tcn::evaluate_loss(w, p.features, p.targets);
        w.params[i] = saved - eps;
        const double down = tcn::evaluate_loss(w, p.features, p.targets);
        w.params[i] = saved;
        const double numeric = (up - down) / (2.0 * eps);
        const double err = std::abs(analytic[i] - numeric) / std::max({std::abs(analytic[i]), std::abs(numeric), floor});
        worst = std::max(worst, err);
    }
    return worst;
}

}  // namespace meter::testing
