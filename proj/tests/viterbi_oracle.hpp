#pragma once

// Exhaustive-enumeration oracle for small dense HMMs.

#include <limits>
#include <random>

#include "meter/viterbi.hpp"

namespace meter::testing {

struct Hmm {
    std::size_t states = 0, frames = 0;
    std::vector<double> log_init;
    Matrix<double> log_trans;  // from x to
    Matrix<double> log_obs;    // frames x states
};

// Exhaustive oracle: accumulates each path in the same order as the
// recursion, ((init + obs0) + trans) + obs1 ..., and keeps the first maximum.
inline std::pair<double, std::vector<std::uint32_t>> brute_force(const Hmm& h) {
    std::vector<std::uint32_t> path(h.frames, 0), best_path;
    double best = -std::numeric_limits<double>::infinity();
    std::size_t total = 1;
    for (std::size_t t = 0; t < h.frames; ++t) total *= h.states;
    for (std::size_t code = 0; code < total; ++code) {
        std::size_t c = code;
        for (std::size_t t = h.frames; t-- > 0;) {
            path[t] = static_cast<std::uint32_t>(c % h.states);
            c /= h.states;
        }
        double s = h.log_init[path[0]] + h.log_obs(0, path[0]);
        for (std::size_t t = 1; t < h.frames; ++t) s = s + h.log_trans(path[t - 1], path[t]) + h.log_obs(t, path[t]);
        if (s > best) {
            best = s;
            best_path = path;
        }
    }
    return {best, best_path};
}

inline Hmm random_hmm(std::mt19937_64& rng, std::size_t states, std::size_t frames, bool sparse) {
    std::uniform_real_distribution<double> u(0.05, 1.0);
    Hmm h;
    h.states = states;
    h.frames = frames;
    h.log_init.resize(states);
    double z = 0.0;
    std::vector<double> init(states);
    for (auto& x : init) z += (x = u(rng));
    for (std::size_t s = 0; s < states; ++s) h.log_init[s] = std::log(init[s] / z);
    Matrix<double> probs(states, states, 0.0);
    for (std::size_t i = 0; i < states; ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < states; ++j) {
            const bool keep = !sparse || j == i || std::bernoulli_distribution(0.6)(rng);
            probs(i, j) = keep ? u(rng) : 0.0;
            row += probs(i, j);
        }
        for (std::size_t j = 0; j < states; ++j) probs(i, j) /= row;
    }
    h.log_trans = Matrix<double>(states, states);
    for (std::size_t i = 0; i < states; ++i)
        for (std::size_t j = 0; j < states; ++j) h.log_trans(i, j) = std::log(probs(i, j));
    h.log_obs = Matrix<double>(frames, states);
    for (auto& x : h.log_obs.data) x = std::log(u(rng));
    return h;
}

inline TransitionModel transitions_of(const Hmm& h) {
    Matrix<double> probs(h.states, h.states);
    for (std::size_t i = 0; i < h.states; ++i)
        for (std::size_t j = 0; j < h.states; ++j) probs(i, j) = std::exp(h.log_trans(i, j));
    auto tm = TransitionModel::from_dense(probs);
    // Keep the exact log values so that sums match the oracle bit for bit.
    for (std::size_t j = 0; j < h.states; ++j)
        for (auto e = tm.offsets[j]; e < tm.offsets[j + 1]; ++e) tm.log_probs[e] = h.log_trans(tm.sources[e], j);
    return tm;
}

}  // namespace meter::testing
