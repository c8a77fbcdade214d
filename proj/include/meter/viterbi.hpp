#pragma once

// Max-product decoding over sparse state spaces in the log domain.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "meter/core.hpp"
#include "meter/matrix.hpp"

namespace meter {

// Transitions stored by destination (CSR): for state j, the incoming edges are
// sources[offsets[j] .. offsets[j+1]) with log probabilities log_probs[...].
// Sources of each destination are kept in ascending order.
struct TransitionModel {
    std::size_t n_states = 0;
    std::vector<std::uint32_t> offsets{0};
    std::vector<std::uint32_t> sources;
    std::vector<double> log_probs;

    std::size_t max_in_degree() const {
        std::size_t best = 0;
        for (std::size_t j = 0; j < n_states; ++j) best = std::max<std::size_t>(best, offsets[j + 1] - offsets[j]);
        return best;
    }

    // Sum of outgoing probabilities per source state.
    std::vector<double> outgoing_mass() const {
        std::vector<double> mass(n_states, 0.0);
        for (std::size_t e = 0; e < sources.size(); ++e) mass[sources[e]] += std::exp(log_probs[e]);
        return mass;
    }

    // Builds the CSR layout from (source, destination, probability) triples.
    // Zero-probability edges are dropped; duplicate edges are summed.
    struct Edge {
        std::uint32_t from;
        std::uint32_t to;
        double prob;
    };
    static TransitionModel from_edges(std::size_t n_states, std::vector<Edge> edges) {
        std::sort(edges.begin(), edges.end(),
                  [](const Edge& a, const Edge& b) { return a.to != b.to ? a.to < b.to : a.from < b.from; });
        TransitionModel tm;
        tm.n_states = n_states;
        tm.offsets.assign(n_states + 1, 0);
        std::vector<Edge> merged;
        for (const auto& e : edges) {
            if (e.from >= n_states || e.to >= n_states) throw Error("invalid_argument", "edge state out of range");
            if (!(e.prob > 0.0)) continue;
            if (!merged.empty() && merged.back().to == e.to && merged.back().from == e.from)
                merged.back().prob += e.prob;
            else
                merged.push_back(e);
        }
        for (const auto& e : merged) {
            tm.sources.push_back(e.from);
            tm.log_probs.push_back(std::log(e.prob));
            ++tm.offsets[e.to + 1];
        }
        for (std::size_t j = 0; j < n_states; ++j) tm.offsets[j + 1] += tm.offsets[j];
        return tm;
    }

    // From a dense row-stochastic matrix, probs(i, j) = P(j | i).
    static TransitionModel from_dense(const Matrix<double>& probs) {
        std::vector<Edge> edges;
        for (std::size_t i = 0; i < probs.rows; ++i)
            for (std::size_t j = 0; j < probs.cols; ++j)
                edges.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j), probs(i, j)});
        return from_edges(probs.rows, std::move(edges));
    }
};

struct ViterbiPath {
    std::vector<std::uint32_t> states;
    double log_prob = -std::numeric_limits<double>::infinity();
};

namespace detail {

template <class Pointer, class ObsFn>
ViterbiPath viterbi_impl(const TransitionModel& tm, std::size_t n_frames, ObsFn& obs,
                         std::span<const double> log_initial) {
    const std::size_t n = tm.n_states;
    constexpr double neg_inf = -std::numeric_limits<double>::infinity();
    std::vector<double> prev(n), cur(n), frame_obs(n);
    std::vector<Pointer> back(n * (n_frames - 1));

    auto check_possible = [&](const std::vector<double>& delta, std::size_t t) {
        for (double d : delta)
            if (d > neg_inf) return;
        throw Error("impossible_observation", "impossible observation at frame " + std::to_string(t));
    };

    obs(std::size_t{0}, std::span<double>(frame_obs));
    const double uniform = -std::log(static_cast<double>(n));
    for (std::size_t s = 0; s < n; ++s) prev[s] = (log_initial.empty() ? uniform : log_initial[s]) + frame_obs[s];
    check_possible(prev, 0);

    for (std::size_t t = 1; t < n_frames; ++t) {
        obs(t, std::span<double>(frame_obs));
        Pointer* bp = back.data() + (t - 1) * n;
        for (std::size_t j = 0; j < n; ++j) {
            const std::uint32_t begin = tm.offsets[j], end = tm.offsets[j + 1];
            double best = neg_inf;
            Pointer arg = 0;
            for (std::uint32_t e = begin; e < end; ++e) {
                const double v = prev[tm.sources[e]] + tm.log_probs[e];
                if (v > best) {
                    best = v;
                    arg = static_cast<Pointer>(e - begin);
                }
            }
            cur[j] = best + frame_obs[j];
            bp[j] = arg;
        }
        check_possible(cur, t);
        std::swap(prev, cur);
    }

    ViterbiPath path;
    std::uint32_t state = 0;
    for (std::size_t s = 0; s < n; ++s)
        if (prev[s] > prev[state]) state = static_cast<std::uint32_t>(s);
    path.log_prob = prev[state];
    path.states.resize(n_frames);
    path.states[n_frames - 1] = state;
    for (std::size_t t = n_frames - 1; t > 0; --t) {
        const Pointer k = back[(t - 1) * n + state];
        state = tm.sources[tm.offsets[state] + k];
        path.states[t - 1] = state;
    }
    return path;
}

}  // namespace detail

// Most probable state path. `obs(frame, out)` writes the per-state observation
// log-likelihoods of one frame into `out`. Ties go to the lower state index.
// An empty `log_initial` means a uniform initial distribution.
template <class ObsFn>
ViterbiPath viterbi(const TransitionModel& tm, std::size_t n_frames, ObsFn&& obs,
                    std::span<const double> log_initial = {}) {
    if (n_frames == 0) throw Error("invalid_argument", "viterbi needs at least one frame");
    if (tm.n_states == 0) throw Error("invalid_argument", "empty state space");
    if (!log_initial.empty() && log_initial.size() != tm.n_states)
        throw Error("shape", "initial distribution size does not match the state count");
    if (tm.max_in_degree() <= 256) return detail::viterbi_impl<std::uint8_t>(tm, n_frames, obs, log_initial);
    return detail::viterbi_impl<std::uint32_t>(tm, n_frames, obs, log_initial);
}

// Observation log-likelihoods given as a frames x states matrix.
inline ViterbiPath viterbi(const TransitionModel& tm, const Matrix<double>& obs_loglik,
                           std::span<const double> log_initial = {}) {
    if (obs_loglik.cols != tm.n_states) throw Error("shape", "observation columns do not match the state count");
    return viterbi(
        tm, obs_loglik.rows,
        [&](std::size_t t, std::span<double> out) {
            const auto row = obs_loglik.row(t);
            std::copy(row.begin(), row.end(), out.begin());
        },
        log_initial);
}

}  // namespace meter
