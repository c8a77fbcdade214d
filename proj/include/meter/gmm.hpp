#pragma once

// Diagonal-covariance Gaussian mixtures fitted by EM.

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "meter/core.hpp"
#include "meter/matrix.hpp"

namespace meter {

struct Gmm {
    std::vector<double> weights;    // K
    Matrix<double> means;           // K x D
    Matrix<double> variances;       // K x D

    std::size_t n_components() const { return weights.size(); }
    std::size_t dim() const { return means.cols; }

    // log N(x; mean_k, diag(var_k)) without the mixture weight.
    double component_log_pdf(std::size_t k, std::span<const double> x) const {
        double acc = 0.0;
        for (std::size_t d = 0; d < dim(); ++d) {
            const double var = variances(k, d);
            const double diff = x[d] - means(k, d);
            acc += -0.5 * (std::log(2.0 * std::numbers::pi * var) + diff * diff / var);
        }
        return acc;
    }

    double log_pdf(std::span<const double> x) const {
        double best = -std::numeric_limits<double>::infinity();
        std::vector<double> terms(n_components());
        for (std::size_t k = 0; k < n_components(); ++k) {
            terms[k] = std::log(weights[k]) + component_log_pdf(k, x);
            best = std::max(best, terms[k]);
        }
        if (!std::isfinite(best)) return best;
        double sum = 0.0;
        for (double t : terms) sum += std::exp(t - best);
        return best + std::log(sum);
    }
};

struct GmmOptions {
    double tolerance = 1e-6;     // on the mean per-sample log-likelihood
    int max_iterations = 100;
    double variance_floor = 1e-4;
};

struct GmmFit {
    Gmm model;
    std::vector<double> log_likelihood;  // mean per-sample value after each EM iteration
    int iterations = 0;
};

namespace detail {

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (std::size_t d = 0; d < a.size(); ++d) acc += (a[d] - b[d]) * (a[d] - b[d]);
    return acc;
}

// k-means++ seeding; returns the chosen sample indices.
inline std::vector<std::size_t> kmeanspp(const Matrix<double>& x, std::size_t k, std::mt19937_64& rng) {
    std::vector<std::size_t> centers;
    std::uniform_int_distribution<std::size_t> first(0, x.rows - 1);
    centers.push_back(first(rng));
    std::vector<double> dist(x.rows, std::numeric_limits<double>::infinity());
    while (centers.size() < k) {
        double total = 0.0;
        for (std::size_t i = 0; i < x.rows; ++i) {
            dist[i] = std::min(dist[i], squared_distance(x.row(i), x.row(centers.back())));
            total += dist[i];
        }
        std::size_t pick = 0;
        if (total > 0.0) {
            double u = std::uniform_real_distribution<double>(0.0, total)(rng);
            for (pick = 0; pick + 1 < x.rows; ++pick) {
                u -= dist[pick];
                if (u < 0.0) break;
            }
        } else {
            pick = first(rng);
        }
        centers.push_back(pick);
    }
    return centers;
}

// M-step from responsibilities (n x K).
inline Gmm m_step(const Matrix<double>& x, const Matrix<double>& resp, const Gmm& previous, double floor) {
    const std::size_t n = x.rows, dims = x.cols, k_count = resp.cols;
    Gmm g;
    g.weights.assign(k_count, 0.0);
    g.means = Matrix<double>(k_count, dims, 0.0);
    g.variances = Matrix<double>(k_count, dims, 0.0);
    for (std::size_t k = 0; k < k_count; ++k) {
        double nk = 0.0;
        for (std::size_t i = 0; i < n; ++i) nk += resp(i, k);
        if (nk < 1e-12) {
            // Starved component: keep its previous shape with negligible weight.
            g.weights[k] = 1e-12;
            for (std::size_t d = 0; d < dims; ++d) {
                g.means(k, d) = previous.means(k, d);
                g.variances(k, d) = std::max(previous.variances(k, d), floor);
            }
            continue;
        }
        g.weights[k] = nk / static_cast<double>(n);
        for (std::size_t d = 0; d < dims; ++d) {
            double m = 0.0;
            for (std::size_t i = 0; i < n; ++i) m += resp(i, k) * x(i, d);
            m /= nk;
            double v = 0.0;
            for (std::size_t i = 0; i < n; ++i) v += resp(i, k) * (x(i, d) - m) * (x(i, d) - m);
            g.means(k, d) = m;
            g.variances(k, d) = std::max(v / nk, floor);
        }
    }
    double total = 0.0;
    for (double w : g.weights) total += w;
    for (double& w : g.weights) w /= total;
    return g;
}

// E-step; returns mean per-sample log-likelihood.
inline double e_step(const Matrix<double>& x, const Gmm& g, Matrix<double>& resp) {
    const std::size_t k_count = g.n_components();
    double total = 0.0;
    std::vector<double> terms(k_count);
    for (std::size_t i = 0; i < x.rows; ++i) {
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < k_count; ++k) {
            terms[k] = std::log(g.weights[k]) + g.component_log_pdf(k, x.row(i));
            best = std::max(best, terms[k]);
        }
        double sum = 0.0;
        for (std::size_t k = 0; k < k_count; ++k) sum += std::exp(terms[k] - best);
        const double lse = best + std::log(sum);
        for (std::size_t k = 0; k < k_count; ++k) resp(i, k) = std::exp(terms[k] - lse);
        total += lse;
    }
    return total / static_cast<double>(x.rows);
}

}  // namespace detail

// EM fit of a K-component diagonal GMM to the rows of `samples`. With fewer
// samples than K, K falls back to the sample count. Initialisation is
// k-means++ seeded by `seed`, followed by one hard-assignment M-step.
inline GmmFit fit_gmm(const Matrix<double>& samples, std::size_t k, std::uint64_t seed, const GmmOptions& opt = {},
                      const std::string& label = "samples") {
    if (samples.rows == 0) throw Error("empty_bin", "no samples for " + label);
    if (k == 0) throw Error("invalid_argument", "GMM needs at least one component");
    k = std::min(k, samples.rows);
    std::mt19937_64 rng(seed);
    const auto centers = detail::kmeanspp(samples, k, rng);

    Matrix<double> resp(samples.rows, k, 0.0);
    for (std::size_t i = 0; i < samples.rows; ++i) {
        std::size_t best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < k; ++c) {
            const double d = detail::squared_distance(samples.row(i), samples.row(centers[c]));
            if (d < best_d) {
                best_d = d;
                best = c;
            }
        }
        resp(i, best) = 1.0;
    }
    Gmm seed_model;
    seed_model.means = Matrix<double>(k, samples.cols, 0.0);
    seed_model.variances = Matrix<double>(k, samples.cols, opt.variance_floor);
    for (std::size_t c = 0; c < k; ++c)
        for (std::size_t d = 0; d < samples.cols; ++d) seed_model.means(c, d) = samples(centers[c], d);

    GmmFit fit;
    fit.model = detail::m_step(samples, resp, seed_model, opt.variance_floor);
    double previous = -std::numeric_limits<double>::infinity();
    for (int it = 0; it < opt.max_iterations; ++it) {
        const double ll = detail::e_step(samples, fit.model, resp);
        fit.model = detail::m_step(samples, resp, fit.model, opt.variance_floor);
        fit.iterations = it + 1;
        fit.log_likelihood.push_back(ll);
        if (std::abs(ll - previous) < opt.tolerance) break;
        previous = ll;
    }
    return fit;
}

}  // namespace meter
