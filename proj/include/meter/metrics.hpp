#pragma once

// Beat evaluation: F-measure with a tolerance window, continuity scores at the
// annotated and at allowed metrical levels, and percentile bootstrap summaries.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "meter/core.hpp"

namespace meter::metrics {

struct MetricReport {
    double f_measure = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double cmlt = 0.0;
    double amlt = 0.0;
    std::size_t hits = 0;
    std::size_t false_pos = 0;
    std::size_t false_neg = 0;
};

struct FScore {
    double f_measure = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    std::size_t hits = 0, false_pos = 0, false_neg = 0;
};

// One-to-one greedy matching: annotations in time order each take the nearest
// unmatched estimate within the window (earlier estimate on ties).
inline FScore f_measure(const std::vector<double>& est, const std::vector<double>& ann, double window = 0.07) {
    FScore s;
    if (est.empty() && ann.empty()) {
        s.f_measure = s.precision = s.recall = 1.0;
        return s;
    }
    std::vector<char> used(est.size(), 0);
    for (double a : ann) {
        const auto lo = std::lower_bound(est.begin(), est.end(), a - window - 1e-12) - est.begin();
        std::ptrdiff_t best = -1;
        double best_d = 0.0;
        for (auto i = lo; i < static_cast<std::ptrdiff_t>(est.size()) && est[i] <= a + window + 1e-12; ++i) {
            if (used[i]) continue;
            const double d = std::abs(est[i] - a);
            if (d > window + 1e-12) continue;
            if (best < 0 || d < best_d) {
                best = i;
                best_d = d;
            }
        }
        if (best >= 0) {
            used[best] = 1;
            ++s.hits;
        }
    }
    s.false_pos = est.size() - s.hits;
    s.false_neg = ann.size() - s.hits;
    s.precision = est.empty() ? 0.0 : static_cast<double>(s.hits) / static_cast<double>(est.size());
    s.recall = ann.empty() ? 0.0 : static_cast<double>(s.hits) / static_cast<double>(ann.size());
    s.f_measure = s.precision + s.recall > 0.0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
    return s;
}

inline FScore f_measure(const BeatList& est, const BeatList& ann, double window = 0.07) {
    return f_measure(est.times(), ann.times(), window);
}

namespace detail {

// Fraction of annotations matched by an estimate that satisfies the phase
// and period conditions and has a neighbouring estimate that does too.
inline double continuity_ratio(const std::vector<double>& est, const std::vector<double>& ann, double phase_tol,
                               double period_tol) {
    const std::size_t n = ann.size();
    if (n < 2 || est.empty()) return 0.0;
    auto interval_after = [&](std::size_t j) { return j + 1 < n ? ann[j + 1] - ann[j] : ann[j] - ann[j - 1]; };
    auto interval_before = [&](std::size_t j) { return j > 0 ? ann[j] - ann[j - 1] : ann[1] - ann[0]; };

    std::vector<std::size_t> nearest(est.size());
    std::vector<char> ok(est.size(), 0);
    for (std::size_t i = 0; i < est.size(); ++i) {
        const auto it = std::lower_bound(ann.begin(), ann.end(), est[i]);
        std::size_t j = static_cast<std::size_t>(it - ann.begin());
        if (j == n || (j > 0 && est[i] - ann[j - 1] <= ann[j] - est[i])) --j;
        nearest[i] = j;
        const bool phase = std::abs(est[i] - ann[j]) <= phase_tol * interval_after(j) + 1e-12;
        bool period;
        if (i > 0) {
            const double ref = interval_before(j);
            period = std::abs((est[i] - est[i - 1]) - ref) <= period_tol * ref + 1e-12;
        } else if (est.size() > 1) {
            const double ref = interval_after(j);
            period = std::abs((est[1] - est[0]) - ref) <= period_tol * ref + 1e-12;
        } else {
            period = false;
        }
        ok[i] = phase && period;
    }
    std::vector<char> counted(n, 0);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < est.size(); ++i) {
        if (!ok[i]) continue;
        const bool linked = (i > 0 && ok[i - 1]) || (i + 1 < est.size() && ok[i + 1]);
        if (!linked || counted[nearest[i]]) continue;
        counted[nearest[i]] = 1;
        ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(n);
}

}  // namespace detail

// Metrical variations of an annotation list: identity, double, the two
// half-tempo phases, off-beat, triple and the three third-tempo phases.
inline std::vector<std::vector<double>> annotation_variations(const std::vector<double>& ann) {
    std::vector<std::vector<double>> out{ann};
    std::vector<double> dbl, off, triple;
    for (std::size_t i = 0; i + 1 < ann.size(); ++i) {
        const double d = ann[i + 1] - ann[i];
        dbl.push_back(ann[i]);
        dbl.push_back(ann[i] + d / 2.0);
        off.push_back(ann[i] + d / 2.0);
        triple.push_back(ann[i]);
        triple.push_back(ann[i] + d / 3.0);
        triple.push_back(ann[i] + 2.0 * d / 3.0);
    }
    if (!ann.empty()) {
        dbl.push_back(ann.back());
        triple.push_back(ann.back());
    }
    out.push_back(dbl);
    for (std::size_t phase = 0; phase < 2; ++phase) {
        std::vector<double> half;
        for (std::size_t i = phase; i < ann.size(); i += 2) half.push_back(ann[i]);
        out.push_back(half);
    }
    out.push_back(off);
    out.push_back(triple);
    for (std::size_t phase = 0; phase < 3; ++phase) {
        std::vector<double> third;
        for (std::size_t i = phase; i < ann.size(); i += 3) third.push_back(ann[i]);
        out.push_back(third);
    }
    return out;
}

struct Continuity {
    double cmlt = 0.0;
    double amlt = 0.0;
};

inline Continuity continuity(const std::vector<double>& est, const std::vector<double>& ann, double phase_tol = 0.175,
                             double period_tol = 0.175) {
    if (ann.size() < 2) throw Error("too_few_annotations", "continuity needs at least two annotations");
    Continuity c;
    c.cmlt = detail::continuity_ratio(est, ann, phase_tol, period_tol);
    c.amlt = c.cmlt;
    for (const auto& v : annotation_variations(ann))
        if (v.size() >= 2) c.amlt = std::max(c.amlt, detail::continuity_ratio(est, v, phase_tol, period_tol));
    return c;
}

inline Continuity continuity(const BeatList& est, const BeatList& ann, double phase_tol = 0.175,
                             double period_tol = 0.175) {
    return continuity(est.times(), ann.times(), phase_tol, period_tol);
}

enum class Task { beat, downbeat };

inline std::string to_string(Task t) { return t == Task::beat ? "beat" : "downbeat"; }

struct EvalOptions {
    double window = 0.07;
    double phase_tol = 0.175;
    double period_tol = 0.175;
    double skip_seconds = 0.0;  // events before this time are ignored in both lists
};

// Full report for one task. Downbeat evaluation uses position-1 events only.
// With fewer than two reference events the continuity scores are 0.
inline MetricReport evaluate(const BeatList& est_in, const BeatList& ann_in, Task task, const EvalOptions& opt = {}) {
    auto select = [&](const BeatList& b) {
        std::vector<double> t;
        for (const auto& e : b.events)
            if ((task == Task::beat || e.position == 1) && e.time >= opt.skip_seconds) t.push_back(e.time);
        return t;
    };
    const auto est = select(est_in), ann = select(ann_in);
    const auto f = f_measure(est, ann, opt.window);
    MetricReport r;
    r.f_measure = f.f_measure;
    r.precision = f.precision;
    r.recall = f.recall;
    r.hits = f.hits;
    r.false_pos = f.false_pos;
    r.false_neg = f.false_neg;
    if (ann.size() >= 2) {
        const auto c = continuity(est, ann, opt.phase_tol, opt.period_tol);
        r.cmlt = c.cmlt;
        r.amlt = c.amlt;
    }
    return r;
}

struct BootstrapSummary {
    double mean = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    std::size_t n = 0;
};

// Percentile bootstrap of the mean.
inline BootstrapSummary bootstrap_mean(const std::vector<double>& scores, std::size_t n_resamples = 1000,
                                       double ci = 0.95, std::uint64_t seed = 0) {
    if (scores.empty()) throw Error("empty_group", "bootstrap needs at least one score");
    if (n_resamples == 0 || !(ci > 0.0 && ci < 1.0)) throw Error("invalid_argument", "bad bootstrap parameters");
    BootstrapSummary s;
    s.n = scores.size();
    s.mean = std::accumulate(scores.begin(), scores.end(), 0.0) / static_cast<double>(scores.size());
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, scores.size() - 1);
    std::vector<double> means(n_resamples);
    for (auto& m : means) {
        double acc = 0.0;
        for (std::size_t i = 0; i < scores.size(); ++i) acc += scores[pick(rng)];
        m = acc / static_cast<double>(scores.size());
    }
    std::sort(means.begin(), means.end());
    const double alpha = (1.0 - ci) / 2.0;
    auto quantile = [&](double q) {
        const double pos = q * static_cast<double>(means.size() - 1);
        const auto lo = static_cast<std::size_t>(std::floor(pos));
        const auto hi = std::min(lo + 1, means.size() - 1);
        return means[lo] + (pos - static_cast<double>(lo)) * (means[hi] - means[lo]);
    };
    s.ci_low = quantile(alpha);
    s.ci_high = quantile(1.0 - alpha);
    return s;
}

}  // namespace meter::metrics
