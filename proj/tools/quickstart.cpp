// Trains the bar-pointer model on a handful of synthetic 2/4 excerpts, tracks
// a held-out excerpt and prints its scores. Runs in a few seconds.

#include <iostream>

#include "meter/bayesbeat.hpp"
#include "meter/metrics.hpp"
#include "meter/synth.hpp"

int main() {
    using namespace meter;
    const synth::SuiteOptions opt;
    auto envelope = [](const AudioBuffer& a) {
        return features::onset_envelope(a, features::observation_bands(a.sample_rate / 2.0), {}, 100.0);
    };

    std::vector<bayes::Excerpt> train;
    for (int i = 0; i < 4; ++i) {
        const auto rec = synth::generate(synth::suite_spec(synth::Suite::samba_like, i, opt), opt.sample_rate);
        const auto head = rec.audio.slice(0.0, 10.0);
        train.push_back({envelope(head), rec.beats.window(0.0, 10.0)});
    }
    bayes::BayesConfig cfg;
    cfg.grid.beats_per_bar = 2;
    const auto model = bayes::bayes_train(train, cfg);

    const auto test = synth::generate(synth::suite_spec(synth::Suite::samba_like, 50, opt), opt.sample_rate);
    const auto est = bayes::bayes_track(model, envelope(test.audio));
    for (auto task : {metrics::Task::beat, metrics::Task::downbeat}) {
        const auto r = metrics::evaluate(est, test.beats, task);
        std::cout << metrics::to_string(task) << ": f=" << r.f_measure << " cmlt=" << r.cmlt << " amlt=" << r.amlt
                  << '\n';
    }
}
