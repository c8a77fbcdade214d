#pragma once

// TCN training loop shared by from-scratch and fine-tuning runs: one Adam
// step per snippet, shuffled each epoch, validation after every epoch,
// learning-rate reduction on plateau, early stopping and best-epoch weights.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "meter/features.hpp"
#include "meter/tcn.hpp"

namespace meter::tcn {

struct TrainSchedule {
    double initial_lr = 0.005;
    int plateau_patience = 10;
    double lr_factor = 0.2;
    int max_epochs = 100;
    int early_stop_patience = 20;
    double min_delta = 1e-5;  // an epoch improves only if val loss drops by at least this

    void validate() const {
        if (!(initial_lr > 0.0)) throw Error("invalid_config", "initial_lr must be positive");
        if (!(lr_factor > 0.0 && lr_factor < 1.0)) throw Error("invalid_config", "lr_factor must be in (0, 1)");
        if (max_epochs < 0) throw Error("invalid_config", "max_epochs must be non-negative");
        if (plateau_patience <= 0 || early_stop_patience <= 0)
            throw Error("invalid_config", "patiences must be positive");
        if (max_epochs > 0 && (plateau_patience >= max_epochs || early_stop_patience >= max_epochs))
            throw Error("invalid_config", "patiences must be smaller than max_epochs");
        if (min_delta < 0.0) throw Error("invalid_config", "min_delta must be non-negative");
    }

    static TrainSchedule finetune() {
        TrainSchedule s;
        s.initial_lr = 0.001;
        return s;
    }
};

// One annotated feature sequence. `source` is the track id it was cut from.
struct TrainingSnippet {
    Matrix<float> features;  // frames x bands
    Targets targets;
    double frame_rate = 0.0;
    std::string source;
};

// Snippet for each requested frame rate; annotations stay in seconds and
// are re-gridded per rate.
inline std::vector<TrainingSnippet> make_snippets(const AudioBuffer& audio, const BeatList& ann,
                                                  const features::FeatureConfig& cfg,
                                                  const std::vector<double>& frame_rates, const std::string& source) {
    std::vector<TrainingSnippet> out;
    for (double fps : frame_rates) {
        auto f = features::network_features(audio, cfg, fps);
        TrainingSnippet s;
        s.targets = targets_from_annotations(ann, f.frame_rate, f.values.rows);
        s.features = std::move(f.values);
        s.frame_rate = f.frame_rate;
        s.source = source;
        out.push_back(std::move(s));
    }
    return out;
}

struct EpochRecord {
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double lr = 0.0;
    std::size_t snippets = 0;  // training snippets visited this epoch
};

template <class T>
struct TrainResult {
    TcnWeights<T> weights;  // from the best validation epoch
    std::vector<EpochRecord> history;
    int best_epoch = 0;
    double best_val_loss = 0.0;
};

template <class T>
double mean_loss(const TcnWeights<T>& w, const std::vector<TrainingSnippet>& set) {
    double total = 0.0;
    for (const auto& s : set) total += evaluate_loss(w, s.features, s.targets);
    return total / static_cast<double>(set.size());
}

// Epoch 0 evaluates the starting weights without updating them. The returned
// weights are those of the lowest validation loss seen; plateau and early-stop
// counters only reset on improvements of at least min_delta.
template <class T>
TrainResult<T> train(TcnWeights<T> w, const TrainSchedule& sch, const std::vector<TrainingSnippet>& train_set,
                     const std::vector<TrainingSnippet>& val_set, std::uint64_t seed,
                     const std::function<void(const EpochRecord&)>& on_epoch = {}) {
    sch.validate();
    w.config.validate();
    if (train_set.empty() || val_set.empty()) throw Error("empty_set", "training and validation sets must be non-empty");
    const Layout lay(w.config);
    if (w.params.size() != lay.total) throw Error("shape", "weights do not match their config");
    for (const auto* set : {&train_set, &val_set})
        for (const auto& s : *set)
            if (static_cast<int>(s.features.cols) != w.config.n_inputs)
                throw Error("shape", "snippet from " + s.source + " has " + std::to_string(s.features.cols) +
                                         " bands, the network expects " + std::to_string(w.config.n_inputs));

    TrainResult<T> r;
    double lr = sch.initial_lr;
    EpochRecord first{0, mean_loss(w, train_set), mean_loss(w, val_set), lr, 0};
    r.history.push_back(first);
    if (on_epoch) on_epoch(first);
    r.weights = w;
    r.best_val_loss = first.val_loss;
    double reference = first.val_loss;  // last loss that counted as an improvement
    int since_improvement = 0, since_lr_change = 0;

    std::mt19937_64 rng(seed);
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);
    AdamState adam;
    for (int epoch = 1; epoch <= sch.max_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double train_loss = 0.0;
        for (std::size_t i : order) {
            const auto& s = train_set[i];
            const auto fc = forward_cache(w, s.features, &rng);
            train_loss += loss_from_logits(fc, s.targets);
            adam_step(w, backward(w, fc, s.targets), adam, lr);
        }
        EpochRecord rec{epoch, train_loss / static_cast<double>(order.size()), mean_loss(w, val_set), lr,
                        order.size()};
        r.history.push_back(rec);
        if (on_epoch) on_epoch(rec);
        if (rec.val_loss < r.best_val_loss) {
            r.best_val_loss = rec.val_loss;
            r.best_epoch = epoch;
            r.weights = w;
        }
        if (rec.val_loss <= reference - sch.min_delta) {
            reference = rec.val_loss;
            since_improvement = since_lr_change = 0;
        } else {
            ++since_improvement;
            ++since_lr_change;
        }
        if (since_improvement >= sch.early_stop_patience) break;
        if (since_lr_change >= sch.plateau_patience) {
            lr *= sch.lr_factor;
            since_lr_change = 0;
        }
    }
    return r;
}

template <class T = float>
TrainResult<T> train_from_scratch(const TcnConfig& cfg, const TrainSchedule& sch,
                                  const std::vector<TrainingSnippet>& train_set,
                                  const std::vector<TrainingSnippet>& val_set,
                                  const std::function<void(const EpochRecord&)>& on_epoch = {}) {
    return train(init_weights<T>(cfg), sch, train_set, val_set, cfg.seed, on_epoch);
}

// All layers stay trainable.
template <class T>
TrainResult<T> finetune(const TcnWeights<T>& pretrained, const TrainSchedule& sch,
                        const std::vector<TrainingSnippet>& train_set, const std::vector<TrainingSnippet>& val_set,
                        std::uint64_t seed, const std::function<void(const EpochRecord&)>& on_epoch = {}) {
    return train(pretrained, sch, train_set, val_set, seed, on_epoch);
}

inline std::string history_csv(const std::vector<EpochRecord>& h) {
    std::ostringstream os;
    os << "epoch,train_loss,val_loss,lr,snippets\n";
    for (const auto& e : h)
        os << e.epoch << ',' << io::fmt(e.train_loss, 6) << ',' << io::fmt(e.val_loss, 6) << ',' << io::fmt(e.lr, 8)
           << ',' << e.snippets << '\n';
    return os.str();
}

}  // namespace meter::tcn
