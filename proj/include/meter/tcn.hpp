#pragma once

// Temporal convolutional network for beat and downbeat activations: a stack
// of centred dilated 1-D convolutions with ELU (residual from the second
// layer on) and two 1x1 sigmoid heads. Forward, exact backprop and Adam are
// written out by hand; the parameter set is one flat vector.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "meter/core.hpp"
#include "meter/io.hpp"
#include "meter/matrix.hpp"

namespace meter::tcn {

struct TcnConfig {
    int n_inputs = 81;
    int n_layers = 8;
    int base_channels = 16;
    int kernel_size = 5;
    std::vector<int> dilations{1, 2, 4, 8, 16, 32, 64, 128};
    double dropout_rate = 0.1;
    std::uint64_t seed = 0;

    void validate() const {
        if (n_inputs <= 0 || base_channels <= 0) throw Error("invalid_config", "channel counts must be positive");
        if (kernel_size <= 0 || kernel_size % 2 == 0) throw Error("invalid_config", "kernel_size must be odd");
        if (static_cast<int>(dilations.size()) != n_layers || n_layers <= 0)
            throw Error("invalid_config", "n_layers must equal the number of dilations");
        for (std::size_t i = 0; i < dilations.size(); ++i) {
            const int d = dilations[i];
            if (d <= 0 || (d & (d - 1)) != 0) throw Error("invalid_config", "dilations must be powers of two");
            if (i > 0 && d <= dilations[i - 1]) throw Error("invalid_config", "dilations must be strictly increasing");
        }
        if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw Error("invalid_config", "dropout_rate must be in [0, 1)");
    }

    // Frames on each side that can influence one output frame.
    int receptive_field() const {
        int r = 0;
        for (int d : dilations) r += d * (kernel_size - 1) / 2;
        return r;
    }

    friend bool operator==(const TcnConfig&, const TcnConfig&) = default;
};

// Offsets of each tensor inside the flat parameter vector. Convolution
// kernels are stored [out][in][tap], row-major.
struct Layout {
    std::vector<std::size_t> weight, bias;
    std::size_t head_weight[2] = {0, 0};
    std::size_t head_bias[2] = {0, 0};
    std::size_t total = 0;

    explicit Layout(const TcnConfig& c) {
        std::size_t off = 0;
        for (int l = 0; l < c.n_layers; ++l) {
            const std::size_t in = l == 0 ? c.n_inputs : c.base_channels;
            weight.push_back(off);
            off += static_cast<std::size_t>(c.base_channels) * in * c.kernel_size;
            bias.push_back(off);
            off += c.base_channels;
        }
        for (int h = 0; h < 2; ++h) {
            head_weight[h] = off;
            off += c.base_channels;
            head_bias[h] = off;
            off += 1;
        }
        total = off;
    }
};

template <class T>
struct TcnWeights {
    TcnConfig config;
    std::vector<T> params;

    std::size_t size() const { return params.size(); }

    template <class U>
    TcnWeights<U> cast() const {
        return {config, std::vector<U>(params.begin(), params.end())};
    }
};

// He-style initialisation: kernels ~ N(0, 2 / fan_in), biases 0.
template <class T = float>
TcnWeights<T> init_weights(const TcnConfig& cfg) {
    cfg.validate();
    const Layout lay(cfg);
    TcnWeights<T> w{cfg, std::vector<T>(lay.total, T(0))};
    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int l = 0; l < cfg.n_layers; ++l) {
        const std::size_t in = l == 0 ? cfg.n_inputs : cfg.base_channels;
        const double sd = std::sqrt(2.0 / static_cast<double>(in * cfg.kernel_size));
        for (std::size_t i = lay.weight[l]; i < lay.bias[l]; ++i) w.params[i] = static_cast<T>(sd * n(rng));
    }
    const double sd = std::sqrt(1.0 / cfg.base_channels);
    for (int h = 0; h < 2; ++h)
        for (int c = 0; c < cfg.base_channels; ++c) w.params[lay.head_weight[h] + c] = static_cast<T>(sd * n(rng));
    return w;
}

// Per-frame training targets. Masks weight each frame's cross-entropy.
struct Targets {
    std::vector<double> beat, downbeat;
    std::vector<double> beat_mask, downbeat_mask;

    std::size_t size() const { return beat.size(); }
};

// Target 1 at the frame nearest each event; the two frames on either side
// also get target 1 but weight 0.5. Downbeat targets use position-1 events;
// without metrical positions the downbeat mask is all zero.
inline Targets targets_from_annotations(const BeatList& ann, double frame_rate, std::size_t n_frames) {
    if (!(frame_rate > 0.0)) throw Error("invalid_argument", "frame rate must be positive");
    Targets t;
    t.beat.assign(n_frames, 0.0);
    t.downbeat.assign(n_frames, 0.0);
    t.beat_mask.assign(n_frames, 1.0);
    t.downbeat_mask.assign(n_frames, ann.empty() || ann.has_positions() ? 1.0 : 0.0);
    const double end = static_cast<double>(n_frames) / frame_rate;
    auto mark = [&](std::vector<double>& target, std::vector<double>& mask, std::ptrdiff_t f) {
        for (std::ptrdiff_t k = -2; k <= 2; ++k) {
            const auto g = f + k;
            if (g < 0 || g >= static_cast<std::ptrdiff_t>(n_frames)) continue;
            if (k != 0 && target[g] == 1.0 && mask[g] == 1.0) continue;  // never demote a centre frame
            target[g] = 1.0;
            if (mask[g] != 0.0) mask[g] = k == 0 ? 1.0 : 0.5;
        }
    };
    for (const auto& e : ann.events) {
        if (e.time < 0.0 || e.time > end + 1e-9)
            throw Error("annotation_out_of_range", "annotation at " + io::fmt(e.time, 3) + " s outside [0, " +
                                                       io::fmt(end, 3) + "] s");
        const auto f = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(std::llround(e.time * frame_rate)),
                                                static_cast<std::ptrdiff_t>(n_frames) - 1);
        mark(t.beat, t.beat_mask, f);
        if (e.position == 1) mark(t.downbeat, t.downbeat_mask, f);
    }
    return t;
}

namespace detail {

template <class T>
using RowMajor = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Operands are copied into Eigen-owned storage: Eigen's kernels choose code
// paths by address alignment, and owned matrices keep results independent of
// where the caller's buffers happen to live.

// Unrolls a channel-major input into rows (channel, tap) of shifted copies,
// zero padded, so that a convolution becomes one matrix product.
template <class T>
void im2col(const T* in, RowMajor<T>& col, int n_in, int kernel, int dilation, std::size_t frames) {
    col.setZero(static_cast<Eigen::Index>(n_in) * kernel, static_cast<Eigen::Index>(frames));
    const int centre = kernel / 2;
    for (int i = 0; i < n_in; ++i) {
        const T* src = in + static_cast<std::size_t>(i) * frames;
        for (int k = 0; k < kernel; ++k) {
            T* dst = col.row(static_cast<Eigen::Index>(i) * kernel + k).data();
            const std::ptrdiff_t off = static_cast<std::ptrdiff_t>(k - centre) * dilation;
            const std::size_t t0 = off < 0 ? static_cast<std::size_t>(-off) : 0;
            const std::size_t t1 = off > 0 ? (frames > static_cast<std::size_t>(off) ? frames - off : 0) : frames;
            for (std::size_t t = t0; t < t1; ++t) dst[t] = src[t + off];
        }
    }
}

// out[o][t] = b[o] + sum_i sum_k w[o][i][k] * in[i][t + (k - c) * d], zero padded.
template <class T>
void conv_forward(const T* w, const T* b, const T* in, T* out, int n_in, int n_out, int kernel, int dilation,
                  std::size_t frames) {
    RowMajor<T> col;
    im2col(in, col, n_in, kernel, dilation, frames);
    const RowMajor<T> W = Eigen::Map<const RowMajor<T>>(w, n_out, static_cast<Eigen::Index>(n_in) * kernel);
    const RowMajor<T> Z = W * col;
    for (int o = 0; o < n_out; ++o) {
        const T* z = Z.row(o).data();
        T* dst = out + static_cast<std::size_t>(o) * frames;
        for (std::size_t t = 0; t < frames; ++t) dst[t] = z[t] + b[o];
    }
}

// Accumulates kernel/bias gradients and, if g_in is given, input gradients.
template <class T>
void conv_backward(const T* w, const T* in, const T* g_out, T* gw, T* gb, T* g_in, int n_in, int n_out, int kernel,
                   int dilation, std::size_t frames) {
    const auto rows = static_cast<Eigen::Index>(n_in) * kernel;
    const auto cols = static_cast<Eigen::Index>(frames);
    RowMajor<T> col;
    im2col(in, col, n_in, kernel, dilation, frames);
    const RowMajor<T> G = Eigen::Map<const RowMajor<T>>(g_out, n_out, cols);
    const RowMajor<T> GW = G * col.transpose();
    for (Eigen::Index i = 0; i < GW.size(); ++i) gw[i] += GW.data()[i];
    for (int o = 0; o < n_out; ++o) {
        const T* g = g_out + static_cast<std::size_t>(o) * frames;
        T acc = 0;
        for (std::size_t t = 0; t < frames; ++t) acc += g[t];
        gb[o] += acc;
    }
    if (!g_in) return;
    const RowMajor<T> W = Eigen::Map<const RowMajor<T>>(w, n_out, rows);
    const RowMajor<T> g_col = W.transpose() * G;
    const int centre = kernel / 2;
    for (int i = 0; i < n_in; ++i) {
        T* dst = g_in + static_cast<std::size_t>(i) * frames;
        for (int k = 0; k < kernel; ++k) {
            const T* src = g_col.row(static_cast<Eigen::Index>(i) * kernel + k).data();
            const std::ptrdiff_t off = static_cast<std::ptrdiff_t>(k - centre) * dilation;
            const std::size_t t0 = off < 0 ? static_cast<std::size_t>(-off) : 0;
            const std::size_t t1 = off > 0 ? (frames > static_cast<std::size_t>(off) ? frames - off : 0) : frames;
            for (std::size_t t = t0; t < t1; ++t) dst[t + off] += src[t];
        }
    }
}

inline double log_sigmoid(double x) { return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x)); }

}  // namespace detail

// Intermediate values of one forward pass, kept for backprop.
template <class T>
struct ForwardCache {
    std::size_t frames = 0;
    std::vector<T> input;                 // n_inputs x frames
    std::vector<std::vector<T>> act;      // ELU output before dropout, per layer
    std::vector<std::vector<T>> keep;     // dropout multipliers (empty when inactive)
    std::vector<std::vector<T>> hidden;   // layer outputs
    std::vector<double> logits[2];
};

// `features` is frames x n_inputs. Dropout is applied only when `rng` is given.
template <class T, class F>
ForwardCache<T> forward_cache(const TcnWeights<T>& w, const Matrix<F>& features, std::mt19937_64* rng = nullptr) {
    const auto& c = w.config;
    if (static_cast<int>(features.cols) != c.n_inputs)
        throw Error("shape", "feature band count " + std::to_string(features.cols) + " does not match the network (" +
                                 std::to_string(c.n_inputs) + ")");
    const Layout lay(c);
    const std::size_t T_ = features.rows;
    const int C = c.base_channels;
    ForwardCache<T> fc;
    fc.frames = T_;
    fc.input.resize(static_cast<std::size_t>(c.n_inputs) * T_);
    for (std::size_t t = 0; t < T_; ++t)
        for (int b = 0; b < c.n_inputs; ++b) fc.input[b * T_ + t] = static_cast<T>(features(t, b));
    // dropout draws use 16 bits each, four per generator call
    const auto drop_below = static_cast<std::uint64_t>(std::llround(c.dropout_rate * 65536.0));
    const T scale = static_cast<T>(1.0 / (1.0 - c.dropout_rate));
    const T* prev = fc.input.data();
    int n_in = c.n_inputs;
    for (int l = 0; l < c.n_layers; ++l) {
        std::vector<T> z(static_cast<std::size_t>(C) * T_);
        detail::conv_forward(&w.params[lay.weight[l]], &w.params[lay.bias[l]], prev, z.data(), n_in, C,
                             c.kernel_size, c.dilations[l], T_);
        for (auto& v : z) v = v > 0 ? v : std::expm1(v);
        std::vector<T> keep;
        std::vector<T> h(z.size());
        if (rng && c.dropout_rate > 0.0) {
            keep.resize(z.size());
            std::uint64_t bits = 0;
            for (std::size_t i = 0; i < keep.size(); ++i) {
                if (i % 4 == 0) bits = (*rng)();
                keep[i] = (bits & 0xffff) < drop_below ? T(0) : scale;
                bits >>= 16;
            }
            for (std::size_t i = 0; i < z.size(); ++i) h[i] = z[i] * keep[i];
        } else {
            h = z;
        }
        if (l > 0)
            for (std::size_t i = 0; i < h.size(); ++i) h[i] += fc.hidden.back()[i];
        fc.act.push_back(std::move(z));
        fc.keep.push_back(std::move(keep));
        fc.hidden.push_back(std::move(h));
        prev = fc.hidden.back().data();
        n_in = C;
    }
    const auto& top = fc.hidden.back();
    for (int head = 0; head < 2; ++head) {
        fc.logits[head].assign(T_, static_cast<double>(w.params[lay.head_bias[head]]));
        for (int ch = 0; ch < C; ++ch) {
            const double v = w.params[lay.head_weight[head] + ch];
            const T* src = &top[static_cast<std::size_t>(ch) * T_];
            for (std::size_t t = 0; t < T_; ++t) fc.logits[head][t] += v * src[t];
        }
    }
    return fc;
}

inline constexpr double activation_eps = 1e-7;

template <class T>
ActivationPair activations_from(const ForwardCache<T>& fc, double frame_rate) {
    ActivationPair a;
    a.frame_rate = frame_rate;
    for (int head = 0; head < 2; ++head) {
        auto& dst = head == 0 ? a.beat : a.downbeat;
        dst.resize(fc.frames);
        for (std::size_t t = 0; t < fc.frames; ++t)
            dst[t] = std::clamp(1.0 / (1.0 + std::exp(-fc.logits[head][t])), activation_eps, 1.0 - activation_eps);
    }
    return a;
}

template <class T, class F>
ActivationPair forward(const TcnWeights<T>& w, const Matrix<F>& features, double frame_rate,
                       std::mt19937_64* dropout_rng = nullptr) {
    return activations_from(forward_cache(w, features, dropout_rng), frame_rate);
}

// Sum over the two heads of the mask-weighted mean binary cross-entropy. A
// head whose mask sums to zero contributes 0.
inline double loss(const ActivationPair& acts, const Targets& tg) {
    if (acts.size() != tg.size() || acts.downbeat.size() != tg.size() || tg.beat_mask.size() != tg.size() ||
        tg.downbeat_mask.size() != tg.size())
        throw Error("shape", "activation and target lengths differ");
    double total = 0.0;
    for (int head = 0; head < 2; ++head) {
        const auto& p = head == 0 ? acts.beat : acts.downbeat;
        const auto& y = head == 0 ? tg.beat : tg.downbeat;
        const auto& m = head == 0 ? tg.beat_mask : tg.downbeat_mask;
        double acc = 0.0, wsum = 0.0;
        for (std::size_t t = 0; t < p.size(); ++t) {
            const double q = std::clamp(p[t], activation_eps, 1.0 - activation_eps);
            acc -= m[t] * (y[t] * std::log(q) + (1.0 - y[t]) * std::log(1.0 - q));
            wsum += m[t];
        }
        if (wsum > 0.0) total += acc / wsum;
    }
    return total;
}

// Same loss evaluated on logits (no clamping); used for training and checks.
template <class T>
double loss_from_logits(const ForwardCache<T>& fc, const Targets& tg) {
    if (fc.frames != tg.size()) throw Error("shape", "activation and target lengths differ");
    double total = 0.0;
    for (int head = 0; head < 2; ++head) {
        const auto& y = head == 0 ? tg.beat : tg.downbeat;
        const auto& m = head == 0 ? tg.beat_mask : tg.downbeat_mask;
        double acc = 0.0, wsum = 0.0;
        for (std::size_t t = 0; t < fc.frames; ++t) {
            const double z = fc.logits[head][t];
            acc -= m[t] * (y[t] * detail::log_sigmoid(z) + (1.0 - y[t]) * detail::log_sigmoid(-z));
            wsum += m[t];
        }
        if (wsum > 0.0) total += acc / wsum;
    }
    return total;
}

template <class T, class F>
double evaluate_loss(const TcnWeights<T>& w, const Matrix<F>& features, const Targets& tg) {
    return loss_from_logits(forward_cache(w, features), tg);
}

// Exact gradient of loss_from_logits with respect to every parameter, for
// the dropout masks recorded in the cache.
template <class T>
std::vector<T> backward(const TcnWeights<T>& w, const ForwardCache<T>& fc, const Targets& tg) {
    const auto& c = w.config;
    const Layout lay(c);
    const std::size_t T_ = fc.frames;
    const int C = c.base_channels;
    std::vector<T> grad(lay.total, T(0));
    std::vector<T> g_h(static_cast<std::size_t>(C) * T_, T(0));
    const auto& top = fc.hidden.back();
    for (int head = 0; head < 2; ++head) {
        const auto& y = head == 0 ? tg.beat : tg.downbeat;
        const auto& m = head == 0 ? tg.beat_mask : tg.downbeat_mask;
        const double wsum = std::accumulate(m.begin(), m.end(), 0.0);
        if (wsum <= 0.0) continue;
        std::vector<T> gl(T_);
        double gb = 0.0;
        for (std::size_t t = 0; t < T_; ++t) {
            const double p = 1.0 / (1.0 + std::exp(-fc.logits[head][t]));
            gl[t] = static_cast<T>(m[t] * (p - y[t]) / wsum);
            gb += gl[t];
        }
        grad[lay.head_bias[head]] += static_cast<T>(gb);
        for (int ch = 0; ch < C; ++ch) {
            const T v = w.params[lay.head_weight[head] + ch];
            const T* src = &top[static_cast<std::size_t>(ch) * T_];
            T* dst = &g_h[static_cast<std::size_t>(ch) * T_];
            T acc = 0;
            for (std::size_t t = 0; t < T_; ++t) {
                acc += gl[t] * src[t];
                dst[t] += v * gl[t];
            }
            grad[lay.head_weight[head] + ch] += acc;
        }
    }
    std::vector<T> g_z(g_h.size());
    for (int l = c.n_layers - 1; l >= 0; --l) {
        const auto& a = fc.act[l];
        const auto& keep = fc.keep[l];
        for (std::size_t i = 0; i < g_z.size(); ++i) {
            const T ga = keep.empty() ? g_h[i] : g_h[i] * keep[i];
            g_z[i] = a[i] > 0 ? ga : ga * (a[i] + T(1));
        }
        const int n_in = l == 0 ? c.n_inputs : C;
        const T* in = l == 0 ? fc.input.data() : fc.hidden[l - 1].data();
        if (l == 0) {
            detail::conv_backward<T>(&w.params[lay.weight[l]], in, g_z.data(), &grad[lay.weight[l]],
                                     &grad[lay.bias[l]], nullptr, n_in, C, c.kernel_size, c.dilations[l], T_);
        } else {
            // residual: the gradient reaching h_{l-1} is g_h plus the conv path
            detail::conv_backward<T>(&w.params[lay.weight[l]], in, g_z.data(), &grad[lay.weight[l]],
                                     &grad[lay.bias[l]], g_h.data(), n_in, C, c.kernel_size, c.dilations[l], T_);
        }
    }
    return grad;
}

template <class T, class F>
std::vector<T> gradients(const TcnWeights<T>& w, const Matrix<F>& features, const Targets& tg, double* loss_out = nullptr) {
    const auto fc = forward_cache(w, features);
    if (loss_out) *loss_out = loss_from_logits(fc, tg);
    return backward(w, fc, tg);
}

struct AdamState {
    std::vector<double> m, v;
    std::int64_t step = 0;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
};

template <class T>
void adam_step(TcnWeights<T>& w, const std::vector<T>& grad, AdamState& st, double lr) {
    if (grad.size() != w.params.size()) throw Error("shape", "gradient size does not match the parameters");
    if (st.m.empty()) {
        st.m.assign(w.params.size(), 0.0);
        st.v.assign(w.params.size(), 0.0);
    }
    ++st.step;
    const double c1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
    const double c2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
    for (std::size_t i = 0; i < grad.size(); ++i) {
        const double g = grad[i];
        st.m[i] = st.beta1 * st.m[i] + (1.0 - st.beta1) * g;
        st.v[i] = st.beta2 * st.v[i] + (1.0 - st.beta2) * g * g;
        const double mh = st.m[i] / c1, vh = st.v[i] / c2;
        w.params[i] = static_cast<T>(w.params[i] - lr * mh / (std::sqrt(vh) + st.eps));
    }
}

// Checkpoints: JSON with the config echo and one array per tensor, in the
// flat layout order (layer kernels [out][in][tap], layer biases, then the
// beat head and the downbeat head).
template <class T>
nlohmann::json to_json(const TcnWeights<T>& w) {
    const auto& c = w.config;
    const Layout lay(c);
    nlohmann::json j;
    j["kind"] = "tcn";
    j["version"] = 1;
    j["config"] = {{"n_inputs", c.n_inputs},       {"n_layers", c.n_layers},
                   {"base_channels", c.base_channels}, {"kernel_size", c.kernel_size},
                   {"dilations", c.dilations},     {"dropout_rate", c.dropout_rate},
                   {"seed", c.seed}};
    auto slice = [&](std::size_t a, std::size_t b) { return std::vector<double>(w.params.begin() + a, w.params.begin() + b); };
    j["layers"] = nlohmann::json::array();
    for (int l = 0; l < c.n_layers; ++l)
        j["layers"].push_back({{"kernel", slice(lay.weight[l], lay.bias[l])},
                               {"bias", slice(lay.bias[l], lay.bias[l] + c.base_channels)}});
    for (int h = 0; h < 2; ++h)
        j[h == 0 ? "beat_head" : "downbeat_head"] = {
            {"weight", slice(lay.head_weight[h], lay.head_bias[h])},
            {"bias", w.params[lay.head_bias[h]]}};
    return j;
}

inline TcnConfig config_from_json(const nlohmann::json& j) {
    TcnConfig c;
    c.n_inputs = j.at("n_inputs").get<int>();
    c.n_layers = j.at("n_layers").get<int>();
    c.base_channels = j.at("base_channels").get<int>();
    c.kernel_size = j.at("kernel_size").get<int>();
    c.dilations = j.at("dilations").get<std::vector<int>>();
    c.dropout_rate = j.at("dropout_rate").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.validate();
    return c;
}

template <class T = float>
TcnWeights<T> weights_from_json(const nlohmann::json& j) {
    try {
        if (j.value("kind", "") != "tcn") throw Error("bad_model", "not a tcn model file");
        if (j.value("version", 0) != 1) throw Error("bad_model", "unsupported tcn model version");
        const auto c = config_from_json(j.at("config"));
        const Layout lay(c);
        TcnWeights<T> w{c, {}};
        w.params.reserve(lay.total);
        const auto& layers = j.at("layers");
        if (static_cast<int>(layers.size()) != c.n_layers) throw Error("bad_model", "layer count mismatch");
        for (const auto& l : layers) {
            for (double v : l.at("kernel").get<std::vector<double>>()) w.params.push_back(static_cast<T>(v));
            for (double v : l.at("bias").get<std::vector<double>>()) w.params.push_back(static_cast<T>(v));
        }
        for (const char* name : {"beat_head", "downbeat_head"}) {
            for (double v : j.at(name).at("weight").get<std::vector<double>>()) w.params.push_back(static_cast<T>(v));
            w.params.push_back(static_cast<T>(j.at(name).at("bias").get<double>()));
        }
        if (w.params.size() != lay.total) throw Error("bad_model", "parameter count does not match the config");
        return w;
    } catch (const nlohmann::json::exception& e) {
        throw Error("bad_model", e.what());
    }
}

}  // namespace meter::tcn
