#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cupart/cnn/eth_cnn.hpp"
#include "cupart/hcpm/hcpm.hpp"
#include "cupart/nn/init.hpp"
#include "cupart/nn/loss.hpp"
#include "cupart/nn/ops.hpp"
#include "cupart/rng.hpp"

namespace cupart::lstm {

// Per-level hidden sizes equal the incoming first-hidden-layer feature
// lengths of the CNN. Each level's cell feeds two fully connected layers;
// both get the normalized QP and the 4-wide one-hot frame order appended.
inline constexpr int kHidden[3] = {64, 128, 256};
inline constexpr int kFc2Out[3] = {48, 96, 192};
inline constexpr int kLevelOut[3] = {1, 4, 16};
inline constexpr int kSideInputs = 5; // qp/51 plus one-hot(4)
inline constexpr int kGopSize = 4;

inline nn::FcSpec gate_spec(int level) { return {2 * kHidden[level], kHidden[level]}; }
inline nn::FcSpec lstm_fc2_spec(int level) { return {kHidden[level] + kSideInputs, kFc2Out[level]}; }
inline nn::FcSpec lstm_head_spec(int level) { return {kFc2Out[level] + kSideInputs, kLevelOut[level]}; }

template <typename T>
struct EthLstmParamsT {
    struct Level {
        nn::TensorT<T> wi, wo, wf, wc; // [2h, h]
        nn::TensorT<T> bi, bo, bf, bc; // [h], zero-initialized
        nn::TensorT<T> fc2;            // [h+5, fc2_out]
        nn::TensorT<T> head;           // [fc2_out+5, out]
    };
    std::array<Level, 3> levels;

    static EthLstmParamsT canonical() {
        EthLstmParamsT p;
        for (int l = 0; l < 3; ++l) {
            auto& lv = p.levels[l];
            const auto gdims = gate_spec(l).weight_dims();
            lv.wi = nn::TensorT<T>(gdims);
            lv.wo = nn::TensorT<T>(gdims);
            lv.wf = nn::TensorT<T>(gdims);
            lv.wc = nn::TensorT<T>(gdims);
            for (auto* b : {&lv.bi, &lv.bo, &lv.bf, &lv.bc})
                *b = nn::TensorT<T>({kHidden[l]});
            lv.fc2 = nn::TensorT<T>(lstm_fc2_spec(l).weight_dims());
            lv.head = nn::TensorT<T>(lstm_head_spec(l).weight_dims());
        }
        return p;
    }

    void init(Rng& rng, double stddev = 0.1) {
        for (int l = 0; l < 3; ++l) {
            auto& lv = levels[l];
            for (auto* w : {&lv.wi, &lv.wo, &lv.wf, &lv.wc, &lv.fc2, &lv.head})
                nn::truncated_normal_fill(*w, rng, stddev);
            // gate biases start at zero and are excluded from the parameter
            // count, which covers weights only
        }
    }

    std::vector<nn::TensorT<T>*> tensors() {
        std::vector<nn::TensorT<T>*> v;
        for (int l = 0; l < 3; ++l) {
            auto& lv = levels[l];
            for (auto* t : {&lv.wi, &lv.wo, &lv.wf, &lv.wc, &lv.bi, &lv.bo, &lv.bf, &lv.bc,
                            &lv.fc2, &lv.head})
                v.push_back(t);
        }
        return v;
    }
    std::vector<const nn::TensorT<T>*> tensors() const {
        auto v = const_cast<EthLstmParamsT*>(this)->tensors();
        return {v.begin(), v.end()};
    }

    static std::vector<std::string> tensor_names() {
        std::vector<std::string> names;
        for (int l = 1; l <= 3; ++l)
            for (const char* base :
                 {"wi", "wo", "wf", "wc", "bi", "bo", "bf", "bc", "fc2", "head"})
                names.push_back(std::string(base) + ".l" + std::to_string(l));
        return names;
    }

    int64_t non_bias_param_count() const {
        int64_t n = 0;
        for (int l = 0; l < 3; ++l) {
            const auto& lv = levels[l];
            for (const auto* t : {&lv.wi, &lv.wo, &lv.wf, &lv.wc, &lv.fc2, &lv.head})
                n += int64_t(t->size());
        }
        return n;
    }
    int64_t bias_param_count() const {
        int64_t n = 0;
        for (int l = 0; l < 3; ++l)
            for (const auto* t :
                 {&levels[l].bi, &levels[l].bo, &levels[l].bf, &levels[l].bc})
                n += int64_t(t->size());
        return n;
    }

    void zero() {
        for (auto* t : tensors()) t->fill(T(0));
    }
};

using EthLstmParams = EthLstmParamsT<float>;

template <typename T>
struct LstmLevelState {
    nn::TensorT<T> c, h;
    explicit LstmLevelState(int level = 0)
        : c(nn::TensorT<T>({kHidden[level]})), h(nn::TensorT<T>({kHidden[level]})) {}
};

template <typename T>
using LstmState = std::array<LstmLevelState<T>, 3>;

template <typename T>
LstmState<T> zero_state() {
    return {LstmLevelState<T>(0), LstmLevelState<T>(1), LstmLevelState<T>(2)};
}

// Everything one step needs for backpropagation through time.
template <typename T>
struct LstmStepLevelCache {
    nn::TensorT<T> z;             // [x, h_prev]
    nn::TensorT<T> i, o, g, u;    // gate activations and tanh candidate
    nn::TensorT<T> c_prev, c, h;
    bool heads = false;
    nn::TensorT<T> in2, f2, in3, probs;
};

template <typename T>
using LstmStepCache = std::array<LstmStepLevelCache<T>, 3>;

// One cell update: i/o/g = sigmoid(W.[x, h_prev] + b), candidate u =
// tanh(Wc.[x, h_prev] + bc), c = i*u + g*c_prev, h = o*c. The output applies
// o to c directly (no outer tanh).
template <typename T>
void lstm_cell_step(const typename EthLstmParamsT<T>::Level& lv, int level,
                    const nn::TensorT<T>& x, LstmLevelState<T>& state,
                    LstmStepLevelCache<T>& cache) {
    const int h = kHidden[level];
    if (int(x.size()) != h) throw shape_error("lstm_cell_step: feature length mismatch");

    cache.z = nn::TensorT<T>({2 * h});
    std::copy(x.data.begin(), x.data.end(), cache.z.data.begin());
    std::copy(state.h.data.begin(), state.h.data.end(), cache.z.data.begin() + h);
    cache.c_prev = state.c;

    auto gate = [&](const nn::TensorT<T>& w, const nn::TensorT<T>& b, bool squash_tanh) {
        nn::TensorT<T> y({h});
        nn::fc_forward_raw(cache.z.ptr(), 2 * h, h, w.ptr(), y.ptr());
        for (int k = 0; k < h; ++k) {
            const T v = y.data[k] + b.data[k];
            y.data[k] = squash_tanh ? std::tanh(v) : nn::sigmoid_scalar(v);
        }
        return y;
    };
    cache.i = gate(lv.wi, lv.bi, false);
    cache.o = gate(lv.wo, lv.bo, false);
    cache.g = gate(lv.wf, lv.bf, false);
    cache.u = gate(lv.wc, lv.bc, true);

    cache.c = nn::TensorT<T>({h});
    cache.h = nn::TensorT<T>({h});
    for (int k = 0; k < h; ++k) {
        cache.c.data[k] = cache.i.data[k] * cache.u.data[k] + cache.g.data[k] * cache.c_prev.data[k];
        cache.h.data[k] = cache.o.data[k] * cache.c.data[k];
    }
    state.c = cache.c;
    state.h = cache.h;
}

template <typename T>
nn::TensorT<T> side_inputs_vector(const nn::TensorT<T>& v, T qp_norm, int frame_order) {
    nn::TensorT<T> out({int(v.size()) + kSideInputs});
    std::copy(v.data.begin(), v.data.end(), out.data.begin());
    out.data[v.size()] = qp_norm;
    for (int k = 0; k < kGopSize; ++k)
        out.data[v.size() + 1 + k] = (k == frame_order) ? T(1) : T(0);
    return out;
}

// The two fully connected layers above a cell (ReLU hidden, sigmoid output).
template <typename T>
void lstm_heads_step(const typename EthLstmParamsT<T>::Level& lv, int level, T qp_norm,
                     int frame_order, LstmStepLevelCache<T>& cache) {
    cache.in2 = side_inputs_vector(cache.h, qp_norm, frame_order);
    cache.f2 = nn::relu(nn::fc_forward(cache.in2, lstm_fc2_spec(level), lv.fc2));
    cache.in3 = side_inputs_vector(cache.f2, qp_norm, frame_order);
    cache.probs = nn::sigmoid(nn::fc_forward(cache.in3, lstm_head_spec(level), lv.head));
    cache.heads = true;
}

struct LstmForwardOptions {
    bool early_term = false;
    hcpm::ThresholdSet thresholds;
};

// One frame of the hierarchical pass: cells always advance at every level so
// later frames see a continuous state; with early_term the fully connected
// stacks below a NotSplit decision are skipped and their cells reported
// invalid (treated as depth-0/NotSplit downstream).
template <typename T>
hcpm::HcpmProb eth_lstm_frame_forward(const EthLstmParamsT<T>& p,
                                      const std::array<nn::TensorT<T>, 3>& features, T qp_norm,
                                      int frame_order, LstmState<T>& state,
                                      const LstmForwardOptions& opt, LstmStepCache<T>& cache) {
    for (int l = 0; l < 3; ++l)
        lstm_cell_step<T>(p.levels[l], l, features[l], state[l], cache[l]);

    lstm_heads_step<T>(p.levels[0], 0, qp_norm, frame_order, cache[0]);
    hcpm::HcpmProb out;
    out.p1 = float(cache[0].probs.data[0]);

    const bool stop1 =
        opt.early_term &&
        hcpm::binarize_one(out.p1, opt.thresholds, 0) == hcpm::Decision::NotSplit;
    if (stop1) return out;

    lstm_heads_step<T>(p.levels[1], 1, qp_norm, frame_order, cache[1]);
    bool all_notsplit = true;
    for (int i = 0; i < 4; ++i) {
        out.valid2[i] = true;
        out.p2[i] = float(cache[1].probs.data[i]);
        if (hcpm::binarize_one(out.p2[i], opt.thresholds, 1) != hcpm::Decision::NotSplit)
            all_notsplit = false;
    }
    if (opt.early_term && all_notsplit) return out;

    lstm_heads_step<T>(p.levels[2], 2, qp_norm, frame_order, cache[2]);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
            out.valid3[i][j] = true;
            out.p3[i][j] = float(cache[2].probs.data[i * 4 + j]);
        }
    return out;
}

// Loss over one frame's probabilities, gradient at the head logits.
template <typename T>
T eth_lstm_frame_loss(const LstmStepCache<T>& cache, const hcpm::Hcpm& labels,
                      std::array<nn::TensorT<T>, 3>* dlogits) {
    using hcpm::CuLabel;
    T loss = T(0);
    std::array<nn::TensorT<T>, 3> grads;
    for (int l = 0; l < 3; ++l) grads[l] = nn::TensorT<T>({kLevelOut[l]});
    auto cell = [&](int level, int idx, CuLabel y) {
        if (y == CuLabel::Null) return;
        T d = T(0);
        nn::bce_logit_term(cache[level].probs.data[idx], y == CuLabel::Split ? T(1) : T(0), loss,
                           d);
        grads[level].data[idx] = d;
    };
    cell(0, 0, labels.level1);
    for (int i = 0; i < 4; ++i) cell(1, i, labels.level2[i]);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) cell(2, i * 4 + j, labels.level3[i][j]);
    if (dlogits) *dlogits = std::move(grads);
    return loss;
}

// Backward through one step for one level. dh_next / dc_next carry the
// gradients flowing in from frame t+1; they are replaced by the gradients for
// frame t-1. dlogits may be empty when the step carried no loss.
template <typename T>
void lstm_level_backward(const typename EthLstmParamsT<T>::Level& lv, int level,
                         const LstmStepLevelCache<T>& cache, const nn::TensorT<T>& dlogits,
                         nn::TensorT<T>& dh_next, nn::TensorT<T>& dc_next,
                         typename EthLstmParamsT<T>::Level& grads) {
    const int h = kHidden[level];
    nn::TensorT<T> dh = dh_next;

    if (dlogits.size() > 0) {
        if (!cache.heads)
            throw argument_error("lstm_level_backward: loss on a step without heads");
        nn::TensorT<T> din3;
        nn::fc_backward(cache.in3, lstm_head_spec(level), lv.head, dlogits, din3, grads.head);
        nn::TensorT<T> df2({kFc2Out[level]});
        std::copy(din3.data.begin(), din3.data.begin() + kFc2Out[level], df2.data.begin());
        nn::relu_backward_inplace(cache.f2, df2);
        nn::TensorT<T> din2;
        nn::fc_backward(cache.in2, lstm_fc2_spec(level), lv.fc2, df2, din2, grads.fc2);
        for (int k = 0; k < h; ++k) dh.data[k] += din2.data[k];
    }

    nn::TensorT<T> dc({h});
    for (int k = 0; k < h; ++k)
        dc.data[k] = dc_next.data[k] + dh.data[k] * cache.o.data[k];

    nn::TensorT<T> dzi({h}), dzo({h}), dzf({h}), dzc({h});
    for (int k = 0; k < h; ++k) {
        const T i = cache.i.data[k], o = cache.o.data[k], g = cache.g.data[k],
                u = cache.u.data[k];
        dzo.data[k] = dh.data[k] * cache.c.data[k] * o * (T(1) - o);
        dzi.data[k] = dc.data[k] * u * i * (T(1) - i);
        dzc.data[k] = dc.data[k] * i * (T(1) - u * u);
        dzf.data[k] = dc.data[k] * cache.c_prev.data[k] * g * (T(1) - g);
    }

    nn::TensorT<T> dz({2 * h});
    nn::TensorT<T> dz_part({2 * h});
    auto gate_bwd = [&](const nn::TensorT<T>& w, nn::TensorT<T>& gw, nn::TensorT<T>& gb,
                        const nn::TensorT<T>& dgate) {
        nn::fc_backward_raw(cache.z.ptr(), 2 * h, h, w.ptr(), dgate.ptr(), dz_part.ptr(),
                            gw.ptr());
        for (int k = 0; k < 2 * h; ++k) dz.data[k] += dz_part.data[k];
        for (int k = 0; k < h; ++k) gb.data[k] += dgate.data[k];
    };
    gate_bwd(lv.wi, grads.wi, grads.bi, dzi);
    gate_bwd(lv.wo, grads.wo, grads.bo, dzo);
    gate_bwd(lv.wf, grads.wf, grads.bf, dzf);
    gate_bwd(lv.wc, grads.wc, grads.bc, dzc);

    for (int k = 0; k < h; ++k) {
        dh_next.data[k] = dz.data[h + k];              // to h(t-1)
        dc_next.data[k] = dc.data[k] * cache.g.data[k]; // to c(t-1)
    }
    // dz[0:h] would flow into the CNN features; the CNN stays frozen.
}

report::FlopReport eth_lstm_flop_report();
report::FlopReport eth_lstm_expected_table();

} // namespace cupart::lstm
