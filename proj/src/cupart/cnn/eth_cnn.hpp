#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cupart/hcpm/hcpm.hpp"
#include "cupart/nn/init.hpp"
#include "cupart/nn/loss.hpp"
#include "cupart/nn/ops.hpp"
#include "cupart/nn/tensor.hpp"
#include "cupart/report/flops.hpp"
#include "cupart/rng.hpp"

namespace cupart::cnn {

// Architecture constants. Three preprocessing branches feed a shared-shape
// conv trunk (separate weights per branch); the concatenated features drive
// one fully connected stack per HCPM level, with the normalized QP appended
// to both hidden-layer inputs. No layer carries a bias.
inline constexpr int kBranchInput[3] = {16, 32, 64};
inline constexpr int kHidden1[3] = {64, 128, 256};
inline constexpr int kHidden2[3] = {48, 96, 192};
inline constexpr int kLevelOut[3] = {1, 4, 16};
inline constexpr int kConcatLen = 2688; // 96 + 384 + 1536 + 32 + 128 + 512
inline constexpr double kDropRate1 = 0.5;
inline constexpr double kDropRate2 = 0.2;
inline constexpr double kQpNormDiv = 51.0;

inline nn::ConvSpec conv1_spec() { return {1, 16, 4}; }
inline nn::ConvSpec conv2_spec() { return {16, 24, 2}; }
inline nn::ConvSpec conv3_spec() { return {24, 32, 2}; }
inline nn::FcSpec fc1_spec(int level) { return {kConcatLen, kHidden1[level]}; }
inline nn::FcSpec fc2_spec(int level) { return {kHidden1[level] + 1, kHidden2[level]}; }
inline nn::FcSpec head_spec(int level) { return {kHidden2[level] + 1, kLevelOut[level]}; }

template <typename T>
struct EthCnnParamsT {
    std::array<nn::TensorT<T>, 3> conv1, conv2, conv3; // per branch
    std::array<nn::TensorT<T>, 3> fc1, fc2, head;      // per level

    static EthCnnParamsT canonical() {
        EthCnnParamsT p;
        for (int b = 0; b < 3; ++b) {
            p.conv1[b] = nn::TensorT<T>(conv1_spec().weight_dims());
            p.conv2[b] = nn::TensorT<T>(conv2_spec().weight_dims());
            p.conv3[b] = nn::TensorT<T>(conv3_spec().weight_dims());
        }
        for (int l = 0; l < 3; ++l) {
            p.fc1[l] = nn::TensorT<T>(fc1_spec(l).weight_dims());
            p.fc2[l] = nn::TensorT<T>(fc2_spec(l).weight_dims());
            p.head[l] = nn::TensorT<T>(head_spec(l).weight_dims());
        }
        return p;
    }

    void init(Rng& rng, double stddev = 0.1) {
        for (auto* t : tensors()) nn::truncated_normal_fill(*t, rng, stddev);
    }

    std::vector<nn::TensorT<T>*> tensors() {
        std::vector<nn::TensorT<T>*> v;
        for (int b = 0; b < 3; ++b) v.push_back(&conv1[b]);
        for (int b = 0; b < 3; ++b) v.push_back(&conv2[b]);
        for (int b = 0; b < 3; ++b) v.push_back(&conv3[b]);
        for (int l = 0; l < 3; ++l) v.push_back(&fc1[l]);
        for (int l = 0; l < 3; ++l) v.push_back(&fc2[l]);
        for (int l = 0; l < 3; ++l) v.push_back(&head[l]);
        return v;
    }
    std::vector<const nn::TensorT<T>*> tensors() const {
        auto v = const_cast<EthCnnParamsT*>(this)->tensors();
        return {v.begin(), v.end()};
    }

    static std::vector<std::string> tensor_names() {
        std::vector<std::string> names;
        for (const char* base : {"conv1", "conv2", "conv3"})
            for (int b = 1; b <= 3; ++b) names.push_back(std::string(base) + ".b" + std::to_string(b));
        for (const char* base : {"fc1", "fc2", "head"})
            for (int l = 1; l <= 3; ++l) names.push_back(std::string(base) + ".l" + std::to_string(l));
        return names;
    }

    int64_t param_count() const {
        int64_t n = 0;
        for (const auto* t : tensors()) n += int64_t(t->size());
        return n;
    }

    void zero() {
        for (auto* t : tensors()) t->fill(T(0));
    }
};

using EthCnnParams = EthCnnParamsT<float>;

// Scale to [0,1], remove the mean at each branch's decision granularity,
// then box-average down so the conv outputs line up with the HCPM levels.
template <typename T>
std::array<nn::TensorT<T>, 3> preprocess_ctu(const uint8_t* block) {
    std::array<T, 4096> x;
    for (int i = 0; i < 4096; ++i) x[i] = T(block[i]) / T(255);

    // double accumulator: the 4096-term branch-1 sum would otherwise leave a
    // ~2e-5 residue on constant blocks
    auto region_mean = [&](int x0, int y0, int edge) {
        double s = 0.0;
        for (int y = 0; y < edge; ++y)
            for (int xx = 0; xx < edge; ++xx) s += double(x[(y0 + y) * 64 + x0 + xx]);
        return T(s / double(edge * edge));
    };

    std::array<nn::TensorT<T>, 3> out;
    // branch 1: global mean, 4x4 box down to 16x16
    {
        const T mean = region_mean(0, 0, 64);
        nn::TensorT<T> t({16, 16, 1});
        for (int oy = 0; oy < 16; ++oy)
            for (int ox = 0; ox < 16; ++ox) {
                T s = T(0);
                for (int dy = 0; dy < 4; ++dy)
                    for (int dx = 0; dx < 4; ++dx)
                        s += x[(oy * 4 + dy) * 64 + ox * 4 + dx] - mean;
                t.data[oy * 16 + ox] = s / T(16);
            }
        out[0] = std::move(t);
    }
    // branch 2: per-quadrant means, 2x2 box down to 32x32
    {
        T qmean[4];
        for (int q = 0; q < 4; ++q) qmean[q] = region_mean((q % 2) * 32, (q / 2) * 32, 32);
        nn::TensorT<T> t({32, 32, 1});
        for (int oy = 0; oy < 32; ++oy)
            for (int ox = 0; ox < 32; ++ox) {
                const int q = (oy / 16) * 2 + (ox / 16);
                T s = T(0);
                for (int dy = 0; dy < 2; ++dy)
                    for (int dx = 0; dx < 2; ++dx)
                        s += x[(oy * 2 + dy) * 64 + ox * 2 + dx] - qmean[q];
                t.data[oy * 32 + ox] = s / T(4);
            }
        out[1] = std::move(t);
    }
    // branch 3: per-16x16-block means, full resolution
    {
        T bmean[16];
        for (int b = 0; b < 16; ++b)
            bmean[b] = region_mean((b % 4) * 16, (b / 4) * 16, 16);
        nn::TensorT<T> t({64, 64, 1});
        for (int y = 0; y < 64; ++y)
            for (int xx = 0; xx < 64; ++xx) {
                const int b = (y / 16) * 4 + (xx / 16);
                t.data[y * 64 + xx] = x[y * 64 + xx] - bmean[b];
            }
        out[2] = std::move(t);
    }
    return out;
}

template <typename T>
struct EthCnnCache {
    std::array<nn::TensorT<T>, 3> pre, a1, a2, a3;
    nn::TensorT<T> concat;
    std::array<nn::TensorT<T>, 3> f1, drop1, f1d, in2, f2, drop2, f2d, in3, probs;
    std::array<bool, 3> level_computed{false, false, false};
    T qp_norm = T(0);
};

struct EthCnnForwardOptions {
    bool training = false;      // enables dropout (needs dropout_rng)
    Rng* dropout_rng = nullptr;
    bool early_term = false;    // inference-time level skipping
    hcpm::ThresholdSet thresholds; // termination skips exactly NotSplit decisions
    bool features_only = false; // stop after f1 (feature extraction for the LSTM)
};

namespace detail {

template <typename T>
nn::TensorT<T> append_scalar(const nn::TensorT<T>& v, T extra) {
    nn::TensorT<T> out({int(v.size()) + 1});
    for (size_t i = 0; i < v.size(); ++i) out.data[i] = v.data[i];
    out.data[v.size()] = extra;
    return out;
}

template <typename T>
void run_level_stack(const EthCnnParamsT<T>& p, EthCnnCache<T>& c, int l,
                     const EthCnnForwardOptions& opt) {
    nn::TensorT<T> y1 = nn::fc_forward(c.concat, fc1_spec(l), p.fc1[l]);
    c.f1[l] = nn::relu(y1);
    if (opt.training) {
        auto [dropped, mask] = nn::dropout_train(c.f1[l], kDropRate1, *opt.dropout_rng);
        c.f1d[l] = std::move(dropped);
        c.drop1[l] = std::move(mask);
    } else {
        c.f1d[l] = c.f1[l];
    }
    if (opt.features_only) return;

    c.in2[l] = append_scalar(c.f1d[l], c.qp_norm);
    nn::TensorT<T> y2 = nn::fc_forward(c.in2[l], fc2_spec(l), p.fc2[l]);
    c.f2[l] = nn::relu(y2);
    if (opt.training) {
        auto [dropped, mask] = nn::dropout_train(c.f2[l], kDropRate2, *opt.dropout_rng);
        c.f2d[l] = std::move(dropped);
        c.drop2[l] = std::move(mask);
    } else {
        c.f2d[l] = c.f2[l];
    }
    c.in3[l] = append_scalar(c.f2d[l], c.qp_norm);
    c.probs[l] = nn::sigmoid(nn::fc_forward(c.in3[l], head_spec(l), p.head[l]));
    c.level_computed[l] = true;
}

} // namespace detail

// Full forward pass for one CTU. With early_term the level-2/3 stacks are
// skipped when the level above binarizes to NotSplit; emitted probabilities
// are identical to the non-terminated pass.
template <typename T>
void eth_cnn_forward(const EthCnnParamsT<T>& p, const uint8_t* block, int qp,
                     const EthCnnForwardOptions& opt, EthCnnCache<T>& c) {
    if (qp < 0 || qp > 51) throw argument_error("eth_cnn_forward: qp must be in [0,51]");
    if (opt.training && opt.dropout_rng == nullptr)
        throw argument_error("eth_cnn_forward: training mode needs a dropout rng");

    c = EthCnnCache<T>{};
    c.qp_norm = T(qp / kQpNormDiv);
    c.pre = preprocess_ctu<T>(block);
    for (int b = 0; b < 3; ++b) {
        c.a1[b] = nn::relu(nn::conv_forward(c.pre[b], conv1_spec(), p.conv1[b]));
        c.a2[b] = nn::relu(nn::conv_forward(c.a1[b], conv2_spec(), p.conv2[b]));
        c.a3[b] = nn::relu(nn::conv_forward(c.a2[b], conv3_spec(), p.conv3[b]));
    }
    c.concat = nn::TensorT<T>({kConcatLen});
    size_t pos = 0;
    for (const auto* group : {&c.a2, &c.a3})
        for (int b = 0; b < 3; ++b) {
            const auto& t = (*group)[b];
            std::copy(t.data.begin(), t.data.end(), c.concat.data.begin() + pos);
            pos += t.size();
        }

    detail::run_level_stack(p, c, 0, opt);
    if (opt.features_only) {
        detail::run_level_stack(p, c, 1, opt);
        detail::run_level_stack(p, c, 2, opt);
        return;
    }

    const bool terminate_after_l1 =
        opt.early_term && !opt.training &&
        hcpm::binarize_one(c.probs[0].data[0], opt.thresholds, 0) == hcpm::Decision::NotSplit;
    if (terminate_after_l1) return;

    detail::run_level_stack(p, c, 1, opt);
    bool all_notsplit = true;
    for (int i = 0; i < 4; ++i)
        if (hcpm::binarize_one(c.probs[1].data[i], opt.thresholds, 1) != hcpm::Decision::NotSplit)
            all_notsplit = false;
    if (opt.early_term && !opt.training && all_notsplit) return;

    detail::run_level_stack(p, c, 2, opt);
}

template <typename T>
hcpm::HcpmProb to_hcpm_prob(const EthCnnCache<T>& c) {
    hcpm::HcpmProb out;
    out.p1 = float(c.probs[0].data[0]);
    if (c.level_computed[1])
        for (int i = 0; i < 4; ++i) {
            out.valid2[i] = true;
            out.p2[i] = float(c.probs[1].data[i]);
        }
    if (c.level_computed[2])
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) {
                out.valid3[i][j] = true;
                out.p3[i][j] = float(c.probs[2].data[i * 4 + j]);
            }
    return out;
}

// Per-sample loss (sum of cross-entropies over valid HCPM cells) and its
// gradient at the head logits. Level-3 output index is 4*i + j.
template <typename T>
T eth_cnn_loss(const EthCnnCache<T>& c, const hcpm::Hcpm& labels,
               std::array<nn::TensorT<T>, 3>* dlogits = nullptr) {
    using hcpm::CuLabel;
    T loss = T(0);
    std::array<nn::TensorT<T>, 3> grads;
    for (int l = 0; l < 3; ++l) grads[l] = nn::TensorT<T>({kLevelOut[l]});

    auto cell = [&](int level, int idx, CuLabel y) {
        if (y == CuLabel::Null) return;
        T d = T(0);
        nn::bce_logit_term(c.probs[level].data[idx], y == CuLabel::Split ? T(1) : T(0), loss, d);
        grads[level].data[idx] = d;
    };
    cell(0, 0, labels.level1);
    for (int i = 0; i < 4; ++i) cell(1, i, labels.level2[i]);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) cell(2, i * 4 + j, labels.level3[i][j]);
    if (dlogits) *dlogits = std::move(grads);
    return loss;
}

// Accumulates parameter gradients for one sample. The cache must come from a
// forward pass that computed all three levels.
template <typename T>
void eth_cnn_backward(const EthCnnParamsT<T>& p, const EthCnnCache<T>& c,
                      const std::array<nn::TensorT<T>, 3>& dlogits, EthCnnParamsT<T>& grads) {
    nn::TensorT<T> dconcat({kConcatLen});
    const bool training = c.drop1[0].size() > 0;

    for (int l = 0; l < 3; ++l) {
        if (!c.level_computed[l])
            throw argument_error("eth_cnn_backward: cache is early-terminated");
        nn::TensorT<T> din3, dhead;
        nn::fc_backward(c.in3[l], head_spec(l), p.head[l], dlogits[l], din3, grads.head[l]);

        nn::TensorT<T> df2({kHidden2[l]});
        std::copy(din3.data.begin(), din3.data.begin() + kHidden2[l], df2.data.begin());
        if (training) nn::apply_mask_inplace(df2, c.drop2[l]);
        nn::relu_backward_inplace(c.f2[l], df2);

        nn::TensorT<T> din2;
        nn::fc_backward(c.in2[l], fc2_spec(l), p.fc2[l], df2, din2, grads.fc2[l]);

        nn::TensorT<T> df1({kHidden1[l]});
        std::copy(din2.data.begin(), din2.data.begin() + kHidden1[l], df1.data.begin());
        if (training) nn::apply_mask_inplace(df1, c.drop1[l]);
        nn::relu_backward_inplace(c.f1[l], df1);

        nn::TensorT<T> dcat_l;
        nn::fc_backward(c.concat, fc1_spec(l), p.fc1[l], df1, dcat_l, grads.fc1[l]);
        for (int i = 0; i < kConcatLen; ++i) dconcat.data[i] += dcat_l.data[i];
    }

    // split dconcat into the six source slices
    std::array<nn::TensorT<T>, 3> da2, da3;
    size_t pos = 0;
    for (int b = 0; b < 3; ++b) {
        da2[b] = nn::TensorT<T>(c.a2[b].dims);
        std::copy(dconcat.data.begin() + pos, dconcat.data.begin() + pos + da2[b].size(),
                  da2[b].data.begin());
        pos += da2[b].size();
    }
    for (int b = 0; b < 3; ++b) {
        da3[b] = nn::TensorT<T>(c.a3[b].dims);
        std::copy(dconcat.data.begin() + pos, dconcat.data.begin() + pos + da3[b].size(),
                  da3[b].data.begin());
        pos += da3[b].size();
    }

    for (int b = 0; b < 3; ++b) {
        nn::relu_backward_inplace(c.a3[b], da3[b]);
        nn::TensorT<T> da2_from_conv3;
        nn::conv_backward(c.a2[b], conv3_spec(), p.conv3[b], da3[b], da2_from_conv3,
                          grads.conv3[b]);
        for (size_t i = 0; i < da2[b].size(); ++i) da2[b].data[i] += da2_from_conv3.data[i];

        nn::relu_backward_inplace(c.a2[b], da2[b]);
        nn::TensorT<T> da1;
        nn::conv_backward(c.a1[b], conv2_spec(), p.conv2[b], da2[b], da1, grads.conv2[b]);

        nn::relu_backward_inplace(c.a1[b], da1);
        nn::TensorT<T> dpre;
        nn::conv_backward(c.pre[b], conv1_spec(), p.conv1[b], da1, dpre, grads.conv1[b]);
    }
}

// First-hidden-layer features per level, the interface consumed by the LSTM.
template <typename T>
std::array<nn::TensorT<T>, 3> eth_cnn_features(const EthCnnParamsT<T>& p, const uint8_t* block,
                                               int qp) {
    EthCnnCache<T> c;
    EthCnnForwardOptions opt;
    opt.features_only = true;
    eth_cnn_forward(p, block, qp, opt, c);
    return {std::move(c.f1[0]), std::move(c.f1[1]), std::move(c.f1[2])};
}

// Accounting per the published convention: conv rows count out*(k^2)*Cin
// multiplications and out*(k^2-1)*Cin additions (no cross-channel
// accumulation adds); fully connected rows count n*m and (n-1)*m.
report::FlopReport eth_cnn_flop_report();
report::FlopReport eth_cnn_expected_table();

// Fraction of total per-CTU flops skipped by early termination, per QP.
struct EarlyTermSavings {
    std::map<int, double> per_qp;
    double overall = 0.0;
};

} // namespace cupart::cnn
