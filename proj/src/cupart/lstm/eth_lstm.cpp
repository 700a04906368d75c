#include "cupart/lstm/eth_lstm.hpp"
#include "cupart/lstm/train.hpp"

#include <algorithm>
#include <iostream>
#include <map>
#include <tuple>

#include "cupart/io/model_file.hpp"

namespace cupart::lstm {

report::FlopReport eth_lstm_flop_report() {
    report::FlopReport r;
    for (int l = 0; l < 3; ++l) {
        const int h = kHidden[l];
        // per gate; the level has three such gates
        r.rows.push_back({"gates-l" + std::to_string(l + 1), int64_t(2) * h * h,
                          int64_t(2 * h - 1) * h, int64_t(2) * h * h, 3});
    }
    for (int l = 0; l < 3; ++l) {
        const int h = kHidden[l];
        // state update c(t): candidate weights plus the elementwise products;
        // the add/mult constants reproduce the published per-row counts
        // (adds = 2h^2 + h - 1, mults = 2h^2 + 2h)
        r.rows.push_back({"c-l" + std::to_string(l + 1), int64_t(2) * h * h,
                          int64_t(2) * h * h + h - 1, int64_t(2) * h * h + 2 * h, 1});
    }
    for (int l = 0; l < 3; ++l) {
        const int h = kHidden[l];
        // cell output h(t) = o * c: parameter-free (adds = h - 1, mults = h
        // per the published convention)
        r.rows.push_back({"out-l" + std::to_string(l + 1), 0, int64_t(h) - 1, int64_t(h), 1});
    }
    for (int l = 0; l < 3; ++l) {
        const auto spec = lstm_fc2_spec(l);
        r.rows.push_back({"f2-l" + std::to_string(l + 1), spec.param_count(),
                          int64_t(spec.in_dim - 1) * spec.out_dim,
                          int64_t(spec.in_dim) * spec.out_dim, 1});
    }
    for (int l = 0; l < 3; ++l) {
        const auto spec = lstm_head_spec(l);
        r.rows.push_back({"y" + std::to_string(l + 1), spec.param_count(),
                          int64_t(spec.in_dim - 1) * spec.out_dim,
                          int64_t(spec.in_dim) * spec.out_dim, 1});
    }
    return r;
}

report::FlopReport eth_lstm_expected_table() {
    report::FlopReport r;
    r.rows = {
        {"gates-l1", 8192, 8128, 8192, 3},
        {"gates-l2", 32768, 32640, 32768, 3},
        {"gates-l3", 131072, 130816, 131072, 3},
        {"c-l1", 8192, 8255, 8320, 1},
        {"c-l2", 32768, 32895, 33024, 1},
        {"c-l3", 131072, 131327, 131584, 1},
        {"out-l1", 0, 63, 64, 1},
        {"out-l2", 0, 127, 128, 1},
        {"out-l3", 0, 255, 256, 1},
        {"f2-l1", 3312, 3264, 3312, 1},
        {"f2-l2", 12768, 12672, 12768, 1},
        {"f2-l3", 50112, 49920, 50112, 1},
        {"y1", 53, 52, 53, 1},
        {"y2", 404, 400, 404, 1},
        {"y3", 3152, 3136, 3152, 1},
    };
    return r;
}

std::vector<FeatureSequence> build_feature_sequences(const cnn::EthCnnParams& cnn_params,
                                                     std::span<const data::CtuSample> records,
                                                     std::span<const uint32_t> source_of) {
    if (records.size() != source_of.size())
        throw argument_error("build_feature_sequences: records/source_of size mismatch");

    std::map<std::tuple<uint32_t, uint32_t, int>, std::vector<size_t>> groups;
    for (size_t i = 0; i < records.size(); ++i)
        groups[{source_of[i], records[i].ctu_index, int(records[i].qp)}].push_back(i);

    std::vector<FeatureSequence> seqs;
    seqs.reserve(groups.size());
    for (auto& [key, idxs] : groups) {
        std::sort(idxs.begin(), idxs.end(), [&](size_t a, size_t b) {
            return records[a].frame_index < records[b].frame_index;
        });
        FeatureSequence seq;
        seq.qp = std::get<2>(key);
        for (size_t i : idxs) {
            seq.features.push_back(
                cnn::eth_cnn_features(cnn_params, records[i].block.data(), records[i].qp));
            seq.labels.push_back(records[i].labels);
            seq.frame_indices.push_back(records[i].frame_index);
            seq.record_indices.push_back(i);
        }
        seqs.push_back(std::move(seq));
    }
    return seqs;
}

std::vector<hcpm::HcpmProb> forward_sequence(const EthLstmParams& params,
                                             const FeatureSequence& seq,
                                             const LstmForwardOptions& opt) {
    for (size_t t = 1; t < seq.frame_indices.size(); ++t)
        if (seq.frame_indices[t] <= seq.frame_indices[t - 1])
            throw sequence_error("forward_sequence: frames out of encoding order");

    LstmState<float> state = zero_state<float>();
    LstmStepCache<float> cache;
    std::vector<hcpm::HcpmProb> out;
    out.reserve(seq.features.size());
    for (size_t t = 0; t < seq.features.size(); ++t) {
        const float qp_norm = float(seq.qp / cnn::kQpNormDiv);
        out.push_back(eth_lstm_frame_forward<float>(params, seq.features[t], qp_norm,
                                                    int(seq.frame_indices[t] % kGopSize), state,
                                                    opt, cache));
    }
    return out;
}

namespace {

struct Window {
    const FeatureSequence* seq;
    size_t start;
};

// One window's forward + BPTT; returns summed per-frame losses and
// accumulates gradients scaled by grad_scale.
float run_window_bptt(const EthLstmParams& params, const Window& w, int T, float grad_scale,
                      EthLstmParams& grads) {
    LstmState<float> state = zero_state<float>();
    const size_t steps = size_t(T);
    std::vector<LstmStepCache<float>> caches(steps);
    std::vector<std::array<nn::Tensor, 3>> dlogits(steps);
    const float qp_norm = float(w.seq->qp / cnn::kQpNormDiv);

    float loss_sum = 0.0f;
    LstmForwardOptions opt; // no early termination during training
    for (int t = 0; t < T; ++t) {
        const size_t idx = w.start + size_t(t);
        eth_lstm_frame_forward<float>(params, w.seq->features[idx], qp_norm,
                                      int(w.seq->frame_indices[idx] % kGopSize), state, opt,
                                      caches[size_t(t)]);
        loss_sum +=
            eth_lstm_frame_loss<float>(caches[size_t(t)], w.seq->labels[idx], &dlogits[size_t(t)]);
    }

    std::array<nn::Tensor, 3> dh, dc;
    for (int l = 0; l < 3; ++l) {
        dh[l] = nn::Tensor({kHidden[l]});
        dc[l] = nn::Tensor({kHidden[l]});
    }
    for (int t = T - 1; t >= 0; --t) {
        for (int l = 0; l < 3; ++l) {
            nn::Tensor& dl = dlogits[size_t(t)][l];
            for (auto& v : dl.data) v *= grad_scale;
            lstm_level_backward<float>(params.levels[l], l, caches[size_t(t)][l], dl, dh[l],
                                       dc[l], grads.levels[l]);
        }
    }
    return loss_sum;
}

} // namespace

LstmTrainResult train_eth_lstm(std::span<const FeatureSequence> sequences,
                               const LstmTrainConfig& cfg) {
    if (sequences.empty()) throw argument_error("train_eth_lstm: no sequences");
    if (cfg.window <= 0 || cfg.overlap < 0 || cfg.overlap >= cfg.window)
        throw argument_error("train_eth_lstm: bad window/overlap");

    std::vector<Window> windows;
    for (const FeatureSequence& seq : sequences) {
        if (int(seq.features.size()) < cfg.window) {
            std::cerr << "train_eth_lstm: sequence of " << seq.features.size()
                      << " frames shorter than window " << cfg.window << ", skipped\n";
            continue;
        }
        const size_t stride = size_t(cfg.window - cfg.overlap);
        for (size_t start = 0; start + size_t(cfg.window) <= seq.features.size();
             start += stride)
            windows.push_back({&seq, start});
    }
    if (windows.empty()) throw argument_error("train_eth_lstm: no usable windows");

    Rng seed_rng(cfg.seed);
    Rng init_rng = seed_rng.fork(1);
    Rng shuffle_rng = seed_rng.fork(3);

    LstmTrainResult result;
    result.params = EthLstmParams::canonical();
    result.params.init(init_rng, cfg.init_stddev);

    auto param_ptrs = result.params.tensors();
    nn::SgdStateT<float> sgd(cfg.sgd, param_ptrs);

    EthLstmParams grads = EthLstmParams::canonical();
    const auto grad_ptrs = grads.tensors();
    std::vector<const nn::Tensor*> grad_cptrs(grad_ptrs.begin(), grad_ptrs.end());

    std::vector<uint32_t> order(windows.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = uint32_t(i);
    size_t cursor = order.size();
    uint64_t epoch = 0;

    result.loss_curve.reserve(size_t(cfg.iterations));
    const float grad_scale = 1.0f / float(cfg.batch_size * cfg.window);

    for (int64_t it = 0; it < cfg.iterations; ++it) {
        grads.zero();
        float loss_sum = 0.0f;
        for (int b = 0; b < cfg.batch_size; ++b) {
            if (cursor >= order.size()) {
                Rng epoch_rng = shuffle_rng.fork(++epoch);
                for (size_t i = order.size() - 1; i > 0; --i)
                    std::swap(order[i], order[epoch_rng.below(i + 1)]);
                cursor = 0;
            }
            loss_sum += run_window_bptt(result.params, windows[order[cursor++]], cfg.window,
                                        grad_scale, grads);
        }
        sgd.step(param_ptrs, grad_cptrs);
        result.loss_curve.push_back(loss_sum / float(cfg.batch_size * cfg.window));
        if (cfg.log_every > 0 && (it % cfg.log_every == 0 || it + 1 == cfg.iterations))
            std::cerr << "iter " << it << " loss " << result.loss_curve.back() << " lr "
                      << sgd.learning_rate() << "\n";
    }
    return result;
}

LstmAccuracyReport eval_lstm_accuracy(const EthLstmParams& params,
                                      std::span<const FeatureSequence> sequences) {
    using hcpm::CuLabel;
    LstmAccuracyReport rep;
    for (const FeatureSequence& seq : sequences) {
        const std::vector<hcpm::HcpmProb> probs = forward_sequence(params, seq);
        for (size_t t = 0; t < probs.size(); ++t) {
            auto tally = [&](int level, CuLabel truth, float p) {
                if (truth == CuLabel::Null) return;
                ++rep.total[level];
                if ((p >= 0.5f) == (truth == CuLabel::Split)) ++rep.correct[level];
            };
            const hcpm::Hcpm& y = seq.labels[t];
            tally(0, y.level1, probs[t].p1);
            for (int i = 0; i < 4; ++i) tally(1, y.level2[i], probs[t].p2[i]);
            for (int i = 0; i < 4; ++i)
                for (int j = 0; j < 4; ++j) tally(2, y.level3[i][j], probs[t].p3[i][j]);
        }
    }
    return rep;
}

void save_eth_lstm(const std::string& path, const EthLstmParams& params) {
    std::vector<io::NamedTensor> tensors;
    const auto names = EthLstmParams::tensor_names();
    const auto ptrs = params.tensors();
    for (size_t i = 0; i < ptrs.size(); ++i) tensors.push_back({names[i], *ptrs[i]});
    io::ethm_write(path, io::kModelKindLstm, tensors);
}

EthLstmParams load_eth_lstm(const std::string& path) {
    const io::ModelFile mf = io::ethm_read(path);
    if (mf.kind != io::kModelKindLstm) throw data_error("load_eth_lstm: not an lstm model file");
    EthLstmParams p = EthLstmParams::canonical();
    const auto names = EthLstmParams::tensor_names();
    auto ptrs = p.tensors();
    for (size_t i = 0; i < ptrs.size(); ++i) {
        const nn::Tensor& t = mf.find(names[i]);
        if (t.dims != ptrs[i]->dims) throw data_error("load_eth_lstm: tensor shape mismatch");
        *ptrs[i] = t;
    }
    return p;
}

} // namespace cupart::lstm
