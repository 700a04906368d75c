#include "cupart/cnn/eth_cnn.hpp"
#include "cupart/cnn/train.hpp"

#include <iostream>

#include "cupart/io/model_file.hpp"

namespace cupart::cnn {

namespace {

report::FlopRow conv_row(const std::string& name, const nn::ConvSpec& spec, int out_edge) {
    const int64_t out_elems = int64_t(out_edge) * out_edge * spec.out_channels;
    const int64_t k2 = int64_t(spec.kernel_edge) * spec.kernel_edge;
    return {name, spec.param_count(), out_elems * (k2 - 1) * spec.in_channels,
            out_elems * k2 * spec.in_channels, 1};
}

report::FlopRow fc_row(const std::string& name, const nn::FcSpec& spec) {
    return {name, spec.param_count(), int64_t(spec.in_dim - 1) * spec.out_dim,
            int64_t(spec.in_dim) * spec.out_dim, 1};
}

// FC-stack flops (adds + mults) of one level, the part early termination can
// skip.
int64_t level_fc_flops(int l) {
    int64_t total = 0;
    for (const auto& spec : {fc1_spec(l), fc2_spec(l), head_spec(l)}) {
        total += int64_t(spec.in_dim - 1) * spec.out_dim; // adds
        total += int64_t(spec.in_dim) * spec.out_dim;     // mults
    }
    return total;
}

} // namespace

report::FlopReport eth_cnn_flop_report() {
    report::FlopReport r;
    // conv output edges per branch: input edge / 4, then / 2, / 2
    const int out1[3] = {4, 8, 16};
    const int out2[3] = {2, 4, 8};
    const int out3[3] = {1, 2, 4};
    for (int b = 0; b < 3; ++b)
        r.rows.push_back(conv_row("C1-" + std::to_string(b + 1), conv1_spec(), out1[b]));
    for (int b = 0; b < 3; ++b)
        r.rows.push_back(conv_row("C2-" + std::to_string(b + 1), conv2_spec(), out2[b]));
    for (int b = 0; b < 3; ++b)
        r.rows.push_back(conv_row("C3-" + std::to_string(b + 1), conv3_spec(), out3[b]));
    for (int l = 0; l < 3; ++l)
        r.rows.push_back(fc_row("f1-" + std::to_string(l + 1), fc1_spec(l)));
    for (int l = 0; l < 3; ++l)
        r.rows.push_back(fc_row("f2-" + std::to_string(l + 1), fc2_spec(l)));
    for (int l = 0; l < 3; ++l)
        r.rows.push_back(fc_row("y" + std::to_string(l + 1), head_spec(l)));
    return r;
}

report::FlopReport eth_cnn_expected_table() {
    report::FlopReport r;
    r.rows = {
        {"C1-1", 256, 3840, 4096, 1},
        {"C1-2", 256, 15360, 16384, 1},
        {"C1-3", 256, 61440, 65536, 1},
        {"C2-1", 1536, 4608, 6144, 1},
        {"C2-2", 1536, 18432, 24576, 1},
        {"C2-3", 1536, 73728, 98304, 1},
        {"C3-1", 3072, 2304, 3072, 1},
        {"C3-2", 3072, 9216, 12288, 1},
        {"C3-3", 3072, 36864, 49152, 1},
        {"f1-1", 172032, 171968, 172032, 1},
        {"f1-2", 344064, 343936, 344064, 1},
        {"f1-3", 688128, 687872, 688128, 1},
        {"f2-1", 3120, 3072, 3120, 1},
        {"f2-2", 12384, 12288, 12384, 1},
        {"f2-3", 49344, 49152, 49344, 1},
        {"y1", 49, 48, 49, 1},
        {"y2", 388, 384, 388, 1},
        {"y3", 3088, 3072, 3088, 1},
    };
    return r;
}

CnnTrainResult train_eth_cnn(std::span<const data::CtuSample> records,
                             const CnnTrainConfig& cfg) {
    if (records.empty()) throw argument_error("train_eth_cnn: empty database");
    if (cfg.batch_size <= 0 || cfg.iterations <= 0)
        throw argument_error("train_eth_cnn: bad batch size or iteration count");

    Rng seed_rng(cfg.seed);
    Rng init_rng = seed_rng.fork(1);
    Rng dropout_rng = seed_rng.fork(2);
    Rng shuffle_rng = seed_rng.fork(3);

    CnnTrainResult result;
    result.params = EthCnnParams::canonical();
    result.params.init(init_rng, cfg.init_stddev);

    auto param_ptrs = result.params.tensors();
    nn::SgdState sgd(cfg.sgd, param_ptrs);

    EthCnnParams grads = EthCnnParams::canonical();
    const auto grad_ptrs = grads.tensors();
    std::vector<const nn::Tensor*> grad_cptrs(grad_ptrs.begin(), grad_ptrs.end());

    std::vector<uint32_t> order(records.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = uint32_t(i);
    size_t cursor = order.size(); // trigger shuffle on first use
    uint64_t epoch = 0;

    EthCnnForwardOptions fwd;
    fwd.training = true;
    fwd.dropout_rng = &dropout_rng;

    EthCnnCache<float> cache;
    std::array<nn::TensorT<float>, 3> dlogits;
    result.loss_curve.reserve(size_t(cfg.iterations));

    for (int64_t it = 0; it < cfg.iterations; ++it) {
        grads.zero();
        double batch_loss = 0.0;
        for (int b = 0; b < cfg.batch_size; ++b) {
            if (cursor >= order.size()) {
                Rng epoch_rng = shuffle_rng.fork(++epoch);
                for (size_t i = order.size() - 1; i > 0; --i)
                    std::swap(order[i], order[epoch_rng.below(i + 1)]);
                cursor = 0;
            }
            const data::CtuSample& rec = records[order[cursor++]];
            eth_cnn_forward(result.params, rec.block.data(), rec.qp, fwd, cache);
            batch_loss += double(eth_cnn_loss(cache, rec.labels, &dlogits));
            const float scale = 1.0f / float(cfg.batch_size);
            for (auto& t : dlogits)
                for (auto& v : t.data) v *= scale;
            eth_cnn_backward(result.params, cache, dlogits, grads);
        }
        sgd.step(param_ptrs, grad_cptrs);
        result.loss_curve.push_back(float(batch_loss / cfg.batch_size));
        if (cfg.log_every > 0 && (it % cfg.log_every == 0 || it + 1 == cfg.iterations))
            std::cerr << "iter " << it << " loss " << result.loss_curve.back() << " lr "
                      << sgd.learning_rate() << "\n";
    }
    return result;
}

AccuracyReport eval_cnn_accuracy(const EthCnnParams& params,
                                 std::span<const data::CtuSample> records) {
    using hcpm::CuLabel;
    AccuracyReport rep;
    EthCnnForwardOptions fwd; // no early termination: all cells emitted
    EthCnnCache<float> cache;
    for (const data::CtuSample& rec : records) {
        eth_cnn_forward(params, rec.block.data(), rec.qp, fwd, cache);
        const hcpm::HcpmProb probs = to_hcpm_prob(cache);
        auto tally = [&](int level, CuLabel truth, float p) {
            if (truth == CuLabel::Null) return;
            ++rep.total[level];
            const bool pred_split = p >= 0.5f;
            if (pred_split == (truth == CuLabel::Split)) ++rep.correct[level];
        };
        tally(0, rec.labels.level1, probs.p1);
        for (int i = 0; i < 4; ++i) tally(1, rec.labels.level2[i], probs.p2[i]);
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) tally(2, rec.labels.level3[i][j], probs.p3[i][j]);
    }
    return rep;
}

EarlyTermSavings measure_early_term_savings(const EthCnnParams& params,
                                            std::span<const data::CtuSample> records,
                                            const hcpm::ThresholdSet& thresholds) {
    const report::FlopReport table = eth_cnn_flop_report();
    const double total_flops = double(table.total_adds() + table.total_mults());

    EthCnnForwardOptions fwd;
    fwd.early_term = true;
    fwd.thresholds = thresholds;
    EthCnnCache<float> cache;

    std::map<int, std::pair<double, int64_t>> acc; // qp -> (skipped flops, samples)
    double skipped_all = 0.0;
    for (const data::CtuSample& rec : records) {
        eth_cnn_forward(params, rec.block.data(), rec.qp, fwd, cache);
        double skipped = 0.0;
        if (!cache.level_computed[1]) skipped += double(level_fc_flops(1));
        if (!cache.level_computed[2]) skipped += double(level_fc_flops(2));
        auto& [sum, n] = acc[rec.qp];
        sum += skipped;
        ++n;
        skipped_all += skipped;
    }

    EarlyTermSavings out;
    for (const auto& [qp, pair] : acc)
        out.per_qp[qp] = pair.second ? pair.first / (double(pair.second) * total_flops) : 0.0;
    out.overall = records.empty() ? 0.0 : skipped_all / (double(records.size()) * total_flops);
    return out;
}

void save_eth_cnn(const std::string& path, const EthCnnParams& params) {
    std::vector<io::NamedTensor> tensors;
    const auto names = EthCnnParams::tensor_names();
    const auto ptrs = params.tensors();
    for (size_t i = 0; i < ptrs.size(); ++i) tensors.push_back({names[i], *ptrs[i]});
    io::ethm_write(path, io::kModelKindCnn, tensors);
}

EthCnnParams load_eth_cnn(const std::string& path) {
    const io::ModelFile mf = io::ethm_read(path);
    if (mf.kind != io::kModelKindCnn) throw data_error("load_eth_cnn: not a cnn model file");
    EthCnnParams p = EthCnnParams::canonical();
    const auto names = EthCnnParams::tensor_names();
    auto ptrs = p.tensors();
    for (size_t i = 0; i < ptrs.size(); ++i) {
        const nn::Tensor& t = mf.find(names[i]);
        if (t.dims != ptrs[i]->dims) throw data_error("load_eth_cnn: tensor shape mismatch");
        *ptrs[i] = t;
    }
    return p;
}

} // namespace cupart::cnn
