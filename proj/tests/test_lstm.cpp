#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "cupart/lstm/eth_lstm.hpp"
#include "cupart/lstm/train.hpp"
#include "cupart/nn/grad_check.hpp"

using namespace cupart;
using namespace cupart::lstm;

namespace {

hcpm::Hcpm full_split_labels() {
    hcpm::Hcpm h;
    h.level1 = hcpm::CuLabel::Split;
    for (int i = 0; i < 4; ++i) {
        h.level2[i] = hcpm::CuLabel::Split;
        for (int j = 0; j < 4; ++j) h.level3[i][j] = hcpm::CuLabel::Split;
    }
    return h;
}

template <typename T>
std::array<nn::TensorT<T>, 3> random_features(Rng& rng, double scale = 1.0) {
    std::array<nn::TensorT<T>, 3> f;
    for (int l = 0; l < 3; ++l) {
        f[l] = nn::TensorT<T>({kHidden[l]});
        for (auto& v : f[l].data) v = T((rng.uniform() * 2.0 - 1.0) * scale);
    }
    return f;
}

FeatureSequence random_sequence(Rng& rng, int frames, int qp) {
    FeatureSequence seq;
    seq.qp = qp;
    for (int t = 0; t < frames; ++t) {
        auto f = random_features<float>(rng);
        seq.features.push_back({std::move(f[0]), std::move(f[1]), std::move(f[2])});
        seq.labels.push_back(full_split_labels());
        seq.frame_indices.push_back(uint32_t(t));
        seq.record_indices.push_back(size_t(t));
    }
    return seq;
}

} // namespace

TEST_CASE("non-bias parameter count is exactly 757,929") {
    const auto p = EthLstmParams::canonical();
    CHECK(p.non_bias_param_count() == 757929);
    CHECK(p.bias_param_count() == 4 * (64 + 128 + 256));
}

TEST_CASE("cell step: zero weights and zero state") {
    auto p = EthLstmParams::canonical(); // all zeros
    LstmLevelState<float> state(0);
    LstmStepLevelCache<float> cache;
    nn::Tensor x({64});
    x.fill(0.7f);
    lstm_cell_step<float>(p.levels[0], 0, x, state, cache);
    for (int k = 0; k < 64; ++k) {
        CHECK(cache.i.data[k] == doctest::Approx(0.5f)); // sigmoid(0)
        CHECK(cache.g.data[k] == doctest::Approx(0.5f));
        CHECK(cache.u.data[k] == doctest::Approx(0.0f)); // tanh(0)
        CHECK(state.c.data[k] == doctest::Approx(0.0f)); // 0.5*0 + 0.5*0
        CHECK(state.h.data[k] == doctest::Approx(0.0f));
    }
}

TEST_CASE("cell step matches a scalar-loop oracle") {
    // independent elementwise reference on a tiny instance, double precision
    Rng rng(51);
    using P = EthLstmParamsT<double>;
    P p = P::canonical();
    p.init(rng, 0.3);
    const int l = 0, h = kHidden[0];

    nn::TensorT<double> x({h}), h_prev({h}), c_prev({h});
    for (auto& v : x.data) v = rng.uniform() * 2 - 1;
    for (auto& v : h_prev.data) v = rng.uniform() * 2 - 1;
    for (auto& v : c_prev.data) v = rng.uniform() * 2 - 1;

    LstmLevelState<double> state(l);
    state.h = h_prev;
    state.c = c_prev;
    LstmStepLevelCache<double> cache;
    lstm_cell_step<double>(p.levels[l], l, x, state, cache);

    auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
    for (int k = 0; k < h; ++k) {
        double zi = p.levels[l].bi.data[k], zo = p.levels[l].bo.data[k],
               zf = p.levels[l].bf.data[k], zc = p.levels[l].bc.data[k];
        for (int a = 0; a < 2 * h; ++a) {
            const double za = a < h ? x.data[a] : h_prev.data[a - h];
            zi += za * p.levels[l].wi.data[size_t(a) * h + k];
            zo += za * p.levels[l].wo.data[size_t(a) * h + k];
            zf += za * p.levels[l].wf.data[size_t(a) * h + k];
            zc += za * p.levels[l].wc.data[size_t(a) * h + k];
        }
        const double i = sig(zi), o = sig(zo), g = sig(zf), u = std::tanh(zc);
        const double c = i * u + g * c_prev.data[k];
        CHECK(state.c.data[k] == doctest::Approx(c).epsilon(1e-6));
        CHECK(state.h.data[k] == doctest::Approx(o * c).epsilon(1e-6));
    }
}

TEST_CASE("perfect memory with saturated gates") {
    auto p = EthLstmParamsT<float>::canonical();
    // g ~= 1 (large forget bias), i ~= 0 (large negative input bias)
    p.levels[0].bf.fill(50.0f);
    p.levels[0].bi.fill(-50.0f);
    LstmLevelState<float> state(0);
    for (int k = 0; k < 64; ++k) state.c.data[k] = float(k) * 0.01f - 0.3f;
    const nn::Tensor c0 = state.c;
    nn::Tensor x({64});
    x.fill(0.2f);
    LstmStepLevelCache<float> cache;
    for (int t = 0; t < 5; ++t) lstm_cell_step<float>(p.levels[0], 0, x, state, cache);
    for (int k = 0; k < 64; ++k)
        CHECK(state.c.data[k] == doctest::Approx(c0.data[k]).epsilon(1e-5));
}

TEST_CASE("gate activations bounded, states stay finite over 1000 steps") {
    Rng rng(52);
    auto p = EthLstmParams::canonical();
    p.init(rng);
    LstmState<float> state = zero_state<float>();
    LstmStepCache<float> cache;
    for (int t = 0; t < 1000; ++t) {
        auto f = random_features<float>(rng, 1.0);
        for (int l = 0; l < 3; ++l) {
            lstm_cell_step<float>(p.levels[l], l, f[l], state[l], cache[l]);
            for (float v : cache[l].i.data) {
                CHECK(v > 0.0f);
                CHECK(v < 1.0f);
            }
            CHECK(state[l].c.all_finite());
            CHECK(state[l].h.all_finite());
        }
    }
}

TEST_CASE("flop report matches the published table") {
    const auto computed = eth_lstm_flop_report();
    const auto expected = eth_lstm_expected_table();
    const auto diffs = report::diff_reports(expected, computed);
    for (const auto& d : diffs)
        MESSAGE(d.name, " ", d.field, " expected ", d.expected, " actual ", d.actual);
    CHECK(diffs.empty());
    CHECK(computed.total_params() == 757929);
    CHECK(computed.total_adds() == 757118);
    CHECK(computed.total_mults() == 759273);
}

TEST_CASE("bptt gradients match finite differences (double, T=3)") {
    Rng rng(53);
    using P = EthLstmParamsT<double>;
    P params = P::canonical();
    params.init(rng);

    const int T = 3;
    std::vector<std::array<nn::TensorT<double>, 3>> inputs;
    std::vector<hcpm::Hcpm> labels;
    for (int t = 0; t < T; ++t) {
        inputs.push_back(random_features<double>(rng));
        hcpm::Hcpm h = full_split_labels();
        if (t == 1) { // include null cells to exercise masking
            h.level2 = {hcpm::CuLabel::NotSplit, hcpm::CuLabel::Split, hcpm::CuLabel::NotSplit,
                        hcpm::CuLabel::Split};
            for (int j = 0; j < 4; ++j) {
                h.level3[0][j] = hcpm::CuLabel::Null;
                h.level3[2][j] = hcpm::CuLabel::Null;
            }
        }
        labels.push_back(h);
    }
    const double qp_norm = 27.0 / 51.0;

    auto loss_fn = [&]() -> double {
        LstmState<double> state = zero_state<double>();
        LstmStepCache<double> cache;
        LstmForwardOptions opt;
        double total = 0;
        for (int t = 0; t < T; ++t) {
            eth_lstm_frame_forward<double>(params, inputs[size_t(t)], qp_norm, t % kGopSize,
                                           state, opt, cache);
            total += eth_lstm_frame_loss<double>(cache, labels[size_t(t)], nullptr);
        }
        return total;
    };

    P grads = P::canonical();
    {
        LstmState<double> state = zero_state<double>();
        const size_t steps = size_t(T);
        std::vector<LstmStepCache<double>> caches(steps);
        std::vector<std::array<nn::TensorT<double>, 3>> dlogits(steps);
        LstmForwardOptions opt;
        for (int t = 0; t < T; ++t) {
            eth_lstm_frame_forward<double>(params, inputs[size_t(t)], qp_norm, t % kGopSize,
                                           state, opt, caches[size_t(t)]);
            eth_lstm_frame_loss<double>(caches[size_t(t)], labels[size_t(t)], &dlogits[size_t(t)]);
        }
        std::array<nn::TensorT<double>, 3> dh, dc;
        for (int l = 0; l < 3; ++l) {
            dh[l] = nn::TensorT<double>({kHidden[l]});
            dc[l] = nn::TensorT<double>({kHidden[l]});
        }
        for (int t = T - 1; t >= 0; --t)
            for (int l = 0; l < 3; ++l)
                lstm_level_backward<double>(params.levels[l], l, caches[size_t(t)][l],
                                            dlogits[size_t(t)][l], dh[l], dc[l], grads.levels[l]);
    }

    auto param_ptrs = params.tensors();
    const auto grad_ptrs = grads.tensors();
    std::vector<const nn::TensorT<double>*> grad_cptrs(grad_ptrs.begin(), grad_ptrs.end());
    Rng check_rng(54);
    const auto res =
        nn::grad_check<double>(loss_fn, param_ptrs, grad_cptrs, 1e-5, 220, check_rng);
    MESSAGE("lstm max rel err ", res.max_rel_error);
    CHECK(res.max_rel_error < 1e-3);
}

TEST_CASE("repeated identical input converges to a fixed point") {
    Rng rng(55);
    auto p = EthLstmParams::canonical();
    p.init(rng);
    const auto f = random_features<float>(rng, 0.5);
    LstmState<float> state = zero_state<float>();
    LstmStepCache<float> cache;
    LstmForwardOptions opt;
    float prev_p1 = -1.0f;
    float delta = 1.0f;
    for (int t = 0; t < 12; ++t) {
        const auto probs =
            eth_lstm_frame_forward<float>(p, {f[0], f[1], f[2]}, 0.5f, 0, state, opt, cache);
        if (t > 0) delta = std::abs(probs.p1 - prev_p1);
        prev_p1 = probs.p1;
    }
    CHECK(delta < 1e-4);
}

TEST_CASE("zero-state contract: sequences are independent") {
    Rng rng(56);
    auto p = EthLstmParams::canonical();
    p.init(rng);
    FeatureSequence a = random_sequence(rng, 5, 27);
    FeatureSequence b = random_sequence(rng, 5, 27);

    const auto fresh = forward_sequence(p, b);
    // running a first must not change b's outputs
    forward_sequence(p, a);
    const auto again = forward_sequence(p, b);
    REQUIRE(fresh.size() == again.size());
    for (size_t t = 0; t < fresh.size(); ++t) {
        CHECK(fresh[t].p1 == again[t].p1);
        for (int i = 0; i < 4; ++i) CHECK(fresh[t].p2[i] == again[t].p2[i]);
    }

    FeatureSequence bad = a;
    bad.frame_indices[2] = bad.frame_indices[1];
    CHECK_THROWS_AS(forward_sequence(p, bad), sequence_error);
}

TEST_CASE("early termination equivalence on emitted cells") {
    Rng master(57);
    int skipped = 0;
    for (int trial = 0; trial < 30; ++trial) {
        Rng rng = master.fork(trial);
        auto p = EthLstmParams::canonical();
        p.init(rng);
        FeatureSequence seq = random_sequence(rng, 4, 32);
        const auto plain = forward_sequence(p, seq);
        LstmForwardOptions opt;
        opt.early_term = true;
        const auto term = forward_sequence(p, seq, opt);
        for (size_t t = 0; t < plain.size(); ++t) {
            CHECK(term[t].p1 == plain[t].p1);
            const bool l1_notsplit = term[t].p1 < 0.5f;
            if (l1_notsplit) {
                ++skipped;
                for (int i = 0; i < 4; ++i) CHECK_FALSE(term[t].valid2[i]);
            } else {
                for (int i = 0; i < 4; ++i) {
                    CHECK(term[t].valid2[i]);
                    CHECK(term[t].p2[i] == plain[t].p2[i]);
                }
            }
        }
    }
    CHECK(skipped > 0);
}

TEST_CASE("training: window arithmetic, determinism, memorization") {
    Rng rng(58);
    // 30-frame sequence, T=20, overlap 10: windows at 0 and 10
    std::vector<FeatureSequence> seqs{random_sequence(rng, 30, 27)};

    LstmTrainConfig cfg;
    cfg.iterations = 6;
    cfg.batch_size = 2;
    cfg.window = 20;
    cfg.overlap = 10;
    cfg.seed = 7;
    const auto r1 = train_eth_lstm(seqs, cfg);
    const auto r2 = train_eth_lstm(seqs, cfg);
    const auto t1 = r1.params.tensors();
    const auto t2 = r2.params.tensors();
    for (size_t i = 0; i < t1.size(); ++i) CHECK(t1[i]->data == t2[i]->data);

    // a too-short sequence is skipped; with nothing left it is an error
    std::vector<FeatureSequence> shorts{random_sequence(rng, 5, 27)};
    CHECK_THROWS_AS(train_eth_lstm(shorts, cfg), argument_error);

    // T=1 reduces to per-frame training and still runs
    LstmTrainConfig tiny;
    tiny.iterations = 3;
    tiny.batch_size = 2;
    tiny.window = 1;
    tiny.overlap = 0;
    CHECK_NOTHROW(train_eth_lstm(seqs, tiny));
}

TEST_CASE("model file round trip") {
    Rng rng(59);
    auto p = EthLstmParams::canonical();
    p.init(rng);
    const std::string path = (std::filesystem::temp_directory_path() / "l.ethm").string();
    save_eth_lstm(path, p);
    const auto loaded = load_eth_lstm(path);
    const auto a = p.tensors();
    const auto b = loaded.tensors();
    for (size_t i = 0; i < a.size(); ++i) CHECK(a[i]->data == b[i]->data);
    std::remove(path.c_str());
}
