#include "doctest.h"

#include <cstdio>
#include <filesystem>

#include "cupart/cnn/eth_cnn.hpp"
#include "cupart/cnn/train.hpp"
#include "cupart/codec/rd.hpp"
#include "cupart/nn/grad_check.hpp"

using namespace cupart;
using namespace cupart::cnn;

namespace {

std::array<uint8_t, 4096> random_block(Rng& rng) {
    std::array<uint8_t, 4096> b;
    for (auto& v : b) v = uint8_t(rng.below(256));
    return b;
}

data::CtuSample make_sample(Rng& rng, int qp) {
    data::CtuSample s;
    s.block = random_block(rng);
    s.qp = uint8_t(qp);
    s.labels = hcpm::tree_to_hcpm(codec::oracle_rdo_block(s.block.data(), qp).tree);
    return s;
}

} // namespace

TEST_CASE("parameter count is exactly 1,287,189") {
    const auto p = EthCnnParams::canonical();
    CHECK(p.param_count() == 1287189);
    CHECK(kConcatLen == 96 + 384 + 1536 + 32 + 128 + 512);
}

TEST_CASE("preprocess") {
    // constant CTU: all branches identically zero
    std::array<uint8_t, 4096> flat;
    flat.fill(123);
    const auto pre = preprocess_ctu<float>(flat.data());
    CHECK(pre[0].dims == std::vector<int>{16, 16, 1});
    CHECK(pre[1].dims == std::vector<int>{32, 32, 1});
    CHECK(pre[2].dims == std::vector<int>{64, 64, 1});
    for (const auto& t : pre)
        for (float v : t.data) CHECK(v == doctest::Approx(0.0f).epsilon(1e-6));

    // checkerboard of 2x2 tiles: branch-1 output all zero (box means equal the
    // global mean)
    std::array<uint8_t, 4096> board;
    for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 64; ++x) board[y * 64 + x] = ((x / 2 + y / 2) % 2) ? 255 : 0;
    const auto pre2 = preprocess_ctu<float>(board.data());
    for (float v : pre2[0].data) CHECK(v == doctest::Approx(0.0f).epsilon(1e-5));

    // branch-2 output has zero mean per 16x16 output quadrant
    Rng rng(41);
    const auto blk = random_block(rng);
    const auto pre3 = preprocess_ctu<float>(blk.data());
    for (int q = 0; q < 4; ++q) {
        double mean = 0;
        const int qy = (q / 2) * 16, qx = (q % 2) * 16;
        for (int y = 0; y < 16; ++y)
            for (int x = 0; x < 16; ++x) mean += pre3[1].data[(qy + y) * 32 + qx + x];
        mean /= 256.0;
        CHECK(std::abs(mean) < 1e-5);
    }
}

TEST_CASE("forward shapes, zero weights, qp range") {
    Rng rng(42);
    auto params = EthCnnParams::canonical(); // zero weights
    const auto blk = random_block(rng);
    EthCnnCache<float> cache;
    EthCnnForwardOptions opt;
    eth_cnn_forward(params, blk.data(), 32, opt, cache);

    CHECK(cache.a3[0].dims == std::vector<int>{1, 1, 32});
    CHECK(cache.a3[1].dims == std::vector<int>{2, 2, 32});
    CHECK(cache.a3[2].dims == std::vector<int>{4, 4, 32});
    CHECK(cache.concat.size() == 2688);

    const hcpm::HcpmProb probs = to_hcpm_prob(cache);
    CHECK(probs.p1 == doctest::Approx(0.5f)); // sigmoid(0)
    for (int i = 0; i < 4; ++i) CHECK(probs.p2[i] == doctest::Approx(0.5f));

    CHECK_THROWS_AS(eth_cnn_forward(params, blk.data(), 52, opt, cache), argument_error);
    CHECK_THROWS_AS(eth_cnn_forward(params, blk.data(), -1, opt, cache), argument_error);
}

TEST_CASE("early termination: values unchanged, skips exactly NotSplit") {
    Rng master(43);
    int terminated_l2 = 0, terminated_l3 = 0;
    for (int trial = 0; trial < 40; ++trial) {
        Rng rng = master.fork(trial);
        auto params = EthCnnParams::canonical();
        params.init(rng);
        const auto blk = random_block(rng);
        const int qp = int(rng.below(52));

        EthCnnCache<float> plain, term;
        EthCnnForwardOptions opt;
        eth_cnn_forward(params, blk.data(), qp, opt, plain);
        opt.early_term = true;
        eth_cnn_forward(params, blk.data(), qp, opt, term);

        const auto pp = to_hcpm_prob(plain);
        const auto pt = to_hcpm_prob(term);
        CHECK(pt.p1 == pp.p1);

        const bool l1_notsplit = pt.p1 < 0.5f; // ties resolve to split
        if (l1_notsplit) {
            ++terminated_l2;
            for (int i = 0; i < 4; ++i) CHECK_FALSE(pt.valid2[i]);
        } else {
            for (int i = 0; i < 4; ++i) {
                CHECK(pt.valid2[i]);
                CHECK(pt.p2[i] == pp.p2[i]);
            }
            bool all_notsplit = true;
            for (int i = 0; i < 4; ++i)
                if (pt.p2[i] >= 0.5f) all_notsplit = false;
            if (all_notsplit) {
                ++terminated_l3;
                for (int i = 0; i < 4; ++i)
                    for (int j = 0; j < 4; ++j) CHECK_FALSE(pt.valid3[i][j]);
            } else {
                for (int i = 0; i < 4; ++i)
                    for (int j = 0; j < 4; ++j) {
                        CHECK(pt.valid3[i][j]);
                        CHECK(pt.p3[i][j] == pp.p3[i][j]);
                    }
            }
        }
    }
    // both kinds of termination should occur over 40 random nets
    CHECK(terminated_l2 + terminated_l3 > 0);
}

TEST_CASE("flop report matches the published table") {
    const auto computed = eth_cnn_flop_report();
    const auto expected = eth_cnn_expected_table();
    const auto diffs = report::diff_reports(expected, computed);
    for (const auto& d : diffs)
        MESSAGE(d.name, " ", d.field, " expected ", d.expected, " actual ", d.actual);
    CHECK(diffs.empty());
    CHECK(computed.total_params() == 1287189);
    CHECK(computed.total_adds() == 1497584);
    CHECK(computed.total_mults() == 1552149);
}

TEST_CASE("model file round trip") {
    Rng rng(44);
    auto params = EthCnnParams::canonical();
    params.init(rng);
    const std::string path = (std::filesystem::temp_directory_path() / "m.ethm").string();
    save_eth_cnn(path, params);
    const auto loaded = load_eth_cnn(path);
    const auto a = params.tensors();
    const auto b = loaded.tensors();
    for (size_t i = 0; i < a.size(); ++i) CHECK(a[i]->data == b[i]->data);
    std::remove(path.c_str());
}

TEST_CASE("full-model gradient check (double)") {
    Rng rng(45);
    using P = EthCnnParamsT<double>;
    P params = P::canonical();
    params.init(rng);

    std::vector<std::array<uint8_t, 4096>> blocks;
    std::vector<hcpm::Hcpm> labels;
    std::vector<int> qps;
    for (int s = 0; s < 2; ++s) {
        blocks.push_back(random_block(rng));
        qps.push_back(s == 0 ? 22 : 37);
        labels.push_back(
            hcpm::tree_to_hcpm(codec::oracle_rdo_block(blocks.back().data(), qps.back()).tree));
    }

    auto loss_fn = [&]() -> double {
        double total = 0;
        EthCnnCache<double> cache;
        EthCnnForwardOptions opt;
        for (size_t s = 0; s < blocks.size(); ++s) {
            eth_cnn_forward(params, blocks[s].data(), qps[s], opt, cache);
            total += eth_cnn_loss<double>(cache, labels[s]);
        }
        return total;
    };

    P grads = P::canonical();
    {
        EthCnnCache<double> cache;
        EthCnnForwardOptions opt;
        std::array<nn::TensorT<double>, 3> dlogits;
        for (size_t s = 0; s < blocks.size(); ++s) {
            eth_cnn_forward(params, blocks[s].data(), qps[s], opt, cache);
            eth_cnn_loss<double>(cache, labels[s], &dlogits);
            eth_cnn_backward(params, cache, dlogits, grads);
        }
    }

    auto param_ptrs = params.tensors();
    const auto grad_ptrs = grads.tensors();
    std::vector<const nn::TensorT<double>*> grad_cptrs(grad_ptrs.begin(), grad_ptrs.end());
    Rng check_rng(46);
    const auto res =
        nn::grad_check<double>(loss_fn, param_ptrs, grad_cptrs, 1e-5, 220, check_rng);
    MESSAGE("cnn max rel err ", res.max_rel_error);
    CHECK(res.max_rel_error < 1e-3);
}

TEST_CASE("training is deterministic and loss decreases") {
    Rng rng(47);
    std::vector<data::CtuSample> records;
    for (int i = 0; i < 6; ++i) records.push_back(make_sample(rng, 22 + 5 * (i % 4)));

    CnnTrainConfig cfg;
    cfg.iterations = 12;
    cfg.batch_size = 4;
    cfg.seed = 99;
    const auto r1 = train_eth_cnn(records, cfg);
    const auto r2 = train_eth_cnn(records, cfg);
    const auto t1 = r1.params.tensors();
    const auto t2 = r2.params.tensors();
    for (size_t i = 0; i < t1.size(); ++i) CHECK(t1[i]->data == t2[i]->data);
    CHECK(r1.loss_curve.size() == 12);
    for (float l : r1.loss_curve) CHECK(std::isfinite(l));

    CHECK_THROWS_AS(train_eth_cnn(std::vector<data::CtuSample>{}, cfg), argument_error);
}

TEST_CASE("early termination savings bounds") {
    Rng rng(48);
    std::vector<data::CtuSample> records;
    for (int i = 0; i < 4; ++i) records.push_back(make_sample(rng, 32));

    // heads biased so that P1 is always ~0: both lower levels skipped
    auto params = EthCnnParams::canonical();
    for (auto& v : params.head[0].data) v = -100.0f;
    const auto s0 = measure_early_term_savings(params, records);
    const auto table = eth_cnn_flop_report();
    const double level2 = (344064 + 343936) + (12384 + 12288) + (388 + 384);
    const double level3 = (688128 + 687872) + (49344 + 49152) + (3088 + 3072);
    const double expect = (level2 + level3) / double(table.total_adds() + table.total_mults());
    CHECK(s0.overall == doctest::Approx(expect).epsilon(1e-9));

    // heads biased so that P1 and P2 are always ~1: nothing skipped
    for (auto& v : params.head[0].data) v = 100.0f;
    for (auto& v : params.head[1].data) v = 100.0f;
    const auto s1 = measure_early_term_savings(params, records);
    CHECK(s1.overall == 0.0);
}
