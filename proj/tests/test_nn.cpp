#include "doctest.h"

#include <cmath>

#include "cupart/nn/grad_check.hpp"
#include "cupart/nn/init.hpp"
#include "cupart/nn/loss.hpp"
#include "cupart/nn/ops.hpp"
#include "cupart/nn/sgd.hpp"
#include "cupart/rng.hpp"

using namespace cupart;
using namespace cupart::nn;

namespace {

template <typename T>
TensorT<T> random_tensor(std::vector<int> dims, Rng& rng, double scale = 1.0) {
    TensorT<T> t(std::move(dims));
    for (auto& v : t.data) v = T((rng.uniform() * 2.0 - 1.0) * scale);
    return t;
}

} // namespace

TEST_CASE("tensor shape checks") {
    Tensor t({2, 3});
    CHECK(t.size() == 6);
    CHECK_THROWS_AS(Tensor({0, 3}), shape_error);
    CHECK_THROWS_AS(Tensor({2, -1}), shape_error);
}

TEST_CASE("conv_forward dimensions and values") {
    Rng rng(7);
    // 16x16x1 input, k=4, 16 filters -> 4x4x16
    ConvSpec spec{1, 16, 4};
    Tensor in = random_tensor<float>({16, 16, 1}, rng);
    Tensor w = random_tensor<float>({4, 4, 1, 16}, rng);
    Tensor out = conv_forward(in, spec, w);
    CHECK(out.dims == std::vector<int>{4, 4, 16});

    // all-zero input stays zero
    Tensor zin({16, 16, 1});
    Tensor zout = conv_forward(zin, spec, w);
    for (float v : zout.data) CHECK(v == 0.0f);

    // 2x2 ones * 2x2 ones kernel = 4
    ConvSpec s2{1, 1, 2};
    Tensor i2({2, 2, 1}), w2({2, 2, 1, 1});
    i2.fill(1.0f);
    w2.fill(1.0f);
    Tensor o2 = conv_forward(i2, s2, w2);
    CHECK(o2.size() == 1);
    CHECK(o2.data[0] == doctest::Approx(4.0f));

    CHECK_THROWS_AS(conv_forward(random_tensor<float>({15, 16, 1}, rng), spec, w), shape_error);
    CHECK_THROWS_AS(conv_forward(in, spec, random_tensor<float>({4, 4, 1, 8}, rng)),
                    shape_error);
}

TEST_CASE("fc_forward basics") {
    Rng rng(8);
    FcSpec spec{3, 3};
    Tensor w({3, 3});
    for (int i = 0; i < 3; ++i) w.data[i * 3 + i] = 1.0f; // identity
    Tensor x = random_tensor<float>({3}, rng);
    Tensor y = fc_forward(x, spec, w);
    for (int i = 0; i < 3; ++i) CHECK(y.data[i] == doctest::Approx(x.data[i]));

    Tensor zero({3});
    Tensor yz = fc_forward(zero, spec, w);
    for (float v : yz.data) CHECK(v == 0.0f);

    CHECK_THROWS_AS(fc_forward(random_tensor<float>({4}, rng), spec, w), shape_error);
    CHECK(FcSpec{2688, 64}.param_count() == 172032);
    CHECK(ConvSpec{16, 24, 2}.param_count() == 1536);
}

TEST_CASE("conv and fc are linear") {
    Rng rng(9);
    ConvSpec spec{2, 3, 2};
    Tensor w = random_tensor<float>({2, 2, 2, 3}, rng);
    Tensor x = random_tensor<float>({4, 4, 2}, rng);
    Tensor y = random_tensor<float>({4, 4, 2}, rng);
    const float a = 1.7f;

    Tensor fx = conv_forward(x, spec, w);
    Tensor fy = conv_forward(y, spec, w);
    Tensor ax = x;
    for (auto& v : ax.data) v *= a;
    Tensor fax = conv_forward(ax, spec, w);
    Tensor xy = x;
    for (size_t i = 0; i < xy.size(); ++i) xy.data[i] += y.data[i];
    Tensor fxy = conv_forward(xy, spec, w);
    for (size_t i = 0; i < fx.size(); ++i) {
        CHECK(fax.data[i] == doctest::Approx(a * fx.data[i]).epsilon(1e-5));
        CHECK(fxy.data[i] == doctest::Approx(fx.data[i] + fy.data[i]).epsilon(1e-5));
    }
}

TEST_CASE("activations") {
    Tensor x({3});
    x.data = {-1.5f, 0.0f, 2.0f};
    Tensor r = relu(x);
    CHECK(r.data[0] == 0.0f);
    CHECK(r.data[1] == 0.0f);
    CHECK(r.data[2] == 2.0f);

    Tensor s = sigmoid(x);
    CHECK(s.data[1] == doctest::Approx(0.5));
    Rng rng(11);
    for (int k = 0; k < 32; ++k) {
        const float v = float(rng.uniform() * 16.0 - 8.0);
        const float sp = sigmoid_scalar(v), sn = sigmoid_scalar(-v);
        CHECK(sp + sn == doctest::Approx(1.0).epsilon(1e-6));
        CHECK(sp > 0.0f);
        CHECK(sp < 1.0f);
    }
}

TEST_CASE("dropout") {
    Rng rng(12);
    Tensor x({1000});
    x.fill(1.0f);

    auto [same, mask0] = dropout_train(x, 0.0, rng);
    for (float v : same.data) CHECK(v == 1.0f);

    Tensor big({1000000});
    big.fill(1.0f);
    auto [y, mask] = dropout_train(big, 0.5, rng);
    int64_t zeros = 0;
    for (float v : y.data)
        if (v == 0.0f) ++zeros;
    const double frac = double(zeros) / double(big.size());
    CHECK(frac > 0.49);
    CHECK(frac < 0.51);
    for (float v : y.data) CHECK((v == 0.0f || v == 2.0f));

    CHECK_THROWS_AS(dropout_train(x, 1.0, rng), argument_error);
    CHECK_THROWS_AS(dropout_train(x, -0.1, rng), argument_error);
}

TEST_CASE("masked cross entropy") {
    Tensor pred({1}), truth({1}), mask({1});
    pred.data[0] = 0.5f;
    truth.data[0] = 1.0f;
    mask.data[0] = 1.0f;
    auto r = masked_cross_entropy(pred, truth, mask);
    CHECK(r.loss == doctest::Approx(std::log(2.0)).epsilon(1e-6));

    mask.data[0] = 0.0f;
    auto r0 = masked_cross_entropy(pred, truth, mask);
    CHECK(r0.loss == 0.0f);
    CHECK(r0.grad.data[0] == 0.0f);

    Tensor p2({2}), t2({2}), m2({2});
    p2.data = {0.9f, 0.1f};
    t2.data = {1.0f, 0.0f};
    m2.data = {1.0f, 1.0f};
    auto r2 = masked_cross_entropy(p2, t2, m2);
    CHECK(r2.loss == doctest::Approx(-2.0 * std::log(0.9)).epsilon(1e-5));

    // clamp keeps extreme predictions finite
    Tensor p3({1}), t3({1}), m3({1});
    p3.data[0] = 1.0f;
    t3.data[0] = 0.0f;
    m3.data[0] = 1.0f;
    auto r3 = masked_cross_entropy(p3, t3, m3);
    CHECK(std::isfinite(r3.loss));
}

TEST_CASE("sgd step and decay schedule") {
    SgdConfig cfg{0.1, 0.0, 0.99, 2000};
    Tensor p({1}), g({1});
    p.data[0] = 1.0f;
    g.data[0] = 1.0f;
    std::vector<Tensor*> params{&p};
    std::vector<const Tensor*> grads{&g};
    SgdState sgd(cfg, params);
    sgd.step(params, grads);
    CHECK(p.data[0] == doctest::Approx(0.9f));

    // zero gradient, zero velocity: parameters unchanged
    Tensor q({2});
    q.data = {3.0f, -4.0f};
    Tensor zg({2});
    std::vector<Tensor*> qp{&q};
    std::vector<const Tensor*> qg{&zg};
    SgdState sgd2(SgdConfig{0.01, 0.9, 0.99, 2000}, qp);
    sgd2.step(qp, qg);
    CHECK(q.data[0] == 3.0f);
    CHECK(q.data[1] == -4.0f);

    // lr at iteration 4000 with 1%/2000 decay
    SgdState sgd3(SgdConfig{0.01, 0.9, 0.99, 2000}, qp);
    for (int i = 0; i < 4000; ++i) sgd3.step(qp, qg);
    CHECK(sgd3.learning_rate() == doctest::Approx(0.01 * 0.99 * 0.99).epsilon(1e-12));
}

TEST_CASE("grad check: fc + sigmoid + cross entropy") {
    Rng rng(31);
    using T = double;
    const FcSpec spec{6, 4};
    TensorT<T> w = random_tensor<T>({6, 4}, rng, 0.5);
    TensorT<T> x = random_tensor<T>({6}, rng);
    TensorT<T> truth({4}), mask({4});
    for (int i = 0; i < 4; ++i) {
        truth.data[i] = rng.uniform() < 0.5 ? 0.0 : 1.0;
        mask.data[i] = i == 2 ? 0.0 : 1.0; // one masked-out coordinate
    }

    auto loss_fn = [&]() -> T {
        TensorT<T> p = sigmoid(fc_forward(x, spec, w));
        return masked_cross_entropy(p, truth, mask).loss;
    };

    // analytic gradient
    TensorT<T> probs = sigmoid(fc_forward(x, spec, w));
    TensorT<T> dlogits({4});
    for (int i = 0; i < 4; ++i)
        dlogits.data[i] = mask.data[i] == 0.0 ? 0.0 : probs.data[i] - truth.data[i];
    TensorT<T> gx, gw({6, 4});
    fc_backward(x, spec, w, dlogits, gx, gw);

    std::vector<TensorT<T>*> params{&w};
    std::vector<const TensorT<T>*> grads{&gw};
    Rng check_rng(5);
    auto res = grad_check<T>(loss_fn, params, grads, 1e-4, 200, check_rng);
    CHECK(res.max_rel_error < 1e-3);

    // masked-out output: gradient of its column is exactly zero, and the
    // numeric difference vanishes as well
    for (int i = 0; i < 6; ++i) CHECK(gw.data[i * 4 + 2] == 0.0);
    const double before = loss_fn();
    w.data[2] += 1e-4;
    const double after = loss_fn();
    w.data[2] -= 1e-4;
    CHECK(std::abs(after - before) < 1e-6);
}

TEST_CASE("conv backward matches finite differences") {
    Rng rng(32);
    using T = double;
    ConvSpec spec{2, 3, 2};
    TensorT<T> w = random_tensor<T>({2, 2, 2, 3}, rng, 0.5);
    TensorT<T> x = random_tensor<T>({4, 4, 2}, rng);
    TensorT<T> target = random_tensor<T>({2, 2, 3}, rng);

    auto loss_fn = [&]() -> T {
        TensorT<T> y = conv_forward(x, spec, w);
        T l = 0;
        for (size_t i = 0; i < y.size(); ++i) {
            const T d = y.data[i] - target.data[i];
            l += 0.5 * d * d;
        }
        return l;
    };

    TensorT<T> y = conv_forward(x, spec, w);
    TensorT<T> dy(y.dims);
    for (size_t i = 0; i < y.size(); ++i) dy.data[i] = y.data[i] - target.data[i];
    TensorT<T> gx, gw;
    conv_backward(x, spec, w, dy, gx, gw);

    std::vector<TensorT<T>*> params{&w};
    std::vector<const TensorT<T>*> grads{&gw};
    Rng check_rng(6);
    auto res = grad_check<T>(loss_fn, params, grads, 1e-4, 200, check_rng);
    CHECK(res.max_rel_error < 1e-3);
}

TEST_CASE("truncated normal init stays within two sigma") {
    Rng rng(13);
    Tensor t({20000});
    truncated_normal_fill(t, rng, 0.1);
    double mean = 0.0;
    for (float v : t.data) {
        CHECK(std::abs(v) <= 0.2f);
        mean += v;
    }
    mean /= double(t.size());
    CHECK(std::abs(mean) < 0.005);
}
