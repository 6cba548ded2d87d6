#include <doctest.h>

#include "autodiff.hpp"
#include "loss.hpp"
#include "netspec.hpp"
#include "test_support.hpp"

using namespace vxr;
using namespace vxr_test;

TEST_CASE("relu gradient is the positive indicator, zero at zero") {
    Graph<double> g;
    Tensor<double> x({1, 1, 1, 1, 5});
    x[0] = -2.0;
    x[1] = 0.0;
    x[2] = 3.0;
    x[3] = -0.5;
    x[4] = 1.0;
    auto xn = g.param("x", x);
    auto loss = g.sum(g.relu(xn));
    auto grads = g.backward(loss);
    const Tensor<double>* gx = grads.find("x");
    REQUIRE(gx != nullptr);
    CHECK((*gx)[0] == 0.0);
    CHECK((*gx)[1] == 0.0);
    CHECK((*gx)[2] == 1.0);
    CHECK((*gx)[3] == 0.0);
    CHECK((*gx)[4] == 1.0);
}

TEST_CASE("zero-scaled loss yields exactly zero gradients") {
    Rng rng(8);
    Graph<double> g;
    auto x = g.input(random_tensor<double>({1, 2, 4, 4, 4}, rng));
    auto w = g.param("w", random_tensor<double>({2, 2, 3, 3, 3}, rng));
    auto loss = g.scale(g.sum(g.conv3d(x, w, Graph<double>::none, ConvSpec::cube(2, 3, 1, 1))), 0.0);
    auto grads = g.backward(loss);
    const Tensor<double>* gw = grads.find("w");
    REQUIRE(gw != nullptr);
    for (std::int64_t i = 0; i < gw->numel(); ++i) CHECK((*gw)[i] == 0.0);
}

TEST_CASE("two-layer conv net passes central finite differences") {
    Rng rng(21);
    ParamStore<double> params;
    params.add("w1", random_normal_tensor<double>({2, 1, 3, 3, 3}, rng, 0.3));
    params.add("b1", random_normal_tensor<double>({2}, rng, 0.3));
    params.add("w2", random_normal_tensor<double>({1, 2, 1, 1, 1}, rng, 0.3));
    const auto x = random_tensor<double>({1, 1, 5, 5, 5}, rng);

    auto build = [&](Graph<double>& g) {
        auto xn = g.input(x);
        auto w1 = g.param("w1", *params.find("w1"));
        auto b1 = g.param("b1", *params.find("b1"));
        auto w2 = g.param("w2", *params.find("w2"));
        auto h = g.relu(g.conv3d(xn, w1, b1, ConvSpec::cube(2, 3, 1, 1, true)));
        auto y = g.conv3d(h, w2, Graph<double>::none, ConvSpec::cube(1, 1, 1, 0));
        return g.sum_squares(y);
    };
    auto report = grad_check(params, build, 1e-4);
    CHECK(report.passed);
    CHECK(report.max_rel_err < 1e-4);
}

TEST_CASE("gradient of a sum of losses equals the sum of gradients") {
    Rng rng(13);
    const auto x = random_tensor<double>({1, 2, 4, 4, 4}, rng);
    const auto w0 = random_normal_tensor<double>({2, 2, 3, 3, 3}, rng, 0.4);

    auto build_parts = [&](Graph<double>& g, int which) {
        auto xn = g.input(x);
        auto wn = g.param("w", w0);
        auto y = g.conv3d(xn, wn, Graph<double>::none, ConvSpec::cube(2, 3, 1, 1));
        auto l1 = g.sum(g.relu(y));
        auto l2 = g.sum_squares(y);
        if (which == 1) return l1;
        if (which == 2) return l2;
        return g.add(l1, l2);
    };

    Graph<double> g1, g2, gs;
    auto ga = g1.backward(build_parts(g1, 1));
    auto gb = g2.backward(build_parts(g2, 2));
    auto gc = gs.backward(build_parts(gs, 3));
    const Tensor<double>&a = ga.grads[0].second, &b = gb.grads[0].second, &c = gc.grads[0].second;
    for (std::int64_t i = 0; i < a.numel(); ++i) CHECK(c[i] == doctest::Approx(a[i] + b[i]).epsilon(1e-12));
}

TEST_CASE("zeroed residual branch passes the upstream gradient through bitwise") {
    Rng rng(55);
    const int ch = 3;
    Graph<double> g;
    auto x = g.param("x", random_tensor<double>({1, ch, 4, 4, 4}, rng));
    auto gamma = g.input(Tensor<double>::full({ch}, 1.0));
    auto beta = g.input(Tensor<double>({ch}));
    RunningStats<double> st1, st2;
    st1.reset(ch);
    st2.reset(ch);
    auto w_zero = g.input(Tensor<double>({ch, ch, 3, 3, 3}));
    const ConvSpec spec = ConvSpec::cube(ch, 3, 1, 1);
    auto t = g.conv3d(g.relu(g.batchnorm(x, gamma, beta, BatchNormMode::train, st1)), w_zero, Graph<double>::none,
                      spec);
    t = g.conv3d(g.relu(g.batchnorm(t, gamma, beta, BatchNormMode::train, st2)), w_zero, Graph<double>::none, spec);
    auto out = g.add(x, t);
    auto loss = g.sum_squares(out);
    auto grads = g.backward(loss);

    // dL/d(out) = 2*out; with a dead branch it must reach x unchanged.
    const Tensor<double>* gx = grads.find("x");
    REQUIRE(gx != nullptr);
    const Tensor<double>& ov = g.value(out);
    for (std::int64_t i = 0; i < gx->numel(); ++i) CHECK((*gx)[i] == 2.0 * ov[i]);
}

TEST_CASE("backward is deterministic across identical graphs") {
    Rng rng(77);
    const auto x = random_tensor<float>({1, 2, 5, 5, 5}, rng);
    const auto w = random_normal_tensor<float>({2, 2, 3, 3, 3}, rng, 0.4);
    auto run = [&]() {
        Graph<float> g;
        auto xn = g.input(x);
        auto wn = g.param("w", w);
        auto y = g.relu(g.conv3d(xn, wn, Graph<float>::none, ConvSpec::cube(2, 3, 1, 1)));
        return g.backward(g.sum_squares(y));
    };
    auto a = run();
    auto b = run();
    CHECK(bitwise_equal(a.grads[0].second, b.grads[0].second));
}

TEST_CASE("grad_check: conv3d with bias chain") {
    Rng rng(101);
    ParamStore<double> params;
    params.add("w", random_normal_tensor<double>({3, 2, 3, 3, 3}, rng, 0.3));
    params.add("bias", random_normal_tensor<double>({3}, rng, 0.3));
    const auto x = random_tensor<double>({2, 2, 4, 4, 4}, rng);
    auto build = [&](Graph<double>& g) {
        auto w = g.param("w", *params.find("w"));
        auto b = g.param("bias", *params.find("bias"));
        return g.sum_squares(g.conv3d(g.input(x), w, b, ConvSpec::cube(3, 3, 1, 1, true)));
    };
    CHECK(grad_check(params, build, 1e-4).passed);
}

TEST_CASE("grad_check: deconv3d chain") {
    Rng rng(102);
    ParamStore<double> params;
    params.add("w", random_normal_tensor<double>({2, 3, 4, 4, 4}, rng, 0.3));
    const auto x = random_tensor<double>({1, 2, 3, 3, 3}, rng);
    auto build = [&](Graph<double>& g) {
        auto w = g.param("w", *params.find("w"));
        return g.sum_squares(g.relu(g.deconv3d(g.input(x), w, ConvSpec::cube(3, 4, 2, 1))));
    };
    CHECK(grad_check(params, build, 1e-4).passed);
}

TEST_CASE("grad_check: batchnorm train mode differentiates through batch statistics") {
    Rng rng(103);
    ParamStore<double> params;
    params.add("gamma", random_tensor<double>({3}, rng, 0.5, 1.5));
    params.add("beta", random_normal_tensor<double>({3}, rng, 0.3));
    params.add("w", random_normal_tensor<double>({3, 3, 3, 3, 3}, rng, 0.3));
    const auto x = random_tensor<double>({2, 3, 4, 4, 4}, rng);
    auto build = [&](Graph<double>& g) {
        RunningStats<double> st;
        st.reset(3);
        auto gamma = g.param("gamma", *params.find("gamma"));
        auto beta = g.param("beta", *params.find("beta"));
        auto w = g.param("w", *params.find("w"));
        auto y = g.batchnorm(g.input(x), gamma, beta, BatchNormMode::train, st);
        return g.sum_squares(g.conv3d(g.relu(y), w, Graph<double>::none, ConvSpec::cube(3, 3, 1, 1)));
    };
    CHECK(grad_check(params, build, 1e-4).passed);
}

TEST_CASE("grad_check: softmax cross entropy from logits") {
    Rng rng(104);
    ParamStore<double> params;
    params.add("w", random_normal_tensor<double>({4, 2, 3, 3, 3}, rng, 0.4));
    const auto x = random_tensor<double>({1, 2, 4, 4, 4}, rng);
    const auto labels = random_labels(1, 4, 4, 4, 4, rng);
    auto build = [&](Graph<double>& g) {
        auto w = g.param("w", *params.find("w"));
        auto logits = g.conv3d(g.input(x), w, Graph<double>::none, ConvSpec::cube(4, 3, 1, 1));
        return g.softmax_xent_mean(logits, labels);
    };
    CHECK(grad_check(params, build, 1e-4).passed);
}

TEST_CASE("grad_check: full pre-activation VoxRes module") {
    Rng rng(105);
    const int ch = 3;
    ParamStore<double> params;
    params.add("bn1.gamma", random_tensor<double>({ch}, rng, 0.5, 1.5));
    params.add("bn1.beta", random_normal_tensor<double>({ch}, rng, 0.2));
    params.add("conv1.w", random_normal_tensor<double>({ch, ch, 3, 3, 3}, rng, 0.3));
    params.add("bn2.gamma", random_tensor<double>({ch}, rng, 0.5, 1.5));
    params.add("bn2.beta", random_normal_tensor<double>({ch}, rng, 0.2));
    params.add("conv2.w", random_normal_tensor<double>({ch, ch, 3, 3, 3}, rng, 0.3));
    const auto x = random_tensor<double>({1, ch, 4, 4, 4}, rng);
    const auto labels = random_labels(1, 4, 4, 4, ch, rng);
    auto build = [&](Graph<double>& g) {
        RunningStats<double> s1, s2;
        s1.reset(ch);
        s2.reset(ch);
        const ConvSpec spec = ConvSpec::cube(ch, 3, 1, 1);
        auto xn = g.input(x);
        auto t = g.relu(g.batchnorm(xn, g.param("bn1.gamma", *params.find("bn1.gamma")),
                                    g.param("bn1.beta", *params.find("bn1.beta")), BatchNormMode::train, s1));
        t = g.conv3d(t, g.param("conv1.w", *params.find("conv1.w")), Graph<double>::none, spec);
        t = g.relu(g.batchnorm(t, g.param("bn2.gamma", *params.find("bn2.gamma")),
                               g.param("bn2.beta", *params.find("bn2.beta")), BatchNormMode::train, s2));
        t = g.conv3d(t, g.param("conv2.w", *params.find("conv2.w")), Graph<double>::none, spec);
        auto out = g.add(xn, t);
        return g.softmax_xent_mean(out, labels);
    };
    CHECK(grad_check(params, build, 1e-4).passed);
}

TEST_CASE("backward demands a scalar loss") {
    Rng rng(9);
    Graph<float> g;
    auto x = g.param("x", random_tensor<float>({1, 2, 3, 3, 3}, rng));
    auto y = g.relu(x);
    CHECK_THROWS_WITH_AS(g.backward(y), doctest::Contains("scalar"), std::runtime_error);
}
