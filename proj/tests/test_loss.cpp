#include <doctest.h>

#include <cmath>

#include "loss.hpp"
#include "test_support.hpp"

using namespace vxr;
using namespace vxr_test;

namespace {

// Builds AuxOutputs directly from logit tensors so the loss can be probed
// without a network. `as_params` registers the aux logits as parameters.
template <typename S>
AuxOutputs<S> manual_outputs(Graph<S>& g, const std::array<Tensor<S>, 4>& aux, const Tensor<S>& final_logits,
                             bool aux_as_params = false) {
    AuxOutputs<S> out;
    for (int i = 0; i < 4; ++i) {
        out.aux_logits[static_cast<std::size_t>(i)] =
            aux_as_params ? g.param("aux" + std::to_string(i), aux[static_cast<std::size_t>(i)])
                          : g.input(aux[static_cast<std::size_t>(i)]);
        out.aux_probs[static_cast<std::size_t>(i)] = softmax_channels(aux[static_cast<std::size_t>(i)]);
    }
    out.final_logits = g.input(final_logits);
    out.final_probs = softmax_channels(final_logits);
    return out;
}

LabelBatch zero_labels(std::int64_t d, std::int64_t h, std::int64_t w) {
    LabelBatch lb;
    lb.n = 1;
    lb.d = d;
    lb.h = h;
    lb.w = w;
    lb.ids.assign(static_cast<std::size_t>(d * h * w), 0);
    return lb;
}

}  // namespace

TEST_CASE("aux weight schedule follows the decayed floor form") {
    LossConfig cfg;
    cfg.aux_weight_init = 1.0;
    cfg.aux_floor = 1e-3;
    cfg.aux_decay = 0.5;
    cfg.decay_interval = 100;
    CHECK(aux_weight(cfg, 0) == 1.0);
    CHECK(aux_weight(cfg, 250) == doctest::Approx(0.25));
    CHECK(aux_weight(cfg, 10000000) == doctest::Approx(1e-3));
    // Monotone non-increasing.
    double prev = aux_weight(cfg, 0);
    for (std::int64_t it = 0; it < 3000; it += 97) {
        const double w = aux_weight(cfg, it);
        CHECK(w <= prev + 1e-15);
        prev = w;
    }
}

TEST_CASE("uniform logits with four classes cost ln 4 per voxel") {
    Graph<double> g;
    std::array<Tensor<double>, 4> aux;
    for (auto& t : aux) t = Tensor<double>({1, 4, 2, 2, 2});
    Tensor<double> fin({1, 4, 2, 2, 2});
    auto outputs = manual_outputs(g, aux, fin);
    LossConfig cfg;
    cfg.lambda = 0;
    cfg.aux_weight_init = 0;
    cfg.aux_floor = 0;
    auto loss = total_loss(g, outputs, zero_labels(2, 2, 2), cfg, 0);
    CHECK(g.value(loss)[0] == doctest::Approx(std::log(4.0)).epsilon(1e-6));
}

TEST_CASE("with lambda and aux weights zero the loss is the plain final cross entropy") {
    Rng rng(31);
    Graph<double> g;
    std::array<Tensor<double>, 4> aux;
    for (auto& t : aux) t = random_tensor<double>({1, 3, 3, 3, 3}, rng, -2.0, 2.0);
    auto fin = random_tensor<double>({1, 3, 3, 3, 3}, rng, -2.0, 2.0);
    auto labels = random_labels(1, 3, 3, 3, 3, rng);
    auto outputs = manual_outputs(g, aux, fin);
    LossConfig cfg;
    cfg.lambda = 0;
    cfg.aux_weight_init = 0;
    cfg.aux_floor = 0;
    auto loss = total_loss(g, outputs, labels, cfg, 0);

    // Standalone oracle: mean over voxels of -log softmax probability.
    double expect = 0;
    const std::int64_t spatial = 27;
    for (std::int64_t v = 0; v < spatial; ++v) {
        double denom = 0;
        for (std::int64_t c = 0; c < 3; ++c) denom += std::exp(fin[c * spatial + v]);
        const std::uint8_t y = labels.ids[static_cast<std::size_t>(v)];
        expect += -std::log(std::exp(fin[y * spatial + v]) / denom);
    }
    expect /= static_cast<double>(spatial);
    CHECK(g.value(loss)[0] == doctest::Approx(expect).epsilon(1e-9));
}

TEST_CASE("regularizer isolates: loss difference equals lambda times weight-norm difference") {
    Rng rng(32);
    std::array<Tensor<double>, 4> aux;
    for (auto& t : aux) t = random_tensor<double>({1, 2, 2, 2, 2}, rng);
    auto fin = random_tensor<double>({1, 2, 2, 2, 2}, rng);
    auto labels = random_labels(1, 2, 2, 2, 2, rng);
    LossConfig cfg;
    cfg.lambda = 0.37;

    auto run = [&](const Tensor<double>& w) {
        Graph<double> g;
        g.param("frozen.w", w);  // participates in the L2 term only
        auto outputs = manual_outputs(g, aux, fin);
        auto loss = total_loss(g, outputs, labels, cfg, 0);
        return g.value(loss)[0];
    };
    auto w1 = random_tensor<double>({2, 2, 3, 3, 3}, rng);
    auto w2 = random_tensor<double>({2, 2, 3, 3, 3}, rng);
    double s1 = 0, s2 = 0;
    for (std::int64_t i = 0; i < w1.numel(); ++i) s1 += w1[i] * w1[i];
    for (std::int64_t i = 0; i < w2.numel(); ++i) s2 += w2[i] * w2[i];
    CHECK(run(w1) - run(w2) == doctest::Approx(cfg.lambda * (s1 - s2)).epsilon(1e-12));
}

TEST_CASE("loss is non-negative for non-negative lambda") {
    Rng rng(33);
    Graph<double> g;
    g.param("w1.w", random_tensor<double>({2, 2, 3, 3, 3}, rng));
    std::array<Tensor<double>, 4> aux;
    for (auto& t : aux) t = random_tensor<double>({1, 2, 2, 2, 2}, rng, -4.0, 4.0);
    auto fin = random_tensor<double>({1, 2, 2, 2, 2}, rng, -4.0, 4.0);
    auto outputs = manual_outputs(g, aux, fin);
    LossConfig cfg;
    auto loss = total_loss(g, outputs, random_labels(1, 2, 2, 2, 2, rng), cfg, 0);
    CHECK(g.value(loss)[0] >= 0.0);
}

TEST_CASE("gradient on one aux head scales linearly in its weight") {
    Rng rng(34);
    std::array<Tensor<double>, 4> aux;
    for (auto& t : aux) t = random_tensor<double>({1, 2, 2, 2, 2}, rng);
    auto fin = random_tensor<double>({1, 2, 2, 2, 2}, rng);
    auto labels = random_labels(1, 2, 2, 2, 2, rng);

    auto grad_for = [&](double w_init) {
        Graph<double> g;
        auto outputs = manual_outputs(g, aux, fin, /*aux_as_params=*/true);
        LossConfig cfg;
        cfg.lambda = 0;
        cfg.aux_weight_init = w_init;
        cfg.aux_floor = 0;
        auto loss = total_loss(g, outputs, labels, cfg, 0);
        return g.backward(loss);
    };
    auto g1 = grad_for(1.0);
    auto g2 = grad_for(0.5);
    const Tensor<double>* a1 = g1.find("aux0");
    const Tensor<double>* a2 = g2.find("aux0");
    REQUIRE(a1 != nullptr);
    REQUIRE(a2 != nullptr);
    for (std::int64_t i = 0; i < a1->numel(); ++i) {
        CHECK((*a1)[i] == doctest::Approx(2.0 * (*a2)[i]).epsilon(1e-9));
    }
}

TEST_CASE("perfect prediction drives the cross entropy to zero") {
    auto make_fin = [&](double margin) {
        Tensor<double> fin({1, 2, 2, 2, 2});
        const std::int64_t spatial = 8;
        for (std::int64_t v = 0; v < spatial; ++v) fin[v] = margin;  // class 0 logit
        return fin;
    };
    LossConfig cfg;
    cfg.lambda = 0;
    cfg.aux_weight_init = 0;
    cfg.aux_floor = 0;
    std::array<Tensor<double>, 4> aux;
    for (auto& t : aux) t = Tensor<double>({1, 2, 2, 2, 2});
    double prev = 1e9;
    for (double margin : {5.0, 10.0, 20.0, 40.0}) {
        Graph<double> g;
        auto outputs = manual_outputs(g, aux, make_fin(margin));
        const double l = g.value(total_loss(g, outputs, zero_labels(2, 2, 2), cfg, 0))[0];
        CHECK(l < prev);
        prev = l;
    }
    CHECK(prev < 1e-9);
}

TEST_CASE("labels out of range are a data error") {
    Graph<double> g;
    std::array<Tensor<double>, 4> aux;
    for (auto& t : aux) t = Tensor<double>({1, 4, 2, 2, 2});
    auto outputs = manual_outputs(g, aux, Tensor<double>({1, 4, 2, 2, 2}));
    auto labels = zero_labels(2, 2, 2);
    labels.ids[3] = 7;
    LossConfig cfg;
    CHECK_THROWS_AS(total_loss(g, outputs, labels, cfg, 0), data_error);
}
