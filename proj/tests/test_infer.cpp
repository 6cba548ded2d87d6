#include <doctest.h>

#include "infer.hpp"
#include "test_support.hpp"

using namespace vxr;
using namespace vxr_test;

namespace {

Volume random_volume(std::int64_t channels, std::int64_t d, std::int64_t h, std::int64_t w, Rng& rng) {
    Volume v = Volume::zeros(channels, d, h, w);
    for (auto& x : v.data) x = static_cast<float>(rng.uniform(-1.0, 1.0));
    return v;
}

// Local forward with a known receptive radius of 2: two padded 3^3 convs
// followed by a channel softmax.
struct TinyNet {
    Tensor<float> w1, w2;
    static TinyNet make(std::int64_t in_ch, std::int64_t classes, Rng& rng) {
        TinyNet net;
        net.w1 = random_normal_tensor<float>({3, in_ch, 3, 3, 3}, rng, 0.3);
        net.w2 = random_normal_tensor<float>({classes, 3, 3, 3, 3}, rng, 0.3);
        return net;
    }
    Tensor<float> operator()(const Tensor<float>& x) const {
        const ConvSpec s1 = ConvSpec::cube(static_cast<int>(w1.dim(0)), 3, 1, 1);
        const ConvSpec s2 = ConvSpec::cube(static_cast<int>(w2.dim(0)), 3, 1, 1);
        return softmax_channels(conv3d(relu(conv3d(x, w1, nullptr, s1)), w2, nullptr, s2));
    }
};

}  // namespace

TEST_CASE("plan_tiles enumerates the documented 240x240x48 window set") {
    const TilePlan plan = plan_tiles({240, 240, 48}, 80, 40);
    CHECK(plan.padded_extents == std::array<std::int64_t, 3>{240, 240, 80});
    CHECK(plan.corners.size() == 25);  // 5 x 5 x 1
    std::vector<std::int64_t> d_corners, h_corners;
    for (const auto& c : plan.corners) {
        if (c[1] == 0 && c[2] == 0) d_corners.push_back(c[0]);
        if (c[0] == 0 && c[2] == 0) h_corners.push_back(c[1]);
        CHECK(c[2] == 0);
    }
    CHECK(d_corners == std::vector<std::int64_t>{0, 40, 80, 120, 160});
    CHECK(h_corners == std::vector<std::int64_t>{0, 40, 80, 120, 160});
}

TEST_CASE("plan_tiles degenerate forms") {
    SUBCASE("tile equal to the extents is a single window") {
        const TilePlan plan = plan_tiles({32, 32, 32}, 32, 8);
        CHECK(plan.corners.size() == 1);
        CHECK(plan.corners[0] == std::array<std::int64_t, 3>{0, 0, 0});
    }
    SUBCASE("stride equal to tile partitions divisible extents") {
        const TilePlan plan = plan_tiles({32, 16, 16}, 16, 16);
        CHECK(plan.corners.size() == 2);
    }
    SUBCASE("clamped last corner ends at the boundary") {
        const TilePlan plan = plan_tiles({20, 8, 8}, 8, 8);
        std::vector<std::int64_t> ds;
        for (const auto& c : plan.corners) ds.push_back(c[0]);
        CHECK(ds == std::vector<std::int64_t>{0, 8, 12});
    }
}

TEST_CASE("plan_tiles covers every voxel (exhaustive sweep)") {
    Rng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        const std::array<std::int64_t, 3> ext{8 + rng.uniform_below(20), 8 + rng.uniform_below(20),
                                              8 + rng.uniform_below(20)};
        const std::int64_t tile = 8 + rng.uniform_below(9);
        const std::int64_t stride = 1 + rng.uniform_below(tile);
        const TilePlan plan = plan_tiles(ext, tile, stride);
        std::vector<std::uint8_t> covered(
            static_cast<std::size_t>(plan.padded_extents[0] * plan.padded_extents[1] * plan.padded_extents[2]), 0);
        for (const auto& c : plan.corners) {
            for (std::int64_t z = c[0]; z < c[0] + tile; ++z)
                for (std::int64_t y = c[1]; y < c[1] + tile; ++y)
                    for (std::int64_t x = c[2]; x < c[2] + tile; ++x) {
                        REQUIRE(z < plan.padded_extents[0]);
                        REQUIRE(y < plan.padded_extents[1]);
                        REQUIRE(x < plan.padded_extents[2]);
                        covered[static_cast<std::size_t>((z * plan.padded_extents[1] + y) * plan.padded_extents[2] +
                                                         x)] = 1;
                    }
        }
        for (auto v : covered) CHECK(v == 1);
    }
}

TEST_CASE("single-window prediction equals the direct full-volume forward") {
    const NetworkSpec spec = build_voxresnet(2, 3, 0.0625);
    NetworkParams<float> params = init_params<float>(spec, 5);
    Rng rng(6);
    {
        Graph<float> g;
        forward(g, spec, params, random_tensor<float>({1, 2, 16, 16, 16}, rng), BatchNormMode::train);
    }
    const Volume input = random_volume(2, 16, 16, 16, rng);
    const Volume tiled = predict(spec, params, input, 16, 16);

    Graph<float> g;
    const AuxOutputs<float> direct = forward(g, spec, params, tensor_from_volume(input), BatchNormMode::infer);
    CHECK(std::memcmp(tiled.data.data(), direct.final_probs.data(),
                      tiled.data.size() * sizeof(float)) == 0);
}

TEST_CASE("stitched probabilities stay a valid distribution under overlap") {
    const NetworkSpec spec = build_voxresnet(1, 4, 0.0625);
    NetworkParams<float> params = init_params<float>(spec, 7);
    Rng rng(8);
    {
        Graph<float> g;
        forward(g, spec, params, random_tensor<float>({1, 1, 16, 16, 16}, rng), BatchNormMode::train);
    }
    const Volume input = random_volume(1, 20, 24, 20, rng);
    const Volume probs = predict(spec, params, input, 16, 8);
    CHECK(probs.channels == 4);
    for (std::int64_t v = 0; v < probs.voxels(); ++v) {
        double s = 0;
        for (std::int64_t c = 0; c < 4; ++c) s += probs.data[static_cast<std::size_t>(c * probs.voxels() + v)];
        CHECK(std::abs(s - 1.0) < 1e-6);
    }
}

TEST_CASE("interior voxels of a tiled prediction match the full-volume forward") {
    Rng rng(9);
    const TinyNet net = TinyNet::make(1, 2, rng);
    const int r = 2;  // two 3^3 convs
    const Volume input = random_volume(1, 24, 24, 24, rng);
    const TilePlan plan = plan_tiles({24, 24, 24}, 16, 8);  // overlap 8 >= r

    const Volume tiled = stitch_predict(input, plan, 2, [&](const Tensor<float>& w) { return net(w); });
    const Tensor<float> full = net(tensor_from_volume(input));

    // Compare wherever some covering window keeps the voxel r away from its
    // faces; union coverage means at least one window sees the whole
    // receptive field, and interior agreement requires all of them to.
    std::int64_t checked = 0;
    for (std::int64_t z = 0; z < 24; ++z)
        for (std::int64_t y = 0; y < 24; ++y)
            for (std::int64_t x = 0; x < 24; ++x) {
                bool all_interior = true;
                bool covered = false;
                for (const auto& c : plan.corners) {
                    const bool in = z >= c[0] && z < c[0] + 16 && y >= c[1] && y < c[1] + 16 && x >= c[2] &&
                                    x < c[2] + 16;
                    if (!in) continue;
                    covered = true;
                    const std::int64_t dz = std::min(z - c[0], c[0] + 16 - 1 - z);
                    const std::int64_t dy = std::min(y - c[1], c[1] + 16 - 1 - y);
                    const std::int64_t dx = std::min(x - c[2], c[2] + 16 - 1 - x);
                    if (std::min({dz, dy, dx}) < r) all_interior = false;
                }
                if (!covered || !all_interior) continue;
                ++checked;
                for (std::int64_t c = 0; c < 2; ++c) {
                    const float a = tiled.data[static_cast<std::size_t>(c * tiled.voxels() + (z * 24 + y) * 24 + x)];
                    const float b = full.at({0, c, z, y, x});
                    CHECK(std::abs(a - b) < 1e-5);
                }
            }
    CHECK(checked > 1000);
}

TEST_CASE("prediction is translation-consistent") {
    // Shifting the input by one stride shifts the output: the two stitched
    // predictions are compared where the covering-window sets correspond
    // one-to-one under the shift (away from the first/last corners).
    Rng rng(10);
    const TinyNet net = TinyNet::make(1, 2, rng);
    Volume big = random_volume(1, 16, 16, 52, rng);
    const Volume v1 = crop_volume(big, {0, 0, 0}, {16, 16, 48});
    const Volume v2 = crop_volume(big, {0, 0, 4}, {16, 16, 48});
    const TilePlan plan = plan_tiles({16, 16, 48}, 16, 4);
    const Volume p1 = stitch_predict(v1, plan, 2, [&](const Tensor<float>& w) { return net(w); });
    const Volume p2 = stitch_predict(v2, plan, 2, [&](const Tensor<float>& w) { return net(w); });
    for (std::int64_t z = 0; z < 16; ++z)
        for (std::int64_t y = 0; y < 16; ++y)
            for (std::int64_t x = 20; x < 28; ++x) {
                for (std::int64_t c = 0; c < 2; ++c) {
                    const float a = p1.data[static_cast<std::size_t>(c * p1.voxels() + (z * 16 + y) * 48 + x)];
                    const float b = p2.data[static_cast<std::size_t>(c * p2.voxels() + (z * 16 + y) * 48 + x - 4)];
                    CHECK(a == doctest::Approx(b).epsilon(1e-6));
                }
            }
}

TEST_CASE("argmax label extraction") {
    SUBCASE("plain argmax and tie toward the lowest index") {
        Volume probs = Volume::zeros(4, 1, 1, 2);
        // voxel 0: clear class 1; voxel 1: exact tie between 0 and 2
        probs.data = {0.1f, 0.4f, 0.7f, 0.1f, 0.1f, 0.4f, 0.1f, 0.1f};
        const LabelVolume l = argmax_labels(probs);
        CHECK(l.data[0] == 1);
        CHECK(l.data[1] == 0);
    }
    SUBCASE("one-hot probabilities recover the generating labels") {
        Rng rng(11);
        LabelVolume src;
        src.d = src.h = src.w = 6;
        src.num_classes = 4;
        src.data.resize(static_cast<std::size_t>(src.voxels()));
        for (auto& v : src.data) v = static_cast<std::uint8_t>(rng.uniform_below(4));
        Volume probs = Volume::zeros(4, 6, 6, 6);
        for (std::int64_t i = 0; i < src.voxels(); ++i) {
            probs.data[static_cast<std::size_t>(src.data[static_cast<std::size_t>(i)] * src.voxels() + i)] = 1.0f;
        }
        const LabelVolume back = argmax_labels(probs);
        CHECK(back.data == src.data);
    }
}

TEST_CASE("prediction without populated batchnorm stats is an error") {
    const NetworkSpec spec = build_voxresnet(1, 2, 0.0625);
    NetworkParams<float> params = init_params<float>(spec, 12);
    Rng rng(13);
    const Volume input = random_volume(1, 16, 16, 16, rng);
    CHECK_THROWS_WITH_AS(predict(spec, params, input, 16, 16), doctest::Contains("running statistics"),
                         data_error);
}

TEST_CASE("plan_tiles validates its inputs") {
    CHECK_THROWS_AS(plan_tiles({16, 16, 16}, 4, 2), usage_error);
    CHECK_THROWS_AS(plan_tiles({16, 16, 16}, 16, 0), usage_error);
    CHECK_THROWS_AS(plan_tiles({16, 16, 16}, 16, 17), usage_error);
}
