#include "infer.hpp"

#include <algorithm>

namespace vxr {

TilePlan plan_tiles(const std::array<std::int64_t, 3>& extents, std::int64_t tile, std::int64_t stride) {
    VXR_CHECK_USAGE(tile >= 8, "tile must be >= 8, got " << tile);
    VXR_CHECK_USAGE(stride >= 1 && stride <= tile, "stride must lie in [1, tile]");
    TilePlan plan;
    plan.volume_extents = extents;
    plan.tile = {tile, tile, tile};
    plan.stride = {stride, stride, stride};

    std::array<std::vector<std::int64_t>, 3> axis_corners;
    for (int i = 0; i < 3; ++i) {
        const std::int64_t padded = std::max(extents[static_cast<std::size_t>(i)], tile);
        plan.padded_extents[static_cast<std::size_t>(i)] = padded;
        auto& cs = axis_corners[static_cast<std::size_t>(i)];
        for (std::int64_t c = 0; c + tile <= padded; c += stride) cs.push_back(c);
        if (cs.back() + tile < padded) cs.push_back(padded - tile);
    }
    for (std::int64_t a : axis_corners[0])
        for (std::int64_t b : axis_corners[1])
            for (std::int64_t c : axis_corners[2]) plan.corners.push_back({a, b, c});
    return plan;
}

Volume stitch_predict(const Volume& input, const TilePlan& plan, int num_classes, const TileForward& fwd) {
    VXR_CHECK_DATA(input.d == plan.volume_extents[0] && input.h == plan.volume_extents[1] &&
                       input.w == plan.volume_extents[2],
                   "tile plan was made for different extents");
    const Volume* src = &input;
    Volume padded;
    std::array<std::int64_t, 3> pad{plan.padded_extents[0] - input.d, plan.padded_extents[1] - input.h,
                                    plan.padded_extents[2] - input.w};
    if (pad[0] > 0 || pad[1] > 0 || pad[2] > 0) {
        padded = reflect_pad_volume(input, {0, 0, 0}, pad);
        src = &padded;
    }

    const std::int64_t PD = plan.padded_extents[0], PH = plan.padded_extents[1], PW = plan.padded_extents[2];
    std::vector<double> acc(static_cast<std::size_t>(num_classes * PD * PH * PW), 0.0);
    std::vector<std::int32_t> hits(static_cast<std::size_t>(PD * PH * PW), 0);

    for (const auto& corner : plan.corners) {
        const Volume window = crop_volume(*src, corner, plan.tile);
        const Tensor<float> probs = fwd(tensor_from_volume(window));
        VXR_CHECK(probs.rank() == 5 && probs.dim(0) == 1 && probs.dim(1) == num_classes &&
                      probs.dim(2) == plan.tile[0] && probs.dim(3) == plan.tile[1] && probs.dim(4) == plan.tile[2],
                  "tile forward returned an unexpected shape");
        for (std::int64_t c = 0; c < num_classes; ++c) {
            const float* p = probs.data() + c * plan.tile[0] * plan.tile[1] * plan.tile[2];
            for (std::int64_t z = 0; z < plan.tile[0]; ++z) {
                for (std::int64_t y = 0; y < plan.tile[1]; ++y) {
                    const std::int64_t base =
                        ((c * PD + corner[0] + z) * PH + corner[1] + y) * PW + corner[2];
                    const float* row = p + (z * plan.tile[1] + y) * plan.tile[2];
                    for (std::int64_t x = 0; x < plan.tile[2]; ++x) {
                        acc[static_cast<std::size_t>(base + x)] += static_cast<double>(row[x]);
                    }
                }
            }
        }
        for (std::int64_t z = 0; z < plan.tile[0]; ++z) {
            for (std::int64_t y = 0; y < plan.tile[1]; ++y) {
                const std::int64_t base = ((corner[0] + z) * PH + corner[1] + y) * PW + corner[2];
                for (std::int64_t x = 0; x < plan.tile[2]; ++x) ++hits[static_cast<std::size_t>(base + x)];
            }
        }
    }

    Volume out = Volume::zeros(num_classes, input.d, input.h, input.w);
    out.spacing_mm = input.spacing_mm;
    for (int c = 0; c < num_classes; ++c) out.channel_names.push_back("prob" + std::to_string(c));
    for (std::int64_t c = 0; c < num_classes; ++c) {
        float* dst = out.channel(c);
        for (std::int64_t z = 0; z < input.d; ++z) {
            for (std::int64_t y = 0; y < input.h; ++y) {
                for (std::int64_t x = 0; x < input.w; ++x) {
                    const std::int64_t pi = (z * PH + y) * PW + x;
                    const std::int32_t n = hits[static_cast<std::size_t>(pi)];
                    VXR_CHECK(n > 0, "tile plan left a voxel uncovered");
                    dst[(z * input.h + y) * input.w + x] =
                        static_cast<float>(acc[static_cast<std::size_t>(c * PD * PH * PW + pi)] / n);
                }
            }
        }
    }
    return out;
}

Volume predict(const NetworkSpec& spec, NetworkParams<float>& params, const Volume& input, std::int64_t tile,
               std::int64_t stride) {
    VXR_CHECK_DATA(input.channels == spec.in_channels,
                   "input has " << input.channels << " channels, network expects " << spec.in_channels);
    VXR_CHECK_DATA(params.bn_ready(), "prediction requires populated batchnorm running statistics");
    const TilePlan plan = plan_tiles({input.d, input.h, input.w}, tile, stride);
    const TileForward fwd = [&](const Tensor<float>& window) {
        Graph<float> g;
        AuxOutputs<float> out = forward(g, spec, params, window, BatchNormMode::infer);
        return out.final_probs;
    };
    return stitch_predict(input, plan, spec.num_classes, fwd);
}

Volume predict_checkpoint(Checkpoint& ck, const Volume& input, std::int64_t tile, std::int64_t stride) {
    return predict(ck.spec, ck.params, input, tile, stride);
}

LabelVolume argmax_labels(const Volume& probs) {
    LabelVolume out;
    out.d = probs.d;
    out.h = probs.h;
    out.w = probs.w;
    out.num_classes = static_cast<int>(probs.channels);
    out.data.resize(static_cast<std::size_t>(out.voxels()));
    const std::int64_t vox = probs.voxels();
    for (std::int64_t i = 0; i < vox; ++i) {
        int best = 0;
        float bv = probs.data[static_cast<std::size_t>(i)];
        for (std::int64_t c = 1; c < probs.channels; ++c) {
            const float v = probs.data[static_cast<std::size_t>(c * vox + i)];
            if (v > bv) {
                bv = v;
                best = static_cast<int>(c);
            }
        }
        out.data[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(best);
    }
    return out;
}

}  // namespace vxr
