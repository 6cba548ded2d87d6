#ifndef VXR_INFER_HPP
#define VXR_INFER_HPP

#include <functional>

#include "netspec.hpp"
#include "train.hpp"
#include "volume.hpp"

namespace vxr {

struct TilePlan {
    std::array<std::int64_t, 3> volume_extents{0, 0, 0};
    std::array<std::int64_t, 3> padded_extents{0, 0, 0};
    std::array<std::int64_t, 3> tile{0, 0, 0};
    std::array<std::int64_t, 3> stride{0, 0, 0};
    std::vector<std::array<std::int64_t, 3>> corners;  // in padded space
};

// Corners at stride multiples, the last one clamped so the final window ends
// at the (padded) boundary. Every voxel is covered by at least one window.
TilePlan plan_tiles(const std::array<std::int64_t, 3>& extents, std::int64_t tile, std::int64_t stride);

// Window-level forward: [1,C,t,t,t] input crop -> [1,K,t,t,t] probabilities.
using TileForward = std::function<Tensor<float>(const Tensor<float>&)>;

// Runs `fwd` over every window and averages overlapping probabilities
// uniformly; padding is reflect and cropped away afterwards.
Volume stitch_predict(const Volume& input, const TilePlan& plan, int num_classes, const TileForward& fwd);

// Infer-mode tiled prediction with the final (fused) classifier probabilities.
Volume predict(const NetworkSpec& spec, NetworkParams<float>& params, const Volume& input, std::int64_t tile,
               std::int64_t stride);

Volume predict_checkpoint(Checkpoint& ck, const Volume& input, std::int64_t tile, std::int64_t stride);

// Per-voxel argmax; ties break toward the lowest class index.
LabelVolume argmax_labels(const Volume& probs);

}  // namespace vxr

#endif
