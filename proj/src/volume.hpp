#ifndef VXR_VOLUME_HPP
#define VXR_VOLUME_HPP

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "tensor.hpp"

namespace vxr {

// Multi-channel voxel grid with physical spacing, stored [C][D][H][W].
struct Volume {
    std::int64_t channels = 0, d = 0, h = 0, w = 0;
    std::array<float, 3> spacing_mm{1.0f, 1.0f, 1.0f};
    std::vector<float> data;
    std::vector<std::string> channel_names;

    std::int64_t voxels() const { return d * h * w; }
    float* channel(std::int64_t c) { return data.data() + c * voxels(); }
    const float* channel(std::int64_t c) const { return data.data() + c * voxels(); }
    void validate() const;

    static Volume zeros(std::int64_t channels, std::int64_t d, std::int64_t h, std::int64_t w);
};

// Per-voxel class ids; 0=background, 1=CSF, 2=GM, 3=WM in all tooling.
struct LabelVolume {
    std::int64_t d = 0, h = 0, w = 0;
    int num_classes = 0;
    std::vector<std::uint8_t> data;

    std::int64_t voxels() const { return d * h * w; }
    void validate() const;
};

// [1, C, D, H, W] tensor view of a volume (copies).
Tensor<float> tensor_from_volume(const Volume& v);
Volume volume_from_tensor(const Tensor<float>& t, const std::array<float, 3>& spacing);

Volume concat_channels(const Volume& a, const Volume& b);
Volume crop_volume(const Volume& v, const std::array<std::int64_t, 3>& corner,
                   const std::array<std::int64_t, 3>& size);
LabelVolume crop_labels(const LabelVolume& v, const std::array<std::int64_t, 3>& corner,
                        const std::array<std::int64_t, 3>& size);
Volume reflect_pad_volume(const Volume& v, const std::array<std::int64_t, 3>& lo,
                          const std::array<std::int64_t, 3>& hi);
LabelVolume reflect_pad_labels(const LabelVolume& v, const std::array<std::int64_t, 3>& lo,
                               const std::array<std::int64_t, 3>& hi);

}  // namespace vxr

#endif
