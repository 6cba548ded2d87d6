#ifndef VXR_PHANTOM_HPP
#define VXR_PHANTOM_HPP

#include <array>
#include <cstdint>
#include <vector>

#include "volume.hpp"

namespace vxr {

// Synthetic labeled head: nested ellipsoids (WM core, GM shell, CSF rim)
// over background, imaged by several pseudo-modalities with distinct
// class-mean orderings so the channels stay complementary.
struct PhantomSpec {
    std::uint64_t seed = 1;
    std::array<std::int64_t, 3> extents{64, 64, 64};
    std::array<float, 3> spacing{1.0f, 1.0f, 1.0f};
    std::array<double, 3> center_offset{0, 0, 0};  // voxels, relative to the volume center
    std::array<double, 3> wm_radii{13, 13, 13};
    std::array<double, 3> gm_radii{21, 21, 21};
    std::array<double, 3> csf_radii{28, 28, 28};
    int num_modalities = 3;
    // Per modality: intensity means for background, CSF, GM, WM.
    std::vector<std::array<double, 4>> class_means;
    double noise_std = 0.08;
    double bias_amplitude = 0.2;   // strength of the smooth multiplicative field
    double bias_scale_vox = 24.0;  // correlation length of that field

    void validate() const;

    // Case-to-case geometry jitter and the canonical modality contrasts.
    static PhantomSpec canonical(int case_index, std::uint64_t seed, std::int64_t extent, int num_modalities);
};

struct PhantomCase {
    std::vector<Volume> modalities;  // single-channel, named
    LabelVolume labels;              // 0=bg, 1=CSF, 2=GM, 3=WM
};

// Label of a voxel under the spec's analytic geometry.
int phantom_class_at(const PhantomSpec& spec, std::int64_t z, std::int64_t y, std::int64_t x);

PhantomCase generate_phantom(const PhantomSpec& spec);

}  // namespace vxr

#endif
