#ifndef VXR_PREPROCESS_HPP
#define VXR_PREPROCESS_HPP

#include <vector>

#include "volume.hpp"

namespace vxr {

struct PreprocessParams {
    double sigma_vox = 4.0;  // background-subtraction Gaussian width
    int clahe_tiles_h = 8;
    int clahe_tiles_w = 8;
    double clahe_clip_fraction = 0.01;  // histogram cap as a fraction of tile pixels
    int clahe_bins = 256;
};

// out = vol - G_sigma * vol with a separable kernel, reflect boundary and
// truncation radius ceil(3*sigma).
Volume gaussian_subtract(const Volume& vol, double sigma_vox);

// Classic CLAHE on one 2D slice: per-tile clipped histograms, CDF mapping,
// bilinear interpolation between tile mappings. Output lies in [0, 1].
std::vector<float> clahe_slice(const std::vector<float>& slice, std::int64_t h, std::int64_t w, int tiles_h,
                               int tiles_w, double clip_fraction, int bins);

// clahe_slice applied independently to every axial (D-axis) slice.
Volume clahe_volume(const Volume& vol, const PreprocessParams& params);

// Every axial slice of every channel to zero mean / unit variance;
// zero-variance slices map to all-zero.
Volume zscore_per_slice(const Volume& vol);

// Two channels per raw modality: z-scored original and z-scored
// CLAHE(gaussian_subtract(original)).
Volume build_input_stack(const std::vector<Volume>& raw, const PreprocessParams& params);

}  // namespace vxr

#endif
