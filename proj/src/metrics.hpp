#ifndef VXR_METRICS_HPP
#define VXR_METRICS_HPP

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "volume.hpp"

namespace vxr {

struct BinaryMask {
    std::int64_t d = 0, h = 0, w = 0;
    std::vector<std::uint8_t> m;

    std::int64_t count() const;
    static BinaryMask from_labels(const LabelVolume& labels, int cls);
};

// Mask voxels with at least one six-neighbor outside the mask; the volume
// border counts as outside.
std::vector<std::array<std::int64_t, 3>> boundary_voxels(const BinaryMask& mask);

// 100 * 2|A∩B| / (|A|+|B|); both masks empty scores 100.
double dice_percent(const BinaryMask& seg, const BinaryMask& ref);

// Symmetric 95th-percentile boundary distance in millimeters under the
// anisotropic (spacing-scaled) Euclidean metric, with linear-interpolation
// percentiles. Both masks must be non-empty.
double hd95_mm(const BinaryMask& seg, const BinaryMask& ref, const std::array<double, 3>& spacing_mm);

// 100 * ||A| - |B|| / |B|; the reference must be non-empty.
double avd_percent(const BinaryMask& seg, const BinaryMask& ref);

struct ClassMetrics {
    double dc = 0;
    std::optional<double> hd95_mm;
    std::optional<double> avd;
    bool in_truth = false;
    bool in_pred = false;
};

struct MetricsReport {
    static constexpr const char* kClassNames[3] = {"CSF", "GM", "WM"};
    std::array<ClassMetrics, 3> tissue;  // classes 1..3
    double macro_dc = 0;
    std::optional<double> macro_hd95;
    std::optional<double> macro_avd;
};

// Per-tissue DC/HD95/AVD with background excluded. Classes missing from the
// truth (or from either side, for HD95) report undefined markers.
MetricsReport evaluate_case(const LabelVolume& pred, const LabelVolume& truth,
                            const std::array<double, 3>& spacing_mm);

std::string metrics_table(const MetricsReport& report);
std::string metrics_keyvals(const MetricsReport& report);

}  // namespace vxr

#endif
