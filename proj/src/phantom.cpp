#include "phantom.hpp"

#include <algorithm>
#include <cmath>

#include "errors.hpp"
#include "rng.hpp"

namespace vxr {
namespace {

// Smooth unit-variance field: white noise on a coarse lattice, trilinearly
// upsampled to the full grid.
std::vector<float> smooth_field(const std::array<std::int64_t, 3>& extents, double scale, Rng& rng) {
    const double step = std::max(2.0, scale);
    std::array<std::int64_t, 3> nodes;
    for (int i = 0; i < 3; ++i) {
        nodes[static_cast<std::size_t>(i)] =
            static_cast<std::int64_t>(std::floor((extents[static_cast<std::size_t>(i)] - 1) / step)) + 2;
    }
    std::vector<double> grid(static_cast<std::size_t>(nodes[0] * nodes[1] * nodes[2]));
    for (auto& v : grid) v = rng.normal();

    std::vector<float> out(static_cast<std::size_t>(extents[0] * extents[1] * extents[2]));
    auto at = [&](std::int64_t a, std::int64_t b, std::int64_t c) {
        a = std::min(a, nodes[0] - 1);
        b = std::min(b, nodes[1] - 1);
        c = std::min(c, nodes[2] - 1);
        return grid[static_cast<std::size_t>((a * nodes[1] + b) * nodes[2] + c)];
    };
    std::size_t idx = 0;
    for (std::int64_t z = 0; z < extents[0]; ++z) {
        const double fz = z / step;
        const std::int64_t z0 = static_cast<std::int64_t>(fz);
        const double az = fz - z0;
        for (std::int64_t y = 0; y < extents[1]; ++y) {
            const double fy = y / step;
            const std::int64_t y0 = static_cast<std::int64_t>(fy);
            const double ay = fy - y0;
            for (std::int64_t x = 0; x < extents[2]; ++x, ++idx) {
                const double fx = x / step;
                const std::int64_t x0 = static_cast<std::int64_t>(fx);
                const double ax = fx - x0;
                double v = 0;
                for (int dz = 0; dz < 2; ++dz)
                    for (int dy = 0; dy < 2; ++dy)
                        for (int dx = 0; dx < 2; ++dx) {
                            const double wgt = (dz ? az : 1 - az) * (dy ? ay : 1 - ay) * (dx ? ax : 1 - ax);
                            v += wgt * at(z0 + dz, y0 + dy, x0 + dx);
                        }
                out[idx] = static_cast<float>(v);
            }
        }
    }
    return out;
}

}  // namespace

void PhantomSpec::validate() const {
    for (auto e : extents) VXR_CHECK_USAGE(e >= 32, "phantom extents must be >= 32, got " << e);
    VXR_CHECK_USAGE(noise_std >= 0, "noise std must be >= 0");
    VXR_CHECK_USAGE(bias_amplitude >= 0, "bias amplitude must be >= 0");
    VXR_CHECK_USAGE(num_modalities >= 1, "phantom needs at least one modality");
    VXR_CHECK_USAGE(class_means.size() == static_cast<std::size_t>(num_modalities),
                    "phantom needs one class-mean table per modality");
    for (int i = 0; i < 3; ++i) {
        VXR_CHECK_USAGE(wm_radii[static_cast<std::size_t>(i)] > 0, "WM radii must be positive");
        VXR_CHECK_USAGE(wm_radii[static_cast<std::size_t>(i)] < gm_radii[static_cast<std::size_t>(i)] &&
                            gm_radii[static_cast<std::size_t>(i)] < csf_radii[static_cast<std::size_t>(i)],
                        "phantom radii must be strictly nested (WM < GM < CSF) on every axis");
    }
}

PhantomSpec PhantomSpec::canonical(int case_index, std::uint64_t seed, std::int64_t extent, int num_modalities) {
    PhantomSpec spec;
    spec.seed = seed + static_cast<std::uint64_t>(case_index) * 7919u;
    spec.extents = {extent, extent, extent};
    spec.num_modalities = num_modalities;

    Rng geo(spec.seed ^ 0x9e3779b97f4a7c15ull);
    const double half = static_cast<double>(extent) / 2.0;
    for (int i = 0; i < 3; ++i) {
        spec.center_offset[static_cast<std::size_t>(i)] = geo.uniform(-2.5, 2.5);
        const double wm = 0.40 * half * geo.uniform(0.90, 1.10);
        double gm = 0.66 * half * geo.uniform(0.92, 1.08);
        double csf = 0.88 * half * geo.uniform(0.95, 1.05);
        gm = std::max(gm, wm + 3.0);
        csf = std::min(std::max(csf, gm + 3.0), half - 2.0);
        spec.wm_radii[static_cast<std::size_t>(i)] = wm;
        spec.gm_radii[static_cast<std::size_t>(i)] = gm;
        spec.csf_radii[static_cast<std::size_t>(i)] = csf;
    }

    static const std::array<std::array<double, 4>, 3> base_means{{
        {0.05, 0.20, 0.45, 0.80},  // T1-like: WM brightest
        {0.05, 0.85, 0.40, 0.60},  // IR-like: CSF brightest
        {0.05, 0.15, 0.75, 0.40},  // FLAIR-like: GM brightest
    }};
    for (int m = 0; m < num_modalities; ++m) {
        auto means = base_means[static_cast<std::size_t>(m % 3)];
        if (m >= 3) {
            for (auto& v : means) v = 0.05 + 0.9 * (v - 0.05) * (m % 2 == 0 ? 1.0 : 0.85);
        }
        spec.class_means.push_back(means);
    }
    return spec;
}

int phantom_class_at(const PhantomSpec& spec, std::int64_t z, std::int64_t y, std::int64_t x) {
    const double cz = (static_cast<double>(spec.extents[0]) - 1) / 2.0 + spec.center_offset[0];
    const double cy = (static_cast<double>(spec.extents[1]) - 1) / 2.0 + spec.center_offset[1];
    const double cx = (static_cast<double>(spec.extents[2]) - 1) / 2.0 + spec.center_offset[2];
    auto inside = [&](const std::array<double, 3>& r) {
        const double a = (static_cast<double>(z) - cz) / r[0];
        const double b = (static_cast<double>(y) - cy) / r[1];
        const double c = (static_cast<double>(x) - cx) / r[2];
        return a * a + b * b + c * c <= 1.0;
    };
    if (inside(spec.wm_radii)) return 3;
    if (inside(spec.gm_radii)) return 2;
    if (inside(spec.csf_radii)) return 1;
    return 0;
}

PhantomCase generate_phantom(const PhantomSpec& spec) {
    spec.validate();
    PhantomCase out;
    out.labels.d = spec.extents[0];
    out.labels.h = spec.extents[1];
    out.labels.w = spec.extents[2];
    out.labels.num_classes = 4;
    out.labels.data.resize(static_cast<std::size_t>(out.labels.voxels()));
    std::size_t idx = 0;
    for (std::int64_t z = 0; z < spec.extents[0]; ++z)
        for (std::int64_t y = 0; y < spec.extents[1]; ++y)
            for (std::int64_t x = 0; x < spec.extents[2]; ++x, ++idx) {
                out.labels.data[idx] = static_cast<std::uint8_t>(phantom_class_at(spec, z, y, x));
            }

    static const char* kNames[3] = {"T1", "T1IR", "FLAIR"};
    Rng rng(spec.seed);
    for (int m = 0; m < spec.num_modalities; ++m) {
        Volume v = Volume::zeros(1, spec.extents[0], spec.extents[1], spec.extents[2]);
        v.spacing_mm = spec.spacing;
        v.channel_names = {m < 3 ? std::string(kNames[m]) : "M" + std::to_string(m)};
        const auto& means = spec.class_means[static_cast<std::size_t>(m)];
        const auto field = smooth_field(spec.extents, spec.bias_scale_vox, rng);
        float* dst = v.channel(0);
        for (std::int64_t i = 0; i < v.voxels(); ++i) {
            const double base = means[out.labels.data[static_cast<std::size_t>(i)]];
            double val = base * (1.0 + spec.bias_amplitude * static_cast<double>(field[static_cast<std::size_t>(i)]));
            if (spec.noise_std > 0) val += spec.noise_std * rng.normal();
            dst[i] = static_cast<float>(val);
        }
        out.modalities.push_back(std::move(v));
    }
    return out;
}

}  // namespace vxr
