#include "volume.hpp"

#include <cmath>

#include "errors.hpp"
#include "kernels.hpp"

namespace vxr {

void Volume::validate() const {
    VXR_CHECK_DATA(channels >= 1 && d >= 1 && h >= 1 && w >= 1, "volume extents must be positive");
    for (float s : spacing_mm) VXR_CHECK_DATA(s > 0, "volume spacing must be strictly positive");
    VXR_CHECK_DATA(static_cast<std::int64_t>(data.size()) == channels * voxels(),
                   "volume data length " << data.size() << " does not match channels*extents "
                                         << channels * voxels());
    VXR_CHECK_DATA(channel_names.empty() || static_cast<std::int64_t>(channel_names.size()) == channels,
                   "channel name count does not match channel count");
    for (float v : data) {
        VXR_CHECK_DATA(std::isfinite(v), "volume contains a non-finite value");
    }
}

Volume Volume::zeros(std::int64_t channels, std::int64_t d, std::int64_t h, std::int64_t w) {
    Volume v;
    v.channels = channels;
    v.d = d;
    v.h = h;
    v.w = w;
    v.data.assign(static_cast<std::size_t>(channels * d * h * w), 0.0f);
    return v;
}

void LabelVolume::validate() const {
    VXR_CHECK_DATA(d >= 1 && h >= 1 && w >= 1, "label volume extents must be positive");
    VXR_CHECK_DATA(num_classes >= 1, "label volume needs a positive class count");
    VXR_CHECK_DATA(static_cast<std::int64_t>(data.size()) == voxels(), "label volume data length mismatch");
    for (std::uint8_t v : data) {
        VXR_CHECK_DATA(v < num_classes, "label value " << static_cast<int>(v) << " out of range [0, "
                                                       << num_classes << ")");
    }
}

Tensor<float> tensor_from_volume(const Volume& v) {
    return Tensor<float>({1, v.channels, v.d, v.h, v.w}, v.data);
}

Volume volume_from_tensor(const Tensor<float>& t, const std::array<float, 3>& spacing) {
    VXR_CHECK(t.rank() == 5 && t.dim(0) == 1, "volume_from_tensor expects a [1,C,D,H,W] tensor");
    Volume v;
    v.channels = t.dim(1);
    v.d = t.dim(2);
    v.h = t.dim(3);
    v.w = t.dim(4);
    v.spacing_mm = spacing;
    v.data.assign(t.data(), t.data() + t.numel());
    return v;
}

Volume concat_channels(const Volume& a, const Volume& b) {
    VXR_CHECK_DATA(a.d == b.d && a.h == b.h && a.w == b.w,
                   "channel concatenation requires equal extents, got " << a.d << "x" << a.h << "x" << a.w
                                                                        << " vs " << b.d << "x" << b.h << "x"
                                                                        << b.w);
    Volume out;
    out.channels = a.channels + b.channels;
    out.d = a.d;
    out.h = a.h;
    out.w = a.w;
    out.spacing_mm = a.spacing_mm;
    out.data.reserve(static_cast<std::size_t>(out.channels * out.voxels()));
    out.data.insert(out.data.end(), a.data.begin(), a.data.end());
    out.data.insert(out.data.end(), b.data.begin(), b.data.end());
    if (!a.channel_names.empty() || !b.channel_names.empty()) {
        for (std::int64_t c = 0; c < a.channels; ++c) {
            out.channel_names.push_back(a.channel_names.empty() ? "c" + std::to_string(c) : a.channel_names[c]);
        }
        for (std::int64_t c = 0; c < b.channels; ++c) {
            out.channel_names.push_back(b.channel_names.empty() ? "c" + std::to_string(a.channels + c)
                                                                : b.channel_names[c]);
        }
    }
    return out;
}

Volume crop_volume(const Volume& v, const std::array<std::int64_t, 3>& corner,
                   const std::array<std::int64_t, 3>& size) {
    for (int i = 0; i < 3; ++i) {
        const std::int64_t ext = i == 0 ? v.d : (i == 1 ? v.h : v.w);
        VXR_CHECK(corner[static_cast<std::size_t>(i)] >= 0 &&
                      corner[static_cast<std::size_t>(i)] + size[static_cast<std::size_t>(i)] <= ext,
                  "volume crop out of bounds");
    }
    Volume out = Volume::zeros(v.channels, size[0], size[1], size[2]);
    out.spacing_mm = v.spacing_mm;
    out.channel_names = v.channel_names;
    for (std::int64_t c = 0; c < v.channels; ++c) {
        const float* src = v.channel(c);
        float* dst = out.channel(c);
        for (std::int64_t z = 0; z < size[0]; ++z) {
            for (std::int64_t y = 0; y < size[1]; ++y) {
                const float* row = src + ((z + corner[0]) * v.h + (y + corner[1])) * v.w + corner[2];
                std::copy(row, row + size[2], dst + (z * size[1] + y) * size[2]);
            }
        }
    }
    return out;
}

LabelVolume crop_labels(const LabelVolume& v, const std::array<std::int64_t, 3>& corner,
                        const std::array<std::int64_t, 3>& size) {
    LabelVolume out;
    out.d = size[0];
    out.h = size[1];
    out.w = size[2];
    out.num_classes = v.num_classes;
    out.data.resize(static_cast<std::size_t>(out.voxels()));
    for (std::int64_t z = 0; z < size[0]; ++z) {
        for (std::int64_t y = 0; y < size[1]; ++y) {
            const std::uint8_t* row = v.data.data() + ((z + corner[0]) * v.h + (y + corner[1])) * v.w + corner[2];
            std::copy(row, row + size[2], out.data.data() + (z * size[1] + y) * size[2]);
        }
    }
    return out;
}

namespace {

std::vector<std::int64_t> mirror_map(std::int64_t extent, std::int64_t lo, std::int64_t hi) {
    VXR_CHECK(lo <= extent - 1 && hi <= extent - 1,
              "reflect padding " << lo << "/" << hi << " too large for extent " << extent);
    std::vector<std::int64_t> map(static_cast<std::size_t>(extent + lo + hi));
    for (std::int64_t i = 0; i < extent + lo + hi; ++i) {
        std::int64_t s = i - lo;
        if (s < 0) s = -s;
        if (s >= extent) s = 2 * extent - 2 - s;
        map[static_cast<std::size_t>(i)] = s;
    }
    return map;
}

}  // namespace

Volume reflect_pad_volume(const Volume& v, const std::array<std::int64_t, 3>& lo,
                          const std::array<std::int64_t, 3>& hi) {
    const auto dm = mirror_map(v.d, lo[0], hi[0]);
    const auto hm = mirror_map(v.h, lo[1], hi[1]);
    const auto wm = mirror_map(v.w, lo[2], hi[2]);
    Volume out = Volume::zeros(v.channels, v.d + lo[0] + hi[0], v.h + lo[1] + hi[1], v.w + lo[2] + hi[2]);
    out.spacing_mm = v.spacing_mm;
    out.channel_names = v.channel_names;
    for (std::int64_t c = 0; c < v.channels; ++c) {
        const float* src = v.channel(c);
        float* dst = out.channel(c);
        for (std::int64_t z = 0; z < out.d; ++z) {
            for (std::int64_t y = 0; y < out.h; ++y) {
                float* row = dst + (z * out.h + y) * out.w;
                const float* srow = src + (dm[static_cast<std::size_t>(z)] * v.h + hm[static_cast<std::size_t>(y)]) * v.w;
                for (std::int64_t x = 0; x < out.w; ++x) row[x] = srow[wm[static_cast<std::size_t>(x)]];
            }
        }
    }
    return out;
}

LabelVolume reflect_pad_labels(const LabelVolume& v, const std::array<std::int64_t, 3>& lo,
                               const std::array<std::int64_t, 3>& hi) {
    const auto dm = mirror_map(v.d, lo[0], hi[0]);
    const auto hm = mirror_map(v.h, lo[1], hi[1]);
    const auto wm = mirror_map(v.w, lo[2], hi[2]);
    LabelVolume out;
    out.d = v.d + lo[0] + hi[0];
    out.h = v.h + lo[1] + hi[1];
    out.w = v.w + lo[2] + hi[2];
    out.num_classes = v.num_classes;
    out.data.resize(static_cast<std::size_t>(out.voxels()));
    for (std::int64_t z = 0; z < out.d; ++z) {
        for (std::int64_t y = 0; y < out.h; ++y) {
            std::uint8_t* row = out.data.data() + (z * out.h + y) * out.w;
            const std::uint8_t* srow =
                v.data.data() + (dm[static_cast<std::size_t>(z)] * v.h + hm[static_cast<std::size_t>(y)]) * v.w;
            for (std::int64_t x = 0; x < out.w; ++x) row[x] = srow[wm[static_cast<std::size_t>(x)]];
        }
    }
    return out;
}

}  // namespace vxr
