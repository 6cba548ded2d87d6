#include "preprocess.hpp"

#include <algorithm>
#include <cmath>

#include "errors.hpp"
#include "parallel.hpp"

namespace vxr {
namespace {

std::vector<double> gaussian_kernel(double sigma) {
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
    double sum = 0;
    for (int i = -radius; i <= radius; ++i) {
        const double v = std::exp(-0.5 * (i / sigma) * (i / sigma));
        k[static_cast<std::size_t>(i + radius)] = v;
        sum += v;
    }
    for (auto& v : k) v /= sum;
    return k;
}

std::int64_t mirror(std::int64_t i, std::int64_t extent) {
    while (i < 0 || i >= extent) {
        if (i < 0) i = -i;
        if (i >= extent) i = 2 * extent - 2 - i;
    }
    return i;
}

// One separable pass along `axis` of a [D,H,W] channel.
void blur_axis(const std::vector<float>& in, std::vector<float>& out, std::int64_t d, std::int64_t h,
               std::int64_t w, int axis, const std::vector<double>& kernel) {
    const int radius = static_cast<int>(kernel.size() / 2);
    const std::int64_t ext = axis == 0 ? d : (axis == 1 ? h : w);
    parallel_for(d, [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t z = lo; z < hi; ++z) {
            for (std::int64_t y = 0; y < h; ++y) {
                for (std::int64_t x = 0; x < w; ++x) {
                    double acc = 0;
                    for (int t = -radius; t <= radius; ++t) {
                        std::int64_t zz = z, yy = y, xx = x;
                        if (axis == 0) zz = mirror(z + t, ext);
                        if (axis == 1) yy = mirror(y + t, ext);
                        if (axis == 2) xx = mirror(x + t, ext);
                        acc += kernel[static_cast<std::size_t>(t + radius)] *
                               static_cast<double>(in[(zz * h + yy) * w + xx]);
                    }
                    out[(z * h + y) * w + x] = static_cast<float>(acc);
                }
            }
        }
    });
}

}  // namespace

Volume gaussian_subtract(const Volume& vol, double sigma_vox) {
    VXR_CHECK_USAGE(sigma_vox > 0, "gaussian_subtract needs sigma > 0");
    const auto kernel = gaussian_kernel(sigma_vox);
    Volume out = vol;
    std::vector<float> a(static_cast<std::size_t>(vol.voxels()));
    std::vector<float> b(static_cast<std::size_t>(vol.voxels()));
    for (std::int64_t c = 0; c < vol.channels; ++c) {
        const float* src = vol.channel(c);
        std::copy(src, src + vol.voxels(), a.begin());
        blur_axis(a, b, vol.d, vol.h, vol.w, 0, kernel);
        blur_axis(b, a, vol.d, vol.h, vol.w, 1, kernel);
        blur_axis(a, b, vol.d, vol.h, vol.w, 2, kernel);
        float* dst = out.channel(c);
        for (std::int64_t i = 0; i < vol.voxels(); ++i) dst[i] = src[i] - b[static_cast<std::size_t>(i)];
    }
    return out;
}

std::vector<float> clahe_slice(const std::vector<float>& slice, std::int64_t h, std::int64_t w, int tiles_h,
                               int tiles_w, double clip_fraction, int bins) {
    VXR_CHECK_USAGE(tiles_h >= 1 && tiles_w >= 1, "CLAHE needs at least one tile per axis");
    VXR_CHECK_USAGE(clip_fraction > 0 && clip_fraction <= 1, "clip_fraction must lie in (0, 1]");
    VXR_CHECK_USAGE(bins >= 2, "CLAHE needs at least 2 histogram bins");
    VXR_CHECK_DATA(static_cast<std::int64_t>(slice.size()) == h * w, "slice buffer does not match extents");
    VXR_CHECK_DATA(h >= tiles_h && w >= tiles_w,
                   "slice " << h << "x" << w << " is smaller than the " << tiles_h << "x" << tiles_w
                            << " tile grid");

    float mn = slice[0], mx = slice[0];
    for (float v : slice) {
        mn = std::min(mn, v);
        mx = std::max(mx, v);
    }
    const double range = static_cast<double>(mx) - static_cast<double>(mn);
    const auto bin_of = [&](float v) -> int {
        if (range <= 0) return 0;
        const int b = static_cast<int>((static_cast<double>(v) - mn) / range * bins);
        return std::min(bins - 1, std::max(0, b));
    };

    // Tile boundaries and per-tile clipped CDFs.
    std::vector<std::int64_t> rb(static_cast<std::size_t>(tiles_h + 1)), cb(static_cast<std::size_t>(tiles_w + 1));
    for (int i = 0; i <= tiles_h; ++i) rb[static_cast<std::size_t>(i)] = i * h / tiles_h;
    for (int j = 0; j <= tiles_w; ++j) cb[static_cast<std::size_t>(j)] = j * w / tiles_w;

    std::vector<std::vector<double>> cdf(static_cast<std::size_t>(tiles_h * tiles_w));
    std::vector<double> rc(static_cast<std::size_t>(tiles_h)), cc(static_cast<std::size_t>(tiles_w));
    for (int ti = 0; ti < tiles_h; ++ti) {
        rc[static_cast<std::size_t>(ti)] = 0.5 * (static_cast<double>(rb[static_cast<std::size_t>(ti)]) +
                                                  static_cast<double>(rb[static_cast<std::size_t>(ti + 1)]));
        for (int tj = 0; tj < tiles_w; ++tj) {
            cc[static_cast<std::size_t>(tj)] = 0.5 * (static_cast<double>(cb[static_cast<std::size_t>(tj)]) +
                                                      static_cast<double>(cb[static_cast<std::size_t>(tj + 1)]));
            std::vector<double> hist(static_cast<std::size_t>(bins), 0.0);
            std::int64_t count = 0;
            for (std::int64_t y = rb[static_cast<std::size_t>(ti)]; y < rb[static_cast<std::size_t>(ti + 1)]; ++y) {
                for (std::int64_t x = cb[static_cast<std::size_t>(tj)]; x < cb[static_cast<std::size_t>(tj + 1)];
                     ++x) {
                    hist[static_cast<std::size_t>(bin_of(slice[y * w + x]))] += 1.0;
                    ++count;
                }
            }
            // Cap each bin at clip_fraction of the tile pixels and hand the
            // excess back uniformly; clip_fraction == 1 leaves the histogram
            // untouched (plain equalization).
            const double limit = std::max(1.0, clip_fraction * static_cast<double>(count));
            double excess = 0;
            for (auto& v : hist) {
                if (v > limit) {
                    excess += v - limit;
                    v = limit;
                }
            }
            const double bonus = excess / bins;
            double total = 0;
            for (auto& v : hist) {
                v += bonus;
                total += v;
            }
            auto& c = cdf[static_cast<std::size_t>(ti * tiles_w + tj)];
            c.resize(static_cast<std::size_t>(bins));
            double run = 0;
            for (int b = 0; b < bins; ++b) {
                run += hist[static_cast<std::size_t>(b)];
                c[static_cast<std::size_t>(b)] = run / total;
            }
        }
    }

    // Bilinear interpolation between the four surrounding tile mappings.
    std::vector<float> out(static_cast<std::size_t>(h * w));
    for (std::int64_t y = 0; y < h; ++y) {
        int t0 = 0;
        while (t0 + 1 < tiles_h && static_cast<double>(y) > rc[static_cast<std::size_t>(t0 + 1)]) ++t0;
        int t1 = t0;
        double ay = 0;
        if (static_cast<double>(y) >= rc[static_cast<std::size_t>(t0)] && t0 + 1 < tiles_h) {
            t1 = t0 + 1;
            ay = (static_cast<double>(y) - rc[static_cast<std::size_t>(t0)]) /
                 (rc[static_cast<std::size_t>(t1)] - rc[static_cast<std::size_t>(t0)]);
        }
        for (std::int64_t x = 0; x < w; ++x) {
            int s0 = 0;
            while (s0 + 1 < tiles_w && static_cast<double>(x) > cc[static_cast<std::size_t>(s0 + 1)]) ++s0;
            int s1 = s0;
            double ax = 0;
            if (static_cast<double>(x) >= cc[static_cast<std::size_t>(s0)] && s0 + 1 < tiles_w) {
                s1 = s0 + 1;
                ax = (static_cast<double>(x) - cc[static_cast<std::size_t>(s0)]) /
                     (cc[static_cast<std::size_t>(s1)] - cc[static_cast<std::size_t>(s0)]);
            }
            const int b = bin_of(slice[y * w + x]);
            const double v00 = cdf[static_cast<std::size_t>(t0 * tiles_w + s0)][static_cast<std::size_t>(b)];
            const double v01 = cdf[static_cast<std::size_t>(t0 * tiles_w + s1)][static_cast<std::size_t>(b)];
            const double v10 = cdf[static_cast<std::size_t>(t1 * tiles_w + s0)][static_cast<std::size_t>(b)];
            const double v11 = cdf[static_cast<std::size_t>(t1 * tiles_w + s1)][static_cast<std::size_t>(b)];
            const double v = (1 - ay) * ((1 - ax) * v00 + ax * v01) + ay * ((1 - ax) * v10 + ax * v11);
            out[y * w + x] = static_cast<float>(v);
        }
    }
    return out;
}

Volume clahe_volume(const Volume& vol, const PreprocessParams& params) {
    Volume out = vol;
    for (std::int64_t c = 0; c < vol.channels; ++c) {
        const float* src = vol.channel(c);
        float* dst = out.channel(c);
        for (std::int64_t z = 0; z < vol.d; ++z) {
            std::vector<float> slice(src + z * vol.h * vol.w, src + (z + 1) * vol.h * vol.w);
            const auto eq = clahe_slice(slice, vol.h, vol.w, params.clahe_tiles_h, params.clahe_tiles_w,
                                        params.clahe_clip_fraction, params.clahe_bins);
            std::copy(eq.begin(), eq.end(), dst + z * vol.h * vol.w);
        }
    }
    return out;
}

Volume zscore_per_slice(const Volume& vol) {
    Volume out = vol;
    const std::int64_t plane = vol.h * vol.w;
    for (std::int64_t c = 0; c < vol.channels; ++c) {
        const float* src = vol.channel(c);
        float* dst = out.channel(c);
        for (std::int64_t z = 0; z < vol.d; ++z) {
            const float* s = src + z * plane;
            float* o = dst + z * plane;
            double sum = 0;
            for (std::int64_t i = 0; i < plane; ++i) sum += s[i];
            const double mean = sum / static_cast<double>(plane);
            double ss = 0;
            for (std::int64_t i = 0; i < plane; ++i) {
                const double dvi = s[i] - mean;
                ss += dvi * dvi;
            }
            const double var = ss / static_cast<double>(plane);
            if (var <= 0) {
                std::fill(o, o + plane, 0.0f);
                continue;
            }
            const double invstd = 1.0 / std::sqrt(var);
            for (std::int64_t i = 0; i < plane; ++i) {
                o[i] = static_cast<float>((s[i] - mean) * invstd);
            }
        }
    }
    return out;
}

Volume build_input_stack(const std::vector<Volume>& raw, const PreprocessParams& params) {
    VXR_CHECK_DATA(!raw.empty(), "input stack needs at least one modality");
    for (const auto& v : raw) {
        VXR_CHECK_DATA(v.channels == 1, "raw modalities must be single-channel volumes");
        VXR_CHECK_DATA(v.d == raw[0].d && v.h == raw[0].h && v.w == raw[0].w,
                       "modality extents differ: " << v.d << "x" << v.h << "x" << v.w << " vs " << raw[0].d << "x"
                                                   << raw[0].h << "x" << raw[0].w);
        VXR_CHECK_DATA(v.spacing_mm == raw[0].spacing_mm, "modality spacings differ");
    }
    Volume out = Volume::zeros(2 * static_cast<std::int64_t>(raw.size()), raw[0].d, raw[0].h, raw[0].w);
    out.spacing_mm = raw[0].spacing_mm;
    out.channel_names.clear();
    for (std::size_t m = 0; m < raw.size(); ++m) {
        const std::string base =
            raw[m].channel_names.empty() ? "M" + std::to_string(m) : raw[m].channel_names[0];
        const Volume plain = zscore_per_slice(raw[m]);
        const Volume enhanced = zscore_per_slice(clahe_volume(gaussian_subtract(raw[m], params.sigma_vox), params));
        std::copy(plain.channel(0), plain.channel(0) + plain.voxels(), out.channel(static_cast<std::int64_t>(2 * m)));
        std::copy(enhanced.channel(0), enhanced.channel(0) + enhanced.voxels(),
                  out.channel(static_cast<std::int64_t>(2 * m + 1)));
        out.channel_names.push_back(base);
        out.channel_names.push_back(base + "_enh");
    }
    return out;
}

}  // namespace vxr
