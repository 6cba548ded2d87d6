#include <doctest.h>

#include <cmath>

#include "preprocess.hpp"
#include "rng.hpp"
#include "test_support.hpp"

using namespace vxr;
using namespace vxr_test;

namespace {

Volume random_volume(std::int64_t d, std::int64_t h, std::int64_t w, Rng& rng, double lo = 0.0, double hi = 1.0) {
    Volume v = Volume::zeros(1, d, h, w);
    for (auto& x : v.data) x = static_cast<float>(rng.uniform(lo, hi));
    return v;
}

}  // namespace

TEST_CASE("gaussian_subtract maps constants to zero") {
    Volume v = Volume::zeros(1, 12, 12, 12);
    for (auto& x : v.data) x = 3.25f;
    const Volume out = gaussian_subtract(v, 2.0);
    for (float x : out.data) CHECK(std::abs(x) < 1e-5);
}

TEST_CASE("gaussian_subtract impulse response matches the discrete kernel") {
    const std::int64_t n = 17;
    Volume v = Volume::zeros(1, n, n, n);
    const std::int64_t c = n / 2;
    v.data[static_cast<std::size_t>((c * n + c) * n + c)] = 1.0f;
    const double sigma = 1.0;
    const Volume out = gaussian_subtract(v, sigma);

    // Direct evaluation of the normalized separable kernel at the center.
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    double norm = 0;
    for (int i = -radius; i <= radius; ++i) norm += std::exp(-0.5 * i * i / (sigma * sigma));
    const double k0 = 1.0 / norm;
    const double expected_center = 1.0 - k0 * k0 * k0;
    CHECK(out.data[static_cast<std::size_t>((c * n + c) * n + c)] ==
          doctest::Approx(expected_center).epsilon(1e-5));

    // One voxel off-center along W: impulse contributes -k0*k0*k1.
    const double k1 = std::exp(-0.5 / (sigma * sigma)) / norm;
    CHECK(out.data[static_cast<std::size_t>((c * n + c) * n + c + 1)] ==
          doctest::Approx(-k0 * k0 * k1).epsilon(1e-5));
}

TEST_CASE("gaussian_subtract is a high-pass: output mean is near zero") {
    Rng rng(5);
    Volume v = random_volume(24, 24, 24, rng, 0.0, 2.0);
    const Volume out = gaussian_subtract(v, 3.0);
    double mean = 0, sq = 0;
    for (float x : out.data) {
        mean += x;
        sq += static_cast<double>(x) * x;
    }
    mean /= static_cast<double>(out.data.size());
    const double stddev = std::sqrt(sq / static_cast<double>(out.data.size()) - mean * mean);
    CHECK(std::abs(mean) < 0.05 * stddev);
}

TEST_CASE("gaussian_subtract commutes with translation away from boundaries") {
    Rng rng(6);
    Volume v = random_volume(20, 20, 20, rng);
    Volume shifted = Volume::zeros(1, 20, 20, 20);
    // shift by one voxel along W
    for (std::int64_t z = 0; z < 20; ++z)
        for (std::int64_t y = 0; y < 20; ++y)
            for (std::int64_t x = 0; x + 1 < 20; ++x)
                shifted.data[static_cast<std::size_t>((z * 20 + y) * 20 + x + 1)] =
                    v.data[static_cast<std::size_t>((z * 20 + y) * 20 + x)];
    const Volume a = gaussian_subtract(v, 1.5);
    const Volume b = gaussian_subtract(shifted, 1.5);
    const int r = 5;  // stay clear of the reflected boundary
    for (std::int64_t z = r; z < 20 - r; ++z)
        for (std::int64_t y = r; y < 20 - r; ++y)
            for (std::int64_t x = r; x + 1 < 20 - r; ++x) {
                CHECK(a.data[static_cast<std::size_t>((z * 20 + y) * 20 + x)] ==
                      doctest::Approx(b.data[static_cast<std::size_t>((z * 20 + y) * 20 + x + 1)])
                          .epsilon(1e-4));
            }
}

TEST_CASE("clahe_slice maps a constant slice to a constant") {
    std::vector<float> slice(32 * 32, 4.5f);
    const auto out = clahe_slice(slice, 32, 32, 4, 4, 0.01, 64);
    for (float v : out) CHECK(v == out[0]);
}

TEST_CASE("clahe_slice with one tile and clip 1 is plain histogram equalization") {
    Rng rng(7);
    const std::int64_t h = 48, w = 48;
    std::vector<float> slice(static_cast<std::size_t>(h * w));
    for (auto& v : slice) v = static_cast<float>(rng.normal(0.0, 1.0));
    const int bins = 64;
    const auto out = clahe_slice(slice, h, w, 1, 1, 1.0, bins);

    // Oracle: classical global equalization via the clipped-free histogram.
    float mn = slice[0], mx = slice[0];
    for (float v : slice) {
        mn = std::min(mn, v);
        mx = std::max(mx, v);
    }
    std::vector<double> hist(bins, 0.0);
    for (float v : slice) {
        int b = static_cast<int>((v - mn) / (mx - mn) * bins);
        b = std::min(bins - 1, std::max(0, b));
        hist[static_cast<std::size_t>(b)] += 1.0;
    }
    std::vector<double> cdf(bins);
    double run = 0;
    for (int b = 0; b < bins; ++b) {
        run += hist[static_cast<std::size_t>(b)];
        cdf[static_cast<std::size_t>(b)] = run / static_cast<double>(h * w);
    }
    double max_bin_frac = 0;
    for (int b = 0; b < bins; ++b) max_bin_frac = std::max(max_bin_frac, hist[static_cast<std::size_t>(b)] / (h * w));
    for (std::size_t i = 0; i < slice.size(); ++i) {
        int b = static_cast<int>((slice[i] - mn) / (mx - mn) * bins);
        b = std::min(bins - 1, std::max(0, b));
        CHECK(out[i] == doctest::Approx(cdf[static_cast<std::size_t>(b)]).epsilon(1e-6));
    }

    // Equalized output has a uniform CDF up to bin granularity.
    std::vector<float> sorted = out;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size(); i += 97) {
        const double empirical = static_cast<double>(i + 1) / static_cast<double>(sorted.size());
        CHECK(std::abs(sorted[i] - empirical) <= max_bin_frac + 1e-6);
    }
}

TEST_CASE("clahe output stays in [0,1] and is monotone at a fixed position") {
    Rng rng(8);
    const std::int64_t h = 40, w = 40;
    std::vector<float> slice(static_cast<std::size_t>(h * w));
    for (auto& v : slice) v = static_cast<float>(rng.uniform(-3.0, 5.0));
    const auto out = clahe_slice(slice, h, w, 4, 4, 0.05, 32);
    for (float v : out) {
        CHECK(v >= 0.0f);
        CHECK(v <= 1.0f);
    }
    // Raising one pixel's intensity may not lower its mapped value.
    std::vector<float> bumped = slice;
    const std::size_t pos = 21 * w + 17;
    bumped[pos] = bumped[pos] + 2.0f;
    const auto out2 = clahe_slice(bumped, h, w, 4, 4, 0.05, 32);
    CHECK(out2[pos] >= out[pos] - 1e-6f);
}

TEST_CASE("volume CLAHE processes axial slices independently") {
    Rng rng(9);
    Volume v = random_volume(6, 24, 24, rng);
    PreprocessParams params;
    params.clahe_tiles_h = 2;
    params.clahe_tiles_w = 2;
    params.clahe_bins = 32;
    const Volume a = clahe_volume(v, params);
    Volume v2 = v;
    // Scribble over slice 3; every other slice must be untouched.
    for (std::int64_t i = 0; i < 24 * 24; ++i) {
        v2.data[static_cast<std::size_t>(3 * 24 * 24 + i)] = static_cast<float>(rng.uniform(5.0, 9.0));
    }
    const Volume b = clahe_volume(v2, params);
    for (std::int64_t z = 0; z < 6; ++z) {
        if (z == 3) continue;
        for (std::int64_t i = 0; i < 24 * 24; ++i) {
            CHECK(a.data[static_cast<std::size_t>(z * 24 * 24 + i)] ==
                  b.data[static_cast<std::size_t>(z * 24 * 24 + i)]);
        }
    }
}

TEST_CASE("clahe rejects a slice smaller than the tile grid") {
    std::vector<float> slice(3 * 3, 0.0f);
    CHECK_THROWS_AS(clahe_slice(slice, 3, 3, 4, 4, 0.01, 16), data_error);
}

TEST_CASE("zscore_per_slice closed form and degenerate slices") {
    Volume v = Volume::zeros(1, 1, 1, 3);
    v.data = {1.0f, 2.0f, 3.0f};
    const Volume out = zscore_per_slice(v);
    CHECK(out.data[0] == doctest::Approx(-1.2247).epsilon(1e-4));
    CHECK(out.data[1] == doctest::Approx(0.0).epsilon(1e-4));
    CHECK(out.data[2] == doctest::Approx(1.2247).epsilon(1e-4));

    Volume c = Volume::zeros(1, 2, 4, 4);
    for (auto& x : c.data) x = 9.0f;
    const Volume outc = zscore_per_slice(c);
    for (float x : outc.data) CHECK(x == 0.0f);
}

TEST_CASE("zscore_per_slice normalizes every slice and is idempotent") {
    Rng rng(10);
    Volume v = random_volume(5, 16, 16, rng, -4.0, 10.0);
    const Volume out = zscore_per_slice(v);
    const std::int64_t plane = 16 * 16;
    for (std::int64_t z = 0; z < 5; ++z) {
        double mean = 0, sq = 0;
        for (std::int64_t i = 0; i < plane; ++i) {
            const double x = out.data[static_cast<std::size_t>(z * plane + i)];
            mean += x;
            sq += x * x;
        }
        mean /= plane;
        const double stddev = std::sqrt(sq / plane - mean * mean);
        CHECK(std::abs(mean) < 1e-5);
        CHECK(std::abs(stddev - 1.0) < 1e-4);
    }
    const Volume twice = zscore_per_slice(out);
    CHECK(max_abs_diff(tensor_from_volume(twice), tensor_from_volume(out)) < 1e-4);
}

TEST_CASE("build_input_stack emits original plus enhanced channel per modality") {
    Rng rng(11);
    PreprocessParams params;
    params.clahe_tiles_h = 2;
    params.clahe_tiles_w = 2;
    params.clahe_bins = 32;
    params.sigma_vox = 2.0;

    std::vector<Volume> raw;
    static const char* names[3] = {"T1", "T1IR", "FLAIR"};
    for (int m = 0; m < 3; ++m) {
        Volume v = random_volume(8, 16, 16, rng);
        v.channel_names = {names[m]};
        raw.push_back(std::move(v));
    }
    const Volume stack = build_input_stack(raw, params);
    CHECK(stack.channels == 6);
    const std::vector<std::string> want{"T1", "T1_enh", "T1IR", "T1IR_enh", "FLAIR", "FLAIR_enh"};
    CHECK(stack.channel_names == want);
    CHECK(stack.d == 8);

    // Every output channel is per-slice zero mean.
    const std::int64_t plane = 16 * 16;
    for (std::int64_t c = 0; c < 6; ++c) {
        for (std::int64_t z = 0; z < 8; ++z) {
            double mean = 0;
            for (std::int64_t i = 0; i < plane; ++i) mean += stack.channel(c)[z * plane + i];
            CHECK(std::abs(mean / plane) < 1e-5);
        }
    }

    SUBCASE("single modality gives two channels") {
        const Volume one = build_input_stack({raw[0]}, params);
        CHECK(one.channels == 2);
    }
    SUBCASE("extent mismatch is rejected") {
        std::vector<Volume> bad = raw;
        bad[1] = random_volume(8, 16, 20, rng);
        CHECK_THROWS_AS(build_input_stack(bad, params), data_error);
    }
    SUBCASE("extents and spacing are preserved") {
        CHECK(stack.spacing_mm == raw[0].spacing_mm);
        CHECK(stack.h == raw[0].h);
        CHECK(stack.w == raw[0].w);
    }
}
