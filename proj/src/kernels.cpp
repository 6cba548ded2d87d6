#include "kernels.hpp"

#include <algorithm>
#include <cmath>

#include "parallel.hpp"

namespace vxr {
namespace {

std::int64_t floordiv(std::int64_t a, std::int64_t b) {
    std::int64_t q = a / b;
    if (a % b != 0 && ((a < 0) != (b < 0))) --q;
    return q;
}

std::int64_t ceildiv(std::int64_t a, std::int64_t b) { return floordiv(a + b - 1, b); }

const char* axis_name(int i) {
    static const char* names[3] = {"D", "H", "W"};
    return names[i];
}

template <typename S>
void require_rank(const Tensor<S>& t, int rank, const char* what) {
    VXR_CHECK(t.rank() == rank, what << " must be rank " << rank << ", got rank " << t.rank());
}

}  // namespace

void ConvSpec::validate() const {
    for (int i = 0; i < 3; ++i) {
        VXR_CHECK(kernel[static_cast<std::size_t>(i)] >= 1,
                  "conv kernel extent must be >= 1 on axis " << axis_name(i));
        VXR_CHECK(stride[static_cast<std::size_t>(i)] >= 1,
                  "conv stride must be >= 1 on axis " << axis_name(i));
        VXR_CHECK(padding[static_cast<std::size_t>(i)] >= 0,
                  "conv padding must be >= 0 on axis " << axis_name(i));
    }
}

std::int64_t conv_out_extent(std::int64_t in, int kernel, int stride, int padding) {
    return (in + 2 * padding - kernel) / stride + 1;
}

std::int64_t deconv_out_extent(std::int64_t in, int kernel, int stride, int padding) {
    return (in - 1) * stride - 2 * padding + kernel;
}

template <typename S>
Tensor<S> conv3d(const Tensor<S>& input, const Tensor<S>& weight, const Tensor<S>* bias, const ConvSpec& spec) {
    spec.validate();
    require_rank(input, 5, "conv3d input");
    require_rank(weight, 5, "conv3d weight");
    const std::int64_t N = input.dim(0), C = input.dim(1);
    const std::int64_t D = input.dim(2), H = input.dim(3), W = input.dim(4);
    const std::int64_t K = weight.dim(0);
    VXR_CHECK(weight.dim(1) == C,
              "conv3d weight channel axis (" << weight.dim(1) << ") does not match input channel axis (" << C << ")");
    for (int i = 0; i < 3; ++i) {
        VXR_CHECK(weight.dim(2 + i) == spec.kernel[static_cast<std::size_t>(i)],
                  "conv3d weight kernel extent mismatch on axis " << axis_name(i));
    }
    if (bias != nullptr) {
        VXR_CHECK(bias->rank() == 1 && bias->dim(0) == K,
                  "conv3d bias must have one value per output channel (" << K << ")");
    }
    const int kd = spec.kernel[0], kh = spec.kernel[1], kw = spec.kernel[2];
    const int sd = spec.stride[0], sh = spec.stride[1], sw = spec.stride[2];
    const int pd = spec.padding[0], ph = spec.padding[1], pw = spec.padding[2];
    const std::int64_t OD = conv_out_extent(D, kd, sd, pd);
    const std::int64_t OH = conv_out_extent(H, kh, sh, ph);
    const std::int64_t OW = conv_out_extent(W, kw, sw, pw);
    VXR_CHECK(OD >= 1, "conv3d output extent is non-positive on axis D (input " << D << ")");
    VXR_CHECK(OH >= 1, "conv3d output extent is non-positive on axis H (input " << H << ")");
    VXR_CHECK(OW >= 1, "conv3d output extent is non-positive on axis W (input " << W << ")");

    Tensor<S> out({N, K, OD, OH, OW});
    const S* in_p = input.data();
    const S* w_p = weight.data();
    S* out_p = out.data();

    parallel_for(N * K * OD, [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t job = lo; job < hi; ++job) {
            const std::int64_t od = job % OD;
            const std::int64_t k = (job / OD) % K;
            const std::int64_t n = job / (OD * K);
            for (std::int64_t oh = 0; oh < OH; ++oh) {
                S* orow = out_p + (((n * K + k) * OD + od) * OH + oh) * OW;
                const S b = bias != nullptr ? bias->data()[k] : S(0);
                for (std::int64_t ow = 0; ow < OW; ++ow) orow[ow] = b;
                for (std::int64_t c = 0; c < C; ++c) {
                    for (int akd = 0; akd < kd; ++akd) {
                        const std::int64_t id = od * sd - pd + akd;
                        if (id < 0 || id >= D) continue;
                        for (int akh = 0; akh < kh; ++akh) {
                            const std::int64_t ih = oh * sh - ph + akh;
                            if (ih < 0 || ih >= H) continue;
                            const S* irow = in_p + (((n * C + c) * D + id) * H + ih) * W;
                            const S* wrow = w_p + (((k * C + c) * kd + akd) * kh + akh) * kw;
                            for (int akw = 0; akw < kw; ++akw) {
                                const S wv = wrow[akw];
                                const std::int64_t ow0 = std::max<std::int64_t>(0, ceildiv(pw - akw, sw));
                                const std::int64_t ow1 =
                                    std::min<std::int64_t>(OW, floordiv(W - 1 + pw - akw, sw) + 1);
                                if (sw == 1) {
                                    const S* ir = irow + (akw - pw);
                                    for (std::int64_t ow = ow0; ow < ow1; ++ow) orow[ow] += wv * ir[ow];
                                } else {
                                    for (std::int64_t ow = ow0; ow < ow1; ++ow) {
                                        orow[ow] += wv * irow[ow * sw - pw + akw];
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    });
    return out;
}

template <typename S>
Tensor<S> deconv3d_to(const Tensor<S>& input, const Tensor<S>& weight, const ConvSpec& spec,
                      const std::array<std::int64_t, 3>& out_extents) {
    spec.validate();
    require_rank(input, 5, "deconv3d input");
    require_rank(weight, 5, "deconv3d weight");
    const std::int64_t N = input.dim(0), K = input.dim(1);
    const std::int64_t D = input.dim(2), H = input.dim(3), W = input.dim(4);
    VXR_CHECK(weight.dim(0) == K,
              "deconv3d weight leading axis (" << weight.dim(0) << ") does not match input channel axis (" << K << ")");
    for (int i = 0; i < 3; ++i) {
        VXR_CHECK(weight.dim(2 + i) == spec.kernel[static_cast<std::size_t>(i)],
                  "deconv3d weight kernel extent mismatch on axis " << axis_name(i));
    }
    const std::int64_t C = weight.dim(1);
    const int kd = spec.kernel[0], kh = spec.kernel[1], kw = spec.kernel[2];
    const int sd = spec.stride[0], sh = spec.stride[1], sw = spec.stride[2];
    const int pd = spec.padding[0], ph = spec.padding[1], pw = spec.padding[2];
    const std::int64_t OD = out_extents[0], OH = out_extents[1], OW = out_extents[2];
    VXR_CHECK(OD >= 1, "deconv3d output extent is non-positive on axis D");
    VXR_CHECK(OH >= 1, "deconv3d output extent is non-positive on axis H");
    VXR_CHECK(OW >= 1, "deconv3d output extent is non-positive on axis W");

    Tensor<S> out({N, C, OD, OH, OW});
    const S* in_p = input.data();
    const S* w_p = weight.data();
    S* out_p = out.data();

    // Gather form of the scatter-accumulate: every output voxel sums the
    // input positions that map onto it, so threads never share writes.
    parallel_for(N * C * OD, [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t job = lo; job < hi; ++job) {
            const std::int64_t z = job % OD;
            const std::int64_t c = (job / OD) % C;
            const std::int64_t n = job / (OD * C);
            for (std::int64_t y = 0; y < OH; ++y) {
                S* orow = out_p + (((n * C + c) * OD + z) * OH + y) * OW;
                std::fill(orow, orow + OW, S(0));
                for (std::int64_t k = 0; k < K; ++k) {
                    for (int akd = 0; akd < kd; ++akd) {
                        const std::int64_t td = z + pd - akd;
                        if (td % sd != 0) continue;
                        const std::int64_t d = td / sd;
                        if (d < 0 || d >= D) continue;
                        for (int akh = 0; akh < kh; ++akh) {
                            const std::int64_t th = y + ph - akh;
                            if (th % sh != 0) continue;
                            const std::int64_t h = th / sh;
                            if (h < 0 || h >= H) continue;
                            const S* irow = in_p + (((n * K + k) * D + d) * H + h) * W;
                            const S* wrow = w_p + (((k * C + c) * kd + akd) * kh + akh) * kw;
                            for (int akw = 0; akw < kw; ++akw) {
                                const S wv = wrow[akw];
                                // x = w*sw - pw + akw must land in [0, OW)
                                const std::int64_t w0 = std::max<std::int64_t>(0, ceildiv(pw - akw, sw));
                                const std::int64_t w1 =
                                    std::min<std::int64_t>(W, floordiv(OW - 1 + pw - akw, sw) + 1);
                                S* or2 = orow + (akw - pw);
                                for (std::int64_t wi = w0; wi < w1; ++wi) {
                                    or2[wi * sw] += wv * irow[wi];
                                }
                            }
                        }
                    }
                }
            }
        }
    });
    return out;
}

template <typename S>
Tensor<S> deconv3d(const Tensor<S>& input, const Tensor<S>& weight, const ConvSpec& spec) {
    require_rank(input, 5, "deconv3d input");
    std::array<std::int64_t, 3> ext;
    for (int i = 0; i < 3; ++i) {
        ext[static_cast<std::size_t>(i)] =
            deconv_out_extent(input.dim(2 + i), spec.kernel[static_cast<std::size_t>(i)],
                              spec.stride[static_cast<std::size_t>(i)], spec.padding[static_cast<std::size_t>(i)]);
        VXR_CHECK(ext[static_cast<std::size_t>(i)] >= 1,
                  "deconv3d output extent is non-positive on axis " << axis_name(i));
    }
    return deconv3d_to(input, weight, spec, ext);
}

template <typename S>
Tensor<S> conv3d_weight_grad(const Tensor<S>& out_side, const Tensor<S>& image_side, const ConvSpec& spec,
                             const std::vector<std::int64_t>& weight_shape) {
    spec.validate();
    require_rank(out_side, 5, "conv3d_weight_grad out_side");
    require_rank(image_side, 5, "conv3d_weight_grad image_side");
    VXR_CHECK(weight_shape.size() == 5, "weight shape must be rank 5");
    const std::int64_t N = out_side.dim(0), K = out_side.dim(1);
    const std::int64_t OD = out_side.dim(2), OH = out_side.dim(3), OW = out_side.dim(4);
    const std::int64_t C = image_side.dim(1);
    const std::int64_t D = image_side.dim(2), H = image_side.dim(3), W = image_side.dim(4);
    VXR_CHECK(image_side.dim(0) == N, "batch axis mismatch in weight gradient");
    VXR_CHECK(weight_shape[0] == K && weight_shape[1] == C, "weight shape channel mismatch");
    const int kd = spec.kernel[0], kh = spec.kernel[1], kw = spec.kernel[2];
    const int sd = spec.stride[0], sh = spec.stride[1], sw = spec.stride[2];
    const int pd = spec.padding[0], ph = spec.padding[1], pw = spec.padding[2];

    Tensor<S> grad(weight_shape);
    const S* a_p = out_side.data();
    const S* b_p = image_side.data();
    S* g_p = grad.data();

    parallel_for(K * C * kd, [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t job = lo; job < hi; ++job) {
            const std::int64_t akd = job % kd;
            const std::int64_t c = (job / kd) % C;
            const std::int64_t k = job / (kd * C);
            for (int akh = 0; akh < kh; ++akh) {
                for (int akw = 0; akw < kw; ++akw) {
                    S acc = 0;
                    for (std::int64_t n = 0; n < N; ++n) {
                        for (std::int64_t od = 0; od < OD; ++od) {
                            const std::int64_t id = od * sd - pd + akd;
                            if (id < 0 || id >= D) continue;
                            for (std::int64_t oh = 0; oh < OH; ++oh) {
                                const std::int64_t ih = oh * sh - ph + akh;
                                if (ih < 0 || ih >= H) continue;
                                const S* arow = a_p + (((n * K + k) * OD + od) * OH + oh) * OW;
                                const S* brow = b_p + (((n * C + c) * D + id) * H + ih) * W;
                                const std::int64_t ow0 = std::max<std::int64_t>(0, ceildiv(pw - akw, sw));
                                const std::int64_t ow1 =
                                    std::min<std::int64_t>(OW, floordiv(W - 1 + pw - akw, sw) + 1);
                                if (sw == 1) {
                                    const S* br = brow + (akw - pw);
                                    for (std::int64_t ow = ow0; ow < ow1; ++ow) acc += arow[ow] * br[ow];
                                } else {
                                    for (std::int64_t ow = ow0; ow < ow1; ++ow) {
                                        acc += arow[ow] * brow[ow * sw - pw + akw];
                                    }
                                }
                            }
                        }
                    }
                    g_p[(((k * C + c) * kd + akd) * kh + akh) * kw + akw] = acc;
                }
            }
        }
    });
    return grad;
}

template <typename S>
Tensor<S> conv3d_bias_grad(const Tensor<S>& grad_out) {
    require_rank(grad_out, 5, "conv3d_bias_grad input");
    const std::int64_t N = grad_out.dim(0), K = grad_out.dim(1);
    const std::int64_t spatial = grad_out.dim(2) * grad_out.dim(3) * grad_out.dim(4);
    Tensor<S> g({K});
    const S* p = grad_out.data();
    for (std::int64_t n = 0; n < N; ++n) {
        for (std::int64_t k = 0; k < K; ++k) {
            S acc = 0;
            const S* row = p + (n * K + k) * spatial;
            for (std::int64_t i = 0; i < spatial; ++i) acc += row[i];
            g[k] += acc;
        }
    }
    return g;
}

template <typename S>
Tensor<S> batchnorm(const Tensor<S>& input, const Tensor<S>& gamma, const Tensor<S>& beta, BatchNormMode mode,
                    RunningStats<S>& stats, Tensor<S>* save_xhat, Tensor<S>* save_invstd) {
    VXR_CHECK(input.rank() >= 2, "batchnorm input must be at least rank 2");
    const std::int64_t N = input.dim(0), C = input.dim(1);
    std::int64_t spatial = 1;
    for (int i = 2; i < input.rank(); ++i) spatial *= input.dim(i);
    VXR_CHECK(gamma.rank() == 1 && gamma.dim(0) == C, "batchnorm gamma must have one value per channel");
    VXR_CHECK(beta.rank() == 1 && beta.dim(0) == C, "batchnorm beta must have one value per channel");
    VXR_CHECK(stats.epsilon > 0, "batchnorm epsilon must be positive");
    if (mode == BatchNormMode::infer) {
        VXR_CHECK_DATA(stats.initialized, "batchnorm infer mode requires populated running statistics");
    } else {
        if (!stats.initialized && stats.mean.numel() != C) stats.reset(C);
        VXR_CHECK(stats.mean.rank() == 1 && stats.mean.dim(0) == C, "running stats channel count mismatch");
    }

    Tensor<S> out(input.shape());
    if (save_xhat != nullptr) *save_xhat = Tensor<S>(input.shape());
    if (save_invstd != nullptr) *save_invstd = Tensor<S>({C});
    const S* in_p = input.data();
    S* out_p = out.data();
    const std::int64_t m = N * spatial;

    parallel_for(C, [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t c = lo; c < hi; ++c) {
            S mean, invstd;
            if (mode == BatchNormMode::train) {
                double sum = 0;
                for (std::int64_t n = 0; n < N; ++n) {
                    const S* row = in_p + (n * C + c) * spatial;
                    for (std::int64_t i = 0; i < spatial; ++i) sum += static_cast<double>(row[i]);
                }
                const double mu = sum / static_cast<double>(m);
                double ss = 0;
                for (std::int64_t n = 0; n < N; ++n) {
                    const S* row = in_p + (n * C + c) * spatial;
                    for (std::int64_t i = 0; i < spatial; ++i) {
                        const double d = static_cast<double>(row[i]) - mu;
                        ss += d * d;
                    }
                }
                const double var = ss / static_cast<double>(m);
                mean = static_cast<S>(mu);
                invstd = static_cast<S>(1.0 / std::sqrt(var + stats.epsilon));
                const double mom = stats.momentum;
                stats.mean[c] = static_cast<S>(mom * static_cast<double>(stats.mean[c]) + (1.0 - mom) * mu);
                stats.var[c] = static_cast<S>(mom * static_cast<double>(stats.var[c]) + (1.0 - mom) * var);
            } else {
                mean = stats.mean[c];
                invstd = static_cast<S>(1.0 / std::sqrt(static_cast<double>(stats.var[c]) + stats.epsilon));
            }
            if (save_invstd != nullptr) (*save_invstd)[c] = invstd;
            const S g = gamma[c], b = beta[c];
            for (std::int64_t n = 0; n < N; ++n) {
                const S* row = in_p + (n * C + c) * spatial;
                S* orow = out_p + (n * C + c) * spatial;
                if (save_xhat != nullptr) {
                    S* xrow = save_xhat->data() + (n * C + c) * spatial;
                    for (std::int64_t i = 0; i < spatial; ++i) {
                        const S xh = (row[i] - mean) * invstd;
                        xrow[i] = xh;
                        orow[i] = g * xh + b;
                    }
                } else {
                    for (std::int64_t i = 0; i < spatial; ++i) {
                        orow[i] = g * (row[i] - mean) * invstd + b;
                    }
                }
            }
        }
    });
    if (mode == BatchNormMode::train) stats.initialized = true;
    return out;
}

template <typename S>
Tensor<S> relu(const Tensor<S>& input) {
    Tensor<S> out(input.shape());
    const S* in_p = input.data();
    S* out_p = out.data();
    const std::int64_t n = input.numel();
    for (std::int64_t i = 0; i < n; ++i) out_p[i] = in_p[i] > S(0) ? in_p[i] : S(0);
    return out;
}

template <typename S>
Tensor<S> softmax_channels(const Tensor<S>& input) {
    VXR_CHECK(input.rank() >= 2, "softmax_channels input must be at least rank 2");
    const std::int64_t N = input.dim(0), C = input.dim(1);
    VXR_CHECK(C >= 2, "softmax_channels requires at least 2 channels, got " << C);
    std::int64_t spatial = 1;
    for (int i = 2; i < input.rank(); ++i) spatial *= input.dim(i);
    Tensor<S> out(input.shape());
    const S* in_p = input.data();
    S* out_p = out.data();
    parallel_for(N, [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t n = lo; n < hi; ++n) {
            const S* base = in_p + n * C * spatial;
            S* obase = out_p + n * C * spatial;
            for (std::int64_t v = 0; v < spatial; ++v) {
                S mx = base[v];
                for (std::int64_t c = 1; c < C; ++c) mx = std::max(mx, base[c * spatial + v]);
                S sum = 0;
                for (std::int64_t c = 0; c < C; ++c) {
                    const S e = std::exp(base[c * spatial + v] - mx);
                    obase[c * spatial + v] = e;
                    sum += e;
                }
                const S inv = S(1) / sum;
                for (std::int64_t c = 0; c < C; ++c) obase[c * spatial + v] *= inv;
            }
        }
    });
    return out;
}

template <typename S>
Tensor<S> add(const Tensor<S>& a, const Tensor<S>& b) {
    VXR_CHECK(a.same_shape(b), "elementwise add requires equal shapes");
    Tensor<S> out(a.shape());
    const S* ap = a.data();
    const S* bp = b.data();
    S* op = out.data();
    const std::int64_t n = a.numel();
    for (std::int64_t i = 0; i < n; ++i) op[i] = ap[i] + bp[i];
    return out;
}

template <typename S>
Tensor<S> scale(const Tensor<S>& a, S c) {
    Tensor<S> out(a.shape());
    const S* ap = a.data();
    S* op = out.data();
    const std::int64_t n = a.numel();
    for (std::int64_t i = 0; i < n; ++i) op[i] = c * ap[i];
    return out;
}

namespace {

// Reflection without edge repetition: index -1 maps to 1, E maps to E-2.
std::vector<std::int64_t> reflect_map(std::int64_t extent, std::int64_t lo, std::int64_t hi) {
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

template <typename S>
Tensor<S> reflect_pad3d(const Tensor<S>& input, const std::array<std::int64_t, 3>& lo,
                        const std::array<std::int64_t, 3>& hi) {
    require_rank(input, 5, "reflect_pad3d input");
    const std::int64_t N = input.dim(0), C = input.dim(1);
    const std::int64_t D = input.dim(2), H = input.dim(3), W = input.dim(4);
    const auto dmap = reflect_map(D, lo[0], hi[0]);
    const auto hmap = reflect_map(H, lo[1], hi[1]);
    const auto wmap = reflect_map(W, lo[2], hi[2]);
    const std::int64_t PD = D + lo[0] + hi[0], PH = H + lo[1] + hi[1], PW = W + lo[2] + hi[2];
    Tensor<S> out({N, C, PD, PH, PW});
    const S* in_p = input.data();
    S* out_p = out.data();
    parallel_for(N * C * PD, [&](std::int64_t lo_i, std::int64_t hi_i) {
        for (std::int64_t job = lo_i; job < hi_i; ++job) {
            const std::int64_t zp = job % PD;
            const std::int64_t c = (job / PD) % C;
            const std::int64_t n = job / (PD * C);
            const std::int64_t z = dmap[static_cast<std::size_t>(zp)];
            for (std::int64_t yp = 0; yp < PH; ++yp) {
                const std::int64_t y = hmap[static_cast<std::size_t>(yp)];
                const S* irow = in_p + (((n * C + c) * D + z) * H + y) * W;
                S* orow = out_p + (((n * C + c) * PD + zp) * PH + yp) * PW;
                for (std::int64_t xp = 0; xp < PW; ++xp) orow[xp] = irow[wmap[static_cast<std::size_t>(xp)]];
            }
        }
    });
    return out;
}

template <typename S>
Tensor<S> crop3d(const Tensor<S>& input, const std::array<std::int64_t, 3>& offset,
                 const std::array<std::int64_t, 3>& extents) {
    require_rank(input, 5, "crop3d input");
    const std::int64_t N = input.dim(0), C = input.dim(1);
    const std::int64_t D = input.dim(2), H = input.dim(3), W = input.dim(4);
    for (int i = 0; i < 3; ++i) {
        VXR_CHECK(offset[static_cast<std::size_t>(i)] >= 0 &&
                      offset[static_cast<std::size_t>(i)] + extents[static_cast<std::size_t>(i)] <= input.dim(2 + i),
                  "crop3d window out of bounds on axis " << axis_name(i));
    }
    (void)D;
    Tensor<S> out({N, C, extents[0], extents[1], extents[2]});
    const S* in_p = input.data();
    S* out_p = out.data();
    for (std::int64_t n = 0; n < N; ++n) {
        for (std::int64_t c = 0; c < C; ++c) {
            for (std::int64_t z = 0; z < extents[0]; ++z) {
                for (std::int64_t y = 0; y < extents[1]; ++y) {
                    const S* irow =
                        in_p + (((n * C + c) * input.dim(2) + z + offset[0]) * H + y + offset[1]) * W + offset[2];
                    S* orow = out_p + (((n * C + c) * extents[0] + z) * extents[1] + y) * extents[2];
                    std::copy(irow, irow + extents[2], orow);
                }
            }
        }
    }
    return out;
}

template <typename S>
Tensor<S> zero_embed3d(const Tensor<S>& input, const std::array<std::int64_t, 3>& offset,
                       const std::array<std::int64_t, 3>& full_extents) {
    require_rank(input, 5, "zero_embed3d input");
    const std::int64_t N = input.dim(0), C = input.dim(1);
    const std::int64_t D = input.dim(2), H = input.dim(3), W = input.dim(4);
    for (int i = 0; i < 3; ++i) {
        VXR_CHECK(offset[static_cast<std::size_t>(i)] >= 0 &&
                      offset[static_cast<std::size_t>(i)] + input.dim(2 + i) <= full_extents[static_cast<std::size_t>(i)],
                  "zero_embed3d window out of bounds on axis " << axis_name(i));
    }
    Tensor<S> out({N, C, full_extents[0], full_extents[1], full_extents[2]});
    const S* in_p = input.data();
    S* out_p = out.data();
    for (std::int64_t n = 0; n < N; ++n) {
        for (std::int64_t c = 0; c < C; ++c) {
            for (std::int64_t z = 0; z < D; ++z) {
                for (std::int64_t y = 0; y < H; ++y) {
                    const S* irow = in_p + (((n * C + c) * D + z) * H + y) * W;
                    S* orow = out_p + (((n * C + c) * full_extents[0] + z + offset[0]) * full_extents[1] + y +
                                       offset[1]) *
                                          full_extents[2] +
                              offset[2];
                    std::copy(irow, irow + W, orow);
                }
            }
        }
    }
    return out;
}

template <typename S>
bool all_finite(const Tensor<S>& t) {
    const S* p = t.data();
    const std::int64_t n = t.numel();
    for (std::int64_t i = 0; i < n; ++i) {
        if (!std::isfinite(static_cast<double>(p[i]))) return false;
    }
    return true;
}

#define VXR_INSTANTIATE_KERNELS(S)                                                                            \
    template Tensor<S> conv3d<S>(const Tensor<S>&, const Tensor<S>&, const Tensor<S>*, const ConvSpec&);     \
    template Tensor<S> deconv3d<S>(const Tensor<S>&, const Tensor<S>&, const ConvSpec&);                     \
    template Tensor<S> deconv3d_to<S>(const Tensor<S>&, const Tensor<S>&, const ConvSpec&,                   \
                                      const std::array<std::int64_t, 3>&);                                    \
    template Tensor<S> conv3d_weight_grad<S>(const Tensor<S>&, const Tensor<S>&, const ConvSpec&,            \
                                             const std::vector<std::int64_t>&);                               \
    template Tensor<S> conv3d_bias_grad<S>(const Tensor<S>&);                                                 \
    template Tensor<S> batchnorm<S>(const Tensor<S>&, const Tensor<S>&, const Tensor<S>&, BatchNormMode,     \
                                    RunningStats<S>&, Tensor<S>*, Tensor<S>*);                                \
    template Tensor<S> relu<S>(const Tensor<S>&);                                                            \
    template Tensor<S> softmax_channels<S>(const Tensor<S>&);                                                \
    template Tensor<S> add<S>(const Tensor<S>&, const Tensor<S>&);                                           \
    template Tensor<S> scale<S>(const Tensor<S>&, S);                                                        \
    template Tensor<S> reflect_pad3d<S>(const Tensor<S>&, const std::array<std::int64_t, 3>&,                \
                                        const std::array<std::int64_t, 3>&);                                  \
    template Tensor<S> crop3d<S>(const Tensor<S>&, const std::array<std::int64_t, 3>&,                       \
                                 const std::array<std::int64_t, 3>&);                                         \
    template Tensor<S> zero_embed3d<S>(const Tensor<S>&, const std::array<std::int64_t, 3>&,                 \
                                       const std::array<std::int64_t, 3>&);                                   \
    template bool all_finite<S>(const Tensor<S>&);

VXR_INSTANTIATE_KERNELS(float)
VXR_INSTANTIATE_KERNELS(double)

#undef VXR_INSTANTIATE_KERNELS

}  // namespace vxr
