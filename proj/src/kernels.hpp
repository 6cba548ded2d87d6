#ifndef VXR_KERNELS_HPP
#define VXR_KERNELS_HPP

#include <array>
#include <cstdint>

#include "tensor.hpp"

namespace vxr {

struct ConvSpec {
    int out_channels = 0;
    std::array<int, 3> kernel{3, 3, 3};
    std::array<int, 3> stride{1, 1, 1};
    std::array<int, 3> padding{1, 1, 1};
    bool has_bias = false;

    void validate() const;

    static ConvSpec cube(int out_channels, int kernel, int stride, int padding, bool bias = false) {
        ConvSpec s;
        s.out_channels = out_channels;
        s.kernel = {kernel, kernel, kernel};
        s.stride = {stride, stride, stride};
        s.padding = {padding, padding, padding};
        s.has_bias = bias;
        return s;
    }
};

enum class BatchNormMode { train, infer };

template <typename S>
struct RunningStats {
    Tensor<S> mean;
    Tensor<S> var;
    double momentum = 0.9;
    double epsilon = 1e-5;
    bool initialized = false;

    void reset(std::int64_t channels) {
        mean = Tensor<S>({channels});
        var = Tensor<S>::full({channels}, S(1));
        initialized = false;
    }
};

std::int64_t conv_out_extent(std::int64_t in, int kernel, int stride, int padding);
std::int64_t deconv_out_extent(std::int64_t in, int kernel, int stride, int padding);

// input [N,C,D,H,W] x weight [K,C,kd,kh,kw] -> [N,K,D',H',W']; zero padding.
template <typename S>
Tensor<S> conv3d(const Tensor<S>& input, const Tensor<S>& weight, const Tensor<S>* bias, const ConvSpec& spec);

template <typename S>
Tensor<S> conv3d(const Tensor<S>& input, const Tensor<S>& weight, std::nullptr_t, const ConvSpec& spec) {
    return conv3d(input, weight, static_cast<const Tensor<S>*>(nullptr), spec);
}

// Transposed convolution: the adjoint of conv3d under the same spec and
// weight. input [N,K,...] -> [N,C,...] with extents (D-1)*s - 2p + k.
template <typename S>
Tensor<S> deconv3d(const Tensor<S>& input, const Tensor<S>& weight, const ConvSpec& spec);

// Same scatter pattern but with caller-fixed output extents; used for the
// conv3d input gradient, whose target can exceed the closed-form extents
// when the forward division floors.
template <typename S>
Tensor<S> deconv3d_to(const Tensor<S>& input, const Tensor<S>& weight, const ConvSpec& spec,
                      const std::array<std::int64_t, 3>& out_extents);

// dW[k,c,o] = sum_{n,pos} out_side[n,k,pos] * image_side[n,c,pos*s-p+o].
// conv3d weight grad: (grad_out, input); deconv3d weight grad: (input, grad_out).
template <typename S>
Tensor<S> conv3d_weight_grad(const Tensor<S>& out_side, const Tensor<S>& image_side, const ConvSpec& spec,
                             const std::vector<std::int64_t>& weight_shape);

template <typename S>
Tensor<S> conv3d_bias_grad(const Tensor<S>& grad_out);

// Train mode normalizes with batch statistics over (N, spatial) per channel
// and folds them into the running stats; infer mode reads the running stats.
template <typename S>
Tensor<S> batchnorm(const Tensor<S>& input, const Tensor<S>& gamma, const Tensor<S>& beta, BatchNormMode mode,
                    RunningStats<S>& stats, Tensor<S>* save_xhat = nullptr, Tensor<S>* save_invstd = nullptr);

template <typename S>
Tensor<S> relu(const Tensor<S>& input);

// Per-voxel exp-normalization over axis 1 with max subtraction.
template <typename S>
Tensor<S> softmax_channels(const Tensor<S>& input);

template <typename S>
Tensor<S> add(const Tensor<S>& a, const Tensor<S>& b);

template <typename S>
Tensor<S> scale(const Tensor<S>& a, S c);

// Spatial (last three axes) pad/crop for 5-d activations.
template <typename S>
Tensor<S> reflect_pad3d(const Tensor<S>& input, const std::array<std::int64_t, 3>& lo,
                        const std::array<std::int64_t, 3>& hi);

template <typename S>
Tensor<S> crop3d(const Tensor<S>& input, const std::array<std::int64_t, 3>& offset,
                 const std::array<std::int64_t, 3>& extents);

template <typename S>
Tensor<S> zero_embed3d(const Tensor<S>& input, const std::array<std::int64_t, 3>& offset,
                       const std::array<std::int64_t, 3>& full_extents);

template <typename S>
bool all_finite(const Tensor<S>& t);

}  // namespace vxr

#endif
