#ifndef VXR_NETSPEC_HPP
#define VXR_NETSPEC_HPP

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "autodiff.hpp"
#include "kernels.hpp"
#include "rng.hpp"
#include "tensor.hpp"

namespace vxr {

// Declarative layer schedule. Channels are already width-scaled; the wiring
// in run_schedule is the single source of truth for how entries connect.
struct NetworkSpec {
    int in_channels = 1;  // channel count of the input stack
    int num_classes = 2;
    double width_scale = 1.0;

    struct Entry {
        enum class Kind { Conv, DownConv, VoxRes };
        Kind kind;
        int channels;
    };
    std::vector<Entry> backbone;

    struct Head {
        int tap;  // backbone entry whose output feeds this head
        std::vector<int> deconv_strides;
        int mid_channels;
    };
    std::array<Head, 4> heads;

    int conv_count() const;
    int deconv_count() const;
    int stride2_conv_count() const;
    std::string schedule_string() const;
    std::uint64_t schedule_hash() const;
};

// Canonical schedule: 17 backbone convs (3 of them stride 2, reducing
// resolution by a factor of 8) plus 8 head convs and 4 head deconvs.
NetworkSpec build_voxresnet(int in_channels, int num_classes, double width_scale);

template <typename S>
struct NetworkParams {
    ParamStore<S> weights;
    std::vector<std::pair<std::string, RunningStats<S>>> bn;

    RunningStats<S>& bn_stats(const std::string& name);
    const RunningStats<S>* find_bn(const std::string& name) const;
    bool bn_ready() const;  // every BN layer has populated running stats
};

template <typename S>
NetworkParams<S> init_params(const NetworkSpec& spec, std::uint64_t seed);

std::int64_t parameter_count_from_store(const ParamStore<float>& weights);

// Receptive-field radius (in input voxels) of the C1 head output.
int c1_receptive_radius(const NetworkSpec& spec);

template <typename S>
struct AuxOutputs {
    std::array<typename Graph<S>::NodeId, 4> aux_logits;
    typename Graph<S>::NodeId final_logits;
    std::array<Tensor<S>, 4> aux_probs;
    Tensor<S> final_probs;
};

// Runs the network on a batch tensor [N, in_channels, D, H, W]. Extents not
// divisible by 8 are reflect-padded up front and the logits cropped back.
// The final classifier is the sum of the four auxiliary logit maps.
template <typename S>
AuxOutputs<S> forward(Graph<S>& g, const NetworkSpec& spec, NetworkParams<S>& params, const Tensor<S>& x,
                      BatchNormMode mode);

// Standalone VoxRes module: pre-activation BN-ReLU-conv twice plus the
// identity skip. Used directly by the residual-algebra tests.
template <typename S>
struct VoxResModule {
    int channels = 0;
    Tensor<S> bn1_gamma, bn1_beta, conv1_w;
    Tensor<S> bn2_gamma, bn2_beta, conv2_w;
    RunningStats<S> bn1_stats, bn2_stats;
};

template <typename S>
VoxResModule<S> make_voxres_module(int channels, Rng& rng);

template <typename S>
Tensor<S> voxres_branch(const Tensor<S>& x, VoxResModule<S>& m, BatchNormMode mode);

template <typename S>
Tensor<S> voxres_forward(const Tensor<S>& x, VoxResModule<S>& m, BatchNormMode mode);

}  // namespace vxr

#endif
