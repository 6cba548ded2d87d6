#ifndef VXR_LOSS_HPP
#define VXR_LOSS_HPP

#include <cstdint>

#include "autodiff.hpp"
#include "netspec.hpp"

namespace vxr {

struct LossConfig {
    double lambda = 5e-4;          // L2 tradeoff
    double aux_weight_init = 1.0;  // w_alpha at iteration 0
    double aux_floor = 1e-3;       // terminal w_alpha
    double aux_decay = 0.5;        // multiplicative factor per interval
    std::int64_t decay_interval = 1000;
    bool l2_include_affine = false;  // include BN gamma/beta and biases in the L2 term

    void validate() const;
};

// w = max(floor, init * decay^(iteration / interval)), monotone non-increasing.
double aux_weight(const LossConfig& config, std::int64_t iteration);

// Objective: lambda * sum ||W||^2 + sum_alpha w_alpha * CE(aux_alpha) + CE(final),
// with the cross-entropy terms averaged over voxels. The L2 sum runs over the
// conv/deconv weight tensors registered in the graph.
template <typename S>
typename Graph<S>::NodeId total_loss(Graph<S>& g, const AuxOutputs<S>& outputs, const LabelBatch& labels,
                                     const LossConfig& config, std::int64_t iteration);

}  // namespace vxr

#endif
