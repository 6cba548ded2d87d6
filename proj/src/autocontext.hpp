#ifndef VXR_AUTOCONTEXT_HPP
#define VXR_AUTOCONTEXT_HPP

#include "infer.hpp"
#include "train.hpp"

namespace vxr {

// Stage-1 probability maps become extra input channels for a fresh stage-2
// network (in_channels = appearance channels + classes). One refinement
// stage; contexts come from the final stage-1 checkpoint.
struct AutoContextOptions {
    std::int64_t tile = 80;
    std::int64_t stride = 40;
};

// Per-case stage-1 probability maps, in dataset order.
std::vector<Volume> generate_context(Checkpoint& stage1, const std::vector<TrainCase>& cases,
                                     const AutoContextOptions& opts);

// Appearance and context are concatenated channelwise before sampling, so
// every crop takes both from one corner.
TrainResult train_stage2(const std::vector<TrainCase>& cases, const std::vector<Volume>& contexts,
                         const TrainConfig& config, const LogSink& log = nullptr,
                         const std::string& checkpoint_path = "");

Volume predict_autocontext(Checkpoint& stage1, Checkpoint& stage2, const Volume& input,
                           const AutoContextOptions& opts);

}  // namespace vxr

#endif
