#include "autocontext.hpp"

namespace vxr {

std::vector<Volume> generate_context(Checkpoint& stage1, const std::vector<TrainCase>& cases,
                                     const AutoContextOptions& opts) {
    std::vector<Volume> out;
    out.reserve(cases.size());
    for (const auto& c : cases) {
        VXR_CHECK_DATA(c.stack.channels == stage1.spec.in_channels,
                       "case " << c.id << " does not match the stage-1 input channel count");
        out.push_back(predict_checkpoint(stage1, c.stack, opts.tile, opts.stride));
    }
    return out;
}

TrainResult train_stage2(const std::vector<TrainCase>& cases, const std::vector<Volume>& contexts,
                         const TrainConfig& config, const LogSink& log, const std::string& checkpoint_path) {
    VXR_CHECK_DATA(contexts.size() == cases.size(),
                   "missing context maps: " << contexts.size() << " for " << cases.size() << " cases");
    VXR_CHECK_DATA(!cases.empty(), "stage-2 training needs a non-empty dataset");

    std::vector<TrainCase> merged;
    merged.reserve(cases.size());
    for (std::size_t i = 0; i < cases.size(); ++i) {
        const auto& c = cases[i];
        const auto& ctx = contexts[i];
        VXR_CHECK_DATA(ctx.d == c.stack.d && ctx.h == c.stack.h && ctx.w == c.stack.w,
                       "context extents for case " << c.id << " do not match the case extents");
        // Context probabilities enter as-is; they are already in [0, 1].
        merged.push_back({c.id, concat_channels(c.stack, ctx), c.labels});
    }

    const int num_classes = static_cast<int>(contexts.front().channels);
    const NetworkSpec spec2 = build_voxresnet(static_cast<int>(merged.front().stack.channels), num_classes,
                                              config.width_scale);
    return train(spec2, merged, config, log, nullptr, checkpoint_path);
}

Volume predict_autocontext(Checkpoint& stage1, Checkpoint& stage2, const Volume& input,
                           const AutoContextOptions& opts) {
    const Volume ctx = predict_checkpoint(stage1, input, opts.tile, opts.stride);
    const Volume fused = concat_channels(input, ctx);
    return predict_checkpoint(stage2, fused, opts.tile, opts.stride);
}

}  // namespace vxr
