// vxr: command-line front end for the voxresnet shared library. Every
// subcommand is a thin adapter over one C API call.
#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "voxresnet.h"

namespace {

void print_log_line(const char* line, void*) { std::printf("%s\n", line); }

int finish(vxr_ctx* ctx, int rc) {
    if (rc != VXR_OK) std::fprintf(stderr, "error: %s\n", vxr_ctx_error(ctx));
    vxr_ctx_free(ctx);
    return rc;
}

const char* maybe(const std::string& s) { return s.empty() ? nullptr : s.c_str(); }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"voxresnet volumetric segmentation pipeline"};
    app.require_subcommand(1);
    app.fallthrough();  // global flags may follow the subcommand
    int threads = 0;
    app.add_option("--threads", threads, "worker threads (0 = hardware default)");
    bool quiet = false;
    app.add_flag("--quiet", quiet, "suppress per-iteration log output");

    // phantom
    auto* phantom = app.add_subcommand("phantom", "generate a synthetic labeled dataset");
    vxr_phantom_params pp;
    vxr_phantom_params_init(&pp);
    std::string phantom_out;
    phantom->add_option("--out", phantom_out, "output dataset directory")->required();
    phantom->add_option("--seed", pp.seed, "dataset seed");
    phantom->add_option("--cases", pp.cases, "number of cases");
    phantom->add_option("--extent", pp.extent, "cubic volume extent in voxels");
    phantom->add_option("--modalities", pp.modalities, "pseudo-modalities per case");
    phantom->add_option("--noise", pp.noise_std, "additive Gaussian noise std");
    phantom->add_option("--bias", pp.bias_amplitude, "multiplicative bias field amplitude");

    // preprocess
    auto* preprocess = app.add_subcommand("preprocess", "build network input stacks from raw modalities");
    vxr_preprocess_params prep;
    vxr_preprocess_params_init(&prep);
    std::string pre_manifest, pre_out;
    preprocess->add_option("--manifest", pre_manifest, "raw dataset manifest")->required();
    preprocess->add_option("--out", pre_out, "output dataset directory")->required();
    preprocess->add_option("--sigma", prep.sigma_vox, "background-subtraction Gaussian sigma (voxels)");
    preprocess->add_option("--clahe-tiles", prep.clahe_tiles, "CLAHE tile grid per axis");
    preprocess->add_option("--clahe-clip", prep.clahe_clip_fraction, "CLAHE clip fraction of tile pixels");
    preprocess->add_option("--clahe-bins", prep.clahe_bins, "CLAHE histogram bins");

    // train
    auto* train = app.add_subcommand("train", "train a network on preprocessed stacks");
    std::string tr_config, tr_manifest, tr_out, tr_resume, tr_log;
    train->add_option("--config", tr_config, "training config file")->required();
    train->add_option("--manifest", tr_manifest, "preprocessed dataset manifest")->required();
    train->add_option("--out", tr_out, "output checkpoint path")->required();
    train->add_option("--resume", tr_resume, "checkpoint to resume from");
    train->add_option("--log", tr_log, "write the training log to this file");

    // predict
    auto* predict = app.add_subcommand("predict", "tiled inference on one input stack");
    std::string pd_ckpt, pd_input, pd_prob, pd_labels;
    std::int64_t pd_tile = 80, pd_stride = 40;
    predict->add_option("--checkpoint", pd_ckpt, "trained checkpoint")->required();
    predict->add_option("--input", pd_input, "input stack .vvol")->required();
    predict->add_option("--tile", pd_tile, "tile extent (voxels)");
    predict->add_option("--stride", pd_stride, "tile stride (voxels)");
    predict->add_option("--prob", pd_prob, "write class probabilities here (.vvol)");
    predict->add_option("--labels", pd_labels, "write argmax labels here (.vvol)");

    // autocontext
    auto* ac = app.add_subcommand("autocontext", "two-stage context refinement");
    ac->require_subcommand(1);
    auto* ac_train = ac->add_subcommand("train", "generate stage-1 context maps and train stage 2");
    std::string ac_config, ac_manifest, ac_stage1, ac_out, ac_log;
    std::int64_t ac_tile = 80, ac_stride = 40;
    ac_train->add_option("--config", ac_config, "training config file")->required();
    ac_train->add_option("--manifest", ac_manifest, "preprocessed dataset manifest")->required();
    ac_train->add_option("--stage1", ac_stage1, "stage-1 checkpoint")->required();
    ac_train->add_option("--out", ac_out, "output stage-2 checkpoint")->required();
    ac_train->add_option("--tile", ac_tile, "tile extent for context generation");
    ac_train->add_option("--stride", ac_stride, "tile stride for context generation");
    ac_train->add_option("--log", ac_log, "write the training log to this file");

    auto* ac_predict = ac->add_subcommand("predict", "stage-1 + stage-2 inference on one stack");
    std::string acp_stage1, acp_stage2, acp_input, acp_prob, acp_labels;
    std::int64_t acp_tile = 80, acp_stride = 40;
    ac_predict->add_option("--stage1", acp_stage1, "stage-1 checkpoint")->required();
    ac_predict->add_option("--stage2", acp_stage2, "stage-2 checkpoint")->required();
    ac_predict->add_option("--input", acp_input, "input stack .vvol")->required();
    ac_predict->add_option("--tile", acp_tile, "tile extent");
    ac_predict->add_option("--stride", acp_stride, "tile stride");
    ac_predict->add_option("--prob", acp_prob, "write probabilities here (.vvol)");
    ac_predict->add_option("--labels", acp_labels, "write labels here (.vvol)");

    // evaluate
    auto* evaluate = app.add_subcommand("evaluate", "DC / HD95 / AVD per tissue class");
    std::string ev_pred, ev_truth, ev_report, ev_kv, ev_manifest, ev_pred_dir, ev_out_dir;
    evaluate->add_option("--pred", ev_pred, "predicted label .vvol");
    evaluate->add_option("--truth", ev_truth, "ground-truth label .vvol");
    evaluate->add_option("--report", ev_report, "write the text table here");
    evaluate->add_option("--keyvals", ev_kv, "write machine-readable key-values here");
    evaluate->add_option("--manifest", ev_manifest, "dataset manifest (multi-case mode)");
    evaluate->add_option("--pred-dir", ev_pred_dir, "directory of <case>_labels.vvol predictions");
    evaluate->add_option("--out-dir", ev_out_dir, "report directory (multi-case mode)");

    // slices
    auto* slices = app.add_subcommand("slices", "export a grayscale PGM mosaic of axial slices");
    std::string sl_input, sl_out;
    int sl_channel = 0, sl_every = 4;
    slices->add_option("--input", sl_input, "input .vvol (image or labels)")->required();
    slices->add_option("--out", sl_out, "output .pgm path")->required();
    slices->add_option("--channel", sl_channel, "channel to export (f32 volumes)");
    slices->add_option("--every", sl_every, "take every k-th slice");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return VXR_ERR_USAGE;
    }

    vxr_ctx* ctx = vxr_ctx_new();
    vxr_ctx_set_threads(ctx, threads);
    if (!quiet) vxr_ctx_set_logger(ctx, print_log_line, nullptr);

    if (phantom->parsed()) {
        return finish(ctx, vxr_phantom(ctx, &pp, phantom_out.c_str()));
    }
    if (preprocess->parsed()) {
        return finish(ctx, vxr_preprocess(ctx, pre_manifest.c_str(), pre_out.c_str(), &prep));
    }
    if (train->parsed()) {
        return finish(ctx, vxr_train(ctx, tr_config.c_str(), tr_manifest.c_str(), maybe(tr_resume),
                                     tr_out.c_str(), maybe(tr_log)));
    }
    if (predict->parsed()) {
        return finish(ctx, vxr_predict(ctx, pd_ckpt.c_str(), pd_input.c_str(), pd_tile, pd_stride,
                                       maybe(pd_prob), maybe(pd_labels)));
    }
    if (ac->parsed()) {
        if (ac_train->parsed()) {
            return finish(ctx, vxr_autocontext_train(ctx, ac_config.c_str(), ac_manifest.c_str(),
                                                     ac_stage1.c_str(), ac_out.c_str(), ac_tile, ac_stride,
                                                     maybe(ac_log)));
        }
        return finish(ctx, vxr_autocontext_predict(ctx, acp_stage1.c_str(), acp_stage2.c_str(),
                                                   acp_input.c_str(), acp_tile, acp_stride, maybe(acp_prob),
                                                   maybe(acp_labels)));
    }
    if (evaluate->parsed()) {
        if (!ev_manifest.empty() || !ev_pred_dir.empty() || !ev_out_dir.empty()) {
            return finish(ctx, vxr_evaluate_dataset(ctx, maybe(ev_manifest), maybe(ev_pred_dir),
                                                    maybe(ev_out_dir)));
        }
        vxr_metrics m;
        const int rc = vxr_evaluate(ctx, maybe(ev_pred), maybe(ev_truth), maybe(ev_report), maybe(ev_kv), &m);
        if (rc == VXR_OK) {
            static const char* names[3] = {"CSF", "GM", "WM"};
            for (int k = 0; k < 3; ++k) {
                std::printf("%s dc %.4f hd95_mm %s avd %s\n", names[k], m.dc[k],
                            m.hd95_defined[k] ? std::to_string(m.hd95_mm[k]).c_str() : "undef",
                            m.avd_defined[k] ? std::to_string(m.avd[k]).c_str() : "undef");
            }
            std::printf("macro dc %.4f\n", m.macro_dc);
        }
        return finish(ctx, rc);
    }
    if (slices->parsed()) {
        return finish(ctx, vxr_slices(ctx, sl_input.c_str(), sl_channel, sl_every, sl_out.c_str()));
    }
    return finish(ctx, VXR_ERR_USAGE);
}
