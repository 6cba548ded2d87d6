#include "voxresnet.h"

#include <cstring>
#include <fstream>
#include <memory>
#include <string>

#include "errors.hpp"
#include "parallel.hpp"
#include "pipeline.hpp"
#include "volio.hpp"

struct vxr_ctx {
    std::string error;
    vxr_log_fn log_fn = nullptr;
    void* log_user = nullptr;
};

struct vxr_volume {
    vxr::VVolData data;
};

namespace {

const char* require(const char* s, const char* what) {
    VXR_CHECK_USAGE(s != nullptr && s[0] != '\0', "missing required argument: " << what);
    return s;
}

std::string opt(const char* s) { return s == nullptr ? std::string() : std::string(s); }

vxr::LogSink sink_for(vxr_ctx* ctx) {
    if (ctx == nullptr || ctx->log_fn == nullptr) return nullptr;
    return [ctx](const std::string& line) { ctx->log_fn(line.c_str(), ctx->log_user); };
}

template <typename Fn>
int guarded(vxr_ctx* ctx, Fn&& fn) {
    if (ctx == nullptr) return VXR_ERR_USAGE;
    ctx->error.clear();
    try {
        fn();
        return VXR_OK;
    } catch (const vxr::usage_error& e) {
        ctx->error = e.what();
        return VXR_ERR_USAGE;
    } catch (const vxr::numeric_error& e) {
        ctx->error = e.what();
        return VXR_ERR_NUMERIC;
    } catch (const vxr::data_error& e) {
        ctx->error = e.what();
        return VXR_ERR_DATA;
    } catch (const std::exception& e) {
        ctx->error = e.what();
        return VXR_ERR_DATA;
    }
}

}  // namespace

extern "C" {

vxr_ctx* vxr_ctx_new(void) { return new vxr_ctx(); }

void vxr_ctx_free(vxr_ctx* ctx) { delete ctx; }

const char* vxr_ctx_error(const vxr_ctx* ctx) { return ctx == nullptr ? "" : ctx->error.c_str(); }

void vxr_ctx_set_threads(vxr_ctx* ctx, int threads) {
    (void)ctx;
    vxr::set_thread_count(threads);
}

void vxr_ctx_set_logger(vxr_ctx* ctx, vxr_log_fn fn, void* user) {
    if (ctx == nullptr) return;
    ctx->log_fn = fn;
    ctx->log_user = user;
}

void vxr_phantom_params_init(vxr_phantom_params* p) {
    if (p == nullptr) return;
    p->seed = 7;
    p->cases = 6;
    p->extent = 64;
    p->modalities = 3;
    p->noise_std = 0.08;
    p->bias_amplitude = 0.2;
}

int vxr_phantom(vxr_ctx* ctx, const vxr_phantom_params* p, const char* out_dir) {
    return guarded(ctx, [&] {
        VXR_CHECK_USAGE(p != nullptr, "missing phantom parameters");
        vxr::PhantomDatasetOptions opts;
        opts.seed = p->seed;
        opts.cases = p->cases;
        opts.extent = p->extent;
        opts.modalities = p->modalities;
        opts.noise_std = p->noise_std;
        opts.bias_amplitude = p->bias_amplitude;
        vxr::make_phantom_dataset(opts, require(out_dir, "output directory"));
    });
}

void vxr_preprocess_params_init(vxr_preprocess_params* p) {
    if (p == nullptr) return;
    vxr::PreprocessParams d;
    p->sigma_vox = d.sigma_vox;
    p->clahe_tiles = d.clahe_tiles_h;
    p->clahe_clip_fraction = d.clahe_clip_fraction;
    p->clahe_bins = d.clahe_bins;
}

int vxr_preprocess(vxr_ctx* ctx, const char* manifest_path, const char* out_dir,
                   const vxr_preprocess_params* p) {
    return guarded(ctx, [&] {
        vxr::PreprocessParams params;
        if (p != nullptr) {
            params.sigma_vox = p->sigma_vox;
            params.clahe_tiles_h = p->clahe_tiles;
            params.clahe_tiles_w = p->clahe_tiles;
            params.clahe_clip_fraction = p->clahe_clip_fraction;
            params.clahe_bins = p->clahe_bins;
        }
        vxr::preprocess_dataset(require(manifest_path, "manifest path"), require(out_dir, "output directory"),
                                params);
    });
}

int vxr_train(vxr_ctx* ctx, const char* config_path, const char* manifest_path, const char* resume_checkpoint,
              const char* out_checkpoint, const char* log_path) {
    return guarded(ctx, [&] {
        std::ofstream log_file;
        if (log_path != nullptr && log_path[0] != '\0') {
            log_file.open(log_path);
            VXR_CHECK_DATA(log_file.good(), "cannot open log file " << log_path);
        }
        vxr::LogSink echo = sink_for(ctx);
        vxr::LogSink log = [&](const std::string& line) {
            if (log_file.is_open()) log_file << line << "\n";
            if (echo) echo(line);
        };
        vxr::train_from_files(require(config_path, "config path"), require(manifest_path, "manifest path"),
                              require(out_checkpoint, "output checkpoint path"), opt(resume_checkpoint), log);
    });
}

int vxr_predict(vxr_ctx* ctx, const char* checkpoint_path, const char* input_vvol, int64_t tile, int64_t stride,
                const char* out_prob, const char* out_labels) {
    return guarded(ctx, [&] {
        VXR_CHECK_USAGE(out_prob != nullptr || out_labels != nullptr,
                        "predict needs at least one output path");
        vxr::predict_files(require(checkpoint_path, "checkpoint path"), require(input_vvol, "input volume"),
                           tile, stride, opt(out_prob), opt(out_labels));
    });
}

int vxr_autocontext_train(vxr_ctx* ctx, const char* config_path, const char* manifest_path,
                          const char* stage1_checkpoint, const char* out_checkpoint, int64_t tile,
                          int64_t stride, const char* log_path) {
    return guarded(ctx, [&] {
        std::ofstream log_file;
        if (log_path != nullptr && log_path[0] != '\0') {
            log_file.open(log_path);
            VXR_CHECK_DATA(log_file.good(), "cannot open log file " << log_path);
        }
        vxr::LogSink echo = sink_for(ctx);
        vxr::LogSink log = [&](const std::string& line) {
            if (log_file.is_open()) log_file << line << "\n";
            if (echo) echo(line);
        };
        vxr::autocontext_train_files(require(config_path, "config path"), require(manifest_path, "manifest path"),
                                     require(stage1_checkpoint, "stage-1 checkpoint"),
                                     require(out_checkpoint, "output checkpoint path"), tile, stride, log);
    });
}

int vxr_autocontext_predict(vxr_ctx* ctx, const char* stage1_checkpoint, const char* stage2_checkpoint,
                            const char* input_vvol, int64_t tile, int64_t stride, const char* out_prob,
                            const char* out_labels) {
    return guarded(ctx, [&] {
        vxr::autocontext_predict_files(require(stage1_checkpoint, "stage-1 checkpoint"),
                                       require(stage2_checkpoint, "stage-2 checkpoint"),
                                       require(input_vvol, "input volume"), tile, stride, opt(out_prob),
                                       opt(out_labels));
    });
}

int vxr_evaluate(vxr_ctx* ctx, const char* pred_labels, const char* truth_labels, const char* report_txt,
                 const char* report_kv, vxr_metrics* out) {
    return guarded(ctx, [&] {
        const vxr::MetricsReport r = vxr::evaluate_files(
            require(pred_labels, "prediction labels"), require(truth_labels, "truth labels"),
            opt(report_txt), opt(report_kv));
        if (out != nullptr) {
            std::memset(out, 0, sizeof(*out));
            for (int k = 0; k < 3; ++k) {
                const auto& cm = r.tissue[static_cast<std::size_t>(k)];
                out->dc[k] = cm.dc;
                out->hd95_defined[k] = cm.hd95_mm.has_value() ? 1 : 0;
                out->hd95_mm[k] = cm.hd95_mm.value_or(0.0);
                out->avd_defined[k] = cm.avd.has_value() ? 1 : 0;
                out->avd[k] = cm.avd.value_or(0.0);
            }
            out->macro_dc = r.macro_dc;
        }
    });
}

int vxr_evaluate_dataset(vxr_ctx* ctx, const char* manifest_path, const char* pred_dir, const char* out_dir) {
    return guarded(ctx, [&] {
        vxr::evaluate_dataset(require(manifest_path, "manifest path"), require(pred_dir, "prediction directory"),
                              require(out_dir, "output directory"));
    });
}

int vxr_slices(vxr_ctx* ctx, const char* input_vvol, int channel, int every, const char* out_pgm) {
    return guarded(ctx, [&] {
        vxr::export_slices(require(input_vvol, "input volume"), channel, every, require(out_pgm, "output path"));
    });
}

int vxr_volume_open(vxr_ctx* ctx, const char* path, vxr_volume** out) {
    return guarded(ctx, [&] {
        VXR_CHECK_USAGE(out != nullptr, "missing output handle");
        auto v = std::make_unique<vxr_volume>();
        v->data = vxr::read_vvol(require(path, "volume path"));
        *out = v.release();
    });
}

void vxr_volume_free(vxr_volume* v) { delete v; }

int vxr_volume_get_info(const vxr_volume* v, vxr_volume_info* out) {
    if (v == nullptr || out == nullptr) return VXR_ERR_USAGE;
    std::memset(out, 0, sizeof(*out));
    std::strncpy(out->dtype, v->data.header.dtype.c_str(), sizeof(out->dtype) - 1);
    out->channels = v->data.header.channels;
    for (int i = 0; i < 3; ++i) {
        out->extents[i] = v->data.header.extents[static_cast<std::size_t>(i)];
        out->spacing_mm[i] = v->data.header.spacing[static_cast<std::size_t>(i)];
    }
    out->num_classes = v->data.header.num_classes;
    return VXR_OK;
}

const float* vxr_volume_data_f32(const vxr_volume* v) {
    if (v == nullptr || !v->data.volume.has_value()) return nullptr;
    return v->data.volume->data.data();
}

const uint8_t* vxr_volume_data_u8(const vxr_volume* v) {
    if (v == nullptr || !v->data.labels.has_value()) return nullptr;
    return v->data.labels->data.data();
}

}  // extern "C"
