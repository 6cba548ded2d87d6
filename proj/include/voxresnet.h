/*
 * voxresnet: volumetric residual-network segmentation toolkit.
 *
 * C interface to the shared library. Every entry point returns VXR_OK (0) on
 * success or a nonzero error code; the message for the most recent failure
 * on a context is available through vxr_ctx_error(). Handles are opaque and
 * must be released with their matching *_free function.
 */
#ifndef VOXRESNET_H
#define VOXRESNET_H

#include <stdint.h>

#if defined(__cplusplus)
extern "C" {
#endif

#define VXR_OK 0
#define VXR_ERR_USAGE 1   /* bad arguments or configuration */
#define VXR_ERR_DATA 2    /* missing or malformed inputs */
#define VXR_ERR_NUMERIC 3 /* non-finite loss or gradients */

typedef struct vxr_ctx vxr_ctx;
typedef void (*vxr_log_fn)(const char* line, void* user);

vxr_ctx* vxr_ctx_new(void);
void vxr_ctx_free(vxr_ctx* ctx);

/* Message of the most recent failed call on this context ("" if none). */
const char* vxr_ctx_error(const vxr_ctx* ctx);

/* Worker threads for the tensor kernels; 0 restores the hardware default. */
void vxr_ctx_set_threads(vxr_ctx* ctx, int threads);

/* Receives one line per training iteration and stage-level progress notes. */
void vxr_ctx_set_logger(vxr_ctx* ctx, vxr_log_fn fn, void* user);

/* ---- synthetic data ---------------------------------------------------- */

typedef struct {
    uint64_t seed;
    int cases;
    int64_t extent;
    int modalities;
    double noise_std;
    double bias_amplitude;
} vxr_phantom_params;

void vxr_phantom_params_init(vxr_phantom_params* p);
int vxr_phantom(vxr_ctx* ctx, const vxr_phantom_params* p, const char* out_dir);

/* ---- preprocessing ------------------------------------------------------ */

typedef struct {
    double sigma_vox;          /* background-subtraction Gaussian width */
    int clahe_tiles;           /* tile grid per axis */
    double clahe_clip_fraction;
    int clahe_bins;
} vxr_preprocess_params;

void vxr_preprocess_params_init(vxr_preprocess_params* p);
int vxr_preprocess(vxr_ctx* ctx, const char* manifest_path, const char* out_dir,
                   const vxr_preprocess_params* p);

/* ---- training and inference --------------------------------------------- */

int vxr_train(vxr_ctx* ctx, const char* config_path, const char* manifest_path,
              const char* resume_checkpoint, /* NULL to start fresh */
              const char* out_checkpoint, const char* log_path /* NULL for no log file */);

int vxr_predict(vxr_ctx* ctx, const char* checkpoint_path, const char* input_vvol, int64_t tile,
                int64_t stride, const char* out_prob /* NULL to skip */,
                const char* out_labels /* NULL to skip */);

int vxr_autocontext_train(vxr_ctx* ctx, const char* config_path, const char* manifest_path,
                          const char* stage1_checkpoint, const char* out_checkpoint, int64_t tile,
                          int64_t stride, const char* log_path);

int vxr_autocontext_predict(vxr_ctx* ctx, const char* stage1_checkpoint, const char* stage2_checkpoint,
                            const char* input_vvol, int64_t tile, int64_t stride, const char* out_prob,
                            const char* out_labels);

/* ---- evaluation ---------------------------------------------------------- */

typedef struct {
    /* index 0=CSF, 1=GM, 2=WM */
    double dc[3];
    double hd95_mm[3];
    double avd[3];
    int hd95_defined[3];
    int avd_defined[3];
    double macro_dc;
} vxr_metrics;

int vxr_evaluate(vxr_ctx* ctx, const char* pred_labels, const char* truth_labels,
                 const char* report_txt /* NULL to skip */, const char* report_kv /* NULL to skip */,
                 vxr_metrics* out /* NULL to skip */);

int vxr_evaluate_dataset(vxr_ctx* ctx, const char* manifest_path, const char* pred_dir,
                         const char* out_dir);

/* ---- inspection ----------------------------------------------------------- */

int vxr_slices(vxr_ctx* ctx, const char* input_vvol, int channel, int every, const char* out_pgm);

typedef struct vxr_volume vxr_volume;

typedef struct {
    char dtype[4]; /* "f32" or "u8" */
    int64_t channels;
    int64_t extents[3]; /* D, H, W */
    float spacing_mm[3];
    int num_classes; /* u8 volumes only, else 0 */
} vxr_volume_info;

int vxr_volume_open(vxr_ctx* ctx, const char* path, vxr_volume** out);
void vxr_volume_free(vxr_volume* v);
int vxr_volume_get_info(const vxr_volume* v, vxr_volume_info* out);

/* Borrowed pointers, valid until vxr_volume_free; NULL when the dtype differs. */
const float* vxr_volume_data_f32(const vxr_volume* v);
const uint8_t* vxr_volume_data_u8(const vxr_volume* v);

#if defined(__cplusplus)
}
#endif

#endif /* VOXRESNET_H */
