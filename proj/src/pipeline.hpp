#ifndef VXR_PIPELINE_HPP
#define VXR_PIPELINE_HPP

#include <string>
#include <vector>

#include "autocontext.hpp"
#include "metrics.hpp"
#include "phantom.hpp"
#include "preprocess.hpp"
#include "train.hpp"
#include "volio.hpp"

namespace vxr {

// File-level pipeline stages. The CLI and the C API are thin adapters over
// these; everything here takes and produces .vvol / manifest / checkpoint
// files on disk.

struct PhantomDatasetOptions {
    std::uint64_t seed = 7;
    int cases = 6;
    std::int64_t extent = 64;
    int modalities = 3;
    double noise_std = 0.08;
    double bias_amplitude = 0.2;
};

// Writes case directories (modality + label volumes) plus manifest.txt.
void make_phantom_dataset(const PhantomDatasetOptions& opts, const std::string& out_dir);

// Raw-modality manifest -> per-case input stacks + copied labels + manifest.
void preprocess_dataset(const std::string& manifest_path, const std::string& out_dir,
                        const PreprocessParams& params);

// Loads the stack+labels cases of a manifest.
std::vector<TrainCase> load_train_cases(const std::string& manifest_path);

TrainResult train_from_files(const std::string& config_path, const std::string& manifest_path,
                             const std::string& out_checkpoint, const std::string& resume_path,
                             const LogSink& log);

void predict_files(const std::string& checkpoint_path, const std::string& input_vvol, std::int64_t tile,
                   std::int64_t stride, const std::string& out_prob, const std::string& out_labels);

// Stage-1 contexts are persisted beside each case stack as
// <stack>_context.vvol; a <out_checkpoint>.pipeline sidecar records both
// checkpoint hashes.
void autocontext_train_files(const std::string& config_path, const std::string& manifest_path,
                             const std::string& stage1_checkpoint, const std::string& out_checkpoint,
                             std::int64_t tile, std::int64_t stride, const LogSink& log);

void autocontext_predict_files(const std::string& stage1_checkpoint, const std::string& stage2_checkpoint,
                               const std::string& input_vvol, std::int64_t tile, std::int64_t stride,
                               const std::string& out_prob, const std::string& out_labels);

MetricsReport evaluate_files(const std::string& pred_labels, const std::string& truth_labels,
                             const std::string& report_txt, const std::string& report_kv);

// Evaluates <pred_dir>/<case>_labels.vvol against every labeled manifest
// case; per-case reports plus aggregate.txt/aggregate.kv in out_dir.
void evaluate_dataset(const std::string& manifest_path, const std::string& pred_dir,
                      const std::string& out_dir);

// Grayscale PGM mosaic of every k-th axial slice.
void export_slices(const std::string& input_vvol, int channel, int every, const std::string& out_pgm);

}  // namespace vxr

#endif
