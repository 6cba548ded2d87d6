#ifndef VXR_TRAIN_HPP
#define VXR_TRAIN_HPP

#include <functional>
#include <string>
#include <vector>

#include "autodiff.hpp"
#include "config.hpp"
#include "loss.hpp"
#include "netspec.hpp"
#include "rng.hpp"
#include "volume.hpp"

namespace vxr {

struct TrainConfig {
    int crop_size = 80;
    int batch_size = 1;
    std::int64_t max_iterations = 1000;
    double base_lr = 1e-2;
    double lr_decay_factor = 0.1;
    std::vector<double> lr_decay_at{0.5, 0.75};  // fractions of max_iterations
    double momentum = 0.9;
    std::uint64_t seed = 1;
    double width_scale = 1.0;
    LossConfig loss;
    std::int64_t checkpoint_interval = 0;  // 0: only the final checkpoint

    void validate() const;
    // Documented config-file keys; unknown keys are rejected.
    static TrainConfig from_keyvalues(const KeyValues& kv);
    static TrainConfig from_file(const std::string& path);
    KeyValues to_keyvalues() const;
    std::uint64_t hash() const;
};

// Step schedule: base_lr scaled by lr_decay_factor at each listed fraction.
double learning_rate(const TrainConfig& config, std::int64_t iteration);

struct TrainCase {
    std::string id;
    Volume stack;
    LabelVolume labels;
};

struct CropSample {
    Tensor<float> x;  // [1, C, crop, crop, crop]
    LabelBatch y;
    std::array<std::int64_t, 3> corner;
};

// Uniform random corner over valid positions; the volume (and labels) are
// reflect-padded first when any extent is below the crop size.
CropSample sample_subvolume(const Volume& vol, const LabelVolume& labels, int crop, Rng& rng);

std::array<std::int64_t, 3> sample_corner(const std::array<std::int64_t, 3>& extents, int crop, Rng& rng);

// v <- momentum*v - lr*g; w <- w + v. Raises numeric_error naming the
// parameter on a non-finite gradient.
void sgd_step(ParamStore<float>& params, const GradStore<float>& grads, double lr, double momentum,
              ParamStore<float>& velocity);

struct Checkpoint {
    NetworkSpec spec;
    NetworkParams<float> params;
    ParamStore<float> velocity;
    std::int64_t iteration = 0;
    std::uint64_t config_hash = 0;
    std::string rng_state;
};

// Byte-stable container: text manifest plus raw little-endian f32 blobs.
void save_checkpoint(const Checkpoint& ck, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

struct TrainResult {
    Checkpoint checkpoint;
    std::vector<double> loss_trace;
};

using LogSink = std::function<void(const std::string&)>;

// sample -> forward -> loss -> backward -> SGD, reproducible from the seed.
// `resume` continues bit-identically from a saved checkpoint. When
// `checkpoint_path` is set, periodic and final checkpoints are written there.
// `halt_after` > 0 stops early after that many iterations (time-budgeted
// runs, interruption drills); the returned checkpoint resumes the run.
TrainResult train(const NetworkSpec& spec, const std::vector<TrainCase>& dataset, const TrainConfig& config,
                  const LogSink& log = nullptr, const Checkpoint* resume = nullptr,
                  const std::string& checkpoint_path = "", std::int64_t halt_after = 0);

}  // namespace vxr

#endif
