#include "pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

namespace fs = std::filesystem;

namespace vxr {
namespace {

std::string case_dir_name(int index) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "case%02d", index);
    return buf;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream os(path);
    VXR_CHECK_DATA(os.good(), "cannot open " << path << " for writing");
    return os;
}

}  // namespace

void make_phantom_dataset(const PhantomDatasetOptions& opts, const std::string& out_dir) {
    VXR_CHECK_USAGE(opts.cases >= 1, "phantom dataset needs at least one case");
    fs::create_directories(out_dir);
    DatasetManifest manifest;
    manifest.base_dir = out_dir;
    for (int i = 0; i < opts.cases; ++i) {
        PhantomSpec spec = PhantomSpec::canonical(i, opts.seed, opts.extent, opts.modalities);
        spec.noise_std = opts.noise_std;
        spec.bias_amplitude = opts.bias_amplitude;
        const PhantomCase data = generate_phantom(spec);

        const std::string dir = case_dir_name(i);
        fs::create_directories(fs::path(out_dir) / dir);
        ManifestCase entry;
        entry.id = dir;
        for (const auto& mod : data.modalities) {
            const std::string rel = dir + "/" + mod.channel_names[0] + ".vvol";
            write_vvol(mod, (fs::path(out_dir) / rel).string());
            entry.modalities.emplace_back(mod.channel_names[0], rel);
        }
        const std::string lrel = dir + "/labels.vvol";
        write_vvol(data.labels, spec.spacing, (fs::path(out_dir) / lrel).string());
        entry.labels = lrel;
        manifest.cases.push_back(entry);
    }
    save_manifest(manifest, (fs::path(out_dir) / "manifest.txt").string());
}

void preprocess_dataset(const std::string& manifest_path, const std::string& out_dir,
                        const PreprocessParams& params) {
    const DatasetManifest manifest = load_manifest(manifest_path);
    validate_manifest(manifest);
    fs::create_directories(out_dir);
    DatasetManifest out;
    out.base_dir = out_dir;
    for (const auto& c : manifest.cases) {
        VXR_CHECK_DATA(!c.modalities.empty(), "case " << c.id << " has no raw modalities to preprocess");
        std::vector<Volume> raw;
        raw.reserve(c.modalities.size());
        for (const auto& [name, rel] : c.modalities) {
            Volume v = read_volume(manifest.resolve(rel));
            if (v.channel_names.empty()) v.channel_names = {name};
            raw.push_back(std::move(v));
        }
        const Volume stack = build_input_stack(raw, params);

        fs::create_directories(fs::path(out_dir) / c.id);
        ManifestCase entry;
        entry.id = c.id;
        entry.stack = c.id + "/stack.vvol";
        write_vvol(stack, (fs::path(out_dir) / entry.stack).string());
        if (!c.labels.empty()) {
            std::array<float, 3> spacing;
            const LabelVolume labels = read_labels(manifest.resolve(c.labels), &spacing);
            entry.labels = c.id + "/labels.vvol";
            write_vvol(labels, spacing, (fs::path(out_dir) / entry.labels).string());
        }
        out.cases.push_back(entry);
    }
    save_manifest(out, (fs::path(out_dir) / "manifest.txt").string());
}

std::vector<TrainCase> load_train_cases(const std::string& manifest_path) {
    const DatasetManifest manifest = load_manifest(manifest_path);
    validate_manifest(manifest);
    std::vector<TrainCase> cases;
    for (const auto& c : manifest.cases) {
        VXR_CHECK_DATA(!c.stack.empty(),
                       "case " << c.id << " has no preprocessed stack (run the preprocess stage first)");
        VXR_CHECK_DATA(!c.labels.empty(), "case " << c.id << " has no labels");
        TrainCase tc;
        tc.id = c.id;
        tc.stack = read_volume(manifest.resolve(c.stack));
        tc.labels = read_labels(manifest.resolve(c.labels));
        cases.push_back(std::move(tc));
    }
    return cases;
}

TrainResult train_from_files(const std::string& config_path, const std::string& manifest_path,
                             const std::string& out_checkpoint, const std::string& resume_path,
                             const LogSink& log) {
    const TrainConfig config = TrainConfig::from_file(config_path);
    const std::vector<TrainCase> cases = load_train_cases(manifest_path);
    const int num_classes = cases.front().labels.num_classes;
    VXR_CHECK_DATA(num_classes >= 2, "labels declare fewer than two classes");
    const NetworkSpec spec =
        build_voxresnet(static_cast<int>(cases.front().stack.channels), num_classes, config.width_scale);

    Checkpoint resume;
    const Checkpoint* resume_ptr = nullptr;
    if (!resume_path.empty()) {
        resume = load_checkpoint(resume_path);
        resume_ptr = &resume;
    }
    return train(spec, cases, config, log, resume_ptr, out_checkpoint);
}

void predict_files(const std::string& checkpoint_path, const std::string& input_vvol, std::int64_t tile,
                   std::int64_t stride, const std::string& out_prob, const std::string& out_labels) {
    Checkpoint ck = load_checkpoint(checkpoint_path);
    const Volume input = read_volume(input_vvol);
    const Volume probs = predict_checkpoint(ck, input, tile, stride);
    if (!out_prob.empty()) write_vvol(probs, out_prob);
    if (!out_labels.empty()) {
        write_vvol(argmax_labels(probs), probs.spacing_mm, out_labels);
    }
}

namespace {

std::string context_path_for(const DatasetManifest& manifest, const ManifestCase& c) {
    const fs::path stack = manifest.resolve(c.stack);
    fs::path p = stack;
    p.replace_extension();
    return p.string() + "_context.vvol";
}

}  // namespace

void autocontext_train_files(const std::string& config_path, const std::string& manifest_path,
                             const std::string& stage1_checkpoint, const std::string& out_checkpoint,
                             std::int64_t tile, std::int64_t stride, const LogSink& log) {
    const TrainConfig config = TrainConfig::from_file(config_path);
    const DatasetManifest manifest = load_manifest(manifest_path);
    std::vector<TrainCase> cases = load_train_cases(manifest_path);
    Checkpoint stage1 = load_checkpoint(stage1_checkpoint);

    AutoContextOptions opts;
    opts.tile = tile;
    opts.stride = stride;
    std::vector<Volume> contexts = generate_context(stage1, cases, opts);
    for (std::size_t i = 0; i < cases.size(); ++i) {
        write_vvol(contexts[i], context_path_for(manifest, manifest.cases[i]));
    }

    train_stage2(cases, contexts, config, log, out_checkpoint);

    std::ofstream os = open_out(out_checkpoint + ".pipeline");
    os << "stage1 " << stage1_checkpoint << " hash " << file_hash(stage1_checkpoint) << "\n";
    os << "stage2 " << out_checkpoint << " hash " << file_hash(out_checkpoint) << "\n";
}

void autocontext_predict_files(const std::string& stage1_checkpoint, const std::string& stage2_checkpoint,
                               const std::string& input_vvol, std::int64_t tile, std::int64_t stride,
                               const std::string& out_prob, const std::string& out_labels) {
    Checkpoint s1 = load_checkpoint(stage1_checkpoint);
    Checkpoint s2 = load_checkpoint(stage2_checkpoint);
    const Volume input = read_volume(input_vvol);
    AutoContextOptions opts;
    opts.tile = tile;
    opts.stride = stride;
    const Volume probs = predict_autocontext(s1, s2, input, opts);
    if (!out_prob.empty()) write_vvol(probs, out_prob);
    if (!out_labels.empty()) write_vvol(argmax_labels(probs), probs.spacing_mm, out_labels);
}

MetricsReport evaluate_files(const std::string& pred_labels, const std::string& truth_labels,
                             const std::string& report_txt, const std::string& report_kv) {
    const LabelVolume pred = read_labels(pred_labels);
    std::array<float, 3> spacing{1.0f, 1.0f, 1.0f};
    const LabelVolume truth = read_labels(truth_labels, &spacing);
    const MetricsReport report =
        evaluate_case(pred, truth, {static_cast<double>(spacing[0]), static_cast<double>(spacing[1]),
                                    static_cast<double>(spacing[2])});
    if (!report_txt.empty()) open_out(report_txt) << metrics_table(report);
    if (!report_kv.empty()) open_out(report_kv) << metrics_keyvals(report);
    return report;
}

void evaluate_dataset(const std::string& manifest_path, const std::string& pred_dir,
                      const std::string& out_dir) {
    const DatasetManifest manifest = load_manifest(manifest_path);
    fs::create_directories(out_dir);
    double dc[3] = {0, 0, 0};
    double hd[3] = {0, 0, 0};
    double avd[3] = {0, 0, 0};
    int n = 0, hd_n[3] = {0, 0, 0}, avd_n[3] = {0, 0, 0};
    for (const auto& c : manifest.cases) {
        if (c.labels.empty()) continue;
        const std::string pred = (fs::path(pred_dir) / (c.id + "_labels.vvol")).string();
        VXR_CHECK_DATA(fs::exists(pred), "missing prediction " << pred);
        const MetricsReport r =
            evaluate_files(pred, manifest.resolve(c.labels), (fs::path(out_dir) / (c.id + ".txt")).string(),
                           (fs::path(out_dir) / (c.id + ".kv")).string());
        for (int k = 0; k < 3; ++k) {
            dc[k] += r.tissue[static_cast<std::size_t>(k)].dc;
            if (r.tissue[static_cast<std::size_t>(k)].hd95_mm) {
                hd[k] += *r.tissue[static_cast<std::size_t>(k)].hd95_mm;
                ++hd_n[k];
            }
            if (r.tissue[static_cast<std::size_t>(k)].avd) {
                avd[k] += *r.tissue[static_cast<std::size_t>(k)].avd;
                ++avd_n[k];
            }
        }
        ++n;
    }
    VXR_CHECK_DATA(n > 0, "manifest has no labeled cases to evaluate");
    std::ofstream os = open_out((fs::path(out_dir) / "aggregate.kv").string());
    os << "cases " << n << "\n";
    for (int k = 0; k < 3; ++k) {
        const std::string cls = MetricsReport::kClassNames[k];
        os << cls << ".dc " << dc[k] / n << "\n";
        if (hd_n[k] > 0) os << cls << ".hd95_mm " << hd[k] / hd_n[k] << "\n";
        if (avd_n[k] > 0) os << cls << ".avd " << avd[k] / avd_n[k] << "\n";
    }
    os << "macro.dc " << (dc[0] + dc[1] + dc[2]) / (3.0 * n) << "\n";
}

void export_slices(const std::string& input_vvol, int channel, int every, const std::string& out_pgm) {
    VXR_CHECK_USAGE(every >= 1, "slice step must be >= 1");
    const VVolData data = read_vvol(input_vvol);
    std::int64_t d, h, w;
    std::vector<float> gray;
    if (data.volume) {
        const Volume& v = *data.volume;
        VXR_CHECK_USAGE(channel >= 0 && channel < v.channels,
                        "channel " << channel << " out of range [0, " << v.channels << ")");
        d = v.d;
        h = v.h;
        w = v.w;
        const float* p = v.channel(channel);
        float mn = p[0], mx = p[0];
        for (std::int64_t i = 0; i < v.voxels(); ++i) {
            mn = std::min(mn, p[i]);
            mx = std::max(mx, p[i]);
        }
        const float range = mx > mn ? mx - mn : 1.0f;
        gray.resize(static_cast<std::size_t>(v.voxels()));
        for (std::int64_t i = 0; i < v.voxels(); ++i) gray[static_cast<std::size_t>(i)] = (p[i] - mn) / range;
    } else {
        const LabelVolume& v = *data.labels;
        d = v.d;
        h = v.h;
        w = v.w;
        const float denom = static_cast<float>(std::max(1, v.num_classes - 1));
        gray.resize(static_cast<std::size_t>(v.voxels()));
        for (std::int64_t i = 0; i < v.voxels(); ++i) {
            gray[static_cast<std::size_t>(i)] = static_cast<float>(v.data[static_cast<std::size_t>(i)]) / denom;
        }
    }

    const std::int64_t nslices = (d + every - 1) / every;
    const std::int64_t cols = static_cast<std::int64_t>(std::ceil(std::sqrt(static_cast<double>(nslices))));
    const std::int64_t rows = (nslices + cols - 1) / cols;
    std::vector<std::uint8_t> img(static_cast<std::size_t>(rows * h * cols * w), 0);
    for (std::int64_t s = 0; s < nslices; ++s) {
        const std::int64_t z = s * every;
        const std::int64_t gr = s / cols, gc = s % cols;
        for (std::int64_t y = 0; y < h; ++y) {
            for (std::int64_t x = 0; x < w; ++x) {
                const float v = gray[static_cast<std::size_t>((z * h + y) * w + x)];
                img[static_cast<std::size_t>((gr * h + y) * cols * w + gc * w + x)] =
                    static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
            }
        }
    }
    std::ofstream os(out_pgm, std::ios::binary);
    VXR_CHECK_DATA(os.good(), "cannot open " << out_pgm << " for writing");
    os << "P5\n" << cols * w << " " << rows * h << "\n255\n";
    os.write(reinterpret_cast<const char*>(img.data()), static_cast<std::streamsize>(img.size()));
    VXR_CHECK_DATA(os.good(), "write failed for " << out_pgm);
}

}  // namespace vxr
