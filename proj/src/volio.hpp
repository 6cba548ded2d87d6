#ifndef VXR_VOLIO_HPP
#define VXR_VOLIO_HPP

#include <optional>
#include <string>
#include <vector>

#include "volume.hpp"

namespace vxr {

// Single-file container: a short text header ("VVOL1", dtype, extents,
// spacing, names, byte count) followed by the raw little-endian payload.
// Round-trips are bit-exact for both f32 and u8.
struct VVolHeader {
    std::string dtype;  // "f32" or "u8"
    std::int64_t channels = 0;
    std::array<std::int64_t, 3> extents{0, 0, 0};
    std::array<float, 3> spacing{1.0f, 1.0f, 1.0f};
    std::vector<std::string> channel_names;
    int num_classes = 0;  // u8 only
    std::int64_t bytes = 0;
};

struct VVolData {
    VVolHeader header;
    std::optional<Volume> volume;      // when dtype == f32
    std::optional<LabelVolume> labels;  // when dtype == u8
};

void write_vvol(const Volume& v, const std::string& path);
void write_vvol(const LabelVolume& v, const std::array<float, 3>& spacing, const std::string& path);
VVolData read_vvol(const std::string& path);
VVolHeader read_vvol_header(const std::string& path);

Volume read_volume(const std::string& path);
LabelVolume read_labels(const std::string& path, std::array<float, 3>* spacing_out = nullptr);

// Dataset manifest: one block per case listing either raw modality volumes
// or a preprocessed stack, plus optional labels and context maps. Paths are
// relative to the manifest location.
struct ManifestCase {
    std::string id;
    std::vector<std::pair<std::string, std::string>> modalities;  // (name, path)
    std::string stack;
    std::string labels;
    std::string context;
};

struct DatasetManifest {
    std::string base_dir;
    std::vector<ManifestCase> cases;

    std::string resolve(const std::string& rel) const;
};

DatasetManifest load_manifest(const std::string& path);
void save_manifest(const DatasetManifest& manifest, const std::string& path);

// Checks referenced files exist and that extents agree within each case.
void validate_manifest(const DatasetManifest& manifest);

}  // namespace vxr

#endif
