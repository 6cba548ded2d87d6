#include "volio.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "errors.hpp"

static_assert(std::endian::native == std::endian::little, "vvol I/O assumes a little-endian host");

namespace vxr {
namespace {

std::string format_float(float v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(v));
    return buf;
}

std::string join(const std::vector<std::string>& parts, char sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i > 0) out.push_back(sep);
        out += parts[i];
    }
    return out;
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

std::int64_t checked_payload(const VVolHeader& h, std::size_t elem_size) {
    VXR_CHECK_DATA(h.channels >= 1, "vvol channel count must be positive");
    std::int64_t n = h.channels;
    for (auto e : h.extents) {
        VXR_CHECK_DATA(e >= 1, "vvol extents must be positive");
        VXR_CHECK_DATA(n <= (std::int64_t{1} << 46) / e, "vvol header declares an implausibly large volume");
        n *= e;
    }
    VXR_CHECK_DATA(n <= (std::int64_t{1} << 46) / static_cast<std::int64_t>(elem_size),
                   "vvol header overflows the payload size");
    return n * static_cast<std::int64_t>(elem_size);
}

void write_header(std::ostream& os, const VVolHeader& h) {
    os << "VVOL1\n";
    os << "dtype " << h.dtype << "\n";
    os << "channels " << h.channels << "\n";
    os << "extents " << h.extents[0] << " " << h.extents[1] << " " << h.extents[2] << "\n";
    os << "spacing " << format_float(h.spacing[0]) << " " << format_float(h.spacing[1]) << " "
       << format_float(h.spacing[2]) << "\n";
    if (!h.channel_names.empty()) os << "names " << join(h.channel_names, ',') << "\n";
    if (h.num_classes > 0) os << "classes " << h.num_classes << "\n";
    os << "bytes " << h.bytes << "\n";
    os << "data\n";
}

VVolHeader parse_header(std::istream& is, const std::string& path) {
    std::string line;
    VXR_CHECK_DATA(std::getline(is, line) && line == "VVOL1",
                   path << ": not a vvol file (bad magic '" << line << "')");
    VVolHeader h;
    while (std::getline(is, line)) {
        if (line == "data") return h;
        std::istringstream ls(line);
        std::string key;
        ls >> key;
        if (key == "dtype") {
            ls >> h.dtype;
        } else if (key == "channels") {
            ls >> h.channels;
        } else if (key == "extents") {
            ls >> h.extents[0] >> h.extents[1] >> h.extents[2];
        } else if (key == "spacing") {
            ls >> h.spacing[0] >> h.spacing[1] >> h.spacing[2];
        } else if (key == "names") {
            std::string rest;
            ls >> rest;
            h.channel_names = split(rest, ',');
        } else if (key == "classes") {
            ls >> h.num_classes;
        } else if (key == "bytes") {
            ls >> h.bytes;
        } else {
            VXR_CHECK_DATA(false, path << ": unknown vvol header key '" << key << "'");
        }
        VXR_CHECK_DATA(!ls.fail(), path << ": malformed vvol header line '" << line << "'");
    }
    VXR_CHECK_DATA(false, path << ": vvol header has no data marker");
    return h;
}

}  // namespace

void write_vvol(const Volume& v, const std::string& path) {
    v.validate();
    VVolHeader h;
    h.dtype = "f32";
    h.channels = v.channels;
    h.extents = {v.d, v.h, v.w};
    h.spacing = v.spacing_mm;
    h.channel_names = v.channel_names;
    h.bytes = static_cast<std::int64_t>(v.data.size() * sizeof(float));
    std::ofstream os(path, std::ios::binary);
    VXR_CHECK_DATA(os.good(), "cannot open " << path << " for writing");
    write_header(os, h);
    os.write(reinterpret_cast<const char*>(v.data.data()), h.bytes);
    VXR_CHECK_DATA(os.good(), "write failed for " << path);
}

void write_vvol(const LabelVolume& v, const std::array<float, 3>& spacing, const std::string& path) {
    v.validate();
    VVolHeader h;
    h.dtype = "u8";
    h.channels = 1;
    h.extents = {v.d, v.h, v.w};
    h.spacing = spacing;
    h.num_classes = v.num_classes;
    h.bytes = static_cast<std::int64_t>(v.data.size());
    std::ofstream os(path, std::ios::binary);
    VXR_CHECK_DATA(os.good(), "cannot open " << path << " for writing");
    write_header(os, h);
    os.write(reinterpret_cast<const char*>(v.data.data()), h.bytes);
    VXR_CHECK_DATA(os.good(), "write failed for " << path);
}

VVolHeader read_vvol_header(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    VXR_CHECK_DATA(is.good(), "cannot open " << path);
    return parse_header(is, path);
}

VVolData read_vvol(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    VXR_CHECK_DATA(is.good(), "cannot open " << path);
    VVolData out;
    out.header = parse_header(is, path);
    const VVolHeader& h = out.header;

    if (h.dtype == "f32") {
        const std::int64_t expect = checked_payload(h, sizeof(float));
        VXR_CHECK_DATA(h.bytes == expect, path << ": declared byte count " << h.bytes
                                               << " does not match channels*extents (" << expect << ")");
        Volume v;
        v.channels = h.channels;
        v.d = h.extents[0];
        v.h = h.extents[1];
        v.w = h.extents[2];
        v.spacing_mm = h.spacing;
        v.channel_names = h.channel_names;
        v.data.resize(static_cast<std::size_t>(expect / static_cast<std::int64_t>(sizeof(float))));
        is.read(reinterpret_cast<char*>(v.data.data()), expect);
        VXR_CHECK_DATA(is.gcount() == expect,
                       path << ": truncated payload, expected " << expect << " bytes, got " << is.gcount());
        out.volume = std::move(v);
    } else if (h.dtype == "u8") {
        const std::int64_t expect = checked_payload(h, 1);
        VXR_CHECK_DATA(h.channels == 1, path << ": u8 label volumes must have one channel");
        VXR_CHECK_DATA(h.bytes == expect, path << ": declared byte count " << h.bytes
                                               << " does not match extents (" << expect << ")");
        LabelVolume v;
        v.d = h.extents[0];
        v.h = h.extents[1];
        v.w = h.extents[2];
        v.num_classes = h.num_classes > 0 ? h.num_classes : 256;
        v.data.resize(static_cast<std::size_t>(expect));
        is.read(reinterpret_cast<char*>(v.data.data()), expect);
        VXR_CHECK_DATA(is.gcount() == expect,
                       path << ": truncated payload, expected " << expect << " bytes, got " << is.gcount());
        v.validate();
        out.labels = std::move(v);
    } else {
        VXR_CHECK_DATA(false, path << ": unsupported vvol dtype '" << h.dtype << "'");
    }
    return out;
}

Volume read_volume(const std::string& path) {
    auto data = read_vvol(path);
    VXR_CHECK_DATA(data.volume.has_value(), path << ": expected an f32 volume");
    return std::move(*data.volume);
}

LabelVolume read_labels(const std::string& path, std::array<float, 3>* spacing_out) {
    auto data = read_vvol(path);
    VXR_CHECK_DATA(data.labels.has_value(), path << ": expected a u8 label volume");
    if (spacing_out != nullptr) *spacing_out = data.header.spacing;
    return std::move(*data.labels);
}

std::string DatasetManifest::resolve(const std::string& rel) const {
    if (rel.empty() || rel.front() == '/') return rel;
    return (std::filesystem::path(base_dir) / rel).string();
}

DatasetManifest load_manifest(const std::string& path) {
    std::ifstream is(path);
    VXR_CHECK_DATA(is.good(), "cannot open manifest " << path);
    DatasetManifest m;
    m.base_dir = std::filesystem::path(path).parent_path().string();
    if (m.base_dir.empty()) m.base_dir = ".";

    std::string line;
    ManifestCase cur;
    bool in_case = false;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::string key;
        ls >> key;
        if (key == "case") {
            VXR_CHECK_DATA(!in_case, path << ":" << lineno << ": nested case block");
            ls >> cur.id;
            VXR_CHECK_DATA(!cur.id.empty(), path << ":" << lineno << ": case needs an id");
            in_case = true;
        } else if (key == "end") {
            VXR_CHECK_DATA(in_case, path << ":" << lineno << ": end outside a case block");
            m.cases.push_back(cur);
            cur = ManifestCase{};
            in_case = false;
        } else if (key == "modality") {
            VXR_CHECK_DATA(in_case, path << ":" << lineno << ": modality outside a case block");
            std::string name, rel;
            ls >> name >> rel;
            VXR_CHECK_DATA(!name.empty() && !rel.empty(), path << ":" << lineno << ": modality needs name and path");
            cur.modalities.emplace_back(name, rel);
        } else if (key == "stack" || key == "labels" || key == "context") {
            VXR_CHECK_DATA(in_case, path << ":" << lineno << ": " << key << " outside a case block");
            std::string rel;
            ls >> rel;
            VXR_CHECK_DATA(!rel.empty(), path << ":" << lineno << ": " << key << " needs a path");
            if (key == "stack") cur.stack = rel;
            if (key == "labels") cur.labels = rel;
            if (key == "context") cur.context = rel;
        } else {
            VXR_CHECK_DATA(false, path << ":" << lineno << ": unknown manifest key '" << key << "'");
        }
    }
    VXR_CHECK_DATA(!in_case, path << ": unterminated case block");
    VXR_CHECK_DATA(!m.cases.empty(), path << ": manifest lists no cases");
    return m;
}

void save_manifest(const DatasetManifest& manifest, const std::string& path) {
    std::ofstream os(path);
    VXR_CHECK_DATA(os.good(), "cannot open " << path << " for writing");
    os << "# vxr dataset manifest\n";
    for (const auto& c : manifest.cases) {
        os << "case " << c.id << "\n";
        for (const auto& [name, rel] : c.modalities) os << "modality " << name << " " << rel << "\n";
        if (!c.stack.empty()) os << "stack " << c.stack << "\n";
        if (!c.context.empty()) os << "context " << c.context << "\n";
        if (!c.labels.empty()) os << "labels " << c.labels << "\n";
        os << "end\n";
    }
    VXR_CHECK_DATA(os.good(), "write failed for " << path);
}

void validate_manifest(const DatasetManifest& manifest) {
    for (const auto& c : manifest.cases) {
        std::array<std::int64_t, 3> extents{0, 0, 0};
        bool have = false;
        auto check = [&](const std::string& rel, const char* what) {
            const std::string full = manifest.resolve(rel);
            VXR_CHECK_DATA(std::filesystem::exists(full), "case " << c.id << ": missing " << what << " file "
                                                                  << full);
            const auto h = read_vvol_header(full);
            if (!have) {
                extents = h.extents;
                have = true;
            } else {
                VXR_CHECK_DATA(h.extents == extents, "case " << c.id << ": " << what << " extents "
                                                             << h.extents[0] << "x" << h.extents[1] << "x"
                                                             << h.extents[2] << " disagree with the case extents "
                                                             << extents[0] << "x" << extents[1] << "x"
                                                             << extents[2]);
            }
        };
        VXR_CHECK_DATA(!c.modalities.empty() || !c.stack.empty(),
                       "case " << c.id << " lists neither modalities nor a stack");
        for (const auto& [name, rel] : c.modalities) check(rel, name.c_str());
        if (!c.stack.empty()) check(c.stack, "stack");
        if (!c.context.empty()) check(c.context, "context");
        if (!c.labels.empty()) check(c.labels, "labels");
    }
}

}  // namespace vxr
