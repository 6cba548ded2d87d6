#include <doctest.h>

#include <unistd.h>

#include <filesystem>
#include <fstream>

#include "phantom.hpp"
#include "pipeline.hpp"
#include "rng.hpp"
#include "test_support.hpp"
#include "volio.hpp"

using namespace vxr;
using namespace vxr_test;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("vxr_test_" + std::to_string(::getpid()) + "_" +
                                            std::to_string(counter()++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
    static int& counter() {
        static int c = 0;
        return c;
    }
};

std::string read_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

}  // namespace

TEST_CASE("vvol round-trips f32 volumes bitwise") {
    TempDir dir;
    Rng rng(3);
    Volume v = Volume::zeros(3, 5, 6, 7);
    v.spacing_mm = {0.9583f, 0.9583f, 3.0f};
    v.channel_names = {"T1", "T1IR", "FLAIR"};
    for (auto& x : v.data) x = static_cast<float>(rng.normal(0.0, 2.0));
    const std::string path = dir.file("v.vvol");
    write_vvol(v, path);
    const Volume back = read_volume(path);
    CHECK(back.channels == 3);
    CHECK(back.spacing_mm == v.spacing_mm);
    CHECK(back.channel_names == v.channel_names);
    REQUIRE(back.data.size() == v.data.size());
    CHECK(std::memcmp(back.data.data(), v.data.data(), v.data.size() * sizeof(float)) == 0);

    // Writing the same volume twice produces identical bytes.
    const std::string path2 = dir.file("v2.vvol");
    write_vvol(v, path2);
    CHECK(read_file(path) == read_file(path2));
}

TEST_CASE("vvol round-trips u8 label volumes bitwise") {
    TempDir dir;
    Rng rng(4);
    LabelVolume l;
    l.d = 4;
    l.h = 5;
    l.w = 6;
    l.num_classes = 4;
    l.data.resize(static_cast<std::size_t>(l.voxels()));
    for (auto& x : l.data) x = static_cast<std::uint8_t>(rng.uniform_below(4));
    const std::string path = dir.file("l.vvol");
    write_vvol(l, {1.0f, 1.0f, 1.0f}, path);
    std::array<float, 3> spacing;
    const LabelVolume back = read_labels(path, &spacing);
    CHECK(back.num_classes == 4);
    CHECK(back.data == l.data);
    CHECK(spacing[0] == 1.0f);
}

TEST_CASE("truncated vvol names expected and actual byte counts") {
    TempDir dir;
    Volume v = Volume::zeros(1, 4, 4, 4);
    const std::string path = dir.file("t.vvol");
    write_vvol(v, path);
    const std::string full = read_file(path);
    std::ofstream os(dir.file("trunc.vvol"), std::ios::binary);
    os.write(full.data(), static_cast<std::streamsize>(full.size() - 40));
    os.close();
    CHECK_THROWS_WITH_AS(read_vvol(dir.file("trunc.vvol")), doctest::Contains("expected 256 bytes"), data_error);
}

TEST_CASE("vvol header overflow guard rejects absurd extents before allocating") {
    TempDir dir;
    std::ofstream os(dir.file("huge.vvol"), std::ios::binary);
    os << "VVOL1\ndtype f32\nchannels 100000\nextents 100000 100000 100000\nspacing 1 1 1\nbytes 1\ndata\n";
    os.close();
    CHECK_THROWS_WITH_AS(read_vvol(dir.file("huge.vvol")), doctest::Contains("implausibly large"), data_error);
}

TEST_CASE("vvol rejects a wrong magic and a wrong dtype") {
    TempDir dir;
    {
        std::ofstream os(dir.file("bad.vvol"), std::ios::binary);
        os << "NOPE1\n";
    }
    CHECK_THROWS_WITH_AS(read_vvol(dir.file("bad.vvol")), doctest::Contains("bad magic"), data_error);
    {
        std::ofstream os(dir.file("bad2.vvol"), std::ios::binary);
        os << "VVOL1\ndtype f64\nchannels 1\nextents 1 1 1\nspacing 1 1 1\nbytes 8\ndata\n12345678";
    }
    CHECK_THROWS_WITH_AS(read_vvol(dir.file("bad2.vvol")), doctest::Contains("dtype"), data_error);
}

TEST_CASE("manifest round-trip and validation") {
    TempDir dir;
    PhantomDatasetOptions opts;
    opts.cases = 2;
    opts.extent = 32;
    opts.seed = 5;
    make_phantom_dataset(opts, dir.file("data"));
    const DatasetManifest m = load_manifest(dir.file("data/manifest.txt"));
    CHECK(m.cases.size() == 2);
    CHECK(m.cases[0].modalities.size() == 3);
    CHECK(!m.cases[0].labels.empty());
    validate_manifest(m);

    SUBCASE("extent-inconsistent case is rejected") {
        Volume odd = Volume::zeros(1, 16, 32, 32);
        write_vvol(odd, dir.file("data/case00/T1.vvol"));
        CHECK_THROWS_WITH_AS(validate_manifest(m), doctest::Contains("disagree"), data_error);
    }
    SUBCASE("missing file is reported with its path") {
        fs::remove(dir.file("data/case01/FLAIR.vvol"));
        CHECK_THROWS_WITH_AS(validate_manifest(m), doctest::Contains("missing"), data_error);
    }
}

TEST_CASE("phantom intensities equal class means when noise and bias are off") {
    PhantomSpec spec = PhantomSpec::canonical(0, 9, 32, 1);
    spec.noise_std = 0;
    spec.bias_amplitude = 0;
    const PhantomCase data = generate_phantom(spec);
    REQUIRE(data.modalities.size() == 1);
    const auto& means = spec.class_means[0];
    for (std::int64_t i = 0; i < data.labels.voxels(); ++i) {
        const float expect = static_cast<float>(means[data.labels.data[static_cast<std::size_t>(i)]]);
        CHECK(data.modalities[0].data[static_cast<std::size_t>(i)] == expect);
    }
}

TEST_CASE("phantom labels match an independent ellipsoid membership recount") {
    PhantomSpec spec = PhantomSpec::canonical(1, 11, 32, 1);
    const PhantomCase data = generate_phantom(spec);

    // Independent recount straight from the analytic geometry.
    std::array<std::int64_t, 4> counted{0, 0, 0, 0}, expected{0, 0, 0, 0};
    const double cz = (32 - 1) / 2.0 + spec.center_offset[0];
    const double cy = (32 - 1) / 2.0 + spec.center_offset[1];
    const double cx = (32 - 1) / 2.0 + spec.center_offset[2];
    std::size_t idx = 0;
    for (std::int64_t z = 0; z < 32; ++z)
        for (std::int64_t y = 0; y < 32; ++y)
            for (std::int64_t x = 0; x < 32; ++x, ++idx) {
                auto in = [&](const std::array<double, 3>& r) {
                    const double a = (z - cz) / r[0], b = (y - cy) / r[1], c = (x - cx) / r[2];
                    return a * a + b * b + c * c <= 1.0;
                };
                int cls = 0;
                if (in(spec.wm_radii))
                    cls = 3;
                else if (in(spec.gm_radii))
                    cls = 2;
                else if (in(spec.csf_radii))
                    cls = 1;
                expected[static_cast<std::size_t>(cls)]++;
                counted[static_cast<std::size_t>(data.labels.data[idx])]++;
                CHECK(data.labels.data[idx] == cls);
            }
    CHECK(counted == expected);
    // All four classes are present in a canonical phantom.
    for (auto n : expected) CHECK(n > 0);
}

TEST_CASE("phantom generation is deterministic per seed") {
    PhantomSpec spec = PhantomSpec::canonical(2, 13, 32, 2);
    const PhantomCase a = generate_phantom(spec);
    const PhantomCase b = generate_phantom(spec);
    CHECK(a.labels.data == b.labels.data);
    for (std::size_t m = 0; m < a.modalities.size(); ++m) {
        CHECK(std::memcmp(a.modalities[m].data.data(), b.modalities[m].data.data(),
                          a.modalities[m].data.size() * sizeof(float)) == 0);
    }
}

TEST_CASE("non-nested phantom radii are rejected") {
    PhantomSpec spec = PhantomSpec::canonical(0, 1, 32, 1);
    spec.gm_radii = spec.csf_radii;
    CHECK_THROWS_AS(generate_phantom(spec), usage_error);
}

TEST_CASE("phantom dataset directories are byte-identical across runs with one seed") {
    TempDir dir;
    PhantomDatasetOptions opts;
    opts.cases = 2;
    opts.extent = 32;
    opts.seed = 7;
    make_phantom_dataset(opts, dir.file("a"));
    make_phantom_dataset(opts, dir.file("b"));
    for (const auto& entry : fs::recursive_directory_iterator(dir.file("a"))) {
        if (!entry.is_regular_file()) continue;
        const auto rel = fs::relative(entry.path(), dir.file("a"));
        CHECK(read_file(entry.path().string()) == read_file((fs::path(dir.file("b")) / rel).string()));
    }
}

TEST_CASE("config files parse with defaults and reject unknown keys") {
    TempDir dir;
    {
        std::ofstream os(dir.file("ok.cfg"));
        os << "# comment\ncrop_size = 16\nmax_iterations = 50\nseed = 3\n";
    }
    const TrainConfig c = TrainConfig::from_file(dir.file("ok.cfg"));
    CHECK(c.crop_size == 16);
    CHECK(c.max_iterations == 50);
    CHECK(c.seed == 3);
    CHECK(c.momentum == doctest::Approx(0.9));
    CHECK(c.loss.decay_interval == 6);  // max_iterations / 8

    {
        std::ofstream os(dir.file("bad.cfg"));
        os << "crop_sise = 16\n";
    }
    CHECK_THROWS_WITH_AS(TrainConfig::from_file(dir.file("bad.cfg")), doctest::Contains("unknown config key"),
                         usage_error);
}
