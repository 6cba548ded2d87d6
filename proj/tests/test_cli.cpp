// Exercises the installed vxr binary end to end; the executable path arrives
// in the VXR_CLI environment variable (set by CTest).
#include <doctest.h>

#include <unistd.h>

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "infer.hpp"
#include "metrics.hpp"
#include "volio.hpp"

namespace fs = std::filesystem;

namespace {

std::string cli() {
    const char* p = std::getenv("VXR_CLI");
    REQUIRE(p != nullptr);
    return p;
}

int run(const std::string& args) {
    const std::string cmd = cli() + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

struct TempDir {
    fs::path path;
    TempDir() {
        static int counter = 0;
        path = fs::temp_directory_path() /
               ("vxr_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

std::string slurp(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

}  // namespace

TEST_CASE("usage errors exit with code 1") {
    CHECK(run("train") == 1);                    // missing required options
    CHECK(run("no-such-command") == 1);          // unknown subcommand
    CHECK(run("phantom --frobnicate x") == 1);   // unknown flag
    CHECK(run("") == 1);                         // no subcommand
}

TEST_CASE("phantom datasets are byte-identical for one seed") {
    TempDir dir;
    REQUIRE(run("phantom --out " + dir.file("a") + " --cases 2 --extent 32 --seed 9") == 0);
    REQUIRE(run("phantom --out " + dir.file("b") + " --cases 2 --extent 32 --seed 9") == 0);
    REQUIRE(run("phantom --out " + dir.file("c") + " --cases 2 --extent 32 --seed 10") == 0);
    bool any = false;
    for (const auto& entry : fs::recursive_directory_iterator(dir.file("a"))) {
        if (!entry.is_regular_file()) continue;
        const auto rel = fs::relative(entry.path(), dir.file("a"));
        CHECK(slurp(entry.path().string()) == slurp((fs::path(dir.file("b")) / rel).string()));
        any = true;
    }
    CHECK(any);
    // A different seed must change the data payloads.
    CHECK(slurp(dir.file("a/case00/T1.vvol")) != slurp(dir.file("c/case00/T1.vvol")));
}

TEST_CASE("evaluate on identical label files reports the exact optimum and exits 0") {
    TempDir dir;
    REQUIRE(run("phantom --out " + dir.file("raw") + " --cases 1 --extent 32 --seed 4") == 0);
    const std::string labels = dir.file("raw/case00/labels.vvol");
    REQUIRE(run("evaluate --pred " + labels + " --truth " + labels + " --report " + dir.file("r.txt") +
                " --keyvals " + dir.file("r.kv")) == 0);
    const std::string kv = slurp(dir.file("r.kv"));
    CHECK(kv.find("CSF.dc 100") != std::string::npos);
    CHECK(kv.find("WM.hd95_mm 0") != std::string::npos);
    CHECK(kv.find("GM.avd 0") != std::string::npos);
    const std::string table = slurp(dir.file("r.txt"));
    CHECK(table.find("tissue") != std::string::npos);
}

TEST_CASE("data errors exit with code 2") {
    TempDir dir;
    CHECK(run("evaluate --pred " + dir.file("missing.vvol") + " --truth " + dir.file("missing.vvol")) == 2);
    std::ofstream(dir.file("c.cfg")) << "max_iterations = 1\n";
    CHECK(run("train --config " + dir.file("c.cfg") + " --manifest " + dir.file("nope.txt") + " --out " +
              dir.file("ck.vxr")) == 2);
}

TEST_CASE("slices exports a PGM mosaic") {
    TempDir dir;
    REQUIRE(run("phantom --out " + dir.file("raw") + " --cases 1 --extent 32 --seed 6") == 0);
    REQUIRE(run("slices --input " + dir.file("raw/case00/labels.vvol") + " --out " + dir.file("grid.pgm") +
                " --every 8") == 0);
    const std::string pgm = slurp(dir.file("grid.pgm"));
    CHECK(pgm.rfind("P5\n", 0) == 0);
    CHECK(pgm.size() > 200);
}

TEST_CASE("CLI subcommands are thin adapters over the module operations") {
    TempDir dir;
    REQUIRE(run("phantom --out " + dir.file("raw") + " --cases 1 --extent 32 --seed 21") == 0);
    REQUIRE(run("preprocess --manifest " + dir.file("raw/manifest.txt") + " --out " + dir.file("prep") +
                " --clahe-tiles 4") == 0);
    std::ofstream(dir.file("t.cfg")) << "crop_size = 16\nmax_iterations = 3\nwidth_scale = 0.0625\nseed = 8\n";
    REQUIRE(run("train --config " + dir.file("t.cfg") + " --manifest " + dir.file("prep/manifest.txt") +
                " --out " + dir.file("ck.vxr") + " --quiet") == 0);
    REQUIRE(run("predict --checkpoint " + dir.file("ck.vxr") + " --input " + dir.file("prep/case00/stack.vvol") +
                " --tile 32 --stride 16 --labels " + dir.file("cli_labels.vvol") + " --prob " +
                dir.file("cli_prob.vvol")) == 0);

    // Direct module calls with the same parameters give identical bytes.
    vxr::Checkpoint ck = vxr::load_checkpoint(dir.file("ck.vxr"));
    const vxr::Volume stack = vxr::read_volume(dir.file("prep/case00/stack.vvol"));
    const vxr::Volume probs = vxr::predict_checkpoint(ck, stack, 32, 16);
    const vxr::Volume cli_probs = vxr::read_volume(dir.file("cli_prob.vvol"));
    REQUIRE(probs.data.size() == cli_probs.data.size());
    CHECK(std::memcmp(probs.data.data(), cli_probs.data.data(), probs.data.size() * sizeof(float)) == 0);
    const vxr::LabelVolume labels = vxr::argmax_labels(probs);
    const vxr::LabelVolume cli_labels = vxr::read_labels(dir.file("cli_labels.vvol"));
    CHECK(labels.data == cli_labels.data);

    // Evaluate: the CLI's key-value report equals a direct evaluate_case.
    REQUIRE(run("evaluate --pred " + dir.file("cli_labels.vvol") + " --truth " +
                dir.file("prep/case00/labels.vvol") + " --keyvals " + dir.file("r.kv")) == 0);
    const vxr::LabelVolume truth = vxr::read_labels(dir.file("prep/case00/labels.vvol"));
    const vxr::MetricsReport direct = vxr::evaluate_case(cli_labels, truth, {1, 1, 1});
    const std::string kv = slurp(dir.file("r.kv"));
    char want[64];
    std::snprintf(want, sizeof(want), "GM.dc %g", direct.tissue[1].dc);
    CHECK(kv.find(want) != std::string::npos);
}

TEST_CASE("the full pipeline runs through the CLI alone") {
    TempDir dir;
    REQUIRE(run("phantom --out " + dir.file("raw") + " --cases 2 --extent 32 --seed 12") == 0);
    REQUIRE(run("preprocess --manifest " + dir.file("raw/manifest.txt") + " --out " + dir.file("prep") +
                " --clahe-tiles 4") == 0);
    std::ofstream(dir.file("t.cfg")) << "crop_size = 16\nmax_iterations = 3\nwidth_scale = 0.0625\nseed = 2\n";
    REQUIRE(run("train --config " + dir.file("t.cfg") + " --manifest " + dir.file("prep/manifest.txt") +
                " --out " + dir.file("s1.vxr") + " --quiet") == 0);
    REQUIRE(run("predict --checkpoint " + dir.file("s1.vxr") + " --input " + dir.file("prep/case00/stack.vvol") +
                " --tile 32 --stride 16 --labels " + dir.file("case00_labels.vvol")) == 0);
    REQUIRE(run("autocontext train --config " + dir.file("t.cfg") + " --manifest " +
                dir.file("prep/manifest.txt") + " --stage1 " + dir.file("s1.vxr") + " --out " +
                dir.file("s2.vxr") + " --tile 32 --stride 16 --quiet") == 0);
    CHECK(fs::exists(dir.file("s2.vxr.pipeline")));
    CHECK(fs::exists(dir.file("prep/case00/stack_context.vvol")));
    REQUIRE(run("autocontext predict --stage1 " + dir.file("s1.vxr") + " --stage2 " + dir.file("s2.vxr") +
                " --input " + dir.file("prep/case01/stack.vvol") + " --tile 32 --stride 16 --labels " +
                dir.file("case01_labels.vvol")) == 0);
    REQUIRE(run("evaluate --pred " + dir.file("case01_labels.vvol") + " --truth " +
                dir.file("prep/case01/labels.vvol") + " --report " + dir.file("rep.txt")) == 0);
    CHECK(fs::exists(dir.file("rep.txt")));

    // Multi-case evaluation with an aggregate file.
    REQUIRE(run("predict --checkpoint " + dir.file("s1.vxr") + " --input " + dir.file("prep/case01/stack.vvol") +
                " --tile 32 --stride 16 --labels " + dir.file("case01_labels.vvol")) == 0);
    REQUIRE(run("evaluate --manifest " + dir.file("prep/manifest.txt") + " --pred-dir " + dir.path.string() +
                " --out-dir " + dir.file("reports")) == 0);
    CHECK(fs::exists(dir.file("reports/aggregate.kv")));
    CHECK(fs::exists(dir.file("reports/case00.txt")));
}
