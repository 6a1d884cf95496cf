#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "ctface/config.hpp"
#include "ctface/error.hpp"
#include "ctface/phantom.hpp"
#include "ctface/pipeline.hpp"
#include "test_support.hpp"

using namespace ctface;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::trunc);
    out << text;
}

PipelineConfig small_config() {
    PipelineConfig c;
    c.set("spacing", "2");
    c.set("sweep-pitch", "-10:10:2");
    c.set("sweep-roll", "-10:10:3");
    c.set("image-size", "96");
    c.set("crop-size", "84");
    c.set("E", "3");
    c.set("L", "2");
    c.set("folds", "2");
    c.set("threads", "1");
    return c;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string("\"") + CTFACE_CLI_PATH + "\" " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

const fs::path& small_cohort() {
    static const fs::path manifest = [] {
        const auto dir = test::scratch_dir("pipeline_cohort");
        return write_cohort(generate_cohort(4, 2, 42), dir);
    }();
    return manifest;
}

}  // namespace

TEST_CASE("config defaults and key parsing") {
    PipelineConfig c;
    CHECK_NOTHROW(c.validate());
    CHECK(c.group_size == 15);
    CHECK(c.labels_per_batch == 18);
    CHECK(c.crop_size == 224);
    CHECK(c.sweep.pitch.count * c.sweep.roll.count * c.sweep.yaw.count == 90);

    c.set("spacing", "0.5,0.5,2");
    CHECK(c.target_spacing == Vec3{0.5, 0.5, 2});
    c.set("sweep-roll", "-30:30:7");
    CHECK(c.sweep.roll.values().size() == 7);
    c.set("theta-norm", "12.5");
    REQUIRE(c.theta_norm.has_value());
    CHECK(*c.theta_norm == 12.5);
    c.set("theta-norm", "auto");
    CHECK_FALSE(c.theta_norm.has_value());
    c.set("loss", "absolute");
    CHECK(c.loss == LossVariant::Absolute);
    c.set("stage", "segmented");
    CHECK(c.stage == Stage::Segmented);
    c.set("keep-stages", "yes");
    CHECK(c.keep_stages);

    CHECK_THROWS_AS(c.set("no-such-key", "1"), ConfigError);
    CHECK_THROWS_AS(c.set("sigma", "abc"), ConfigError);
    CHECK_THROWS_AS(c.set("loss", "softmax"), ConfigError);
    CHECK_THROWS_AS(c.set("keep-stages", "maybe"), ConfigError);
    CHECK_THROWS_AS(parse_angle_grid("1:2"), ConfigError);
    CHECK_THROWS_AS(parse_angle_grid("1:2:0"), ConfigError);

    PipelineConfig bad;
    bad.set("split-ratio", "1.5");
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    PipelineConfig bad_crop;
    bad_crop.set("crop-size", "300");
    CHECK_THROWS_AS(bad_crop.validate(), ConfigError);
}

TEST_CASE("config text round trips through a config file") {
    PipelineConfig c = small_config();
    c.set("gamma", "-300");
    c.set("theta-norm", "3");
    const auto dir = test::scratch_dir("pipeline_config");
    write_text(dir / "c.txt", "# comment line\n" + c.to_text());
    PipelineConfig back;
    load_config_file(dir / "c.txt", back);
    CHECK(back.to_text() == c.to_text());

    write_text(dir / "bad.txt", "gamma -300\n");
    PipelineConfig d;
    CHECK_THROWS_AS(load_config_file(dir / "bad.txt", d), ConfigError);
    CHECK_THROWS(load_config_file(dir / "missing.txt", d));
}

TEST_CASE("manifest parsing resolves paths and rejects duplicates") {
    const auto dir = test::scratch_dir("pipeline_manifest");
    write_text(dir / "m.txt", "# subject scan path\n2 1 vol/b.ctv 1 1 1\n\n1 0 /abs/a.ctv\n");
    const auto entries = load_manifest(dir / "m.txt");
    REQUIRE(entries.size() == 2);
    CHECK(entries[0].subject == 1);
    CHECK(entries[0].volume == fs::path("/abs/a.ctv"));
    CHECK(entries[1].volume == dir / "vol" / "b.ctv");
    CHECK(entries[1].landmarks == dir / "vol" / "b.lmk");

    write_text(dir / "dup.txt", "1 0 a.ctv\n1 0 b.ctv\n");
    CHECK_THROWS(load_manifest(dir / "dup.txt"));
    write_text(dir / "short.txt", "1 0\n");
    CHECK_THROWS(load_manifest(dir / "short.txt"));
    CHECK_THROWS(load_manifest(dir / "none.txt"));
}

TEST_CASE("stems") {
    CHECK(scan_stem(3, 1) == "s003_c1");
    CHECK(image_stem({12, 0, 7}) == "s012_c0_p007");
}

TEST_CASE("preprocessing crops a ROI around the landmarks") {
    const PhantomScan scan = generate_phantom(PhantomSpec{}, {2, 2, 2});
    PipelineConfig c = small_config();
    const PreprocessedScan p = preprocess_scan(scan.volume, scan.landmarks, c);
    CHECK(p.landmark_loss < 1e-3);
    const Index3 d = p.roi.dims();
    for (const Vec3& q : p.landmarks.points()) {
        CHECK(q.x >= 0);
        CHECK(q.y >= 0);
        CHECK(q.z >= 0);
        CHECK(q.x <= d.x - 1);
        CHECK(q.y <= d.y - 1);
        CHECK(q.z <= d.z - 1);
    }
    CHECK(p.roi.size() < scan.volume.size());
}

TEST_CASE("image processing tags stages and keeps ids") {
    const PhantomScan scan = generate_phantom(PhantomSpec{}, {2, 2, 2});
    PipelineConfig c = small_config();
    const SurfaceMesh m = extract_isosurface(scan.volume, c.gamma);
    DepthImage img = render_depth(m, frontal_pose(m, c.sweep));
    img.ids = {5, 1, 2};
    const StagedImages s = process_image(img, c);
    CHECK(s.get(Stage::Projected).stage == Stage::Projected);
    CHECK(s.get(Stage::Segmented).stage == Stage::Segmented);
    CHECK(s.get(Stage::Normalized).stage == Stage::Normalized);
    CHECK(s.normalized.ids == img.ids);
    CHECK(s.segmented.foreground_count() <= img.foreground_count());
    double peak = 0;
    for (double v : s.normalized.depth) peak = std::max(peak, v);
    CHECK(peak == c.scale_c);

    const Embedding e = embed_image(s.normalized, c);
    CHECK(e.ids == img.ids);
    CHECK(e.values.size() == 256);
    c.set("crop-mode", "random");
    CHECK(embed_image(s.normalized, c).values == embed_image(s.normalized, c).values);
}

TEST_CASE("small run is complete and reproducible") {
    const fs::path& manifest = small_cohort();
    const auto dir = test::scratch_dir("pipeline_run");
    PipelineConfig c = small_config();
    c.keep_stages = true;
    const PipelineResult a = run_pipeline(c, manifest, dir / "a");
    CHECK(a.failures.empty());
    CHECK(a.image_count == 8 * 6);
    CHECK(a.evaluated);
    for (const auto& emb : a.embeddings) CHECK(emb.size() == 48);
    for (const char* f : {"config.txt", "landmarks.csv", "report.csv", "stages.csv", "roc.svg", "roc_fold0.csv",
                          "embeddings_normalized.txt", "report_projected.csv", "batches.txt", "sampling.txt"})
        CHECK_MESSAGE(fs::exists(dir / "a" / f), f);
    CHECK(fs::exists(dir / "a" / "stages" / "normalized" / "s000_c0_p000.pgm"));

    c.threads = 2;
    const PipelineResult b = run_pipeline(c, manifest, dir / "b");
    for (const char* f : {"landmarks.csv", "report.csv", "stages.csv", "embeddings_normalized.txt", "batches.txt"})
        CHECK_MESSAGE(slurp(dir / "a" / f) == slurp(dir / "b" / f), f);
    CHECK(slurp(dir / "a" / "stages" / "segmented" / "s003_c1_p005.pgm") ==
          slurp(dir / "b" / "stages" / "segmented" / "s003_c1_p005.pgm"));
}

TEST_CASE("a corrupt scan is recorded and skipped") {
    const fs::path& cohort = small_cohort();
    const auto dir = test::scratch_dir("pipeline_failure");
    std::string text;
    for (const ManifestEntry& e : load_manifest(cohort)) {
        fs::path vol = e.volume;
        if (e.subject == 1 && e.scan == 0) {
            vol = dir / "broken.ctv";
            write_text(vol, "not a volume");
            fs::copy_file(e.landmarks, dir / "broken.lmk", fs::copy_options::overwrite_existing);
        }
        text += std::to_string(e.subject) + " " + std::to_string(e.scan) + " " + vol.string() + "\n";
    }
    write_text(dir / "manifest.txt", text);
    const PipelineResult r = run_pipeline(small_config(), dir / "manifest.txt", dir / "out");
    REQUIRE(r.failures.size() == 1);
    CHECK(r.failures[0].subject == 1);
    CHECK(r.failures[0].stage == "load");
    CHECK(r.image_count == 7 * 6);
    CHECK(slurp(dir / "out" / "failures.txt").find("load") != std::string::npos);
}

TEST_CASE("CLI exit codes") {
    const auto dir = test::scratch_dir("pipeline_cli");
    const std::string out = " --out \"" + (dir / "out").string() + "\"";
    CHECK(run_cli("") == 2);
    CHECK(run_cli("run-all" + out) == 2);
    CHECK(run_cli("run-all --manifest \"" + small_cohort().string() + "\" --folds abc" + out) == 2);
    CHECK(run_cli("run-all --manifest \"" + small_cohort().string() + "\" --set nope=1" + out) == 2);
    write_text(dir / "emb.txt", "0 0 0 1 0\n0 0 1 0.9 0.1\n1 0 0 0 1\n");
    CHECK(run_cli("evaluate --embeddings \"" + (dir / "emb.txt").string() + "\" --folds 2" + out) == 1);
    CHECK(run_cli("phantom-gen --subjects 4 --scans 1" + out) == 0);
    CHECK(run_cli("run-all --manifest \"" + (dir / "out" / "manifest.txt").string() +
                  "\" --spacing 3 --sweep-pitch 0:0:1 --sweep-roll -5:5:4 --image-size 64 --crop-size 56 "
                  "--folds 2 --E 2 --L 1 --out \"" + (dir / "run").string() + "\"") == 0);
}
