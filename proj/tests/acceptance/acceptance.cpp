// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ctface/error.hpp"
#include "ctface/evaluation.hpp"
#include "ctface/faceproc.hpp"
#include "ctface/landmarks.hpp"
#include "ctface/mesh.hpp"
#include "ctface/recognition.hpp"
#include "ctface/render.hpp"
#include "ctface/rng.hpp"
#include "ctface/text.hpp"

using namespace ctface;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

struct Criterion {
    int id;
    std::string name;
    double time_limit_s;  // 0 = no limit
    std::function<Outcome()> run;
};

fs::path scratch(const std::string& name) {
    const fs::path p = fs::path(CTFACE_TEST_TMP) / "acceptance" / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string num(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", x);
    return buf;
}

// --- 1 -------------------------------------------------------------------

Outcome landmark_round_trip() {
    Rng rng(1001);
    const Index3 dims{64, 64, 64};
    double worst = 0;
    int cases = 0;
    for (double sigma : {1.5, 2.0, 3.0})
        for (int t = 0; t < 100; ++t) {
            std::array<Vec3, kLandmarkCount> pts;
            for (Vec3& p : pts) p = {rng.uniform(8, 55), rng.uniform(8, 55), rng.uniform(8, 55)};
            const LandmarkSet truth(pts);
            const LandmarkSet back = decode_heatmaps(encode_heatmaps(truth, dims, sigma));
            for (int j = 0; j < kLandmarkCount; ++j) worst = std::max(worst, norm(back.point(j) - truth.point(j)));
            ++cases;
        }
    return {worst < 0.5, std::to_string(cases) + " sets, max decode error " + num(worst) + " voxel (< 0.5)"};
}

// --- 2 -------------------------------------------------------------------

Volume sphere_volume(double r, double spacing) {
    const int n = static_cast<int>(std::ceil(2 * r / spacing)) + 8;
    const Vec3 origin{-n * spacing / 2, -n * spacing / 2, -n * spacing / 2};
    std::vector<float> vox;
    vox.reserve(static_cast<std::size_t>(n) * n * n);
    for (int k = 0; k < n; ++k)
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) {
                const Vec3 p = origin + Vec3{i * spacing, j * spacing, k * spacing};
                vox.push_back(norm(p) <= r ? 0.0f : -1000.0f);
            }
    return Volume({n, n, n}, {spacing, spacing, spacing}, origin, std::move(vox));
}

Outcome isosurface_sphere() {
    const SurfaceMesh m = extract_isosurface(sphere_volume(20.0, 1.0), -350.0);
    double worst = 0;
    for (const Vec3& v : m.vertices) worst = std::max(worst, std::abs(norm(v) - 20.0));
    const bool tight = is_watertight(m);
    return {worst <= 1.0 && tight && !m.empty(),
            std::to_string(m.triangles.size()) + " triangles, max |r - 20| " + num(worst) + " mm (<= 1.0), " +
                (tight ? "watertight" : "NOT watertight")};
}

// --- 3 -------------------------------------------------------------------

Outcome render_geometry() {
    SurfaceMesh plane;
    plane.vertices = {{-40, 30, -40}, {40, 30, -40}, {40, 30, 40}, {-40, 30, 40}};
    plane.triangles = {{0, 2, 1}, {0, 3, 2}};
    plane.normals = {{0, 1, 0}, {0, 1, 0}};
    const double distance = 100.0, expected = 70.0;
    const DepthImage flat = render_depth(plane, pose_camera(0, 0, 0, {}, 180, 256, 256, 128, 128, distance));
    double rel = 0;
    std::size_t fg = 0;
    for (double d : flat.depth)
        if (d > 0) {
            rel = std::max(rel, std::abs(d - expected) / expected);
            ++fg;
        }

    const double r = 20.0, dist = 80.0;
    const SurfaceMesh sphere = extract_isosurface(sphere_volume(r, 1.0), -350.0);
    const CameraPose pose = pose_camera(0, 0, 0, {}, 180, 256, 256, 128, 128, dist);
    const DepthImage img = render_depth(sphere, pose);
    const double off = 0.5 / pose.pixels_per_mm();  // pixel centre offset from the axis
    const double oracle = dist - std::sqrt(r * r - 2 * off * off);
    const double err = std::abs(img.at(128, 128) - oracle);
    return {fg > 0 && rel <= 1e-3 && err <= 1.0,
            "plane max relative depth error " + num(rel) + " (<= 0.001), sphere centre error " + num(err) +
                " mm (<= 1)"};
}

// --- 4 -------------------------------------------------------------------

Outcome pose_sweep_count() {
    const SurfaceMesh m = extract_isosurface(sphere_volume(15.0, 1.0), -350.0);
    const auto images = pose_sweep(m, SweepConfig{}, 0, 0);
    bool ranges = true;
    std::set<std::pair<double, double>> poses;
    for (const DepthImage& img : images) {
        const CameraPose& p = img.pose;
        ranges &= p.pitch_deg >= -20 && p.pitch_deg <= 20 && p.roll_deg >= -25 && p.roll_deg <= 25 && p.yaw_deg == 0;
        poses.insert({p.pitch_deg, p.roll_deg});
    }
    return {images.size() == 90 && ranges && poses.size() == 90,
            std::to_string(images.size()) + " images, " + std::to_string(poses.size()) + " distinct poses, ranges " +
                (ranges ? "ok" : "violated")};
}

// --- 5 -------------------------------------------------------------------

Outcome normalization() {
    DepthImage img;
    img.width = 3;
    img.height = 1;
    img.depth = {80, 110, 140};
    const DepthImage n = normalize_depth(img, 80.0, 255.0);
    const bool example = n.depth[0] == 0.0 && n.depth[1] == 127.5 && n.depth[2] == 255.0;

    Rng rng(1005);
    bool in_range = true;
    for (int t = 0; t < 1000; ++t) {
        DepthImage r;
        r.width = r.height = 8;
        for (int i = 0; i < 64; ++i) r.depth.push_back(rng.uniform01() < 0.3 ? 0.0 : rng.uniform(1, 300));
        r.depth[0] = 1.0;
        const double c = rng.uniform(1, 500);
        for (double v : normalize_depth(r, rng.uniform(0, 200), c).depth) in_range &= v >= 0 && v <= c;
    }

    bool raised = false;
    try {
        DepthImage flat = img;
        flat.depth = {50, 50, 50};
        normalize_depth(flat, 50.0, 255.0);
    } catch (const Error&) {
        raised = true;
    }
    return {example && in_range && raised, std::string("example ") + (example ? "exact" : "WRONG") + ", range " +
                                               (in_range ? "ok" : "violated") + ", degenerate " +
                                               (raised ? "raises" : "does not raise")};
}

// --- 6 -------------------------------------------------------------------

Outcome sampler() {
    std::map<int, std::vector<ImageRef>> refs;
    for (int p = 0; p < 24; ++p)
        for (int s = 0; s < 2; ++s)
            for (int k = 0; k < 90; ++k) refs[p].push_back({p, s, k});

    std::size_t batches = 0, bad = 0;
    for (std::uint64_t seed = 0; batches < 1000; ++seed)
        for (const Batch& b : sample_epoch(refs, 15, 18, true, seed, 0)) {
            if (batches == 1000) break;
            ++batches;
            std::set<int> labels;
            bool groups_ok = true;
            for (const Subgroup& g : b.subgroups) {
                labels.insert(g.patient);
                groups_ok &= g.members.size() == 15;
                for (const ImageRef& r : g.members) groups_ok &= r.patient == g.patient;
            }
            if (labels.size() != 18 || b.size() != 270 || !groups_ok) ++bad;
        }

    std::set<int> mixed;
    for (std::uint64_t seed = 0; seed < 10; ++seed)
        for (const Batch& b : sample_epoch(refs, 15, 18, true, seed, 0))
            for (const Subgroup& g : b.subgroups) {
                std::set<int> scans;
                for (const ImageRef& r : g.members) scans.insert(r.scan);
                if (scans.size() > 1) mixed.insert(g.patient);
            }
    return {bad == 0 && mixed.size() == refs.size(),
            std::to_string(batches) + " batches, " + std::to_string(bad) + " malformed; " +
                std::to_string(mixed.size()) + "/" + std::to_string(refs.size()) +
                " multi-scan patients with a mixed subgroup over seeds 0-9"};
}

// --- 7 -------------------------------------------------------------------

Outcome loss_oracles() {
    Rng rng(1007);
    const double m = 0.2;
    double worst = 0;
    bool bounds = true;
    auto vec = [&] {
        Embedding e;
        for (int i = 0; i < 64; ++i) e.values.push_back(rng.normal());
        return e;
    };
    auto dist = [](const Embedding& a, const Embedding& b) {
        double s = 0;
        for (std::size_t i = 0; i < a.values.size(); ++i) s += (a.values[i] - b.values[i]) * (a.values[i] - b.values[i]);
        return std::sqrt(s);
    };
    for (int t = 0; t < 1000; ++t) {
        const Embedding a = vec(), p = vec(), n = vec();
        const double dap = dist(a, p), dan = dist(a, n);
        const double hinge = triplet_loss_hinge(a, p, n, m), absolute = triplet_loss_absolute(a, p, n, m);
        worst = std::max({worst, std::abs(hinge - std::max(0.0, dap - dan + m)), std::abs(absolute - (std::abs(dap - dan) + m))});
        bounds &= hinge >= 0.0 && absolute >= m;
    }
    return {worst <= 1e-9 && bounds,
            "1000 triples, max deviation " + num(worst) + " (<= 1e-9), bounds " + (bounds ? "hold" : "violated")};
}

// --- 8 -------------------------------------------------------------------

Outcome roc_oracle() {
    Rng rng(1008);
    std::vector<Score> scores;
    for (int i = 0; i < 200; ++i) {
        const bool g = i % 3 == 0;
        scores.push_back({std::round((rng.normal() + (g ? 1.0 : 0.0)) * 8) / 8, g});
    }
    double wins = 0, total = 0;
    for (const Score& g : scores)
        for (const Score& i : scores)
            if (g.genuine && !i.genuine) {
                total += 1;
                wins += g.similarity > i.similarity ? 1.0 : g.similarity == i.similarity ? 0.5 : 0.0;
            }
    const double err = std::abs(roc(scores).auc - wins / total);

    const std::vector<Score> sep{{0.9, true}, {0.7, true}, {0.2, false}, {-0.4, false}};
    const RocCurve s = roc(sep);
    std::vector<Score> same;
    for (int i = 0; i < 100; ++i) {
        const double v = std::round(rng.normal() * 4);
        same.push_back({v, true});
        same.push_back({v, false});
    }
    const double half = roc(same).auc;
    return {err <= 1e-9 && s.auc == 1.0 && s.vacc == 1.0 && std::abs(half - 0.5) <= 1e-12,
            "oracle deviation " + num(err) + " (<= 1e-9), separated auc " + num(s.auc) + " vacc " + num(s.vacc) +
                ", identical auc " + num(half)};
}

// --- 9 -------------------------------------------------------------------

Outcome splits() {
    Rng rng(1009);
    bool split_ok = true;
    for (int t = 0; t < 100; ++t) {
        std::map<int, std::vector<ImageRef>> m;
        std::size_t total = 0;
        for (int c = 0; c < 8; ++c) {
            const int n = 2 + static_cast<int>(rng.index(60));
            for (int k = 0; k < n; ++k) m[c].push_back({c, 0, k});
            total += static_cast<std::size_t>(n);
        }
        const ClassSplit s = split_per_class(m, 0.8, rng.next_u64());
        std::set<ImageRef> tr(s.train.begin(), s.train.end()), te(s.test.begin(), s.test.end());
        std::size_t shared = 0;
        for (const ImageRef& r : tr) shared += te.count(r);
        split_ok &= shared == 0 && tr.size() + te.size() == total && tr.size() == s.train.size() &&
                    te.size() == s.test.size();
    }
    std::map<int, std::vector<ImageRef>> ten;
    for (int k = 0; k < 10; ++k) ten[0].push_back({0, 0, k});
    const ClassSplit s10 = split_per_class(ten, 0.8, 3);
    split_ok &= s10.train.size() == 8 && s10.test.size() == 2;

    std::vector<int> ids;
    for (int i = 0; i < 280; ++i) ids.push_back(i);
    const auto folds = kfold_subjects(ids, 5, 42);
    std::set<int> tested;
    bool folds_ok = folds.size() == 5;
    for (const Fold& f : folds) {
        folds_ok &= f.test.size() == 56 && f.train.size() == 224;
        for (int s : f.test) folds_ok &= tested.insert(s).second;
    }
    folds_ok &= tested.size() == 280;
    return {split_ok && folds_ok, std::string("8:2 split ") + (split_ok ? "disjoint and complete" : "BROKEN") +
                                      ", 5-fold of 280 " + (folds_ok ? "gives 5 x 56" : "BROKEN")};
}

// --- 10, 11 ------------------------------------------------------------------

int run_cli(const std::string& args, const fs::path& log) {
    const std::string cmd = std::string("\"") + CTFACE_CLI_PATH + "\" " + args + " > \"" + log.string() + "\" 2>&1";
    const int status = std::system(cmd.c_str());
    if (status == -1) return -1;
#ifdef WEXITSTATUS
    return WEXITSTATUS(status);
#else
    return status;
#endif
}

Outcome end_to_end() {
    const fs::path dir = scratch("benchmark");
    const auto t0 = std::chrono::steady_clock::now();
    const int code = run_cli("run-all --phantom-subjects 20 --phantom-scans 2 --phantom-seed 42 --seed 42 --out \"" +
                                 (dir / "out").string() + "\"",
                             dir / "run.log");
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (code != 0) return {false, "run-all exited with " + std::to_string(code) + ", see " + (dir / "run.log").string()};
    const EvalReport r = load_report_csv(dir / "out" / "report.csv");
    const bool pass = r.acc.mean >= 0.90 && r.auc.mean >= 0.95 && secs < 600.0;
    return {pass, "ACC " + num(r.acc.mean) + " (>= 0.90), AUC " + num(r.auc.mean) + " (>= 0.95), VACC " +
                      num(r.vacc.mean) + ", runtime " + num(secs) + " s (< 600)"};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Outcome determinism() {
    const fs::path dir = scratch("determinism");
    const std::string common =
        "run-all --phantom-subjects 6 --phantom-scans 2 --phantom-seed 7 --sweep-pitch -20:20:3 "
        "--sweep-roll -25:25:3 --folds 3 --E 3 --L 2 --keep-stages true --out ";
    for (const char* run : {"a", "b"}) {
        const int code = run_cli(common + "\"" + (dir / run).string() + "\"", dir / (std::string(run) + ".log"));
        if (code != 0) return {false, std::string("run ") + run + " exited with " + std::to_string(code)};
    }
    std::size_t compared = 0, differing = 0, missing = 0;
    for (const auto& e : fs::recursive_directory_iterator(dir / "a")) {
        const std::string ext = e.path().extension().string();
        if (!e.is_regular_file() || (ext != ".csv" && ext != ".pgm")) continue;
        const fs::path other = dir / "b" / fs::relative(e.path(), dir / "a");
        if (!fs::exists(other)) {
            ++missing;
            continue;
        }
        ++compared;
        if (slurp(e.path()) != slurp(other)) ++differing;
    }
    const bool pass = compared > 0 && differing == 0 && missing == 0;
    if (pass) fs::remove_all(dir);
    return {pass, std::to_string(compared) + " CSV/PGM files compared, " + std::to_string(differing) + " differ, " +
                      std::to_string(missing) + " missing"};
}

}  // namespace

int main() {
    const std::vector<Criterion> criteria{
        {1, "landmark heatmap round trip", 10.0, landmark_round_trip},
        {2, "iso-surface sphere and watertightness", 5.0, isosurface_sphere},
        {3, "depth render geometry", 0.0, render_geometry},
        {4, "default pose sweep", 0.0, pose_sweep_count},
        {5, "depth normalization", 0.0, normalization},
        {6, "group sampler invariants", 0.0, sampler},
        {7, "triplet loss oracles", 0.0, loss_oracles},
        {8, "ROC/AUC oracle", 0.0, roc_oracle},
        {9, "split and fold properties", 0.0, splits},
        {10, "end-to-end phantom benchmark", 600.0, end_to_end},
        {11, "run-all determinism", 0.0, determinism},
    };

    int failed = 0;
    for (const Criterion& c : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (c.time_limit_s > 0 && secs >= c.time_limit_s) {
            o.pass = false;
            o.detail += "; over the " + num(c.time_limit_s) + " s limit";
        }
        failed += !o.pass;
        std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << c.id << ": " << c.name << " - " << o.detail
                  << " [" << num(secs) << " s]" << std::endl;
    }
    std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed" << std::endl;
    return failed == 0 ? 0 : 1;
}
