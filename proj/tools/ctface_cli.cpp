// Command-line front end. Exit codes: 0 success, 1 partial or runtime failure, 2 config error.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <list>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ctface/config.hpp"
#include "ctface/depth_io.hpp"
#include "ctface/error.hpp"
#include "ctface/evaluation.hpp"
#include "ctface/faceproc.hpp"
#include "ctface/landmarks.hpp"
#include "ctface/mesh.hpp"
#include "ctface/phantom.hpp"
#include "ctface/pipeline.hpp"
#include "ctface/recognition.hpp"
#include "ctface/render.hpp"
#include "ctface/text.hpp"
#include "ctface/volume.hpp"

namespace fs = std::filesystem;
using namespace ctface;

namespace {

constexpr int kExitPartial = 1;
constexpr int kExitConfig = 2;

// Config assembled as defaults < --config file < named flags < --set overrides.
struct ConfigOptions {
    std::string file;
    std::vector<std::string> sets;
    struct Named {
        std::string key;
        std::string value;
        CLI::Option* option = nullptr;
    };
    std::list<Named> named;  // stable addresses for CLI11

    void attach(CLI::App& app) {
        app.add_option("--config", file, "flat key = value config file")->check(CLI::ExistingFile);
        app.add_option("--set", sets, "override one config key, key=value (repeatable)");
    }

    void flag(CLI::App& app, const std::string& key) {
        Named& n = named.emplace_back(Named{key, "", nullptr});
        n.option = app.add_option("--" + key, n.value, key_help(key));
    }

    static std::string key_help(const std::string& key) {
        static const std::map<std::string, std::string> help{
            {"spacing", "resampling spacing in mm, s or sx,sy,sz"},
            {"sigma", "landmark heatmap sigma in voxels"},
            {"tau", "heatmap decode threshold, fraction of the peak"},
            {"margin-factor", "ROI margin as a multiple of the inter-eye distance"},
            {"gamma", "iso-surface threshold in HU"},
            {"theta", "back-face culling angle in degrees"},
            {"sweep-pitch", "pitch grid first:last:count in degrees"},
            {"sweep-roll", "roll grid first:last:count in degrees"},
            {"sweep-yaw", "yaw grid first:last:count in degrees"},
            {"sc", "image-plane extent in mm"},
            {"image-size", "square image size in pixels; centres the principal point"},
            {"theta-norm", "normalization threshold in depth mm, or auto"},
            {"norm-percentile", "foreground percentile used when theta-norm is auto"},
            {"C", "normalization scale"},
            {"crop-size", "embedding crop size in pixels"},
            {"crop-mode", "center or random"},
            {"E", "images per subgroup"},
            {"L", "labels per batch"},
            {"margin", "triplet margin"},
            {"loss", "hinge or absolute"},
            {"shuffle-across-scans", "mix scans of one patient inside subgroups"},
            {"epochs", "number of sampling epochs"},
            {"folds", "cross-validation folds over subjects"},
            {"seed", "master seed"},
            {"impostor-ratio", "impostor pairs per genuine pair"},
            {"stage", "stage reported as report.csv: projected, segmented or normalized"},
            {"keep-stages", "write every stage's PGM images"},
            {"threads", "worker threads, 0 = hardware concurrency"},
        };
        const auto it = help.find(key);
        return it == help.end() ? key : it->second;
    }

    PipelineConfig build() {
        PipelineConfig c;
        if (!file.empty()) load_config_file(file, c);
        for (const Named& n : named)
            if (n.option->count() > 0) c.set(n.key, n.value);
        for (const std::string& s : sets) {
            const auto eq = s.find('=');
            if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
            c.set(trim(std::string_view(s).substr(0, eq)), trim(std::string_view(s).substr(eq + 1)));
        }
        c.validate();
        return c;
    }
};

std::vector<fs::path> read_image_list(const fs::path& list) {
    std::ifstream in(list);
    if (!in) throw IoError("cannot open image list " + list.string());
    std::vector<fs::path> out;
    std::string line;
    while (std::getline(in, line)) {
        const auto t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        const fs::path p{std::string(t)};
        out.push_back(p.is_absolute() ? p : list.parent_path() / p);
    }
    return out;
}

void write_image_list(const std::vector<std::string>& names, const fs::path& dir) {
    std::ofstream out(dir / "images.txt", std::ios::trunc);
    for (const std::string& n : names) out << n << '\n';
    if (!out) throw IoError("cannot write " + (dir / "images.txt").string());
}

// Applies `fn` to every image of a list, writing results next to a fresh images.txt.
int map_images(const fs::path& list, const fs::path& out_dir,
               const std::function<DepthImage(const DepthImage&)>& fn) {
    fs::create_directories(out_dir);
    std::vector<std::string> names;
    int failures = 0;
    for (const fs::path& p : read_image_list(list)) {
        try {
            const DepthImage out = fn(load_depth_image(p));
            const std::string name = image_stem(out.ids) + ".pgm";
            save_depth_image(out, out_dir / name);
            names.push_back(name);
        } catch (const ConfigError&) {
            throw;
        } catch (const Error& e) {
            log_warning(p.string() + ": " + e.what());
            ++failures;
        }
    }
    write_image_list(names, out_dir);
    return failures ? kExitPartial : 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"CT-based 3D face recognition pipeline"};
    app.require_subcommand(1);
    bool verbose = false;
    app.add_flag("-v,--verbose", verbose, "print progress messages");

    ConfigOptions cfg;

    // phantom-gen
    auto* gen = app.add_subcommand("phantom-gen", "write a synthetic head-phantom cohort");
    int subjects = 20, scans = 2;
    long long gen_seed = 42;
    double noise = 20.0;
    std::string out;
    gen->add_option("--subjects", subjects, "number of identities")->check(CLI::PositiveNumber);
    gen->add_option("--scans", scans, "scans per identity")->check(CLI::PositiveNumber);
    gen->add_option("--seed", gen_seed, "cohort seed")->check(CLI::NonNegativeNumber);
    gen->add_option("--noise", noise, "Gaussian noise std in HU")->check(CLI::NonNegativeNumber);
    gen->add_option("--out", out, "output directory")->required();

    // preprocess
    auto* pre = app.add_subcommand("preprocess", "resample, locate landmarks and crop the ROI");
    std::string manifest;
    pre->add_option("--manifest", manifest, "cohort manifest")->required()->check(CLI::ExistingFile);
    pre->add_option("--out", out, "output directory")->required();
    cfg.attach(*pre);
    for (const char* k : {"spacing", "sigma", "tau", "margin-factor"}) cfg.flag(*pre, k);

    // render
    auto* ren = app.add_subcommand("render", "iso-surface extraction and pose sweep of ROI volumes");
    ren->add_option("--manifest", manifest, "ROI manifest written by preprocess")->required()->check(CLI::ExistingFile);
    ren->add_option("--out", out, "output directory")->required();
    cfg.attach(*ren);
    for (const char* k : {"gamma", "theta", "sweep-pitch", "sweep-roll", "sweep-yaw", "sc", "image-size", "threads"})
        cfg.flag(*ren, k);

    // segment
    auto* seg = app.add_subcommand("segment", "baseline face mask on rendered images");
    std::string images;
    seg->add_option("--images", images, "images.txt list")->required()->check(CLI::ExistingFile);
    seg->add_option("--out", out, "output directory")->required();

    // normalize
    auto* nor = app.add_subcommand("normalize", "depth normalization of segmented images");
    nor->add_option("--images", images, "images.txt list")->required()->check(CLI::ExistingFile);
    nor->add_option("--out", out, "output directory")->required();
    cfg.attach(*nor);
    for (const char* k : {"theta-norm", "norm-percentile", "C"}) cfg.flag(*nor, k);

    // embed
    auto* emb = app.add_subcommand("embed", "baseline embeddings of an image list");
    emb->add_option("--images", images, "images.txt list")->required()->check(CLI::ExistingFile);
    emb->add_option("--out", out, "embedding file")->required();
    cfg.attach(*emb);
    for (const char* k : {"crop-size", "crop-mode", "seed"}) cfg.flag(*emb, k);

    // sample
    auto* sam = app.add_subcommand("sample", "E x L group-sampled batch manifest");
    std::string embeddings;
    sam->add_option("--embeddings", embeddings, "embedding file")->required()->check(CLI::ExistingFile);
    sam->add_option("--out", out, "batch manifest")->required();
    cfg.attach(*sam);
    for (const char* k : {"E", "L", "seed", "epochs", "shuffle-across-scans", "margin", "loss"})
        cfg.flag(*sam, k);

    // evaluate
    auto* eva = app.add_subcommand("evaluate", "k-fold identification and verification");
    std::string roc_dir;
    eva->add_option("--embeddings", embeddings, "embedding file")->required()->check(CLI::ExistingFile);
    eva->add_option("--out", out, "report CSV")->required();
    eva->add_option("--roc-dir", roc_dir, "write roc_fold<i>.csv and roc.svg here");
    cfg.attach(*eva);
    for (const char* k : {"folds", "seed", "impostor-ratio"}) cfg.flag(*eva, k);

    // report
    auto* rep = app.add_subcommand("report", "stage comparison table from report CSVs");
    std::vector<std::string> reports, stage_names;
    rep->add_option("--reports", reports, "report CSVs in stage order")->required()->check(CLI::ExistingFile);
    rep->add_option("--stages", stage_names, "stage names, one per report (default: file stems)");
    rep->add_option("--out", out, "output CSV (default: stdout)");

    // run-all
    auto* all = app.add_subcommand("run-all", "full pipeline from a manifest or a generated phantom cohort");
    all->add_option("--manifest", manifest, "cohort manifest")->check(CLI::ExistingFile);
    all->add_option("--phantom-subjects", subjects, "generate a phantom cohort with this many identities");
    all->add_option("--phantom-scans", scans, "scans per generated identity");
    all->add_option("--phantom-seed", gen_seed, "seed of the generated cohort");
    all->add_option("--out", out, "output directory")->required();
    cfg.attach(*all);
    for (const char* k : {"spacing", "gamma", "theta", "sweep-pitch", "sweep-roll", "sc", "image-size", "theta-norm",
                          "C", "crop-size", "E", "L", "margin", "loss", "folds", "seed", "impostor-ratio", "stage",
                          "keep-stages", "threads"})
        cfg.flag(*all, k);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }
    set_verbose(verbose);

    try {
        if (gen->parsed()) {
            const Cohort cohort = generate_cohort(subjects, scans, static_cast<std::uint64_t>(gen_seed), noise);
            std::cout << write_cohort(cohort, out).string() << '\n';
            return 0;
        }
        if (pre->parsed()) {
            const PipelineConfig c = cfg.build();
            fs::create_directories(fs::path(out) / "roi");
            std::ofstream roi_manifest(fs::path(out) / "manifest.txt", std::ios::trunc);
            std::ofstream losses(fs::path(out) / "landmarks.csv", std::ios::trunc);
            losses << "subject,scan,landmark_loss\n";
            int failures = 0;
            for (const ManifestEntry& e : load_manifest(manifest)) {
                try {
                    const PreprocessedScan p = preprocess_scan(load_volume(e.volume), load_landmarks(e.landmarks), c);
                    const fs::path rel = fs::path("roi") / (scan_stem(e.subject, e.scan) + ".ctv");
                    save_volume(p.roi, fs::path(out) / rel);
                    save_landmarks(p.landmarks, (fs::path(out) / rel).replace_extension(".lmk"));
                    roi_manifest << e.subject << ' ' << e.scan << ' ' << rel.generic_string() << '\n';
                    losses << e.subject << ',' << e.scan << ',' << format_real(p.landmark_loss) << '\n';
                } catch (const Error& err) {
                    log_warning(scan_stem(e.subject, e.scan) + ": " + err.what());
                    ++failures;
                }
            }
            return failures ? kExitPartial : 0;
        }
        if (ren->parsed()) {
            const PipelineConfig c = cfg.build();
            SweepConfig sweep = c.sweep;
            sweep.threads = c.threads;
            fs::create_directories(out);
            std::vector<std::string> names;
            int failures = 0;
            for (const ManifestEntry& e : load_manifest(manifest)) {
                try {
                    const SurfaceMesh mesh = extract_isosurface(load_volume(e.volume), c.gamma);
                    if (mesh.empty()) throw Error("empty iso-surface");
                    for (const DepthImage& img : pose_sweep(mesh, sweep, e.subject, e.scan)) {
                        const std::string name = image_stem(img.ids) + ".pgm";
                        save_depth_image(img, fs::path(out) / name);
                        names.push_back(name);
                    }
                } catch (const Error& err) {
                    log_warning(scan_stem(e.subject, e.scan) + ": " + err.what());
                    ++failures;
                }
            }
            write_image_list(names, out);
            return failures ? kExitPartial : 0;
        }
        if (seg->parsed())
            return map_images(images, out, [](const DepthImage& img) { return apply_mask(img, baseline_face_mask(img)); });
        if (nor->parsed()) {
            const PipelineConfig c = cfg.build();
            return map_images(images, out, [&](const DepthImage& img) {
                const double theta = c.theta_norm ? *c.theta_norm : select_threshold(img, c.norm_percentile);
                return normalize_depth(img, theta, c.scale_c);
            });
        }
        if (emb->parsed()) {
            const PipelineConfig c = cfg.build();
            std::vector<Embedding> es;
            for (const fs::path& p : read_image_list(images)) es.push_back(embed_image(load_depth_image(p), c));
            std::sort(es.begin(), es.end(), [](const Embedding& a, const Embedding& b) { return a.ids < b.ids; });
            save_embeddings(es, out);
            return 0;
        }
        if (sam->parsed()) {
            const PipelineConfig c = cfg.build();
            const std::vector<Embedding> es = load_embeddings(embeddings);
            std::map<int, std::vector<ImageRef>> by_patient;
            for (const Embedding& e : es) by_patient[e.ids.patient].push_back(e.ids);
            std::map<ImageRef, std::size_t> lookup;
            for (std::size_t i = 0; i < es.size(); ++i) lookup.emplace(es[i].ids, i);
            std::vector<Batch> batches;
            double loss = 0.0;
            for (int epoch = 0; epoch < c.epochs; ++epoch)
                for (Batch& b : sample_epoch(by_patient, c.group_size, c.labels_per_batch, c.shuffle_across_scans,
                                             c.seed, epoch)) {
                    std::vector<Embedding> members;
                    for (const ImageRef& r : b.flattened()) members.push_back(es[lookup.at(r)]);
                    loss += mean_triplet_loss(members, mine_triplets(b, members, MiningMode::BatchHard), c.margin,
                                              c.loss);
                    batches.push_back(std::move(b));
                }
            save_batch_manifest(batches, out);
            std::cout << "batches " << batches.size() << " mean_batch_hard_loss "
                      << format_real(batches.empty() ? 0.0 : loss / double(batches.size())) << '\n';
            return 0;
        }
        if (eva->parsed()) {
            const PipelineConfig c = cfg.build();
            std::vector<RocCurve> curves;
            const EvalReport r =
                evaluate_embeddings(load_embeddings(embeddings), {c.folds, c.seed, c.impostor_ratio}, &curves);
            save_report_csv(r, out);
            if (!roc_dir.empty()) {
                fs::create_directories(roc_dir);
                for (std::size_t f = 0; f < curves.size(); ++f)
                    save_roc_csv(curves[f], fs::path(roc_dir) / ("roc_fold" + std::to_string(f) + ".csv"));
                if (!curves.empty()) save_roc_svg(curves[0], fs::path(roc_dir) / "roc.svg", "ROC fold 0");
            }
            std::cout << "acc " << format_real(r.acc.mean) << " vacc " << format_real(r.vacc.mean) << " auc "
                      << format_real(r.auc.mean) << '\n';
            return 0;
        }
        if (rep->parsed()) {
            if (!stage_names.empty() && stage_names.size() != reports.size())
                throw ConfigError("--stages needs one name per report");
            std::vector<NamedReport> named;
            for (std::size_t i = 0; i < reports.size(); ++i)
                named.push_back({stage_names.empty() ? fs::path(reports[i]).stem().string() : stage_names[i],
                                 load_report_csv(reports[i])});
            const std::string table = compare_stages(named);
            if (out.empty()) {
                std::cout << table;
            } else {
                std::ofstream(out, std::ios::trunc) << table;
            }
            return 0;
        }
        if (all->parsed()) {
            const PipelineConfig c = cfg.build();
            fs::path input = manifest;
            if (input.empty()) {
                if (all->count("--phantom-subjects") == 0)
                    throw ConfigError("run-all needs --manifest or --phantom-subjects");
                input = write_cohort(generate_cohort(subjects, scans, static_cast<std::uint64_t>(gen_seed)),
                                     fs::path(out) / "cohort");
            }
            const PipelineResult r = run_pipeline(c, input, out);
            if (r.evaluated) {
                const EvalReport& rep_sel = r.reports[static_cast<std::size_t>(
                    std::find(kAllStages.begin(), kAllStages.end(), c.stage) - kAllStages.begin())];
                std::cout << "images " << r.image_count << " acc " << format_real(rep_sel.acc.mean) << " vacc "
                          << format_real(rep_sel.vacc.mean) << " auc " << format_real(rep_sel.auc.mean) << '\n';
            }
            return r.failures.empty() && r.evaluated ? 0 : kExitPartial;
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitPartial;
    }
    return 0;
}
