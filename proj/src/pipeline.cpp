#include "ctface/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>

#include "ctface/depth_io.hpp"
#include "ctface/error.hpp"
#include "ctface/faceproc.hpp"
#include "ctface/landmarks.hpp"
#include "ctface/mesh.hpp"
#include "ctface/parallel.hpp"
#include "ctface/rng.hpp"
#include "ctface/text.hpp"

namespace ctface {

namespace fs = std::filesystem;

std::string scan_stem(int subject, int scan) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "s%03d_c%d", subject, scan);
    return buf;
}

std::string image_stem(const SourceIds& ids) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "_p%03d", ids.pose);
    return scan_stem(ids.patient, ids.scan) + buf;
}

std::vector<ManifestEntry> load_manifest(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest " + path.string());
    const fs::path base = path.parent_path();
    std::vector<ManifestEntry> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto tokens = split_whitespace(line);
        if (tokens.empty() || tokens[0].front() == '#') continue;
        if (tokens.size() < 3)
            throw FormatError(path.string() + ":" + std::to_string(lineno) + ": expected subject scan path");
        ManifestEntry e;
        e.subject = static_cast<int>(parse_int(tokens[0]));
        e.scan = static_cast<int>(parse_int(tokens[1]));
        const fs::path p{std::string(tokens[2])};
        e.volume = p.is_absolute() ? p : base / p;
        e.landmarks = fs::path(e.volume).replace_extension(".lmk");
        out.push_back(std::move(e));
    }
    std::sort(out.begin(), out.end(), [](const ManifestEntry& a, const ManifestEntry& b) {
        return std::pair(a.subject, a.scan) < std::pair(b.subject, b.scan);
    });
    for (std::size_t i = 1; i < out.size(); ++i)
        if (out[i].subject == out[i - 1].subject && out[i].scan == out[i - 1].scan)
            throw FormatError("manifest lists " + scan_stem(out[i].subject, out[i].scan) + " twice");
    return out;
}

PreprocessedScan preprocess_scan(const Volume& volume, const LandmarkSet& truth, const PipelineConfig& config) {
    const Volume resampled = resample_spacing(volume, config.target_spacing);
    const LandmarkSet truth_resampled =
        truth.reindexed(volume.origin(), volume.spacing(), resampled.origin(), resampled.spacing());
    const auto predictor = oracle_predictor(truth_resampled, config.heatmap_sigma);
    const LandmarkSet predicted = decode_heatmaps(predictor->predict(resampled), config.decode_tau);

    const RoiBox box = roi_box(resampled.dims(), predicted, config.margin_factor);
    PreprocessedScan out{crop(resampled, box), predicted, landmark_loss(truth_resampled, predicted)};
    const Vec3 shift{double(box.min_corner.x), double(box.min_corner.y), double(box.min_corner.z)};
    std::array<Vec3, kLandmarkCount> pts = predicted.points();
    for (Vec3& p : pts) p = p - shift;
    out.landmarks = LandmarkSet(pts);
    return out;
}

const DepthImage& StagedImages::get(Stage s) const {
    switch (s) {
        case Stage::Projected: return projected;
        case Stage::Segmented: return segmented;
        case Stage::Normalized: return normalized;
    }
    return projected;
}

StagedImages process_image(const DepthImage& projected, const PipelineConfig& config) {
    StagedImages s;
    s.projected = projected;
    s.segmented = apply_mask(projected, baseline_face_mask(projected));
    const double theta = config.theta_norm ? *config.theta_norm : select_threshold(s.segmented, config.norm_percentile);
    s.normalized = normalize_depth(s.segmented, theta, config.scale_c);
    return s;
}

Embedding embed_image(const DepthImage& image, const PipelineConfig& config) {
    if (config.crop_mode == CropMode::Center) return baseline_embed(center_crop(image, config.crop_size));
    const std::uint64_t seed = derive_seed(
        derive_seed(config.seed, static_cast<std::uint64_t>(image.ids.patient) * 1000ULL + image.ids.scan),
        static_cast<std::uint64_t>(image.ids.pose));
    return baseline_embed(random_crop(image, config.crop_size, seed));
}

namespace {

struct ScanOutput {
    std::array<std::vector<Embedding>, 3> embeddings;
    double landmark_loss = 0.0;
    std::size_t triangles = 0;
    std::optional<ScanFailure> failure;
};

ScanOutput run_scan(const ManifestEntry& entry, const PipelineConfig& config, int sweep_threads,
                    const fs::path& out_dir) {
    ScanOutput out;
    std::string stage = "load";
    try {
        const Volume volume = load_volume(entry.volume);
        const LandmarkSet truth = load_landmarks(entry.landmarks);

        stage = "landmarks";
        const PreprocessedScan pre = preprocess_scan(volume, truth, config);
        out.landmark_loss = pre.landmark_loss;

        stage = "isosurface";
        const SurfaceMesh mesh = extract_isosurface(pre.roi, config.gamma);
        if (mesh.empty()) throw Error("iso-surface at gamma " + format_real(config.gamma) + " is empty");
        out.triangles = mesh.triangles.size();

        stage = "render";
        SweepConfig sweep = config.sweep;
        sweep.threads = sweep_threads;
        const std::vector<DepthImage> images = pose_sweep(mesh, sweep, entry.subject, entry.scan);

        stage = "faceproc";
        std::vector<StagedImages> staged;
        staged.reserve(images.size());
        for (const DepthImage& img : images) staged.push_back(process_image(img, config));

        if (config.keep_stages) {
            stage = "persist";
            for (std::size_t si = 0; si < kAllStages.size(); ++si) {
                const fs::path dir = out_dir / "stages" / std::string(stage_name(kAllStages[si]));
                for (const StagedImages& s : staged) {
                    const DepthImage& img = s.get(kAllStages[si]);
                    save_depth_image(img, dir / (image_stem(img.ids) + ".pgm"));
                }
            }
        }

        stage = "embed";
        for (std::size_t si = 0; si < kAllStages.size(); ++si)
            for (const StagedImages& s : staged) out.embeddings[si].push_back(embed_image(s.get(kAllStages[si]), config));
    } catch (const std::exception& e) {
        out.failure = ScanFailure{entry.subject, entry.scan, stage, e.what()};
        out.embeddings = {};
        log_warning(scan_stem(entry.subject, entry.scan) + " failed at stage " + stage + ": " + e.what());
    }
    return out;
}

std::size_t stage_index(Stage s) {
    return static_cast<std::size_t>(std::find(kAllStages.begin(), kAllStages.end(), s) - kAllStages.begin());
}

// Batch manifest for the training subjects of fold 0, plus the baseline embedding's mean batch-hard loss.
void write_sampling(const std::vector<Embedding>& embeddings, const PipelineConfig& config, const fs::path& out_dir) {
    std::vector<int> patients;
    for (const Embedding& e : embeddings)
        if (patients.empty() || patients.back() != e.ids.patient) patients.push_back(e.ids.patient);
    if (static_cast<int>(patients.size()) < config.folds) {
        log_warning("sampling skipped: fewer patients than folds");
        return;
    }
    const std::vector<Fold> folds = kfold_subjects(patients, config.folds, config.seed);
    std::map<int, std::vector<ImageRef>> by_patient;
    for (const Embedding& e : embeddings)
        if (std::binary_search(folds[0].train.begin(), folds[0].train.end(), e.ids.patient))
            by_patient[e.ids.patient].push_back(e.ids);
    const ClassSplit split = split_per_class(by_patient, config.split_ratio, derive_seed(config.seed, 0x5A));
    std::map<int, std::vector<ImageRef>> train;
    for (const ImageRef& r : split.train) train[r.patient].push_back(r);

    int labels = config.labels_per_batch;
    if (static_cast<int>(train.size()) < labels) {
        log_warning("only " + std::to_string(train.size()) + " training patients, L reduced from " +
                    std::to_string(labels));
        labels = static_cast<int>(train.size());
    }
    if (labels < 2) {
        log_warning("sampling skipped: fewer than two training patients");
        return;
    }

    std::map<ImageRef, std::size_t> lookup;
    for (std::size_t i = 0; i < embeddings.size(); ++i) lookup.emplace(embeddings[i].ids, i);

    std::vector<Batch> all;
    double loss_sum = 0.0;
    std::size_t loss_batches = 0;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        const std::vector<Batch> batches =
            sample_epoch(train, config.group_size, labels, config.shuffle_across_scans, config.seed, epoch);
        for (const Batch& b : batches) {
            std::vector<Embedding> members;
            for (const ImageRef& r : b.flattened()) members.push_back(embeddings[lookup.at(r)]);
            const auto triplets = mine_triplets(b, members, MiningMode::BatchHard);
            loss_sum += mean_triplet_loss(members, triplets, config.margin, config.loss);
            ++loss_batches;
        }
        all.insert(all.end(), batches.begin(), batches.end());
    }
    save_batch_manifest(all, out_dir / "batches.txt");
    std::ofstream summary(out_dir / "sampling.txt", std::ios::trunc);
    summary << "batches " << all.size() << '\n';
    summary << "labels_per_batch " << labels << '\n';
    summary << "group_size " << config.group_size << '\n';
    summary << "mean_batch_hard_loss " << format_real(loss_batches ? loss_sum / double(loss_batches) : 0.0) << '\n';
}

}  // namespace

PipelineResult run_pipeline(const PipelineConfig& config, const fs::path& manifest, const fs::path& out_dir) {
    config.validate();
    const std::vector<ManifestEntry> entries = load_manifest(manifest);
    if (entries.empty()) throw ConfigError("manifest " + manifest.string() + " lists no scans");
    fs::create_directories(out_dir);
    {
        std::ofstream cfg(out_dir / "config.txt", std::ios::trunc);
        cfg << config.to_text();
    }
    if (config.keep_stages)
        for (Stage st : kAllStages) fs::create_directories(out_dir / "stages" / std::string(stage_name(st)));

    const int workers = std::min<int>(resolve_threads(config.threads), static_cast<int>(entries.size()));
    const int sweep_threads = workers > 1 ? 1 : resolve_threads(config.threads);
    std::vector<ScanOutput> outputs(entries.size());
    std::mutex progress_mutex;
    std::size_t done = 0;
    parallel_for(entries.size(), workers, [&](std::size_t i) {
        outputs[i] = run_scan(entries[i], config, sweep_threads, out_dir);
        std::lock_guard lock(progress_mutex);
        ++done;
        log_info(scan_stem(entries[i].subject, entries[i].scan) + " done (" + std::to_string(done) + "/" +
                 std::to_string(entries.size()) + ")");
    });

    PipelineResult result;
    std::ofstream lm(out_dir / "landmarks.csv", std::ios::trunc);
    lm << "subject,scan,landmark_loss,triangles\n";
    for (std::size_t i = 0; i < entries.size(); ++i) {
        ScanOutput& o = outputs[i];
        if (o.failure) {
            result.failures.push_back(*o.failure);
            continue;
        }
        lm << entries[i].subject << ',' << entries[i].scan << ',' << format_real(o.landmark_loss) << ','
           << o.triangles << '\n';
        for (std::size_t si = 0; si < kAllStages.size(); ++si)
            for (Embedding& e : o.embeddings[si]) result.embeddings[si].push_back(std::move(e));
    }
    for (auto& stage_embeddings : result.embeddings)
        std::sort(stage_embeddings.begin(), stage_embeddings.end(),
                  [](const Embedding& a, const Embedding& b) { return a.ids < b.ids; });
    result.image_count = result.embeddings[0].size();

    {
        std::ofstream f(out_dir / "failures.txt", std::ios::trunc);
        for (const ScanFailure& s : result.failures)
            f << s.subject << ' ' << s.scan << ' ' << s.stage << ' ' << s.message << '\n';
    }

    const std::size_t selected = stage_index(config.stage);
    for (std::size_t si = 0; si < kAllStages.size(); ++si)
        save_embeddings(result.embeddings[si],
                        out_dir / ("embeddings_" + std::string(stage_name(kAllStages[si])) + ".txt"));

    try {
        EvaluationOptions opts{config.folds, config.seed, config.impostor_ratio};
        std::vector<NamedReport> named;
        for (std::size_t si = 0; si < kAllStages.size(); ++si) {
            std::vector<RocCurve> curves;
            result.reports[si] = evaluate_embeddings(result.embeddings[si], opts, &curves);
            const std::string name(stage_name(kAllStages[si]));
            save_report_csv(result.reports[si], out_dir / ("report_" + name + ".csv"));
            named.push_back({name, result.reports[si]});
            if (si == selected) {
                save_report_csv(result.reports[si], out_dir / "report.csv");
                for (std::size_t f = 0; f < curves.size(); ++f)
                    save_roc_csv(curves[f], out_dir / ("roc_fold" + std::to_string(f) + ".csv"));
                if (!curves.empty()) save_roc_svg(curves[0], out_dir / "roc.svg", "ROC fold 0 (" + name + ")");
            }
        }
        std::ofstream(out_dir / "stages.csv", std::ios::trunc) << compare_stages(named);
        result.evaluated = true;
    } catch (const Error& e) {
        log_warning(std::string("evaluation skipped: ") + e.what());
    }

    try {
        write_sampling(result.embeddings[selected], config, out_dir);
    } catch (const Error& e) {
        log_warning(std::string("sampling skipped: ") + e.what());
    }
    return result;
}

}  // namespace ctface
