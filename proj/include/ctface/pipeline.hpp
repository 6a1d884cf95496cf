#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "ctface/config.hpp"
#include "ctface/evaluation.hpp"
#include "ctface/landmark_set.hpp"
#include "ctface/recognition.hpp"
#include "ctface/render.hpp"
#include "ctface/volume.hpp"

namespace ctface {

struct ManifestEntry {
    int subject = 0;
    int scan = 0;
    std::filesystem::path volume;     // absolute or relative to the working directory
    std::filesystem::path landmarks;  // volume path with the .lmk extension
};

/// Lines `subject scan path [extra columns]`; paths are resolved against the manifest directory.
std::vector<ManifestEntry> load_manifest(const std::filesystem::path& path);

struct PreprocessedScan {
    Volume roi;
    LandmarkSet landmarks;  // voxel coordinates of `roi`
    double landmark_loss = 0.0;
};

/// Resample, predict landmarks with the oracle predictor, decode and crop the ROI.
PreprocessedScan preprocess_scan(const Volume& volume, const LandmarkSet& truth, const PipelineConfig& config);

/// The three ablation stages of one projected image, linked by source ids.
struct StagedImages {
    DepthImage projected;
    DepthImage segmented;
    DepthImage normalized;
    const DepthImage& get(Stage s) const;
};

StagedImages process_image(const DepthImage& projected, const PipelineConfig& config);

/// Crop per config (center, or random seeded by the source ids) then embed with the baseline embedder.
Embedding embed_image(const DepthImage& image, const PipelineConfig& config);

struct ScanFailure {
    int subject = 0;
    int scan = 0;
    std::string stage;
    std::string message;
};

constexpr std::array<Stage, 3> kAllStages{Stage::Projected, Stage::Segmented, Stage::Normalized};

struct PipelineResult {
    std::array<std::vector<Embedding>, 3> embeddings;  // indexed like kAllStages, sorted by source ids
    std::array<EvalReport, 3> reports;
    std::vector<ScanFailure> failures;
    std::size_t image_count = 0;
    bool evaluated = false;
};

/// Runs every manifest scan end to end and writes the output tree into `out_dir`.
/// Scans that fail are recorded in `failures` and skipped.
PipelineResult run_pipeline(const PipelineConfig& config, const std::filesystem::path& manifest,
                            const std::filesystem::path& out_dir);

/// Base name `sNNN_cM` of a scan and `sNNN_cM_pPPP` of an image.
std::string scan_stem(int subject, int scan);
std::string image_stem(const SourceIds& ids);

}  // namespace ctface
