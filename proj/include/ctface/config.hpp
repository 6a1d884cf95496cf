#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "ctface/geometry.hpp"
#include "ctface/recognition.hpp"
#include "ctface/render.hpp"

namespace ctface {

enum class CropMode { Center, Random };

/// Every tunable of the pipeline. Precedence when loading: CLI > file > defaults.
struct PipelineConfig {
    // volume + landmarks
    Vec3 target_spacing{1.0, 1.0, 1.0};
    double heatmap_sigma = 2.0;
    double decode_tau = 0.25;
    double margin_factor = 0.5;
    // render
    double gamma = -350.0;
    SweepConfig sweep;
    // face processing; nullopt selects the per-image percentile rule
    std::optional<double> theta_norm;
    double norm_percentile = 1.0;
    double scale_c = 255.0;
    // recognition
    int crop_size = 224;
    CropMode crop_mode = CropMode::Center;
    int group_size = 15;       // E
    int labels_per_batch = 18;  // L
    double margin = 0.2;
    LossVariant loss = LossVariant::Hinge;
    bool shuffle_across_scans = true;
    int epochs = 1;
    double split_ratio = 0.8;
    // evaluation
    int folds = 5;
    std::uint64_t seed = 42;
    double impostor_ratio = 1.0;
    Stage stage = Stage::Normalized;
    // execution
    bool keep_stages = false;
    int threads = 0;

    /// Applies one `key = value` setting; throws ConfigError for unknown keys or bad values.
    void set(std::string_view key, std::string_view value);

    /// Checks the cross-module invariants; throws ConfigError.
    void validate() const;

    /// Every key in canonical form, one `key = value` line each; re-loadable with load_config_file.
    std::string to_text() const;
};

/// Flat `key = value` file; `#` starts a comment.
void load_config_file(const std::filesystem::path& path, PipelineConfig& config);

/// Parses `first:last:count`.
AngleGrid parse_angle_grid(std::string_view text);

}  // namespace ctface
