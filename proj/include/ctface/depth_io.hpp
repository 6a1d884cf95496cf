#pragma once

#include <filesystem>
#include <string>

#include "ctface/render.hpp"

namespace ctface {

/// Sidecar path holding the pose line for a PGM depth image (`x.pgm` -> `x.pose`).
std::filesystem::path sidecar_path(const std::filesystem::path& pgm_path);

/// Writes a 16-bit binary PGM (value = round(depth_mm * 100), clamped to 65535) plus its sidecar.
void save_depth_image(const DepthImage& image, const std::filesystem::path& pgm_path);

/// Reads a PGM written by save_depth_image together with its sidecar.
DepthImage load_depth_image(const std::filesystem::path& pgm_path);

/// Single-line `key=value` description of pose, source ids and stage.
std::string format_sidecar(const DepthImage& image);

}  // namespace ctface
