#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "ctface/render.hpp"

namespace ctface {

struct FaceMask {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> mask;  // row-major, 1 = face

    bool at(int x, int y) const { return mask[static_cast<std::size_t>(y) * width + x] != 0; }
    std::size_t area() const;
};

/// Source of face masks; the geometric baseline is the default implementation.
class FaceSegmenter {
public:
    virtual ~FaceSegmenter() = default;
    virtual FaceMask segment(const DepthImage& image) const = 0;
};

/// Largest 4-connected foreground component with its interior holes filled.
/// Ties on area go to the component met first in row-major order.
FaceMask baseline_face_mask(const DepthImage& image);

class BaselineSegmenter final : public FaceSegmenter {
public:
    FaceMask segment(const DepthImage& image) const override { return baseline_face_mask(image); }
};

/// Keeps depth where the mask is set; the result is tagged segmented.
DepthImage apply_mask(const DepthImage& image, const FaceMask& mask);

/// Affine display map depth -> [0, 255]: 255 * (d - lo) / (hi - lo), clamped.
struct DisplayMapping {
    double lo = 0.0;
    double hi = 255.0;

    double map(double depth) const;
    double unmap(double value) const { return lo + value * (hi - lo) / 255.0; }

    /// Min-max of the foreground pixels of one image.
    static DisplayMapping from_foreground(const DepthImage& image);
};

struct Histogram {
    std::vector<double> bin_edges;   // 257 edges over [0, 255]
    std::vector<std::int64_t> counts;  // 256 bins
    bool foreground_only = false;

    std::int64_t total() const;
};

/// 256-bin histogram of display-mapped values. When `mapping` is absent the
/// foreground min-max mapping of the image is used.
Histogram depth_histogram(const DepthImage& image, bool foreground_only,
                          const std::optional<DisplayMapping>& mapping = std::nullopt);

/// Two-column CSV: bin_low,count.
void save_histogram_csv(const Histogram& h, const std::filesystem::path& path);

/// NX = C (SX - theta) / (max(SX) - theta) on the foreground, clamped below at 0.
/// Throws Error when max(SX) <= theta or C <= 0.
DepthImage normalize_depth(const DepthImage& image, double theta, double scale_c = 255.0);

/// Threshold in depth units at the given percentile of the foreground's mapped values.
double select_threshold(const DepthImage& image, double percentile = 1.0,
                        const std::optional<DisplayMapping>& mapping = std::nullopt);

}  // namespace ctface
