#pragma once

#include <array>
#include <filesystem>
#include <memory>
#include <span>
#include <vector>

#include "ctface/landmark_set.hpp"
#include "ctface/volume.hpp"

namespace ctface {

/// One Gaussian-blob volume per landmark, sharing the grid of a target Volume.
class HeatmapStack {
public:
    using Map = std::vector<float>;

    /// Checks that every map matches dims, holds values in [0, 1], and has a maximum in (0, 1].
    HeatmapStack(Index3 dims, double sigma, std::array<Map, kLandmarkCount> maps);

    const Index3& dims() const { return dims_; }
    double sigma() const { return sigma_; }
    std::span<const float> map(int j) const { return maps_.at(static_cast<std::size_t>(j)); }

    bool operator==(const HeatmapStack&) const = default;

private:
    Index3 dims_;
    double sigma_;
    std::array<Map, kLandmarkCount> maps_;
};

/// Maps a CT volume to landmark heatmaps on the same grid.
class HeatmapPredictor {
public:
    virtual ~HeatmapPredictor() = default;
    virtual HeatmapStack predict(const Volume& volume) const = 0;
};

/// map_j(v) = exp(-|v - p_j|^2 / (2 sigma^2)) at every voxel centre.
HeatmapStack encode_heatmaps(const LandmarkSet& points, const Index3& dims, double sigma);

/// Value-weighted centroid of each map's voxels at or above tau * max.
LandmarkSet decode_heatmaps(const HeatmapStack& stack, double tau = 0.25);

/// (1 / 2n) * sum_j |p_j - p_hat_j|^2 with n = 4.
double landmark_loss(const LandmarkSet& truth, const LandmarkSet& predicted);

/// Predictor that always emits the ground-truth encoding on the input volume's grid.
std::unique_ptr<HeatmapPredictor> oracle_predictor(const LandmarkSet& ground_truth, double sigma = 2.0);

/// Annotation file: one `name x y z` line per landmark, in LandmarkSet order.
LandmarkSet load_landmarks(const std::filesystem::path& path);
void save_landmarks(const LandmarkSet& landmarks, const std::filesystem::path& path);

}  // namespace ctface
