#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "ctface/geometry.hpp"
#include "ctface/landmark_set.hpp"

namespace ctface {

/// Dense CT grid of Hounsfield units, x-fastest then y then z.
///
/// Immutable once built: the constructor checks every invariant (positive
/// dims and spacing, payload size, finite samples) and the accessors are
/// const, so a Volume can be shared read-only across workers.
class Volume {
public:
    Volume(Index3 dims, Vec3 spacing, Vec3 origin, std::vector<float> voxels);

    static Volume filled(Index3 dims, Vec3 spacing, Vec3 origin, float value);

    const Index3& dims() const { return dims_; }
    const Vec3& spacing() const { return spacing_; }
    const Vec3& origin() const { return origin_; }
    std::span<const float> voxels() const { return voxels_; }
    std::size_t size() const { return voxels_.size(); }

    std::size_t linear_index(int i, int j, int k) const {
        return static_cast<std::size_t>(i) +
               static_cast<std::size_t>(dims_.x) *
                   (static_cast<std::size_t>(j) + static_cast<std::size_t>(dims_.y) * static_cast<std::size_t>(k));
    }
    float at(int i, int j, int k) const { return voxels_[linear_index(i, j, k)]; }

    /// Physical position (mm) of a voxel centre or continuous voxel coordinate.
    Vec3 physical(const Vec3& voxel_coord) const { return origin_ + hadamard(voxel_coord, spacing_); }
    Vec3 voxel_coord(const Vec3& physical_mm) const;

    /// Trilinear sample at a continuous voxel coordinate, clamped to the edge voxels.
    double sample(const Vec3& voxel_coord) const;

    Vec3 physical_extent() const { return hadamard(Vec3{double(dims_.x), double(dims_.y), double(dims_.z)}, spacing_); }

    bool operator==(const Volume&) const = default;

private:
    Index3 dims_;
    Vec3 spacing_;
    Vec3 origin_;
    std::vector<float> voxels_;
};

/// Inclusive voxel box.
struct RoiBox {
    Index3 min_corner;
    Index3 max_corner;

    Index3 extent() const {
        return {max_corner.x - min_corner.x + 1, max_corner.y - min_corner.y + 1, max_corner.z - min_corner.z + 1};
    }
    bool operator==(const RoiBox&) const = default;
};

/// Reads a CTV1 file. Throws IoError / FormatError.
Volume load_volume(const std::filesystem::path& path);

/// Writes a CTV1 file. Voxels are rounded to the nearest integer HU, so
/// the round trip is bit-exact for integer-valued volumes.
void save_volume(const Volume& v, const std::filesystem::path& path);

/// Resamples to a new spacing by trilinear interpolation in physical space.
Volume resample_spacing(const Volume& v, const Vec3& target_spacing);

/// Landmark bounding box expanded by margin_factor x inter-eye distance, clamped to the grid.
RoiBox roi_box(const Index3& dims, const LandmarkSet& landmarks, double margin_factor);

/// Verbatim sub-volume; origin shifted so retained voxels keep their physical position.
Volume crop(const Volume& v, const RoiBox& box);

Volume crop_roi(const Volume& v, const LandmarkSet& landmarks, double margin_factor = 0.5);

}  // namespace ctface
