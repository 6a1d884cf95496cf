#pragma once

#include <array>
#include <string_view>

#include "ctface/geometry.hpp"

namespace ctface {

enum class Landmark { LeftEyeCenter = 0, RightEyeCenter = 1, NoseTip = 2, LeftMouthCorner = 3 };

inline constexpr int kLandmarkCount = 4;

inline constexpr std::array<std::string_view, kLandmarkCount> kLandmarkNames = {
    "left-eye-center", "right-eye-center", "nose-tip", "left-mouth-corner"};

/// Four facial points in voxel coordinates, in the fixed Landmark order.
class LandmarkSet {
public:
    /// Throws Error if a coordinate is not finite or the eyes coincide.
    explicit LandmarkSet(const std::array<Vec3, kLandmarkCount>& points);

    const Vec3& operator[](Landmark which) const { return points_[static_cast<int>(which)]; }
    const Vec3& point(int j) const { return points_.at(static_cast<std::size_t>(j)); }
    const std::array<Vec3, kLandmarkCount>& points() const { return points_; }

    double inter_eye_distance() const;

    /// Same physical points expressed in another grid's voxel coordinates.
    LandmarkSet reindexed(const Vec3& from_origin, const Vec3& from_spacing, const Vec3& to_origin,
                          const Vec3& to_spacing) const;

    bool operator==(const LandmarkSet&) const = default;

private:
    std::array<Vec3, kLandmarkCount> points_;
};

}  // namespace ctface
