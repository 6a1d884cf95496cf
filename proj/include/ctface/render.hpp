#pragma once

#include <string_view>
#include <vector>

#include "ctface/geometry.hpp"
#include "ctface/mesh.hpp"

namespace ctface {

inline constexpr double kDefaultCullAngleDeg = 60.0;

/// Orthographic camera orbiting a target point.
///
/// The camera frame starts with the view axis on +y (the direction the face
/// points), up on +z, and is rotated about the target by yaw (about z), then
/// pitch (about x), then roll (about y), all about the fixed world axes.
/// The camera sits at target + distance * view_axis and looks along -view_axis.
struct CameraPose {
    double pitch_deg = 0.0;
    double roll_deg = 0.0;
    double yaw_deg = 0.0;
    double scale_mm = 180.0;  // physical width spanned by the image
    int width = 256;
    int height = 256;
    double u0 = 128.0;
    double v0 = 128.0;
    Vec3 target;
    double distance = 1.0;

    Vec3 view_axis{0, 1, 0};
    Vec3 up{0, 0, 1};
    Vec3 right{1, 0, 0};

    Vec3 location() const { return target + view_axis * distance; }
    /// Direction the camera looks in.
    Vec3 view_dir() const { return -view_axis; }
    double pixels_per_mm() const { return width / scale_mm; }
};

/// Builds and validates a pose. Requires u, v > 0, sc > 0, pitch in [-90, 90], distance > 0.
CameraPose pose_camera(double pitch_deg, double roll_deg, double yaw_deg, const Vec3& target, double scale_mm,
                       int width, int height, double u0, double v0, double distance);

enum class Stage { Projected, Segmented, Normalized };

std::string_view stage_name(Stage s);
/// Accepts "projected", "segmented", "normalized" (alias "final").
Stage parse_stage(std::string_view name);

struct SourceIds {
    int patient = 0;
    int scan = 0;
    int pose = 0;

    auto operator<=>(const SourceIds&) const = default;
};

/// Row-major depth samples in mm from the camera plane; 0 is background.
struct DepthImage {
    int width = 0;
    int height = 0;
    std::vector<double> depth;
    CameraPose pose;
    Stage stage = Stage::Projected;
    SourceIds ids;

    double at(int x, int y) const { return depth[static_cast<std::size_t>(y) * width + x]; }
    double& at(int x, int y) { return depth[static_cast<std::size_t>(y) * width + x]; }
    std::size_t foreground_count() const;

    /// Throws Error if dims disagree with the buffer or a value is negative or non-finite.
    void validate() const;
};

/// z-buffer rasterisation of the triangles that survive cull_by_normal.
DepthImage render_depth(const SurfaceMesh& m, const CameraPose& pose, double cull_theta_deg = kDefaultCullAngleDeg);

struct AngleGrid {
    double first = 0.0;
    double last = 0.0;
    int count = 1;

    /// Uniform values from first to last inclusive; count == 1 yields `first`.
    std::vector<double> values() const;
};

struct SweepConfig {
    AngleGrid pitch{-20.0, 20.0, 9};
    AngleGrid roll{-25.0, 25.0, 10};
    AngleGrid yaw{0.0, 0.0, 1};
    double cull_theta_deg = kDefaultCullAngleDeg;
    double scale_mm = 180.0;
    int width = 256;
    int height = 256;
    double u0 = 128.0;
    double v0 = 128.0;
    /// Limits render threads; 0 uses the hardware concurrency.
    int threads = 0;
};

/// Camera target (mesh centroid) and distance (twice the bounding radius) used for a mesh.
CameraPose frontal_pose(const SurfaceMesh& m, const SweepConfig& config, double pitch_deg = 0.0,
                        double roll_deg = 0.0, double yaw_deg = 0.0);

/// Renders the cartesian product pitch x roll x yaw; pose index = (ip * n_roll + ir) * n_yaw + iy.
std::vector<DepthImage> pose_sweep(const SurfaceMesh& m, const SweepConfig& config, int patient = 0, int scan = 0);

}  // namespace ctface
