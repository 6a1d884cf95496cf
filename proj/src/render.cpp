#include "ctface/render.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "ctface/error.hpp"
#include "ctface/parallel.hpp"

namespace ctface {

CameraPose pose_camera(double pitch_deg, double roll_deg, double yaw_deg, const Vec3& target, double scale_mm,
                       int width, int height, double u0, double v0, double distance) {
    if (width <= 0 || height <= 0) throw Error("image size must be positive");
    if (!(scale_mm > 0.0) || !std::isfinite(scale_mm)) throw Error("view scale must be positive");
    if (!std::isfinite(pitch_deg) || !std::isfinite(roll_deg) || !std::isfinite(yaw_deg))
        throw Error("camera angles must be finite");
    if (pitch_deg < -90.0 || pitch_deg > 90.0) throw Error("pitch must lie in [-90, 90]");
    if (!std::isfinite(u0) || !std::isfinite(v0)) throw Error("principal point must be finite");
    if (!(distance > 0.0) || !std::isfinite(distance)) throw Error("camera distance must be positive");

    const Mat3 rotation = axis_rotation(1, degrees_to_radians(roll_deg)) *
                          axis_rotation(0, degrees_to_radians(pitch_deg)) *
                          axis_rotation(2, degrees_to_radians(yaw_deg));
    CameraPose pose;
    pose.pitch_deg = pitch_deg;
    pose.roll_deg = roll_deg;
    pose.yaw_deg = yaw_deg;
    pose.scale_mm = scale_mm;
    pose.width = width;
    pose.height = height;
    pose.u0 = u0;
    pose.v0 = v0;
    pose.target = target;
    pose.distance = distance;
    pose.view_axis = normalized(rotation * Vec3{0, 1, 0});
    pose.up = normalized(rotation * Vec3{0, 0, 1});
    pose.right = normalized(cross(-pose.view_axis, pose.up));
    return pose;
}

std::string_view stage_name(Stage s) {
    switch (s) {
        case Stage::Projected: return "projected";
        case Stage::Segmented: return "segmented";
        case Stage::Normalized: return "normalized";
    }
    return "projected";
}

Stage parse_stage(std::string_view name) {
    if (name == "projected") return Stage::Projected;
    if (name == "segmented") return Stage::Segmented;
    if (name == "normalized" || name == "final") return Stage::Normalized;
    throw ConfigError("unknown stage '" + std::string(name) + "'");
}

std::size_t DepthImage::foreground_count() const {
    return static_cast<std::size_t>(std::count_if(depth.begin(), depth.end(), [](double d) { return d > 0.0; }));
}

void DepthImage::validate() const {
    if (width <= 0 || height <= 0) throw Error("depth image size must be positive");
    if (depth.size() != static_cast<std::size_t>(width) * height) throw Error("depth buffer does not match image size");
    for (double d : depth)
        if (!std::isfinite(d) || d < 0.0) throw Error("depth values must be finite and non-negative");
}

namespace {

struct ScreenVertex {
    double x, y, z;
};

double edge_function(const ScreenVertex& a, const ScreenVertex& b, double px, double py) {
    return (b.x - a.x) * (py - a.y) - (b.y - a.y) * (px - a.x);
}

// Exactly one of (a, b) and (b, a) is owning, so shared edges are drawn once.
bool owns_edge(const ScreenVertex& a, const ScreenVertex& b) {
    const double dx = b.x - a.x, dy = b.y - a.y;
    return dy < 0.0 || (dy == 0.0 && dx > 0.0);
}

}  // namespace

DepthImage render_depth(const SurfaceMesh& m, const CameraPose& pose, double cull_theta_deg) {
    DepthImage image;
    image.width = pose.width;
    image.height = pose.height;
    image.pose = pose;
    image.depth.assign(static_cast<std::size_t>(pose.width) * pose.height, 0.0);
    if (m.empty()) return image;

    const SurfaceMesh visible = cull_by_normal(m, pose.view_dir(), cull_theta_deg);
    const double ppm = pose.pixels_per_mm();

    std::vector<ScreenVertex> screen(visible.vertices.size());
    for (std::size_t i = 0; i < visible.vertices.size(); ++i) {
        const Vec3 rel = visible.vertices[i] - pose.target;
        screen[i] = {pose.u0 + dot(rel, pose.right) * ppm, pose.v0 - dot(rel, pose.up) * ppm,
                     pose.distance - dot(rel, pose.view_axis)};
    }

    std::vector<double> zbuf(image.depth.size(), std::numeric_limits<double>::infinity());
    for (const auto& tri : visible.triangles) {
        ScreenVertex a = screen[tri[0]];
        ScreenVertex b = screen[tri[1]];
        ScreenVertex c = screen[tri[2]];
        double area = edge_function(a, b, c.x, c.y);
        if (area == 0.0) continue;
        if (area < 0.0) {
            std::swap(b, c);
            area = -area;
        }
        const int x_min = std::max(0, static_cast<int>(std::floor(std::min({a.x, b.x, c.x}) - 0.5)));
        const int x_max = std::min(pose.width - 1, static_cast<int>(std::ceil(std::max({a.x, b.x, c.x}) - 0.5)));
        const int y_min = std::max(0, static_cast<int>(std::floor(std::min({a.y, b.y, c.y}) - 0.5)));
        const int y_max = std::min(pose.height - 1, static_cast<int>(std::ceil(std::max({a.y, b.y, c.y}) - 0.5)));
        const bool own_bc = owns_edge(b, c), own_ca = owns_edge(c, a), own_ab = owns_edge(a, b);
        for (int py = y_min; py <= y_max; ++py) {
            const double cy = py + 0.5;
            for (int px = x_min; px <= x_max; ++px) {
                const double cx = px + 0.5;
                const double w0 = edge_function(b, c, cx, cy);
                const double w1 = edge_function(c, a, cx, cy);
                const double w2 = edge_function(a, b, cx, cy);
                if (w0 < 0.0 || w1 < 0.0 || w2 < 0.0) continue;
                if ((w0 == 0.0 && !own_bc) || (w1 == 0.0 && !own_ca) || (w2 == 0.0 && !own_ab)) continue;
                const double z = (w0 * a.z + w1 * b.z + w2 * c.z) / area;
                double& slot = zbuf[static_cast<std::size_t>(py) * pose.width + px];
                if (z < slot) slot = z;
            }
        }
    }
    for (std::size_t i = 0; i < zbuf.size(); ++i)
        if (std::isfinite(zbuf[i])) image.depth[i] = std::max(zbuf[i], std::numeric_limits<double>::min());
    return image;
}

std::vector<double> AngleGrid::values() const {
    if (count < 1) throw ConfigError("angle grid needs at least one value");
    std::vector<double> out(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) out[i] = count == 1 ? first : first + (last - first) * i / (count - 1);
    return out;
}

CameraPose frontal_pose(const SurfaceMesh& m, const SweepConfig& config, double pitch_deg, double roll_deg,
                        double yaw_deg) {
    const Vec3 centroid = m.centroid();
    const double radius = std::max(m.bounding_radius(centroid), 1e-6);
    return pose_camera(pitch_deg, roll_deg, yaw_deg, centroid, config.scale_mm, config.width, config.height,
                       config.u0, config.v0, 2.0 * radius);
}

std::vector<DepthImage> pose_sweep(const SurfaceMesh& m, const SweepConfig& config, int patient, int scan) {
    const auto pitches = config.pitch.values();
    const auto rolls = config.roll.values();
    const auto yaws = config.yaw.values();
    const std::size_t total = pitches.size() * rolls.size() * yaws.size();
    if (total == 0) throw ConfigError("empty pose sweep");
    if (m.empty()) throw Error("cannot sweep an empty mesh");

    const CameraPose base = frontal_pose(m, config);
    std::vector<DepthImage> images(total);
    parallel_for(total, config.threads, [&](std::size_t index) {
        const std::size_t iy = index % yaws.size();
        const std::size_t ir = (index / yaws.size()) % rolls.size();
        const std::size_t ip = index / (yaws.size() * rolls.size());
        const CameraPose pose = pose_camera(pitches[ip], rolls[ir], yaws[iy], base.target, config.scale_mm,
                                            config.width, config.height, config.u0, config.v0, base.distance);
        DepthImage img = render_depth(m, pose, config.cull_theta_deg);
        img.ids = {patient, scan, static_cast<int>(index)};
        images[index] = std::move(img);
    });
    return images;
}

}  // namespace ctface
