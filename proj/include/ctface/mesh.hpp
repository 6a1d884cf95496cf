#pragma once

#include <array>
#include <vector>

#include "ctface/geometry.hpp"
#include "ctface/volume.hpp"

namespace ctface {

/// Indexed triangle mesh in physical (mm) coordinates.
///
/// normals[t] is the unit outward normal of triangles[t], pointing from the
/// tissue side toward the air side of the iso-surface.
struct SurfaceMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 3>> triangles;
    std::vector<Vec3> normals;

    bool empty() const { return triangles.empty(); }

    /// Mean of the vertices referenced by at least one triangle.
    Vec3 centroid() const;

    /// Largest distance from `center` to a referenced vertex.
    double bounding_radius(const Vec3& center) const;
};

/// Marching cubes over the level set {value = gamma}.
///
/// Corners with value >= gamma count as tissue. Faces with two diagonal
/// tissue corners are always split so the tissue corners stay apart, and
/// both cells sharing a face see the same split, so closed solids give
/// watertight meshes. Vertices shared between cells are welded.
SurfaceMesh extract_isosurface(const Volume& v, double gamma);

/// Keeps triangles whose outward normal lies within theta_deg of -view_dir.
SurfaceMesh cull_by_normal(const SurfaceMesh& m, const Vec3& view_dir, double theta_deg);

/// True when every undirected edge is used by exactly two triangles.
bool is_watertight(const SurfaceMesh& m);

}  // namespace ctface
