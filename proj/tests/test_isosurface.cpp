#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "ctface/mesh.hpp"
#include "test_support.hpp"

using namespace ctface;

namespace {

Volume sphere_volume(int n, double radius, const Vec3& center, Vec3 spacing = {1, 1, 1}) {
    std::vector<float> vox;
    vox.reserve(static_cast<std::size_t>(n) * n * n);
    for (int k = 0; k < n; ++k)
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) {
                const Vec3 p{i * spacing.x, j * spacing.y, k * spacing.z};
                vox.push_back(norm(p - center) <= radius ? 0.0f : -1000.0f);
            }
    return Volume({n, n, n}, spacing, {}, std::move(vox));
}

void check_mesh_invariants(const SurfaceMesh& m) {
    REQUIRE(m.normals.size() == m.triangles.size());
    for (std::size_t t = 0; t < m.triangles.size(); ++t) {
        const auto& tri = m.triangles[t];
        for (int idx : tri) {
            REQUIRE(idx >= 0);
            REQUIRE(static_cast<std::size_t>(idx) < m.vertices.size());
        }
        REQUIRE(std::abs(norm(m.normals[t]) - 1.0) < 1e-6);
        const Vec3 c = cross(m.vertices[tri[1]] - m.vertices[tri[0]], m.vertices[tri[2]] - m.vertices[tri[0]]);
        REQUIRE(norm(c) > 1e-12);
    }
}

}  // namespace

TEST_CASE("analytic sphere: radius within a voxel, watertight, outward normals") {
    const Vec3 center{24.3, 23.7, 24.1};
    const Volume v = sphere_volume(48, 20.0, center);
    const SurfaceMesh m = extract_isosurface(v, -350.0);
    REQUIRE(!m.empty());
    check_mesh_invariants(m);
    double worst = 0.0;
    for (const Vec3& p : m.vertices) worst = std::max(worst, std::abs(norm(p - center) - 20.0));
    CHECK(worst <= 1.0);
    CHECK(is_watertight(m));
    std::size_t outward = 0;
    for (std::size_t t = 0; t < m.triangles.size(); ++t) {
        const auto& tri = m.triangles[t];
        const Vec3 mid = (m.vertices[tri[0]] + m.vertices[tri[1]] + m.vertices[tri[2]]) * (1.0 / 3.0);
        if (dot(m.normals[t], mid - center) > 0.0) ++outward;
    }
    CHECK(outward == m.triangles.size());
}

TEST_CASE("vertices lie on the trilinear level set") {
    Rng rng(17);
    const Volume v = test::random_volume(rng, {9, 8, 7}, {1.0, 1.5, 2.0});
    const double gamma = 12.5;  // never equal to an integer voxel value
    const SurfaceMesh m = extract_isosurface(v, gamma);
    REQUIRE(!m.empty());
    for (const Vec3& p : m.vertices) CHECK(v.sample(v.voxel_coord(p)) == doctest::Approx(gamma).epsilon(1e-6));
}

TEST_CASE("constant volume and degenerate inputs give an empty mesh") {
    const Volume c = Volume::filled({6, 6, 6}, {1, 1, 1}, {}, -200.0f);
    for (double g : {-1000.0, -200.0, 0.0}) CHECK(extract_isosurface(c, g).empty());
    const Volume thin = Volume::filled({1, 6, 6}, {1, 1, 1}, {}, 0.0f);
    CHECK(extract_isosurface(thin, -350.0).empty());
    CHECK_THROWS(extract_isosurface(c, std::nan("")));
}

TEST_CASE("half-space split at z = 10.5 mm gives a plane") {
    std::vector<float> vox;
    const Index3 dims{8, 8, 20};
    for (int k = 0; k < dims.z; ++k)
        for (int j = 0; j < dims.y; ++j)
            for (int i = 0; i < dims.x; ++i) vox.push_back(k <= 10 ? 0.0f : -1000.0f);
    const Volume v(dims, {1, 1, 1}, {}, vox);
    const SurfaceMesh m = extract_isosurface(v, -350.0);
    REQUIRE(!m.empty());
    check_mesh_invariants(m);
    for (const Vec3& p : m.vertices) {
        CHECK(p.z >= 9.5);
        CHECK(p.z <= 11.5);
    }
    for (const Vec3& n : m.normals) CHECK(std::abs(std::abs(n.z) - 1.0) < 1e-9);
    for (const Vec3& n : m.normals) CHECK(n.z > 0.0);  // tissue below, air above
}

TEST_CASE("random closed solids are watertight") {
    Rng rng(99);
    for (int trial = 0; trial < 30; ++trial) {
        const Index3 dims{3 + int(rng.index(8)), 3 + int(rng.index(8)), 3 + int(rng.index(8))};
        std::vector<float> vox(static_cast<std::size_t>(dims.x) * dims.y * dims.z, -1000.0f);
        for (int k = 1; k + 1 < dims.z; ++k)
            for (int j = 1; j + 1 < dims.y; ++j)
                for (int i = 1; i + 1 < dims.x; ++i)
                    vox[(std::size_t(k) * dims.y + j) * dims.x + i] = static_cast<float>(rng.uniform(-1000, 1000));
        const Volume v(dims, {rng.uniform(0.5, 2), rng.uniform(0.5, 2), rng.uniform(0.5, 2)}, {}, vox);
        const SurfaceMesh m = extract_isosurface(v, 0.5);
        check_mesh_invariants(m);
        CHECK(is_watertight(m));
    }
}

TEST_CASE("affine rescaling of HU and gamma leaves the vertex set unchanged") {
    const Volume v = sphere_volume(24, 8.0, {11.6, 12.2, 11.9});
    std::vector<float> scaled(v.voxels().begin(), v.voxels().end());
    for (float& x : scaled) x = 0.5f * x + 100.0f;
    const Volume w(v.dims(), v.spacing(), v.origin(), scaled);
    const SurfaceMesh a = extract_isosurface(v, -350.0);
    const SurfaceMesh b = extract_isosurface(w, 0.5 * -350.0 + 100.0);
    REQUIRE(a.vertices.size() == b.vertices.size());
    for (std::size_t i = 0; i < a.vertices.size(); ++i) CHECK(norm(a.vertices[i] - b.vertices[i]) < 1e-6);
    CHECK(a.triangles == b.triangles);
}

TEST_CASE("anisotropic spacing is applied to vertices") {
    const Vec3 center{20.0, 20.0, 20.0};
    const Volume v = sphere_volume(21, 12.0, center, {2.0, 2.0, 2.0});
    const SurfaceMesh m = extract_isosurface(v, -350.0);
    for (const Vec3& p : m.vertices) CHECK(std::abs(norm(p - center) - 12.0) <= 2.0);
}

TEST_CASE("cull by normal") {
    const Volume v = sphere_volume(40, 15.0, {19.5, 19.5, 19.5});
    const SurfaceMesh m = extract_isosurface(v, -350.0);
    CHECK(cull_by_normal(m, {0, -1, 0}, 180.0).triangles.size() == m.triangles.size());
    const Vec3 view{0, -1, 0};  // camera at +y looking toward -y
    const SurfaceMesh kept = cull_by_normal(m, view, 60.0);
    CHECK(!kept.empty());
    CHECK(kept.triangles.size() < m.triangles.size());
    for (const Vec3& n : kept.normals) CHECK(dot(n, -view) >= std::cos(degrees_to_radians(60.0)) - 1e-12);
    // scale of view_dir does not matter; zero is an error
    CHECK(cull_by_normal(m, view * 5.0, 60.0).triangles.size() == kept.triangles.size());
    CHECK_THROWS(cull_by_normal(m, {0, 0, 0}, 60.0));
    CHECK_THROWS(cull_by_normal(m, view, 0.0));
    CHECK_THROWS(cull_by_normal(m, view, 181.0));

    SurfaceMesh plane;
    plane.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 0, 1}};
    plane.triangles = {{0, 2, 1}};
    plane.normals = {{0, 1, 0}};
    CHECK(cull_by_normal(plane, {0, -1, 0}, 60.0).triangles.size() == 1);
    const double a = degrees_to_radians(75.0);
    CHECK(cull_by_normal(plane, -Vec3{0, std::cos(a), std::sin(a)}, 60.0).empty());
}

TEST_CASE("watertight check detects open meshes") {
    SurfaceMesh tri;
    tri.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
    tri.triangles = {{0, 1, 2}};
    tri.normals = {{0, 0, 1}};
    CHECK(!is_watertight(tri));
    SurfaceMesh tet;
    tet.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    tet.triangles = {{0, 2, 1}, {0, 1, 3}, {0, 3, 2}, {1, 2, 3}};
    tet.normals.assign(4, {0, 0, 1});
    CHECK(is_watertight(tet));
}
