#include "ctface/mesh.hpp"

#include <cmath>
#include <cstdint>
#include <map>
#include <unordered_map>

#include "ctface/error.hpp"

namespace ctface {

Vec3 SurfaceMesh::centroid() const {
    std::vector<char> used(vertices.size(), 0);
    for (const auto& t : triangles)
        for (int i : t) used[static_cast<std::size_t>(i)] = 1;
    Vec3 sum;
    std::size_t count = 0;
    for (std::size_t i = 0; i < vertices.size(); ++i)
        if (used[i]) {
            sum += vertices[i];
            ++count;
        }
    return count ? sum / static_cast<double>(count) : Vec3{};
}

double SurfaceMesh::bounding_radius(const Vec3& center) const {
    double r = 0.0;
    for (const auto& t : triangles)
        for (int i : t) r = std::max(r, norm(vertices[static_cast<std::size_t>(i)] - center));
    return r;
}

namespace {

// Cube corner c sits at (c & 1, (c >> 1) & 1, (c >> 2) & 1).
Vec3 corner_position(int c) { return {double(c & 1), double((c >> 1) & 1), double((c >> 2) & 1)}; }

struct CubeEdge {
    int c0;    // corner with the lower coordinate along `axis`
    int c1;
    int axis;
};

struct CubeFace {
    std::array<int, 4> corners;  // cyclic
    std::array<int, 4> edges;    // edges[k] joins corners[k] and corners[k + 1]
    Vec3 normal;                 // outward
};

struct CubeTopology {
    std::array<CubeEdge, 12> edges{};
    std::array<CubeFace, 6> faces{};

    CubeTopology() {
        int e = 0;
        for (int c = 0; c < 8; ++c)
            for (int a = 0; a < 3; ++a)
                if (!(c & (1 << a))) edges[e++] = {c, c | (1 << a), a};

        auto edge_between = [&](int p, int q) {
            for (int i = 0; i < 12; ++i)
                if ((edges[i].c0 == p && edges[i].c1 == q) || (edges[i].c0 == q && edges[i].c1 == p)) return i;
            return -1;
        };

        int f = 0;
        for (int a = 0; a < 3; ++a) {
            const int b = (a + 1) % 3, c = (a + 2) % 3;
            for (int side = 0; side < 2; ++side) {
                CubeFace face;
                const int base = side << a;
                face.corners = {base, base | (1 << b), base | (1 << b) | (1 << c), base | (1 << c)};
                for (int k = 0; k < 4; ++k) face.edges[k] = edge_between(face.corners[k], face.corners[(k + 1) % 4]);
                face.normal = Vec3{};
                face.normal[a] = side ? 1.0 : -1.0;
                faces[f++] = face;
            }
        }
    }
};

const CubeTopology& topology() {
    static const CubeTopology topo;
    return topo;
}

using TriangleList = std::vector<std::array<std::int8_t, 3>>;

Vec3 edge_midpoint(const CubeEdge& e) { return (corner_position(e.c0) + corner_position(e.c1)) * 0.5; }

TriangleList build_case(int mask) {
    const CubeTopology& topo = topology();
    auto inside = [mask](int c) { return (mask >> c) & 1; };

    std::array<int, 12> next;
    next.fill(-1);
    std::array<int, 12> incoming{};

    auto add_segment = [&](int ea, int eb, int tissue_corner, const Vec3& face_normal) {
        // Orient so the tissue corner lies to the left when the face is seen from outside.
        const Vec3 a = edge_midpoint(topo.edges[ea]);
        const Vec3 b = edge_midpoint(topo.edges[eb]);
        const Vec3 c = corner_position(tissue_corner);
        if (dot(cross(b - a, c - a), face_normal) < 0.0) std::swap(ea, eb);
        if (next[ea] != -1) throw Error("marching cubes table: edge has two successors");
        next[ea] = eb;
        ++incoming[eb];
    };

    for (const CubeFace& face : topo.faces) {
        int crossings = 0;
        int tissue = -1;
        for (int k = 0; k < 4; ++k) {
            if (inside(face.corners[k]) != inside(face.corners[(k + 1) % 4])) ++crossings;
            if (inside(face.corners[k])) tissue = face.corners[k];
        }
        if (crossings == 2) {
            int ends[2], n = 0;
            for (int k = 0; k < 4; ++k)
                if (inside(face.corners[k]) != inside(face.corners[(k + 1) % 4])) ends[n++] = face.edges[k];
            add_segment(ends[0], ends[1], tissue, face.normal);
        } else if (crossings == 4) {
            for (int k = 0; k < 4; ++k)
                if (inside(face.corners[k])) add_segment(face.edges[(k + 3) % 4], face.edges[k], face.corners[k], face.normal);
        }
    }

    TriangleList tris;
    std::array<bool, 12> visited{};
    for (int start = 0; start < 12; ++start) {
        if (next[start] == -1 || visited[start]) continue;
        if (incoming[start] != 1) throw Error("marching cubes table: inconsistent loop");
        std::vector<int> loop;
        for (int e = start; !visited[e]; e = next[e]) {
            visited[e] = true;
            loop.push_back(e);
            if (next[e] == -1) throw Error("marching cubes table: open loop");
        }
        // Loop winding faces the tissue; the fan is emitted reversed so normals face the air.
        for (std::size_t i = 1; i + 1 < loop.size(); ++i)
            tris.push_back({static_cast<std::int8_t>(loop[0]), static_cast<std::int8_t>(loop[i + 1]),
                            static_cast<std::int8_t>(loop[i])});
    }
    return tris;
}

const std::array<TriangleList, 256>& case_table() {
    static const std::array<TriangleList, 256> table = [] {
        std::array<TriangleList, 256> t;
        for (int mask = 0; mask < 256; ++mask) t[mask] = build_case(mask);
        return t;
    }();
    return table;
}

}  // namespace

SurfaceMesh extract_isosurface(const Volume& v, double gamma) {
    if (!std::isfinite(gamma)) throw Error("iso-surface threshold must be finite");
    SurfaceMesh mesh;
    const Index3 d = v.dims();
    if (d.x < 2 || d.y < 2 || d.z < 2) return mesh;

    const CubeTopology& topo = topology();
    const auto& table = case_table();
    std::unordered_map<std::uint64_t, int> vertex_of_edge;
    std::array<int, 8> offset_x{}, offset_y{}, offset_z{};
    for (int c = 0; c < 8; ++c) {
        offset_x[c] = c & 1;
        offset_y[c] = (c >> 1) & 1;
        offset_z[c] = (c >> 2) & 1;
    }

    auto vertex_for = [&](int i, int j, int k, int edge) {
        const CubeEdge& e = topo.edges[edge];
        const int i0 = i + offset_x[e.c0], j0 = j + offset_y[e.c0], k0 = k + offset_z[e.c0];
        const std::uint64_t key = static_cast<std::uint64_t>(v.linear_index(i0, j0, k0)) * 3 + e.axis;
        const auto [it, added] = vertex_of_edge.try_emplace(key, static_cast<int>(mesh.vertices.size()));
        if (added) {
            const double f0 = v.at(i0, j0, k0);
            const double f1 = v.at(i + offset_x[e.c1], j + offset_y[e.c1], k + offset_z[e.c1]);
            const double t = (gamma - f0) / (f1 - f0);
            Vec3 p{double(i0), double(j0), double(k0)};
            p[e.axis] += t;
            mesh.vertices.push_back(v.physical(p));
        }
        return it->second;
    };

    for (int k = 0; k + 1 < d.z; ++k)
        for (int j = 0; j + 1 < d.y; ++j)
            for (int i = 0; i + 1 < d.x; ++i) {
                int mask = 0;
                for (int c = 0; c < 8; ++c)
                    if (v.at(i + offset_x[c], j + offset_y[c], k + offset_z[c]) >= gamma) mask |= 1 << c;
                if (mask == 0 || mask == 255) continue;
                for (const auto& tri : table[mask]) {
                    const std::array<int, 3> ids{vertex_for(i, j, k, tri[0]), vertex_for(i, j, k, tri[1]),
                                                 vertex_for(i, j, k, tri[2])};
                    const Vec3& a = mesh.vertices[ids[0]];
                    const Vec3 n = cross(mesh.vertices[ids[1]] - a, mesh.vertices[ids[2]] - a);
                    const double len = norm(n);
                    if (!(len > 1e-12)) continue;
                    mesh.triangles.push_back(ids);
                    mesh.normals.push_back(n / len);
                }
            }
    return mesh;
}

SurfaceMesh cull_by_normal(const SurfaceMesh& m, const Vec3& view_dir, double theta_deg) {
    if (!(theta_deg > 0.0 && theta_deg <= 180.0)) throw Error("culling angle must lie in (0, 180]");
    const double len = norm(view_dir);
    if (!(len > 0.0)) throw Error("view direction must be non-zero");
    const Vec3 toward_camera = -view_dir / len;
    const double cos_limit = std::cos(degrees_to_radians(theta_deg));

    SurfaceMesh out;
    out.vertices = m.vertices;
    for (std::size_t t = 0; t < m.triangles.size(); ++t)
        if (theta_deg >= 180.0 || dot(m.normals[t], toward_camera) >= cos_limit - 1e-12) {
            out.triangles.push_back(m.triangles[t]);
            out.normals.push_back(m.normals[t]);
        }
    return out;
}

bool is_watertight(const SurfaceMesh& m) {
    if (m.triangles.empty()) return false;
    std::map<std::pair<int, int>, int> uses;
    for (const auto& t : m.triangles)
        for (int e = 0; e < 3; ++e) {
            const int a = t[e], b = t[(e + 1) % 3];
            ++uses[{std::min(a, b), std::max(a, b)}];
        }
    for (const auto& [edge, count] : uses)
        if (count != 2) return false;
    return true;
}

}  // namespace ctface
