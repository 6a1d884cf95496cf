#include "ctface/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>

#include "ctface/error.hpp"
#include "ctface/landmarks.hpp"
#include "ctface/rng.hpp"
#include "ctface/text.hpp"

namespace ctface {

void PhantomSpec::validate() const {
    for (int a = 0; a < 3; ++a)
        if (!(head_semi_axes[a] >= 60.0 && head_semi_axes[a] <= 120.0))
            throw Error("head semi-axes must lie in [60, 120] mm");
    if (!(nose_height > 0.0) || !(nose_width > 0.0) || !(eye_socket_depth > 0.0) || !(mouth_offset > 0.0))
        throw Error("phantom feature sizes must be positive");
    if (!(noise_std >= 0.0) || !std::isfinite(noise_std)) throw Error("phantom noise std must be >= 0");
}

std::array<double, 7> PhantomSpec::identity_vector() const {
    return {head_semi_axes.x, head_semi_axes.y, head_semi_axes.z, nose_height, nose_width, eye_socket_depth,
            mouth_offset};
}

namespace {

constexpr double kSocketSigma = 10.0;
constexpr double kMouthHeight = 4.0;
constexpr double kMouthSigmaZ = 4.0;
constexpr double kMouthSigmaX = 20.0;

struct FaceLayout {
    double eye_x, eye_z, nose_z, mouth_z, mouth_corner_x;

    explicit FaceLayout(const PhantomSpec& s)
        : eye_x(0.6 * s.head_semi_axes.x),
          eye_z(0.12 * s.head_semi_axes.z),
          nose_z(eye_z - 0.28 * s.head_semi_axes.z),
          mouth_z(nose_z - s.mouth_offset),
          mouth_corner_x(0.30 * s.head_semi_axes.x) {}
};

double smoothstep(double e0, double e1, double x) {
    const double t = std::clamp((x - e0) / (e1 - e0), 0.0, 1.0);
    return t * t * (3.0 - 2.0 * t);
}

double ellipsoid_distance(const Vec3& a, const Vec3& q) {
    const Vec3 n{q.x / a.x, q.y / a.y, q.z / a.z};
    const Vec3 g{q.x / (a.x * a.x), q.y / (a.y * a.y), q.z / (a.z * a.z)};
    const double k = norm(n);
    const double gl = norm(g);
    if (gl < 1e-12) return -std::min({a.x, a.y, a.z});
    return (k - 1.0) * k / gl;
}

// Outward offset of the frontal surface (positive = tissue added).
double feature_offset(const PhantomSpec& s, const FaceLayout& f, const Vec3& q) {
    const double front = smoothstep(0.2, 0.6, q.y / s.head_semi_axes.y);
    if (front <= 0.0) return 0.0;

    double profile;
    if (q.z <= f.nose_z) {
        const double dz = q.z - f.nose_z;
        profile = std::exp(-dz * dz / (2.0 * 5.0 * 5.0));
    } else {
        const double t = (q.z - f.nose_z) / (f.eye_z - f.nose_z);
        if (t <= 1.0) {
            profile = 1.0 - 0.65 * t;
        } else {
            const double dz = q.z - f.eye_z;
            profile = 0.35 * std::exp(-dz * dz / (2.0 * 8.0 * 8.0));
        }
    }
    const double nose = s.nose_height * profile * std::exp(-q.x * q.x / (2.0 * s.nose_width * s.nose_width));

    auto socket = [&](double cx) {
        const double dx = q.x - cx, dz = q.z - f.eye_z;
        return s.eye_socket_depth * std::exp(-(dx * dx + dz * dz) / (2.0 * kSocketSigma * kSocketSigma));
    };
    const double dzm = q.z - f.mouth_z;
    const double mouth = kMouthHeight * std::exp(-dzm * dzm / (2.0 * kMouthSigmaZ * kMouthSigmaZ)) *
                         std::exp(-q.x * q.x / (2.0 * kMouthSigmaX * kMouthSigmaX));
    return front * (nose + mouth - socket(f.eye_x) - socket(-f.eye_x));
}

double implicit_field(const PhantomSpec& s, const FaceLayout& f, const Vec3& q) {
    return ellipsoid_distance(s.head_semi_axes, q) - feature_offset(s, f, q);
}

Vec3 field_gradient(const PhantomSpec& s, const FaceLayout& f, const Vec3& q) {
    constexpr double h = 0.25;
    Vec3 g;
    for (int a = 0; a < 3; ++a) {
        Vec3 lo = q, hi = q;
        lo[a] -= h;
        hi[a] += h;
        g[a] = (implicit_field(s, f, hi) - implicit_field(s, f, lo)) / (2.0 * h);
    }
    return g;
}

// Surface point on the ray x = q.x, z = q.z travelling toward +y from the head centre.
Vec3 frontal_surface_point(const PhantomSpec& s, const FaceLayout& f, double x, double z) {
    double lo = 0.0;
    double hi = s.head_semi_axes.y + s.nose_height + 40.0;
    if (implicit_field(s, f, {x, lo, z}) >= 0.0 || implicit_field(s, f, {x, hi, z}) <= 0.0)
        throw Error("phantom landmark ray does not cross the surface");
    for (int it = 0; it < 100; ++it) {
        const double mid = 0.5 * (lo + hi);
        (implicit_field(s, f, {x, mid, z}) < 0.0 ? lo : hi) = mid;
    }
    return {x, 0.5 * (lo + hi), z};
}

}  // namespace

double phantom_signed_distance(const PhantomSpec& spec, const Vec3& q) {
    const FaceLayout f(spec);
    const double value = implicit_field(spec, f, q);
    const double g = norm(field_gradient(spec, f, q));
    return g > 1e-9 ? value / g : value;
}

PhantomScan generate_phantom(const PhantomSpec& spec, const Vec3& spacing) {
    spec.validate();
    for (int a = 0; a < 3; ++a)
        if (!(spacing[a] > 0.0)) throw Error("phantom spacing must be positive");

    const Vec3& ax = spec.head_semi_axes;
    constexpr double pad = 8.0;
    const Vec3 lo{-(ax.x + pad), -(ax.y + pad), -(ax.z + pad)};
    const Vec3 hi{ax.x + pad, ax.y + spec.nose_height + pad + 12.0, ax.z + pad};
    Index3 dims;
    for (int a = 0; a < 3; ++a) dims[a] = static_cast<int>(std::ceil((hi[a] - lo[a]) / spacing[a])) + 1;
    const Vec3 center = -lo;  // volume origin sits at the physical origin

    const FaceLayout layout(spec);
    const double max_spacing = std::max({spacing.x, spacing.y, spacing.z});
    const double feature_reach = spec.nose_height + kMouthHeight + spec.eye_socket_depth;
    // First-order distance estimate is steep near the nose; a wide band keeps every partial-volume voxel exact.
    const double band = 3.0 * max_spacing;

    Rng rng(spec.seed);
    std::vector<float> voxels(static_cast<std::size_t>(dims.x) * dims.y * dims.z);
    std::size_t idx = 0;
    for (int k = 0; k < dims.z; ++k)
        for (int j = 0; j < dims.y; ++j)
            for (int i = 0; i < dims.x; ++i, ++idx) {
                const Vec3 q = Vec3{i * spacing.x, j * spacing.y, k * spacing.z} - center;
                const double base = ellipsoid_distance(ax, q);
                double fraction;
                if (base > feature_reach + band) {
                    fraction = 0.0;
                } else if (base < -(feature_reach + band)) {
                    fraction = 1.0;
                } else {
                    const double field = base - feature_offset(spec, layout, q);
                    if (field > 4.0 * band) {
                        fraction = 0.0;
                    } else if (field < -4.0 * band) {
                        fraction = 1.0;
                    } else {
                        const Vec3 g = field_gradient(spec, layout, q);
                        const double gl = norm(g);
                        const double dist = gl > 1e-9 ? field / gl : field;
                        const Vec3 n = gl > 1e-9 ? g / gl : Vec3{0, 1, 0};
                        const double width = norm(hadamard(n, spacing));
                        fraction = std::clamp(0.5 - dist / width, 0.0, 1.0);
                    }
                }
                double value = kAirHu + (kTissueHu - kAirHu) * fraction;
                if (spec.noise_std > 0.0) value += spec.noise_std * rng.normal();
                voxels[idx] = static_cast<float>(value);
            }

    Volume volume(dims, spacing, Vec3{}, std::move(voxels));
    std::array<Vec3, kLandmarkCount> points = {
        frontal_surface_point(spec, layout, -layout.eye_x, layout.eye_z),
        frontal_surface_point(spec, layout, layout.eye_x, layout.eye_z),
        frontal_surface_point(spec, layout, 0.0, layout.nose_z),
        frontal_surface_point(spec, layout, -layout.mouth_corner_x, layout.mouth_z),
    };
    for (Vec3& p : points) p = volume.voxel_coord(p + center);
    return {std::move(volume), LandmarkSet(points), center};
}

Cohort generate_cohort(int n_subjects, int scans_per_subject, std::uint64_t seed, double noise_std) {
    if (n_subjects < 2) throw Error("a cohort needs at least 2 subjects");
    if (scans_per_subject < 1) throw Error("each subject needs at least one scan");

    Rng identity_rng(derive_seed(seed, 0x1D));
    std::vector<PhantomSpec> identities;
    int attempts = 0;
    while (static_cast<int>(identities.size()) < n_subjects) {
        if (++attempts > 100000) throw Error("could not place identities above the separation floor");
        PhantomSpec s;
        // Round frontal outline: the in-plane roll sweep then leaves the silhouette nearly unchanged.
        const double width = identity_rng.uniform(62, 118);
        s.head_semi_axes = {width, identity_rng.uniform(85, 105), width};
        s.nose_height = identity_rng.uniform(10, 40);
        s.nose_width = identity_rng.uniform(6, 20);
        s.eye_socket_depth = identity_rng.uniform(4, 14);
        s.mouth_offset = identity_rng.uniform(22, 36);
        s.noise_std = noise_std;
        const auto v = s.identity_vector();
        bool separated = true;
        for (const PhantomSpec& other : identities) {
            const auto w = other.identity_vector();
            double d2 = 0.0;
            for (std::size_t i = 0; i < v.size(); ++i) d2 += (v[i] - w[i]) * (v[i] - w[i]);
            if (std::sqrt(d2) < kIdentitySeparationFloor) {
                separated = false;
                break;
            }
        }
        if (separated) identities.push_back(s);
    }

    Cohort cohort;
    cohort.separation_floor = kIdentitySeparationFloor;
    for (int subject = 0; subject < n_subjects; ++subject)
        for (int scan = 0; scan < scans_per_subject; ++scan) {
            const std::uint64_t scan_seed =
                derive_seed(seed, 1000ULL + static_cast<std::uint64_t>(subject) * 1000ULL + static_cast<std::uint64_t>(scan));
            Rng rng(scan_seed);
            CohortEntry e;
            e.subject = subject;
            e.scan = scan;
            e.spec = identities[subject];
            e.spec.seed = scan_seed;
            const double in_plane = rng.uniform(1.0, 1.5);
            e.spacing = {in_plane, in_plane, rng.uniform(1.0, 4.0)};
            cohort.entries.push_back(e);
        }
    return cohort;
}

std::filesystem::path write_cohort(const Cohort& cohort, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir / "volumes");
    const auto manifest_path = dir / "manifest.txt";
    std::ofstream manifest(manifest_path, std::ios::trunc);
    std::ofstream identities(dir / "identities.txt", std::ios::trunc);
    if (!manifest || !identities) throw IoError("cannot write cohort manifest in " + dir.string());
    identities << "# subject ax ay az nose_height nose_width eye_socket_depth mouth_offset\n";
    int last_subject = -1;
    for (const CohortEntry& e : cohort.entries) {
        char name[64];
        std::snprintf(name, sizeof(name), "s%03d_c%d", e.subject, e.scan);
        const std::filesystem::path rel = std::filesystem::path("volumes") / (std::string(name) + ".ctv");
        const PhantomScan scan = generate_phantom(e.spec, e.spacing);
        save_volume(scan.volume, dir / rel);
        save_landmarks(scan.landmarks, (dir / rel).replace_extension(".lmk"));
        manifest << e.subject << ' ' << e.scan << ' ' << rel.generic_string() << ' ' << format_real(e.spacing.x) << ' '
                 << format_real(e.spacing.y) << ' ' << format_real(e.spacing.z) << ' ' << e.spec.seed << '\n';
        if (e.subject != last_subject) {
            identities << e.subject;
            for (double v : e.spec.identity_vector()) identities << ' ' << format_real(v);
            identities << '\n';
            last_subject = e.subject;
        }
    }
    if (!manifest) throw IoError("failed writing " + manifest_path.string());
    return manifest_path;
}

}  // namespace ctface
