#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "ctface/landmark_set.hpp"
#include "ctface/volume.hpp"

namespace ctface {

inline constexpr float kAirHu = -1000.0f;
inline constexpr float kTissueHu = 0.0f;

/// Identity parameters of a synthetic head, in mm.
///
/// The head is an ellipsoid whose face points along +y with +z up; the
/// patient's left is -x. The nose, eye sockets and mouth ridge are smooth
/// height offsets on the frontal surface.
struct PhantomSpec {
    Vec3 head_semi_axes{75.0, 95.0, 105.0};
    double nose_height = 20.0;
    double nose_width = 9.0;
    double eye_socket_depth = 8.0;
    double mouth_offset = 28.0;  // vertical distance from nose tip down to the mouth ridge
    double noise_std = 20.0;     // HU
    std::uint64_t seed = 0;

    /// Throws Error unless every geometric parameter is positive and the semi-axes lie in [60, 120].
    void validate() const;

    /// Parameter vector (a_x, a_y, a_z, nose height, nose width, socket depth, mouth offset).
    std::array<double, 7> identity_vector() const;
};

/// Signed distance estimate (mm, negative inside) of the noiseless head surface,
/// as a function of the position relative to the head centre.
double phantom_signed_distance(const PhantomSpec& spec, const Vec3& relative_mm);

struct PhantomScan {
    Volume volume;
    LandmarkSet landmarks;  // voxel coordinates of `volume`
    Vec3 head_center;       // physical mm
};

/// Tissue (0 HU) head against air (-1000 HU) with partial-volume edges and seeded Gaussian noise.
PhantomScan generate_phantom(const PhantomSpec& spec, const Vec3& spacing);

struct CohortEntry {
    int subject = 0;
    int scan = 0;
    PhantomSpec spec;  // identity of `subject`, noise seed of this scan
    Vec3 spacing;
};

struct Cohort {
    std::vector<CohortEntry> entries;  // ordered by (subject, scan)
    double separation_floor = 0.0;
};

/// Minimum Euclidean distance (mm) between identity vectors of distinct subjects.
inline constexpr double kIdentitySeparationFloor = 8.0;

/// n distinct identities separated by kIdentitySeparationFloor; per scan a fresh
/// noise seed, in-plane spacing in [1, 1.5] mm and slice spacing in [1, 4] mm.
Cohort generate_cohort(int n_subjects, int scans_per_subject, std::uint64_t seed, double noise_std = 20.0);

/// Writes volumes/sNNN_cM.ctv, matching .lmk files, identities.txt and
/// manifest.txt (`subject scan path sx sy sz seed`, paths relative to `dir`).
/// Returns the manifest path.
std::filesystem::path write_cohort(const Cohort& cohort, const std::filesystem::path& dir);

}  // namespace ctface
