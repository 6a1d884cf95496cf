#include "ctface/volume.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <string>

#include "ctface/error.hpp"
#include "ctface/text.hpp"

namespace ctface {

Volume::Volume(Index3 dims, Vec3 spacing, Vec3 origin, std::vector<float> voxels)
    : dims_(dims), spacing_(spacing), origin_(origin), voxels_(std::move(voxels)) {
    if (dims_.x < 1 || dims_.y < 1 || dims_.z < 1) throw Error("volume dims must be >= 1");
    for (int a = 0; a < 3; ++a) {
        if (!(spacing_[a] > 0.0) || !std::isfinite(spacing_[a])) throw Error("volume spacing must be positive");
        if (!std::isfinite(origin_[a])) throw Error("volume origin must be finite");
    }
    const std::size_t expected =
        static_cast<std::size_t>(dims_.x) * static_cast<std::size_t>(dims_.y) * static_cast<std::size_t>(dims_.z);
    if (voxels_.size() != expected)
        throw Error("volume payload has " + std::to_string(voxels_.size()) + " voxels, dims require " +
                    std::to_string(expected));
    for (float value : voxels_)
        if (!std::isfinite(value)) throw Error("volume contains a non-finite voxel");
}

Volume Volume::filled(Index3 dims, Vec3 spacing, Vec3 origin, float value) {
    const std::size_t n = static_cast<std::size_t>(std::max(dims.x, 0)) * static_cast<std::size_t>(std::max(dims.y, 0)) *
                          static_cast<std::size_t>(std::max(dims.z, 0));
    return Volume(dims, spacing, origin, std::vector<float>(n, value));
}

Vec3 Volume::voxel_coord(const Vec3& physical_mm) const {
    const Vec3 rel = physical_mm - origin_;
    return {rel.x / spacing_.x, rel.y / spacing_.y, rel.z / spacing_.z};
}

double Volume::sample(const Vec3& c) const {
    std::array<int, 3> lo{};
    std::array<double, 3> frac{};
    for (int a = 0; a < 3; ++a) {
        const double hi = static_cast<double>(dims_[a] - 1);
        const double p = std::clamp(c[a], 0.0, hi);
        int base = static_cast<int>(std::floor(p));
        if (base >= dims_[a] - 1) base = std::max(dims_[a] - 2, 0);
        lo[a] = base;
        frac[a] = dims_[a] > 1 ? p - base : 0.0;
    }
    const int x1 = std::min(lo[0] + 1, dims_.x - 1);
    const int y1 = std::min(lo[1] + 1, dims_.y - 1);
    const int z1 = std::min(lo[2] + 1, dims_.z - 1);
    const double fx = frac[0], fy = frac[1], fz = frac[2];
    const double c00 = at(lo[0], lo[1], lo[2]) * (1 - fx) + at(x1, lo[1], lo[2]) * fx;
    const double c10 = at(lo[0], y1, lo[2]) * (1 - fx) + at(x1, y1, lo[2]) * fx;
    const double c01 = at(lo[0], lo[1], z1) * (1 - fx) + at(x1, lo[1], z1) * fx;
    const double c11 = at(lo[0], y1, z1) * (1 - fx) + at(x1, y1, z1) * fx;
    const double c0 = c00 * (1 - fy) + c10 * fy;
    const double c1 = c01 * (1 - fy) + c11 * fy;
    return c0 * (1 - fz) + c1 * fz;
}

// -- CTV1 -------------------------------------------------------------------

namespace {

constexpr std::string_view kMagic = "CTV1";

std::uint32_t to_little_endian(std::uint32_t v) {
    if constexpr (std::endian::native == std::endian::little) return v;
    return ((v & 0xFFu) << 24) | ((v & 0xFF00u) << 8) | ((v >> 8) & 0xFF00u) | (v >> 24);
}

}  // namespace

Volume load_volume(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open volume file " + path.string());

    std::string header;
    if (!std::getline(in, header)) throw FormatError("missing CTV1 header in " + path.string());
    const auto tokens = split_whitespace(header);
    if (tokens.size() != 10 || tokens[0] != kMagic) throw FormatError("malformed CTV1 header in " + path.string());

    Index3 dims;
    Vec3 spacing, origin;
    for (int a = 0; a < 3; ++a) {
        const long long n = parse_int(tokens[1 + a]);
        if (n < 1 || n > std::numeric_limits<int>::max()) throw FormatError("CTV1 dims must be positive");
        dims[a] = static_cast<int>(n);
        spacing[a] = parse_real(tokens[4 + a]);
        origin[a] = parse_real(tokens[7 + a]);
    }

    const std::size_t count =
        static_cast<std::size_t>(dims.x) * static_cast<std::size_t>(dims.y) * static_cast<std::size_t>(dims.z);
    std::vector<std::uint32_t> raw(count);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(count * sizeof(std::uint32_t)));
    const auto got = static_cast<std::size_t>(in.gcount());
    if (got != count * sizeof(std::uint32_t))
        throw FormatError("CTV1 payload size mismatch in " + path.string() + ": expected " + std::to_string(count) +
                          " voxels, found " + std::to_string(got / sizeof(std::uint32_t)));
    if (in.peek() != std::ifstream::traits_type::eof())
        throw FormatError("CTV1 payload size mismatch in " + path.string() + ": trailing bytes");

    std::vector<float> voxels(count);
    for (std::size_t i = 0; i < count; ++i)
        voxels[i] = static_cast<float>(std::bit_cast<std::int32_t>(to_little_endian(raw[i])));
    try {
        return Volume(dims, spacing, origin, std::move(voxels));
    } catch (const Error& e) {
        throw FormatError(std::string("invalid CTV1 volume: ") + e.what());
    }
}

void save_volume(const Volume& v, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write volume file " + path.string());

    std::string header(kMagic);
    for (int a = 0; a < 3; ++a) header += ' ' + std::to_string(v.dims()[a]);
    for (int a = 0; a < 3; ++a) header += ' ' + format_real(v.spacing()[a]);
    for (int a = 0; a < 3; ++a) header += ' ' + format_real(v.origin()[a]);
    header += '\n';
    out.write(header.data(), static_cast<std::streamsize>(header.size()));

    std::vector<std::uint32_t> raw(v.size());
    const auto voxels = v.voxels();
    for (std::size_t i = 0; i < raw.size(); ++i) {
        const double rounded = std::nearbyint(static_cast<double>(voxels[i]));
        if (rounded < std::numeric_limits<std::int32_t>::min() || rounded > std::numeric_limits<std::int32_t>::max())
            throw Error("voxel value outside the 32-bit range");
        raw[i] = to_little_endian(std::bit_cast<std::uint32_t>(static_cast<std::int32_t>(rounded)));
    }
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size() * sizeof(std::uint32_t)));
    out.flush();
    if (!out) throw IoError("failed writing volume file " + path.string());
}

// -- resampling and cropping -------------------------------------------------

Volume resample_spacing(const Volume& v, const Vec3& target_spacing) {
    Index3 out_dims;
    for (int a = 0; a < 3; ++a) {
        if (!(target_spacing[a] > 0.0) || !std::isfinite(target_spacing[a]))
            throw Error("target spacing must be positive");
        const double extent = v.dims()[a] * v.spacing()[a];
        const long long n = std::llround(extent / target_spacing[a]);
        if (n < 1) {
            log_warning("resample: axis " + std::to_string(a) + " would have 0 voxels, clamped to 1");
            out_dims[a] = 1;
        } else {
            out_dims[a] = static_cast<int>(n);
        }
    }

    const Vec3 step{target_spacing.x / v.spacing().x, target_spacing.y / v.spacing().y,
                    target_spacing.z / v.spacing().z};
    std::vector<float> out(static_cast<std::size_t>(out_dims.x) * out_dims.y * out_dims.z);
    std::size_t idx = 0;
    for (int k = 0; k < out_dims.z; ++k)
        for (int j = 0; j < out_dims.y; ++j)
            for (int i = 0; i < out_dims.x; ++i)
                out[idx++] = static_cast<float>(v.sample({i * step.x, j * step.y, k * step.z}));
    return Volume(out_dims, target_spacing, v.origin(), std::move(out));
}

RoiBox roi_box(const Index3& dims, const LandmarkSet& landmarks, double margin_factor) {
    if (!(margin_factor >= 0.0) || !std::isfinite(margin_factor)) throw Error("margin factor must be >= 0");
    Vec3 lo{1e300, 1e300, 1e300}, hi{-1e300, -1e300, -1e300};
    for (const Vec3& p : landmarks.points())
        for (int a = 0; a < 3; ++a) {
            if (p[a] < 0.0 || p[a] > dims[a] - 1)
                throw Error("landmark outside the volume (axis " + std::to_string(a) + ")");
            lo[a] = std::min(lo[a], p[a]);
            hi[a] = std::max(hi[a], p[a]);
        }
    const double margin = margin_factor * landmarks.inter_eye_distance();
    RoiBox box;
    for (int a = 0; a < 3; ++a) {
        box.min_corner[a] = std::max(0, static_cast<int>(std::floor(lo[a] - margin)));
        box.max_corner[a] = std::min(dims[a] - 1, static_cast<int>(std::ceil(hi[a] + margin)));
        if (box.max_corner[a] < box.min_corner[a]) throw Error("empty ROI box after clamping");
    }
    return box;
}

Volume crop(const Volume& v, const RoiBox& box) {
    for (int a = 0; a < 3; ++a)
        if (box.min_corner[a] < 0 || box.max_corner[a] >= v.dims()[a] || box.max_corner[a] < box.min_corner[a])
            throw Error("ROI box outside the volume");
    const Index3 ext = box.extent();
    std::vector<float> out;
    out.reserve(static_cast<std::size_t>(ext.x) * ext.y * ext.z);
    for (int k = box.min_corner.z; k <= box.max_corner.z; ++k)
        for (int j = box.min_corner.y; j <= box.max_corner.y; ++j) {
            const auto row = v.voxels().subspan(v.linear_index(box.min_corner.x, j, k), static_cast<std::size_t>(ext.x));
            out.insert(out.end(), row.begin(), row.end());
        }
    const Vec3 origin = v.physical({double(box.min_corner.x), double(box.min_corner.y), double(box.min_corner.z)});
    return Volume(ext, v.spacing(), origin, std::move(out));
}

Volume crop_roi(const Volume& v, const LandmarkSet& landmarks, double margin_factor) {
    return crop(v, roi_box(v.dims(), landmarks, margin_factor));
}

}  // namespace ctface
