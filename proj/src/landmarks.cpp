#include "ctface/landmarks.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

#include "ctface/error.hpp"
#include "ctface/text.hpp"

namespace ctface {

LandmarkSet::LandmarkSet(const std::array<Vec3, kLandmarkCount>& points) : points_(points) {
    for (const Vec3& p : points_)
        if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z))
            throw Error("landmark coordinates must be finite");
    if (points_[0] == points_[1]) throw Error("left and right eye landmarks coincide");
}

double LandmarkSet::inter_eye_distance() const {
    return norm((*this)[Landmark::LeftEyeCenter] - (*this)[Landmark::RightEyeCenter]);
}

LandmarkSet LandmarkSet::reindexed(const Vec3& from_origin, const Vec3& from_spacing, const Vec3& to_origin,
                                   const Vec3& to_spacing) const {
    std::array<Vec3, kLandmarkCount> out;
    for (int j = 0; j < kLandmarkCount; ++j) {
        const Vec3 phys = from_origin + hadamard(points_[j], from_spacing);
        const Vec3 rel = phys - to_origin;
        out[j] = {rel.x / to_spacing.x, rel.y / to_spacing.y, rel.z / to_spacing.z};
    }
    return LandmarkSet(out);
}

HeatmapStack::HeatmapStack(Index3 dims, double sigma, std::array<Map, kLandmarkCount> maps)
    : dims_(dims), sigma_(sigma), maps_(std::move(maps)) {
    if (!(sigma_ > 0.0)) throw Error("heatmap sigma must be positive");
    const std::size_t n = static_cast<std::size_t>(dims_.x) * dims_.y * dims_.z;
    for (const Map& m : maps_) {
        if (m.size() != n) throw Error("heatmap size does not match dims");
        float peak = 0.0f;
        for (float value : m) {
            if (!(value >= 0.0f && value <= 1.0f)) throw Error("heatmap values must lie in [0, 1]");
            peak = std::max(peak, value);
        }
        if (!(peak > 0.0f)) throw Error("heatmap has no positive value");
    }
}

HeatmapStack encode_heatmaps(const LandmarkSet& points, const Index3& dims, double sigma) {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw Error("heatmap sigma must be positive");
    if (dims.x < 1 || dims.y < 1 || dims.z < 1) throw Error("heatmap dims must be >= 1");
    for (const Vec3& p : points.points())
        for (int a = 0; a < 3; ++a)
            if (p[a] < 0.0 || p[a] > dims[a] - 1) throw Error("landmark outside the heatmap grid");

    const double inv_two_sigma2 = 1.0 / (2.0 * sigma * sigma);
    const std::size_t n = static_cast<std::size_t>(dims.x) * dims.y * dims.z;
    std::array<HeatmapStack::Map, kLandmarkCount> maps;
    for (int j = 0; j < kLandmarkCount; ++j) {
        // The Gaussian separates per axis, so three 1D tables suffice.
        std::array<std::vector<double>, 3> axis;
        for (int a = 0; a < 3; ++a) {
            axis[a].resize(static_cast<std::size_t>(dims[a]));
            for (int i = 0; i < dims[a]; ++i) {
                const double d = i - points.point(j)[a];
                axis[a][i] = std::exp(-d * d * inv_two_sigma2);
            }
        }
        HeatmapStack::Map& m = maps[j];
        m.resize(n);
        std::size_t idx = 0;
        for (int k = 0; k < dims.z; ++k)
            for (int y = 0; y < dims.y; ++y) {
                const double yz = axis[1][y] * axis[2][k];
                for (int x = 0; x < dims.x; ++x) m[idx++] = static_cast<float>(axis[0][x] * yz);
            }
    }
    return HeatmapStack(dims, sigma, std::move(maps));
}

LandmarkSet decode_heatmaps(const HeatmapStack& stack, double tau) {
    if (!(tau > 0.0 && tau < 1.0)) throw Error("decode threshold tau must lie in (0, 1)");
    const Index3& dims = stack.dims();
    std::array<Vec3, kLandmarkCount> out;
    for (int j = 0; j < kLandmarkCount; ++j) {
        const auto m = stack.map(j);
        const float peak = *std::max_element(m.begin(), m.end());
        if (!(peak > 0.0f)) throw Error("cannot decode an all-zero heatmap");
        const double cut = tau * peak;
        double w = 0.0, sx = 0.0, sy = 0.0, sz = 0.0;
        std::size_t idx = 0;
        for (int k = 0; k < dims.z; ++k)
            for (int y = 0; y < dims.y; ++y)
                for (int x = 0; x < dims.x; ++x, ++idx) {
                    const double value = m[idx];
                    if (value < cut) continue;
                    w += value;
                    sx += value * x;
                    sy += value * y;
                    sz += value * k;
                }
        out[j] = {sx / w, sy / w, sz / w};
    }
    return LandmarkSet(out);
}

double landmark_loss(const LandmarkSet& truth, const LandmarkSet& predicted) {
    double sum = 0.0;
    for (int j = 0; j < kLandmarkCount; ++j) {
        const Vec3 d = truth.point(j) - predicted.point(j);
        sum += dot(d, d);
    }
    return sum / (2.0 * kLandmarkCount);
}

namespace {

class OraclePredictor final : public HeatmapPredictor {
public:
    OraclePredictor(LandmarkSet truth, double sigma) : truth_(std::move(truth)), sigma_(sigma) {}

    HeatmapStack predict(const Volume& volume) const override {
        return encode_heatmaps(truth_, volume.dims(), sigma_);
    }

private:
    LandmarkSet truth_;
    double sigma_;
};

}  // namespace

std::unique_ptr<HeatmapPredictor> oracle_predictor(const LandmarkSet& ground_truth, double sigma) {
    if (!(sigma > 0.0)) throw Error("heatmap sigma must be positive");
    return std::make_unique<OraclePredictor>(ground_truth, sigma);
}

LandmarkSet load_landmarks(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open landmark file " + path.string());
    std::array<Vec3, kLandmarkCount> points;
    std::string line;
    int j = 0;
    while (std::getline(in, line)) {
        const auto tokens = split_whitespace(line);
        if (tokens.empty()) continue;
        if (j >= kLandmarkCount) throw FormatError("too many landmark lines in " + path.string());
        if (tokens.size() != 4 || tokens[0] != kLandmarkNames[j])
            throw FormatError("expected '" + std::string(kLandmarkNames[j]) + " x y z' in " + path.string());
        points[j] = {parse_real(tokens[1]), parse_real(tokens[2]), parse_real(tokens[3])};
        ++j;
    }
    if (j != kLandmarkCount) throw FormatError("expected 4 landmarks in " + path.string());
    return LandmarkSet(points);
}

void save_landmarks(const LandmarkSet& landmarks, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write landmark file " + path.string());
    for (int j = 0; j < kLandmarkCount; ++j) {
        const Vec3& p = landmarks.point(j);
        out << kLandmarkNames[j] << ' ' << format_real(p.x) << ' ' << format_real(p.y) << ' ' << format_real(p.z)
            << '\n';
    }
    if (!out) throw IoError("failed writing landmark file " + path.string());
}

}  // namespace ctface
