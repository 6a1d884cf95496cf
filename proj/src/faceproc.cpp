#include "ctface/faceproc.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "ctface/error.hpp"
#include "ctface/text.hpp"

namespace ctface {

std::size_t FaceMask::area() const {
    return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
}

namespace {

// Labels 4-connected components of pixels where `member` is true. Returns the label count.
template <typename Pred>
int label_components(int w, int h, Pred member, std::vector<int>& labels) {
    labels.assign(static_cast<std::size_t>(w) * h, -1);
    std::vector<int> stack;
    int next = 0;
    for (int start = 0; start < w * h; ++start) {
        if (labels[start] != -1 || !member(start)) continue;
        labels[start] = next;
        stack.push_back(start);
        while (!stack.empty()) {
            const int p = stack.back();
            stack.pop_back();
            const int x = p % w, y = p / w;
            const int nbrs[4] = {x > 0 ? p - 1 : -1, x + 1 < w ? p + 1 : -1, y > 0 ? p - w : -1,
                                 y + 1 < h ? p + w : -1};
            for (int q : nbrs)
                if (q >= 0 && labels[q] == -1 && member(q)) {
                    labels[q] = next;
                    stack.push_back(q);
                }
        }
        ++next;
    }
    return next;
}

}  // namespace

FaceMask baseline_face_mask(const DepthImage& image) {
    image.validate();
    const int w = image.width, h = image.height;
    std::vector<int> labels;
    const int n = label_components(w, h, [&](int p) { return image.depth[p] > 0.0; }, labels);
    if (n == 0) throw Error("cannot build a face mask for an all-background image");

    std::vector<std::size_t> sizes(static_cast<std::size_t>(n), 0);
    for (int l : labels)
        if (l >= 0) ++sizes[l];
    const int best = static_cast<int>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());

    FaceMask mask{w, h, std::vector<std::uint8_t>(static_cast<std::size_t>(w) * h, 0)};
    for (std::size_t i = 0; i < labels.size(); ++i) mask.mask[i] = labels[i] == best;

    // Holes: non-mask regions that do not touch the image border.
    std::vector<int> outside;
    const int m = label_components(w, h, [&](int p) { return mask.mask[p] == 0; }, outside);
    std::vector<char> touches_border(static_cast<std::size_t>(m), 0);
    for (int x = 0; x < w; ++x) {
        if (outside[x] >= 0) touches_border[outside[x]] = 1;
        if (outside[(h - 1) * w + x] >= 0) touches_border[outside[(h - 1) * w + x]] = 1;
    }
    for (int y = 0; y < h; ++y) {
        if (outside[y * w] >= 0) touches_border[outside[y * w]] = 1;
        if (outside[y * w + w - 1] >= 0) touches_border[outside[y * w + w - 1]] = 1;
    }
    for (std::size_t i = 0; i < outside.size(); ++i)
        if (outside[i] >= 0 && !touches_border[outside[i]]) mask.mask[i] = 1;
    return mask;
}

DepthImage apply_mask(const DepthImage& image, const FaceMask& mask) {
    if (mask.width != image.width || mask.height != image.height ||
        mask.mask.size() != static_cast<std::size_t>(image.width) * image.height)
        throw Error("mask size does not match the depth image");
    DepthImage out = image;
    for (std::size_t i = 0; i < out.depth.size(); ++i)
        if (!mask.mask[i]) out.depth[i] = 0.0;
    out.stage = Stage::Segmented;
    return out;
}

double DisplayMapping::map(double depth) const {
    if (!(hi > lo)) return 0.0;
    return std::clamp(255.0 * (depth - lo) / (hi - lo), 0.0, 255.0);
}

DisplayMapping DisplayMapping::from_foreground(const DepthImage& image) {
    DisplayMapping m{0.0, 0.0};
    bool any = false;
    for (double d : image.depth) {
        if (!(d > 0.0)) continue;
        if (!any) {
            m.lo = m.hi = d;
            any = true;
        }
        m.lo = std::min(m.lo, d);
        m.hi = std::max(m.hi, d);
    }
    if (!any) throw Error("image has no foreground");
    return m;
}

std::int64_t Histogram::total() const { return std::accumulate(counts.begin(), counts.end(), std::int64_t{0}); }

Histogram depth_histogram(const DepthImage& image, bool foreground_only, const std::optional<DisplayMapping>& mapping) {
    image.validate();
    if (foreground_only && image.foreground_count() == 0)
        throw Error("foreground histogram requested for an all-background image");
    DisplayMapping map;
    if (mapping) {
        map = *mapping;
    } else if (image.foreground_count() > 0) {
        map = DisplayMapping::from_foreground(image);
    }

    Histogram h;
    h.foreground_only = foreground_only;
    h.bin_edges.resize(257);
    for (int i = 0; i <= 256; ++i) h.bin_edges[i] = 255.0 * i / 256.0;
    h.counts.assign(256, 0);
    for (double d : image.depth) {
        if (foreground_only && !(d > 0.0)) continue;
        const double value = map.map(d);
        const int bin = std::min(255, static_cast<int>(std::floor(value * 256.0 / 255.0)));
        ++h.counts[bin];
    }
    return h;
}

void save_histogram_csv(const Histogram& h, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write histogram " + path.string());
    out << "bin_low,count\n";
    for (std::size_t i = 0; i < h.counts.size(); ++i) out << format_real(h.bin_edges[i]) << ',' << h.counts[i] << '\n';
    if (!out) throw IoError("failed writing histogram " + path.string());
}

DepthImage normalize_depth(const DepthImage& image, double theta, double scale_c) {
    image.validate();
    if (!(scale_c > 0.0) || !std::isfinite(scale_c)) throw Error("normalization scale C must be positive");
    if (!std::isfinite(theta)) throw Error("normalization threshold must be finite");
    double peak = 0.0;
    bool any = false;
    for (double d : image.depth)
        if (d > 0.0) {
            peak = any ? std::max(peak, d) : d;
            any = true;
        }
    if (!any) throw Error("cannot normalize an all-background image");
    if (!(peak > theta)) throw Error("degenerate contrast: max(SX) <= theta");

    DepthImage out = image;
    const double span = peak - theta;
    for (double& d : out.depth) {
        if (!(d > 0.0)) continue;
        d = d == peak ? scale_c : std::max(0.0, scale_c * (d - theta) / span);
    }
    out.stage = Stage::Normalized;
    return out;
}

double select_threshold(const DepthImage& image, double percentile, const std::optional<DisplayMapping>& mapping) {
    if (!(percentile >= 0.0 && percentile <= 100.0)) throw Error("percentile must lie in [0, 100]");
    const DisplayMapping map = mapping ? *mapping : DisplayMapping::from_foreground(image);
    std::vector<double> values;
    for (double d : image.depth)
        if (d > 0.0) values.push_back(map.map(d));
    if (values.empty()) throw Error("image has no foreground");
    std::sort(values.begin(), values.end());
    // Nearest-rank percentile.
    const auto rank = static_cast<std::size_t>(std::ceil(percentile / 100.0 * values.size()));
    const std::size_t idx = rank == 0 ? 0 : rank - 1;
    return map.unmap(values[std::min(idx, values.size() - 1)]);
}

}  // namespace ctface
