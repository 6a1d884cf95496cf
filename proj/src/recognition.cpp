#include "ctface/recognition.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <string>

#include "ctface/error.hpp"
#include "ctface/rng.hpp"
#include "ctface/text.hpp"

namespace ctface {

BaselineEmbedder::BaselineEmbedder(int grid) : grid_(grid) {
    if (grid_ < 1) throw Error("embedding grid must be >= 1");
}

Embedding BaselineEmbedder::embed(const DepthImage& image) const {
    image.validate();
    if (image.width < grid_ || image.height < grid_) throw Error("image smaller than the embedding grid");
    const int g = grid_;
    std::vector<double> v(static_cast<std::size_t>(g) * g, 0.0);
    for (int by = 0; by < g; ++by) {
        const int y0 = by * image.height / g, y1 = (by + 1) * image.height / g;
        for (int bx = 0; bx < g; ++bx) {
            const int x0 = bx * image.width / g, x1 = (bx + 1) * image.width / g;
            double sum = 0.0;
            for (int y = y0; y < y1; ++y)
                for (int x = x0; x < x1; ++x) sum += image.at(x, y);
            v[static_cast<std::size_t>(by) * g + bx] = sum / ((y1 - y0) * (x1 - x0));
        }
    }
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double sq = 0.0;
    for (double& x : v) {
        x -= mean;
        sq += x * x;
    }
    const double n = std::sqrt(sq);
    // Relative floor so rounding noise on a flat image is not amplified to unit length.
    if (!(n > 1e-12 * std::max(1.0, std::abs(mean)))) {
        std::fill(v.begin(), v.end(), 0.0);
        v[0] = 1.0;
    } else {
        for (double& x : v) x /= n;
    }
    return {std::move(v), image.ids};
}

DepthImage crop_image(const DepthImage& image, int x0, int y0, int size) {
    if (size < 1 || size > image.width || size > image.height) throw Error("crop size exceeds the image");
    if (x0 < 0 || y0 < 0 || x0 + size > image.width || y0 + size > image.height)
        throw Error("crop window outside the image");
    DepthImage out;
    out.width = size;
    out.height = size;
    out.stage = image.stage;
    out.ids = image.ids;
    out.pose = image.pose;
    out.pose.scale_mm = image.pose.scale_mm * size / image.pose.width;
    out.pose.width = size;
    out.pose.height = size;
    out.pose.u0 -= x0;
    out.pose.v0 -= y0;
    out.depth.resize(static_cast<std::size_t>(size) * size);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) out.at(x, y) = image.at(x0 + x, y0 + y);
    return out;
}

DepthImage random_crop(const DepthImage& image, int size, std::uint64_t seed) {
    if (size < 1 || size > image.width || size > image.height) throw Error("crop size exceeds the image");
    Rng rng(seed);
    const int x0 = static_cast<int>(rng.index(static_cast<std::uint64_t>(image.width - size + 1)));
    const int y0 = static_cast<int>(rng.index(static_cast<std::uint64_t>(image.height - size + 1)));
    return crop_image(image, x0, y0, size);
}

DepthImage center_crop(const DepthImage& image, int size) {
    if (size < 1 || size > image.width || size > image.height) throw Error("crop size exceeds the image");
    return crop_image(image, (image.width - size) / 2, (image.height - size) / 2, size);
}

double euclidean_distance(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw Error("embedding dimensions differ");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(s);
}

double triplet_loss_absolute(const Embedding& a, const Embedding& p, const Embedding& n, double margin) {
    return std::abs(euclidean_distance(a.values, p.values) - euclidean_distance(a.values, n.values)) + margin;
}

double triplet_loss_hinge(const Embedding& a, const Embedding& p, const Embedding& n, double margin) {
    return std::max(0.0, euclidean_distance(a.values, p.values) - euclidean_distance(a.values, n.values) + margin);
}

std::vector<ImageRef> Batch::flattened() const {
    std::vector<ImageRef> out;
    for (const Subgroup& g : subgroups) out.insert(out.end(), g.members.begin(), g.members.end());
    return out;
}

std::size_t Batch::size() const {
    std::size_t n = 0;
    for (const Subgroup& g : subgroups) n += g.members.size();
    return n;
}

std::vector<Subgroup> make_subgroups(const std::map<int, std::vector<ImageRef>>& images_by_patient, int group_size,
                                     bool shuffle_across_scans, std::uint64_t seed) {
    if (group_size < 2) throw Error("subgroup size E must be >= 2");
    std::vector<Subgroup> out;
    for (const auto& [patient, refs] : images_by_patient) {
        if (refs.size() < static_cast<std::size_t>(group_size)) {
            log_warning("patient " + std::to_string(patient) + " has " + std::to_string(refs.size()) +
                        " images, fewer than E = " + std::to_string(group_size) + "; skipped");
            continue;
        }
        for (const ImageRef& r : refs)
            if (r.patient != patient) throw Error("image reference filed under the wrong patient");
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(patient)));

        std::vector<std::vector<ImageRef>> pools;
        if (shuffle_across_scans) {
            pools.push_back(refs);
        } else {
            std::map<int, std::vector<ImageRef>> by_scan;
            for (const ImageRef& r : refs) by_scan[r.scan].push_back(r);
            for (auto& [scan, list] : by_scan) pools.push_back(std::move(list));
        }
        for (auto& pool : pools) {
            std::sort(pool.begin(), pool.end());
            rng.shuffle(std::span<ImageRef>(pool));
            for (std::size_t start = 0; start + group_size <= pool.size(); start += group_size)
                out.push_back({patient, std::vector<ImageRef>(pool.begin() + static_cast<std::ptrdiff_t>(start),
                                                              pool.begin() + static_cast<std::ptrdiff_t>(start + group_size))});
        }
    }
    return out;
}

std::vector<Batch> make_batches(const std::vector<Subgroup>& subgroups, int labels_per_batch, std::uint64_t seed) {
    if (labels_per_batch < 1) throw Error("labels per batch L must be >= 1");
    std::map<int, std::vector<std::size_t>> by_patient;
    for (std::size_t i = 0; i < subgroups.size(); ++i) by_patient[subgroups[i].patient].push_back(i);
    if (by_patient.size() < static_cast<std::size_t>(labels_per_batch))
        throw Error("only " + std::to_string(by_patient.size()) + " patients available, L = " +
                    std::to_string(labels_per_batch));

    Rng rng(seed);
    for (auto& [patient, list] : by_patient) rng.shuffle(std::span<std::size_t>(list));

    std::vector<Batch> batches;
    while (true) {
        std::vector<int> available;
        for (const auto& [patient, list] : by_patient)
            if (!list.empty()) available.push_back(patient);
        if (available.size() < static_cast<std::size_t>(labels_per_batch)) break;
        rng.shuffle(std::span<int>(available));
        available.resize(static_cast<std::size_t>(labels_per_batch));
        Batch b;
        for (int patient : available) {
            auto& list = by_patient[patient];
            b.subgroups.push_back(subgroups[list.back()]);
            list.pop_back();
        }
        batches.push_back(std::move(b));
    }
    return batches;
}

std::vector<Batch> sample_epoch(const std::map<int, std::vector<ImageRef>>& images_by_patient, int group_size,
                                int labels_per_batch, bool shuffle_across_scans, std::uint64_t seed, int epoch) {
    const std::uint64_t epoch_seed = seed + static_cast<std::uint64_t>(epoch);
    const auto groups = make_subgroups(images_by_patient, group_size, shuffle_across_scans, epoch_seed);
    return make_batches(groups, labels_per_batch, derive_seed(epoch_seed, 0xBA7C));
}

std::vector<Triplet> mine_triplets(const Batch& batch, std::span<const Embedding> embeddings, MiningMode mode) {
    std::vector<int> labels;
    for (const Subgroup& g : batch.subgroups)
        for (std::size_t i = 0; i < g.members.size(); ++i) labels.push_back(g.patient);
    if (embeddings.size() != labels.size()) throw Error("embedding count does not match the batch size");
    if (std::adjacent_find(labels.begin(), labels.end(), std::not_equal_to<>()) == labels.end())
        throw Error("triplet mining needs at least two labels in the batch");

    const int n = static_cast<int>(labels.size());
    std::vector<Triplet> out;
    if (mode == MiningMode::All) {
        for (int a = 0; a < n; ++a)
            for (int p = 0; p < n; ++p) {
                if (p == a || labels[p] != labels[a]) continue;
                for (int q = 0; q < n; ++q)
                    if (labels[q] != labels[a]) out.push_back({a, p, q});
            }
        return out;
    }

    std::vector<double> dist(static_cast<std::size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            dist[i * n + j] = dist[j * n + i] = euclidean_distance(embeddings[i].values, embeddings[j].values);
    for (int a = 0; a < n; ++a) {
        int best_p = -1, best_n = -1;
        for (int j = 0; j < n; ++j) {
            if (j == a) continue;
            const double d = dist[a * n + j];
            if (labels[j] == labels[a]) {
                if (best_p == -1 || d > dist[a * n + best_p]) best_p = j;
            } else if (best_n == -1 || d < dist[a * n + best_n]) {
                best_n = j;
            }
        }
        if (best_p != -1 && best_n != -1) out.push_back({a, best_p, best_n});
    }
    return out;
}

double mean_triplet_loss(std::span<const Embedding> embeddings, std::span<const Triplet> triplets, double margin,
                         LossVariant variant) {
    if (triplets.empty()) return 0.0;
    double sum = 0.0;
    for (const Triplet& t : triplets) {
        const Embedding& a = embeddings[t.anchor];
        const Embedding& p = embeddings[t.positive];
        const Embedding& q = embeddings[t.negative];
        sum += variant == LossVariant::Hinge ? triplet_loss_hinge(a, p, q, margin) : triplet_loss_absolute(a, p, q, margin);
    }
    return sum / static_cast<double>(triplets.size());
}

void save_embeddings(std::span<const Embedding> embeddings, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write embeddings " + path.string());
    for (const Embedding& e : embeddings) {
        out << e.ids.patient << ' ' << e.ids.scan << ' ' << e.ids.pose;
        for (double x : e.values) out << ' ' << format_real(x);
        out << '\n';
    }
    if (!out) throw IoError("failed writing embeddings " + path.string());
}

std::vector<Embedding> load_embeddings(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open embeddings " + path.string());
    std::vector<Embedding> out;
    std::string line;
    std::size_t dim = 0;
    while (std::getline(in, line)) {
        const auto tokens = split_whitespace(line);
        if (tokens.empty()) continue;
        if (tokens.size() < 4) throw FormatError("embedding line needs ids and at least one value");
        Embedding e;
        e.ids = {static_cast<int>(parse_int(tokens[0])), static_cast<int>(parse_int(tokens[1])),
                 static_cast<int>(parse_int(tokens[2]))};
        for (std::size_t i = 3; i < tokens.size(); ++i) {
            const double x = parse_real(tokens[i]);
            if (!std::isfinite(x)) throw FormatError("non-finite embedding value");
            e.values.push_back(x);
        }
        if (dim == 0) dim = e.values.size();
        if (e.values.size() != dim) throw FormatError("embedding dimensions differ within " + path.string());
        out.push_back(std::move(e));
    }
    return out;
}

void save_batch_manifest(std::span<const Batch> batches, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write batch manifest " + path.string());
    for (std::size_t b = 0; b < batches.size(); ++b)
        for (const ImageRef& r : batches[b].flattened())
            out << b << ' ' << r.patient << ' ' << r.scan << ' ' << r.pose << '\n';
    if (!out) throw IoError("failed writing batch manifest " + path.string());
}

}  // namespace ctface
