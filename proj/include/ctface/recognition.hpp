#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <vector>

#include "ctface/render.hpp"

namespace ctface {

struct Embedding {
    std::vector<double> values;
    SourceIds ids;
};

/// Maps a depth image to a fixed-length feature vector.
class Embedder {
public:
    virtual ~Embedder() = default;
    virtual int dimension() const = 0;
    virtual Embedding embed(const DepthImage& image) const = 0;
};

/// Block-average to grid x grid, flatten, subtract the mean, L2-normalise.
/// Images with zero variance after downsampling map to the first unit axis.
class BaselineEmbedder final : public Embedder {
public:
    explicit BaselineEmbedder(int grid = 16);
    int dimension() const override { return grid_ * grid_; }
    Embedding embed(const DepthImage& image) const override;

private:
    int grid_;
};

inline Embedding baseline_embed(const DepthImage& image) { return BaselineEmbedder{}.embed(image); }

/// Crop with top-left corner (x0, y0). The pose keeps its pixel scale and
/// its principal point moves with the crop.
DepthImage crop_image(const DepthImage& image, int x0, int y0, int size);

/// Seeded uniform top-left corner in [0, w - size] x [0, h - size].
DepthImage random_crop(const DepthImage& image, int size, std::uint64_t seed);

DepthImage center_crop(const DepthImage& image, int size);

double euclidean_distance(std::span<const double> a, std::span<const double> b);

/// |d(a, p) - d(a, n)| + m; never below m.
double triplet_loss_absolute(const Embedding& a, const Embedding& p, const Embedding& n, double margin);

/// max(0, d(a, p) - d(a, n) + m).
double triplet_loss_hinge(const Embedding& a, const Embedding& p, const Embedding& n, double margin);

enum class LossVariant { Hinge, Absolute };

using ImageRef = SourceIds;

struct Subgroup {
    int patient = 0;
    std::vector<ImageRef> members;
};

struct Batch {
    std::vector<Subgroup> subgroups;

    std::vector<ImageRef> flattened() const;
    std::size_t size() const;
};

/// Per patient: seeded shuffle (across all scans, or inside each scan) then
/// chunks of exactly E; leftovers are dropped. Patients with fewer than E
/// images are skipped with a warning. Output is ordered by patient id.
std::vector<Subgroup> make_subgroups(const std::map<int, std::vector<ImageRef>>& images_by_patient, int group_size,
                                     bool shuffle_across_scans, std::uint64_t seed);

/// Batches of L subgroups from L distinct patients; every subgroup is used at most once.
/// Throws Error when fewer than L patients are present.
std::vector<Batch> make_batches(const std::vector<Subgroup>& subgroups, int labels_per_batch, std::uint64_t seed);

/// One epoch of group sampling; subgroups are redrawn with seed + epoch.
std::vector<Batch> sample_epoch(const std::map<int, std::vector<ImageRef>>& images_by_patient, int group_size,
                                int labels_per_batch, bool shuffle_across_scans, std::uint64_t seed, int epoch);

struct Triplet {
    int anchor;
    int positive;
    int negative;

    bool operator==(const Triplet&) const = default;
};

enum class MiningMode { All, BatchHard };

/// Indices refer to batch.flattened() and to `embeddings` in the same order.
/// BatchHard: per anchor the farthest positive and the nearest negative, ties to the lowest index.
std::vector<Triplet> mine_triplets(const Batch& batch, std::span<const Embedding> embeddings, MiningMode mode);

/// Mean loss over triplets.
double mean_triplet_loss(std::span<const Embedding> embeddings, std::span<const Triplet> triplets, double margin,
                         LossVariant variant);

/// `patient scan pose v1 ... vD`, one line per embedding.
void save_embeddings(std::span<const Embedding> embeddings, const std::filesystem::path& path);
std::vector<Embedding> load_embeddings(const std::filesystem::path& path);

/// `batch_idx patient scan pose`, one line per member.
void save_batch_manifest(std::span<const Batch> batches, const std::filesystem::path& path);

}  // namespace ctface
