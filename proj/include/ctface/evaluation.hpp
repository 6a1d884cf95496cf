#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ctface/recognition.hpp"

namespace ctface {

struct LabeledEmbedding {
    int label = 0;
    std::vector<double> values;
};

struct GalleryProbeSplit {
    std::vector<LabeledEmbedding> gallery;  // one per class
    std::vector<LabeledEmbedding> probes;

    /// Throws Error on duplicate gallery labels or probe labels missing from the gallery.
    void validate() const;
};

/// Seeded choice of one gallery sample per label; everything else becomes a probe.
GalleryProbeSplit make_gallery_probe(std::span<const LabeledEmbedding> samples, std::uint64_t seed);

struct IdentificationResult {
    std::vector<int> predicted;
    double accuracy = 0.0;
};

/// Nearest gallery entry by Euclidean distance; ties go to the lowest label.
IdentificationResult identify(const GalleryProbeSplit& split);

struct ScoredPair {
    int i = 0;
    int j = 0;
    bool genuine = false;

    bool operator==(const ScoredPair&) const = default;
};

/// Every genuine pair (i < j) followed by round(ratio * genuine) impostor pairs
/// sampled without replacement, each block in (i, j) order.
std::vector<ScoredPair> make_pairs(std::span<const int> labels, double impostor_ratio, std::uint64_t seed);

struct Score {
    double similarity = 0.0;
    bool genuine = false;
};

struct RocPoint {
    double fpr = 0.0;
    double tpr = 0.0;
};

struct RocCurve {
    std::vector<RocPoint> points;    // (0,0) ... (1,1)
    std::vector<double> thresholds;  // thresholds[k] produced points[k + 1]
    double auc = 0.0;
    double vacc_threshold = 0.0;  // predict genuine iff similarity >= threshold
    double vacc = 0.0;
};

/// ROC over every distinct similarity; AUC by trapezoid; VACC at the Youden-J
/// optimum, ties to the lower threshold.
RocCurve roc(std::span<const Score> scores);

/// Similarity = negative Euclidean distance.
std::vector<Score> score_pairs(std::span<const LabeledEmbedding> samples, std::span<const ScoredPair> pairs);

/// Per class: seeded shuffle, first round(ratio * n) items (at least 1, at most n - 1) train.
struct ClassSplit {
    std::vector<ImageRef> train;
    std::vector<ImageRef> test;
};

ClassSplit split_per_class(const std::map<int, std::vector<ImageRef>>& images_by_class, double ratio,
                                     std::uint64_t seed);

struct Fold {
    std::vector<int> train;
    std::vector<int> test;
};

/// Seeded partition into k folds whose sizes differ by at most one; both lists sorted.
std::vector<Fold> kfold_subjects(std::span<const int> subject_ids, int k, std::uint64_t seed);

struct FoldMetrics {
    double acc = 0.0;
    double vacc = 0.0;
    double auc = 0.0;
    double vacc_threshold = 0.0;
    std::size_t n_classes = 0;
    std::size_t n_probes = 0;
    std::size_t n_pairs = 0;
};

struct MetricSummary {
    double mean = 0.0;
    double std = 0.0;  // population
};

struct EvalReport {
    std::vector<FoldMetrics> folds;
    MetricSummary acc;
    MetricSummary vacc;
    MetricSummary auc;
};

EvalReport aggregate(std::span<const FoldMetrics> folds);

/// Runs identification and verification for one set of test embeddings.
FoldMetrics evaluate_fold(std::span<const LabeledEmbedding> test, double impostor_ratio, std::uint64_t seed,
                          RocCurve* curve_out = nullptr);

struct EvaluationOptions {
    int folds = 5;
    std::uint64_t seed = 42;
    double impostor_ratio = 1.0;
};

/// k-fold over patients; returns the report and the ROC of every fold.
EvalReport evaluate_embeddings(std::span<const Embedding> embeddings, const EvaluationOptions& options,
                               std::vector<RocCurve>* curves = nullptr);

/// CSV header: fold,n_classes,n_probes,n_pairs,acc,vacc,auc,vacc_threshold,
/// then one row per fold and `mean` / `std` rows.
void save_report_csv(const EvalReport& report, const std::filesystem::path& path);
EvalReport load_report_csv(const std::filesystem::path& path);

void save_roc_csv(const RocCurve& curve, const std::filesystem::path& path);
void save_roc_svg(const RocCurve& curve, const std::filesystem::path& path, const std::string& title = "ROC");

struct NamedReport {
    std::string stage;
    EvalReport report;
};

/// CSV with header
/// stage,mean_acc,std_acc,mean_vacc,std_vacc,mean_auc,std_auc,delta_acc,delta_vacc,delta_auc
/// where deltas are against the previous row (zero on the first).
/// Throws Error when fewer than two reports are given or their fold counts differ.
std::string compare_stages(std::span<const NamedReport> reports);

}  // namespace ctface
