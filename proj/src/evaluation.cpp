#include "ctface/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "ctface/error.hpp"
#include "ctface/rng.hpp"
#include "ctface/text.hpp"

namespace ctface {

void GalleryProbeSplit::validate() const {
    std::set<int> labels;
    for (const auto& g : gallery)
        if (!labels.insert(g.label).second) throw Error("duplicate gallery label " + std::to_string(g.label));
    for (const auto& p : probes)
        if (!labels.count(p.label)) throw Error("probe label " + std::to_string(p.label) + " missing from gallery");
}

GalleryProbeSplit make_gallery_probe(std::span<const LabeledEmbedding> samples, std::uint64_t seed) {
    std::map<int, std::vector<std::size_t>> by_label;
    for (std::size_t i = 0; i < samples.size(); ++i) by_label[samples[i].label].push_back(i);
    std::set<std::size_t> chosen;
    Rng rng(seed);
    GalleryProbeSplit split;
    for (const auto& [label, idx] : by_label) {
        const std::size_t pick = idx[rng.index(idx.size())];
        chosen.insert(pick);
        split.gallery.push_back(samples[pick]);
    }
    for (std::size_t i = 0; i < samples.size(); ++i)
        if (!chosen.count(i)) split.probes.push_back(samples[i]);
    return split;
}

IdentificationResult identify(const GalleryProbeSplit& split) {
    if (split.gallery.empty()) throw Error("identification needs a non-empty gallery");
    if (split.probes.empty()) throw Error("identification needs at least one probe");
    split.validate();

    std::vector<std::size_t> order(split.gallery.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return split.gallery[a].label < split.gallery[b].label; });

    IdentificationResult result;
    std::size_t correct = 0;
    for (const auto& probe : split.probes) {
        double best = 0.0;
        int best_label = 0;
        bool first = true;
        for (std::size_t gi : order) {
            const double d = euclidean_distance(probe.values, split.gallery[gi].values);
            if (first || d < best) {
                best = d;
                best_label = split.gallery[gi].label;
                first = false;
            }
        }
        result.predicted.push_back(best_label);
        if (best_label == probe.label) ++correct;
    }
    result.accuracy = static_cast<double>(correct) / static_cast<double>(split.probes.size());
    return result;
}

std::vector<ScoredPair> make_pairs(std::span<const int> labels, double impostor_ratio, std::uint64_t seed) {
    if (std::set<int>(labels.begin(), labels.end()).size() < 2) throw Error("pairs need at least two labels");
    if (!(impostor_ratio >= 0.0) || !std::isfinite(impostor_ratio)) throw Error("impostor ratio must be >= 0");
    const int n = static_cast<int>(labels.size());
    std::vector<ScoredPair> genuine, impostor;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) (labels[i] == labels[j] ? genuine : impostor).push_back({i, j, labels[i] == labels[j]});

    const auto wanted = static_cast<std::size_t>(std::llround(impostor_ratio * static_cast<double>(genuine.size())));
    if (wanted > impostor.size())
        throw Error("requested " + std::to_string(wanted) + " impostor pairs but only " +
                    std::to_string(impostor.size()) + " exist");
    Rng rng(seed);
    // Partial Fisher-Yates: the first `wanted` slots become a uniform sample.
    for (std::size_t i = 0; i < wanted; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.index(impostor.size() - i));
        std::swap(impostor[i], impostor[j]);
    }
    impostor.resize(wanted);
    std::sort(impostor.begin(), impostor.end(),
              [](const ScoredPair& a, const ScoredPair& b) { return std::pair(a.i, a.j) < std::pair(b.i, b.j); });
    genuine.insert(genuine.end(), impostor.begin(), impostor.end());
    return genuine;
}

RocCurve roc(std::span<const Score> scores) {
    std::size_t positives = 0;
    for (const Score& s : scores) {
        if (!std::isfinite(s.similarity)) throw Error("scores must be finite");
        positives += s.genuine;
    }
    const std::size_t negatives = scores.size() - positives;
    if (positives == 0 || negatives == 0) throw Error("ROC needs both genuine and impostor scores");

    std::vector<Score> sorted(scores.begin(), scores.end());
    std::sort(sorted.begin(), sorted.end(), [](const Score& a, const Score& b) { return a.similarity > b.similarity; });

    RocCurve curve;
    curve.points.push_back({0.0, 0.0});
    std::size_t tp = 0, fp = 0;
    double best_j = -1.0;
    for (std::size_t i = 0; i < sorted.size();) {
        const double t = sorted[i].similarity;
        while (i < sorted.size() && sorted[i].similarity == t) {
            (sorted[i].genuine ? tp : fp) += 1;
            ++i;
        }
        const RocPoint pt{static_cast<double>(fp) / negatives, static_cast<double>(tp) / positives};
        const RocPoint& prev = curve.points.back();
        curve.auc += (pt.fpr - prev.fpr) * (pt.tpr + prev.tpr) * 0.5;
        curve.points.push_back(pt);
        curve.thresholds.push_back(t);
        const double j = pt.tpr - pt.fpr;
        if (j >= best_j) {
            best_j = j;
            curve.vacc_threshold = t;
            curve.vacc = static_cast<double>(tp + (negatives - fp)) / static_cast<double>(sorted.size());
        }
    }
    return curve;
}

std::vector<Score> score_pairs(std::span<const LabeledEmbedding> samples, std::span<const ScoredPair> pairs) {
    std::vector<Score> out;
    out.reserve(pairs.size());
    for (const ScoredPair& p : pairs)
        out.push_back({-euclidean_distance(samples[p.i].values, samples[p.j].values), p.genuine});
    return out;
}

ClassSplit split_per_class(const std::map<int, std::vector<ImageRef>>& images_by_class, double ratio,
                           std::uint64_t seed) {
    if (!(ratio > 0.0 && ratio < 1.0)) throw Error("split ratio must lie in (0, 1)");
    ClassSplit split;
    for (const auto& [label, refs] : images_by_class) {
        if (refs.size() < 2) throw Error("class " + std::to_string(label) + " has fewer than 2 images");
        std::vector<ImageRef> shuffled = refs;
        std::sort(shuffled.begin(), shuffled.end());
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(label)));
        rng.shuffle(std::span<ImageRef>(shuffled));
        const auto n = static_cast<long long>(shuffled.size());
        const long long cut = std::clamp(std::llround(ratio * static_cast<double>(n)), 1LL, n - 1);
        split.train.insert(split.train.end(), shuffled.begin(), shuffled.begin() + cut);
        split.test.insert(split.test.end(), shuffled.begin() + cut, shuffled.end());
    }
    return split;
}

std::vector<Fold> kfold_subjects(std::span<const int> subject_ids, int k, std::uint64_t seed) {
    if (k < 2) throw Error("k-fold needs k >= 2");
    std::vector<int> ids(subject_ids.begin(), subject_ids.end());
    std::sort(ids.begin(), ids.end());
    if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) throw Error("duplicate subject id");
    if (ids.size() < static_cast<std::size_t>(k))
        throw Error("k = " + std::to_string(k) + " exceeds the subject count " + std::to_string(ids.size()));
    Rng rng(seed);
    rng.shuffle(std::span<int>(ids));

    std::vector<Fold> folds(static_cast<std::size_t>(k));
    const std::size_t base = ids.size() / k, extra = ids.size() % k;
    std::size_t start = 0;
    for (int f = 0; f < k; ++f) {
        const std::size_t len = base + (static_cast<std::size_t>(f) < extra ? 1 : 0);
        for (std::size_t i = 0; i < ids.size(); ++i)
            (i >= start && i < start + len ? folds[f].test : folds[f].train).push_back(ids[i]);
        std::sort(folds[f].test.begin(), folds[f].test.end());
        std::sort(folds[f].train.begin(), folds[f].train.end());
        start += len;
    }
    return folds;
}

namespace {

MetricSummary summarize(const std::vector<double>& xs) {
    MetricSummary s;
    if (xs.empty()) return s;
    for (double x : xs) s.mean += x;
    s.mean /= static_cast<double>(xs.size());
    double var = 0.0;
    for (double x : xs) var += (x - s.mean) * (x - s.mean);
    s.std = std::sqrt(var / static_cast<double>(xs.size()));
    return s;
}

}  // namespace

EvalReport aggregate(std::span<const FoldMetrics> folds) {
    if (folds.empty()) throw Error("aggregate needs at least one fold");
    EvalReport r;
    r.folds.assign(folds.begin(), folds.end());
    std::vector<double> acc, vacc, auc;
    for (const FoldMetrics& f : folds) {
        acc.push_back(f.acc);
        vacc.push_back(f.vacc);
        auc.push_back(f.auc);
    }
    r.acc = summarize(acc);
    r.vacc = summarize(vacc);
    r.auc = summarize(auc);
    return r;
}

FoldMetrics evaluate_fold(std::span<const LabeledEmbedding> test, double impostor_ratio, std::uint64_t seed,
                          RocCurve* curve_out) {
    const GalleryProbeSplit split = make_gallery_probe(test, derive_seed(seed, 1));
    const IdentificationResult ident = identify(split);

    std::vector<int> labels;
    labels.reserve(test.size());
    for (const auto& s : test) labels.push_back(s.label);
    const auto pairs = make_pairs(labels, impostor_ratio, derive_seed(seed, 2));
    const auto scores = score_pairs(test, pairs);
    RocCurve curve = roc(scores);

    FoldMetrics m;
    m.acc = ident.accuracy;
    m.vacc = curve.vacc;
    m.auc = curve.auc;
    m.vacc_threshold = curve.vacc_threshold;
    m.n_classes = split.gallery.size();
    m.n_probes = split.probes.size();
    m.n_pairs = pairs.size();
    if (curve_out) *curve_out = std::move(curve);
    return m;
}

EvalReport evaluate_embeddings(std::span<const Embedding> embeddings, const EvaluationOptions& options,
                               std::vector<RocCurve>* curves) {
    std::vector<Embedding> sorted(embeddings.begin(), embeddings.end());
    std::sort(sorted.begin(), sorted.end(), [](const Embedding& a, const Embedding& b) { return a.ids < b.ids; });
    std::vector<int> patients;
    for (const Embedding& e : sorted)
        if (patients.empty() || patients.back() != e.ids.patient) patients.push_back(e.ids.patient);

    const auto folds = kfold_subjects(patients, options.folds, options.seed);
    std::vector<FoldMetrics> metrics;
    if (curves) curves->clear();
    for (std::size_t f = 0; f < folds.size(); ++f) {
        const std::set<int> test_ids(folds[f].test.begin(), folds[f].test.end());
        std::vector<LabeledEmbedding> test;
        for (const Embedding& e : sorted)
            if (test_ids.count(e.ids.patient)) test.push_back({e.ids.patient, e.values});
        log_info("fold " + std::to_string(f) + ": " + std::to_string(test_ids.size()) + " test subjects, " +
                 std::to_string(test.size()) + " samples");
        RocCurve curve;
        metrics.push_back(evaluate_fold(test, options.impostor_ratio, derive_seed(options.seed, 100 + f), &curve));
        if (curves) curves->push_back(std::move(curve));
    }
    return aggregate(metrics);
}

void save_report_csv(const EvalReport& report, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write report " + path.string());
    out << "fold,n_classes,n_probes,n_pairs,acc,vacc,auc,vacc_threshold\n";
    for (std::size_t f = 0; f < report.folds.size(); ++f) {
        const FoldMetrics& m = report.folds[f];
        out << f << ',' << m.n_classes << ',' << m.n_probes << ',' << m.n_pairs << ',' << format_real(m.acc) << ','
            << format_real(m.vacc) << ',' << format_real(m.auc) << ',' << format_real(m.vacc_threshold) << '\n';
    }
    out << "mean,,,," << format_real(report.acc.mean) << ',' << format_real(report.vacc.mean) << ','
        << format_real(report.auc.mean) << ",\n";
    out << "std,,,," << format_real(report.acc.std) << ',' << format_real(report.vacc.std) << ','
        << format_real(report.auc.std) << ",\n";
    if (!out) throw IoError("failed writing report " + path.string());
}

EvalReport load_report_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open report " + path.string());
    std::string line;
    if (!std::getline(in, line) || trim(line) != "fold,n_classes,n_probes,n_pairs,acc,vacc,auc,vacc_threshold")
        throw FormatError("unexpected report header in " + path.string());
    std::vector<FoldMetrics> folds;
    while (std::getline(in, line)) {
        const auto cells = split(trim(line), ',');
        if (cells.size() != 8) continue;
        if (cells[0] == "mean" || cells[0] == "std") continue;
        FoldMetrics m;
        m.n_classes = static_cast<std::size_t>(parse_int(cells[1]));
        m.n_probes = static_cast<std::size_t>(parse_int(cells[2]));
        m.n_pairs = static_cast<std::size_t>(parse_int(cells[3]));
        m.acc = parse_real(cells[4]);
        m.vacc = parse_real(cells[5]);
        m.auc = parse_real(cells[6]);
        m.vacc_threshold = parse_real(cells[7]);
        folds.push_back(m);
    }
    if (folds.empty()) throw FormatError("report has no fold rows: " + path.string());
    return aggregate(folds);
}

void save_roc_csv(const RocCurve& curve, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write ROC " + path.string());
    out << "fpr,tpr\n";
    for (const RocPoint& p : curve.points) out << format_real(p.fpr) << ',' << format_real(p.tpr) << '\n';
    if (!out) throw IoError("failed writing ROC " + path.string());
}

void save_roc_svg(const RocCurve& curve, const std::filesystem::path& path, const std::string& title) {
    constexpr double size = 400.0, pad = 40.0;
    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size + 2 * pad << "\" height=\"" << size + 2 * pad
        << "\">\n";
    svg << "<rect x=\"" << pad << "\" y=\"" << pad << "\" width=\"" << size << "\" height=\"" << size
        << "\" fill=\"none\" stroke=\"black\"/>\n";
    svg << "<line x1=\"" << pad << "\" y1=\"" << pad + size << "\" x2=\"" << pad + size << "\" y2=\"" << pad
        << "\" stroke=\"gray\" stroke-dasharray=\"4\"/>\n";
    svg << "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\" points=\"";
    for (const RocPoint& p : curve.points)
        svg << format_real(pad + p.fpr * size) << ',' << format_real(pad + (1.0 - p.tpr) * size) << ' ';
    svg << "\"/>\n";
    svg << "<text x=\"" << pad << "\" y=\"" << pad - 12 << "\" font-family=\"sans-serif\" font-size=\"14\">" << title
        << " (AUC " << format_real(std::round(curve.auc * 10000.0) / 10000.0) << ")</text>\n";
    svg << "<text x=\"" << pad + size / 2 - 10 << "\" y=\"" << pad + size + 28
        << "\" font-family=\"sans-serif\" font-size=\"12\">FPR</text>\n";
    svg << "<text x=\"8\" y=\"" << pad + size / 2 << "\" font-family=\"sans-serif\" font-size=\"12\">TPR</text>\n";
    svg << "</svg>\n";
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write ROC plot " + path.string());
    out << svg.str();
}

std::string compare_stages(std::span<const NamedReport> reports) {
    if (reports.size() < 2) throw Error("stage comparison needs at least two reports");
    for (const NamedReport& r : reports)
        if (r.report.folds.size() != reports.front().report.folds.size())
            throw Error("stage reports have different fold counts");
    std::string out = "stage,mean_acc,std_acc,mean_vacc,std_vacc,mean_auc,std_auc,delta_acc,delta_vacc,delta_auc\n";
    for (std::size_t i = 0; i < reports.size(); ++i) {
        const EvalReport& r = reports[i].report;
        const EvalReport& prev = reports[i == 0 ? 0 : i - 1].report;
        out += reports[i].stage + ',' + format_real(r.acc.mean) + ',' + format_real(r.acc.std) + ',' +
               format_real(r.vacc.mean) + ',' + format_real(r.vacc.std) + ',' + format_real(r.auc.mean) + ',' +
               format_real(r.auc.std) + ',' + format_real(r.acc.mean - prev.acc.mean) + ',' +
               format_real(r.vacc.mean - prev.vacc.mean) + ',' + format_real(r.auc.mean - prev.auc.mean) + '\n';
    }
    return out;
}

}  // namespace ctface
