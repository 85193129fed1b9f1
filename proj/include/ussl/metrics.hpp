#pragma once

// Evaluation metrics, certificate-score histograms and embedding export.

#include "ussl/augment.hpp"
#include "ussl/datasets.hpp"
#include "ussl/model.hpp"
#include "ussl/pseudolabel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace ussl {

/// Worker threads for read-only evaluation, from USSL_THREADS (default 1).
inline std::size_t worker_threads() {
    const char* env = std::getenv("USSL_THREADS");
    if (env == nullptr) return 1;
    auto v = detail::parse_int(env);
    if (!v || *v < 1) return 1;
    return static_cast<std::size_t>(*v);
}

inline Tensor stack_features(const std::vector<Sample>& samples) {
    std::vector<std::vector<double>> rows;
    rows.reserve(samples.size());
    for (const auto& s : samples) rows.push_back(s.x);
    return kernels::stack_rows(rows);
}

namespace detail {

// Runs fn(begin, end) over contiguous chunks, one per worker.
template <typename F>
void parallel_chunks(std::size_t n, F&& fn) {
    const std::size_t workers = std::min(worker_threads(), std::max<std::size_t>(n, 1));
    if (workers <= 1) {
        fn(std::size_t{0}, n);
        return;
    }
    std::vector<std::thread> pool;
    const std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t begin = w * chunk, end = std::min(n, begin + chunk);
        if (begin >= end) break;
        pool.emplace_back([&fn, begin, end] { fn(begin, end); });
    }
    for (auto& t : pool) t.join();
}

}  // namespace detail

/// Argmax class per sample.
inline std::vector<std::size_t> predict_classes(const ModelParams& params, const std::vector<Sample>& samples) {
    std::vector<std::size_t> out(samples.size());
    detail::parallel_chunks(samples.size(), [&](std::size_t begin, std::size_t end) {
        std::vector<Sample> part(samples.begin() + static_cast<std::ptrdiff_t>(begin), samples.begin() + static_cast<std::ptrdiff_t>(end));
        const Tensor probs = predict_probs(params, feature_extract(params, stack_features(part)));
        for (std::size_t i = begin; i < end; ++i) out[i] = kernels::argmax_row(probs, i - begin);
    });
    return out;
}

/// Fraction of samples whose argmax prediction equals the label.
inline double accuracy(const ModelParams& params, const std::vector<Sample>& eval) {
    if (eval.empty()) throw std::invalid_argument("accuracy: empty evaluation set");
    const auto pred = predict_classes(params, eval);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < eval.size(); ++i) {
        if (!eval[i].y) throw std::invalid_argument("accuracy: evaluation sample " + std::to_string(i) + " has no label");
        if (static_cast<int>(pred[i]) == *eval[i].y) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(eval.size());
}

/// ||C^T phi(x)||^2 per sample on un-augmented inputs.
inline std::vector<double> certificate_scores(const ModelParams& params, const std::vector<Sample>& samples) {
    if (samples.empty()) return {};
    return certificate_scores(predict_certificates(params, feature_extract(params, stack_features(samples))));
}

inline double mean_of(const std::vector<double>& v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

/// Linear-interpolation quantile of sorted data (position q * (n - 1)).
inline double quantile_sorted(const std::vector<double>& sorted, double q) {
    if (sorted.empty()) return std::numeric_limits<double>::quiet_NaN();
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    if (frac == 0.0) return sorted[lo];
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

/// |mean_a - mean_b| / pooled standard deviation (unbiased within-group variances).
/// Zero spread with equal means gives 0; zero spread with different means gives +inf.
inline double separation(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() < 2 || b.size() < 2) throw std::invalid_argument("separation: each pool needs at least two scores");
    const double ma = mean_of(a), mb = mean_of(b);
    double sa = 0.0, sb = 0.0;
    for (double x : a) sa += (x - ma) * (x - ma);
    for (double x : b) sb += (x - mb) * (x - mb);
    const double pooled = std::sqrt((sa + sb) / static_cast<double>(a.size() + b.size() - 2));
    const double diff = std::abs(ma - mb);
    if (pooled == 0.0) return diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return diff / pooled;
}

inline constexpr double kReportQuantiles[] = {0.01, 0.25, 0.5, 0.75, 0.99};

struct PoolSummary {
    std::size_t count = 0;
    double mean = 0.0;
    std::vector<double> quantiles;  // at kReportQuantiles
};

struct HistogramReport {
    std::vector<double> edges;  // bins + 1, strictly increasing
    std::vector<std::size_t> labeled_counts;
    std::vector<std::size_t> unlabeled_counts;
    PoolSummary labeled;
    PoolSummary unlabeled;
    double separation = 0.0;
};

namespace detail {

inline PoolSummary summarize(std::vector<double> scores) {
    PoolSummary s;
    s.count = scores.size();
    s.mean = mean_of(scores);
    std::sort(scores.begin(), scores.end());
    for (double q : kReportQuantiles) s.quantiles.push_back(quantile_sorted(scores, q));
    return s;
}

inline std::vector<std::size_t> bin_counts(const std::vector<double>& scores, const std::vector<double>& edges) {
    const std::size_t bins = edges.size() - 1;
    std::vector<std::size_t> counts(bins, 0);
    for (double s : scores) {
        // last bin is closed on the right
        auto it = std::upper_bound(edges.begin(), edges.end(), s);
        std::size_t b = it == edges.begin() ? 0 : static_cast<std::size_t>(it - edges.begin()) - 1;
        counts[std::min(b, bins - 1)]++;
    }
    return counts;
}

}  // namespace detail

/// Histogram of scores for two pools over shared edges spanning the pooled range.
/// A degenerate range (all scores equal) is widened by +-0.5 so edges stay increasing.
inline HistogramReport score_histogram(const std::vector<double>& labeled, const std::vector<double>& unlabeled, std::size_t bins) {
    if (labeled.empty() || unlabeled.empty()) throw std::invalid_argument("certificate_histogram: both pools must be nonempty");
    if (bins < 2) throw std::invalid_argument("certificate_histogram: need at least two bins");
    double lo = std::min(*std::min_element(labeled.begin(), labeled.end()), *std::min_element(unlabeled.begin(), unlabeled.end()));
    double hi = std::max(*std::max_element(labeled.begin(), labeled.end()), *std::max_element(unlabeled.begin(), unlabeled.end()));
    if (!(hi > lo)) {
        lo -= 0.5;
        hi += 0.5;
    }
    HistogramReport r;
    r.edges.resize(bins + 1);
    for (std::size_t i = 0; i <= bins; ++i) r.edges[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(bins);
    r.edges.back() = hi;
    r.labeled_counts = detail::bin_counts(labeled, r.edges);
    r.unlabeled_counts = detail::bin_counts(unlabeled, r.edges);
    r.labeled = detail::summarize(labeled);
    r.unlabeled = detail::summarize(unlabeled);
    r.separation = labeled.size() >= 2 && unlabeled.size() >= 2 ? separation(labeled, unlabeled) : 0.0;
    return r;
}

inline HistogramReport certificate_histogram(const ModelParams& params, const std::vector<Sample>& labeled,
                                             const std::vector<Sample>& unlabeled, std::size_t bins) {
    return score_histogram(certificate_scores(params, labeled), certificate_scores(params, unlabeled), bins);
}

inline void write_histogram_csv(const HistogramReport& r, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << "bin_low,bin_high,labeled_count,unlabeled_count\n";
    for (std::size_t i = 0; i + 1 < r.edges.size(); ++i)
        out << detail::format_double(r.edges[i]) << ',' << detail::format_double(r.edges[i + 1]) << ',' << r.labeled_counts[i]
            << ',' << r.unlabeled_counts[i] << '\n';
    if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

inline void write_histogram_summary_csv(const HistogramReport& r, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << "pool,count,mean,q01,q25,q50,q75,q99,separation\n";
    auto row = [&](const char* name, const PoolSummary& s) {
        out << name << ',' << s.count << ',' << detail::format_double(s.mean);
        for (double q : s.quantiles) out << ',' << detail::format_double(q);
        out << ',' << detail::format_double(r.separation) << '\n';
    };
    row("labeled", r.labeled);
    row("unlabeled", r.unlabeled);
    if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

struct PseudoLabelQuality {
    double coverage = 0.0;                   // share of the pool above tau
    std::optional<double> masked_accuracy;   // hard-label agreement with truth above tau
    std::optional<double> unmasked_accuracy; // ... and at or below tau
};

/// Pseudo-label agreement with the fenced ground truth, using single un-augmented
/// views of the unlabeled pool. Samples without hidden truth are skipped.
inline PseudoLabelQuality pseudo_label_quality(const ModelParams& params, const SplitDataset& split, double tau) {
    PseudoLabelQuality q;
    const auto& truth = split.unlabeled_truth_for_evaluation();
    if (split.unlabeled.empty()) return q;
    const Tensor probs = predict_probs(params, feature_extract(params, stack_features(split.unlabeled)));
    std::size_t masked = 0, masked_ok = 0, open = 0, open_ok = 0, total = 0;
    for (std::size_t i = 0; i < split.unlabeled.size(); ++i) {
        if (i >= truth.size() || !truth[i]) continue;
        ++total;
        const auto cls = kernels::argmax_row(probs, i);
        const bool ok = static_cast<int>(cls) == *truth[i];
        if (probs.at(i, cls) > tau) {
            ++masked;
            masked_ok += ok;
        } else {
            ++open;
            open_ok += ok;
        }
    }
    if (total) q.coverage = static_cast<double>(masked) / static_cast<double>(total);
    if (masked) q.masked_accuracy = static_cast<double>(masked_ok) / static_cast<double>(masked);
    if (open) q.unmasked_accuracy = static_cast<double>(open_ok) / static_cast<double>(open);
    return q;
}

/// CSV rows: id,pool,f0..f{d-1},true_label,pred_label. Labeled samples are
/// exported under a weak view, unlabeled samples under a strong view, each drawn
/// from an engine keyed by (seed, pool, index) so re-export is byte-identical.
/// Unlabeled truth comes from the evaluation-only accessor (empty when unknown).
inline void export_embeddings(const ModelParams& params, const SplitDataset& split, const AugPolicy& weak, const AugPolicy& strong,
                              std::uint64_t seed, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("export_embeddings: cannot write '" + path + "'");
    const std::size_t d = params.config.feature_dim;
    out << "id,pool";
    for (std::size_t j = 0; j < d; ++j) out << ",f" << j;
    out << ",true_label,pred_label\n";

    auto emit = [&](const std::vector<Sample>& pool, const char* tag, std::uint64_t pool_id, const AugPolicy& policy,
                    const std::vector<std::optional<int>>& truth, std::size_t id_offset) {
        if (pool.empty()) return;
        std::vector<std::vector<double>> rows;
        rows.reserve(pool.size());
        for (std::size_t i = 0; i < pool.size(); ++i) {
            Rng rng = make_rng(seed, Stream::export_views, {pool_id, i});
            rows.push_back(policy(pool[i].x, rng));
        }
        const Tensor feats = feature_extract(params, kernels::stack_rows(rows));
        const Tensor logits = predict_logits(params, feats);
        for (std::size_t i = 0; i < pool.size(); ++i) {
            out << (id_offset + i) << ',' << tag;
            for (std::size_t j = 0; j < d; ++j) out << ',' << detail::format_double(feats.at(i, j));
            out << ',' << (truth[i] ? std::to_string(*truth[i]) : "") << ',' << kernels::argmax_row(logits, i) << '\n';
        }
    };
    std::vector<std::optional<int>> labeled_truth;
    for (const auto& s : split.labeled) labeled_truth.push_back(s.y);
    emit(split.labeled, "labeled-weak", 0, weak, labeled_truth, 0);
    auto unlabeled_truth = split.unlabeled_truth_for_evaluation();
    unlabeled_truth.resize(split.unlabeled.size());
    emit(split.unlabeled, "unlabeled-strong", 1, strong, unlabeled_truth, split.labeled.size());
    if (!out) throw std::runtime_error("export_embeddings: write failed for '" + path + "'");
}

}  // namespace ussl
