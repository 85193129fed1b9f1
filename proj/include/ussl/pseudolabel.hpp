#pragma once

#include "ussl/augment.hpp"
#include "ussl/model.hpp"

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace ussl {

struct PseudoLabelBatch {
    Tensor soft;                      // [B,h] averaged EMA prediction over weak views
    std::vector<std::size_t> hard;    // argmax of soft
    std::vector<double> confidence;   // max of soft, in [1/h, 1]
    std::vector<std::uint8_t> mask;   // confidence > tau

    [[nodiscard]] std::size_t masked_count() const {
        std::size_t n = 0;
        for (auto m : mask) n += m;
        return n;
    }
    [[nodiscard]] double masked_fraction() const {
        return mask.empty() ? 0.0 : static_cast<double>(masked_count()) / static_cast<double>(mask.size());
    }
};

/// m_i = 1 iff c_i > tau (strict).
inline std::vector<std::uint8_t> threshold_mask(std::span<const double> confidences, double tau) {
    if (!(tau >= 0.0 && tau <= 1.0)) throw std::invalid_argument("threshold_mask: tau must lie in [0, 1]");
    std::vector<std::uint8_t> mask(confidences.size());
    for (std::size_t i = 0; i < confidences.size(); ++i) mask[i] = confidences[i] > tau ? 1 : 0;
    return mask;
}

/// Engine for weak view `view` of sample `sample_id` at training step `step`.
inline Rng view_rng(std::uint64_t seed, std::uint64_t step, std::uint64_t sample_id, std::uint64_t view) {
    return make_rng(seed, Stream::guess, {step, sample_id, view});
}

/// Label guessing: q_i = mean over K weak views of the EMA model's probabilities.
/// Works on parameter values only and never touches an autodiff graph, so the
/// resulting targets carry no gradient.
///
/// The mean is formed as p_1 + (1/K) sum_k (p_k - p_1), which equals the single-view
/// prediction bit-for-bit when all views coincide.
inline PseudoLabelBatch guess_labels(const ModelParams& ema, const std::vector<std::vector<double>>& batch,
                                     std::span<const std::size_t> sample_ids, std::size_t views, const AugPolicy& weak,
                                     std::uint64_t seed, std::uint64_t step, double tau) {
    if (views == 0) throw std::invalid_argument("guess_labels: K must be at least 1");
    if (batch.empty()) throw std::invalid_argument("guess_labels: empty batch");
    if (sample_ids.size() != batch.size()) throw std::invalid_argument("guess_labels: one id per sample required");
    const std::size_t n = batch.size();
    std::vector<std::vector<double>> rows;
    rows.reserve(n * views);
    for (std::size_t k = 0; k < views; ++k) {
        for (std::size_t i = 0; i < n; ++i) {
            Rng rng = view_rng(seed, step, sample_ids[i], k);
            rows.push_back(weak(batch[i], rng));
        }
    }
    const Tensor probs = predict_probs(ema, feature_extract(ema, kernels::stack_rows(rows)));
    const std::size_t h = probs.cols();

    PseudoLabelBatch out;
    out.soft = Tensor({n, h});
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < h; ++j) {
            const double first = probs.values[i * h + j];
            double spread = 0.0;
            for (std::size_t k = 1; k < views; ++k) spread += probs.values[(k * n + i) * h + j] - first;
            out.soft.values[i * h + j] = first + spread / static_cast<double>(views);
        }
    }
    out.hard.resize(n);
    out.confidence.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        out.hard[i] = kernels::argmax_row(out.soft, i);
        out.confidence[i] = out.soft.values[i * h + out.hard[i]];
    }
    out.mask = threshold_mask(out.confidence, tau);
    return out;
}

inline PseudoLabelBatch guess_labels(const ModelParams& ema, const std::vector<std::vector<double>>& batch, std::size_t views,
                                     const AugPolicy& weak, std::uint64_t seed, double tau) {
    std::vector<std::size_t> ids(batch.size());
    for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i;
    return guess_labels(ema, batch, ids, views, weak, seed, 0, tau);
}

}  // namespace ussl
