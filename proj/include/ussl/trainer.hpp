#pragma once

// Training loop for the composite objective
//   L = L_S + alpha_UA * L_UA + alpha_UE * L_UE
// with EMA label guessing, checkpoint/resume and the ablation harness.

#include "ussl/augment.hpp"
#include "ussl/autodiff.hpp"
#include "ussl/checkpoint.hpp"
#include "ussl/config.hpp"
#include "ussl/datasets.hpp"
#include "ussl/history.hpp"
#include "ussl/losses.hpp"
#include "ussl/metrics.hpp"
#include "ussl/model.hpp"
#include "ussl/optim.hpp"
#include "ussl/pseudolabel.hpp"
#include "ussl/rng.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace ussl {

class TrainingAborted : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Builds the standardized split described by `cfg.data`, keyed by `cfg.seed`.
inline SplitDataset build_split(const TrainConfig& cfg) {
    const auto& d = cfg.data;
    Dataset pool, test;
    switch (d.kind) {
        case DataKind::two_moons:
            pool = make_two_moons(d.n, d.noise, cfg.seed);
            test = make_two_moons(d.n_test, d.noise, mix_seed(cfg.seed, {static_cast<std::uint64_t>(Stream::test_set)}));
            break;
        case DataKind::blobs:
            pool = make_blobs(d.n, d.centers, d.noise, cfg.seed);
            test = make_blobs(d.n_test, d.centers, d.noise, mix_seed(cfg.seed, {static_cast<std::uint64_t>(Stream::test_set)}));
            break;
        case DataKind::csv:
        case DataKind::idx: {
            Dataset all = d.kind == DataKind::csv ? load_csv_dataset(d.path, d.label_column) : load_idx_dataset(d.path, d.labels_path);
            std::tie(pool, test) = carve_balanced(all, d.test_fraction, cfg.seed);
            break;
        }
    }
    SplitDataset split = split_labeled(pool, cfg.labels_per_class, cfg.val_fraction, cfg.seed);
    attach_test_set(split, test);
    return standardize(std::move(split));
}

inline ModelConfig model_config_for(const TrainConfig& cfg, const SplitDataset& split) {
    ModelConfig m;
    m.input_dim = split.feature_dim;
    m.num_classes = split.num_classes;
    m.hidden = cfg.hidden;
    m.feature_dim = cfg.feature_dim;
    m.certificates = cfg.certificates;
    return m;
}

struct TrainResult {
    ModelParams params;
    EmaState ema;
    RunHistory history;
    ModelParams selected;  // EMA snapshot with the best validation accuracy
    std::size_t selected_step = 0;
    double test_accuracy = 0.0;  // of `selected`
    LossBreakdown final_loss;
};

struct CompositeTerms {
    ad::Var l_s, l_ua, l_ue, total;
};

/// Composite objective over one forward pass whose first labels.size() rows are
/// labeled and whose remaining rows are unlabeled with targets q and mask.
/// Terms with zero weight are computed for logging but left out of `total`.
inline CompositeTerms composite_loss(const BoundModel& bound, const HeadVars& heads, const std::vector<std::size_t>& labels,
                                     const Tensor& q, const std::vector<std::uint8_t>& mask, double alpha_ua, double alpha_ue,
                                     double lambda, AleatoricNorm norm = AleatoricNorm::masked) {
    ad::Graph& graph = *heads.probs.graph;
    const std::size_t n_lab = labels.size(), rows = graph.value(heads.probs).shape[0];
    if (n_lab > rows || rows - n_lab != mask.size()) throw ShapeError("composite_loss: row count does not match labels + mask");
    std::vector<std::size_t> lab_rows(n_lab), unl_rows(rows - n_lab);
    std::iota(lab_rows.begin(), lab_rows.end(), std::size_t{0});
    std::iota(unl_rows.begin(), unl_rows.end(), n_lab);

    CompositeTerms t;
    t.l_s = supervised_ce(ad::select_rows(heads.probs, lab_rows), labels);
    t.l_ua = unl_rows.empty() ? graph.constant(Tensor::scalar(0.0))
                              : aleatoric_nll(ad::select_rows(heads.probs, unl_rows), q, ad::select_rows(heads.u, unl_rows), mask, norm);
    t.l_ue = certificate_loss(bound.certificates(), heads.features, lambda);
    t.total = t.l_s;
    if (alpha_ua > 0.0) t.total = t.total + ad::scale(t.l_ua, alpha_ua);
    if (alpha_ue > 0.0) t.total = t.total + ad::scale(t.l_ue, alpha_ue);
    return t;
}

/// Owns parameters, optimizer state and the sampling engine of one run.
/// The split must outlive the trainer.
class Trainer {
public:
    Trainer(TrainConfig cfg, const SplitDataset& split)
        : cfg_(std::move(cfg)),
          split_(&split),
          params_(init_model(model_config_for(cfg_, split), cfg_.seed)),
          ema_{params_, cfg_.ema_decay},
          selected_(params_),
          sampler_(make_rng(cfg_.seed, Stream::sampler)),
          weak_(weak_policy(cfg_.augment, split.image)),
          strong_(strong_policy(cfg_.augment, split.image)) {
        validate(cfg_);
        if (split.labeled.empty()) throw std::invalid_argument("trainer: split has no labeled samples");
    }

    /// Restores a run saved by save_checkpoint() against the same config and split.
    static Trainer resume(const CheckpointData& ckpt, TrainConfig cfg, const SplitDataset& split) {
        Trainer t(std::move(cfg), split);
        check_same_layout(t.params_, ckpt.params, "resume");
        t.params_ = ckpt.params;
        t.ema_ = ckpt.ema;
        t.selected_ = ckpt.selected;
        t.best_val_ = ckpt.selected_val_accuracy;
        t.selected_step_ = ckpt.selected_step;
        t.opt_ = ckpt.optimizer;
        t.step_ = ckpt.step;
        std::istringstream(ckpt.sampler_state) >> t.sampler_;
        t.masked_sum_ = ckpt.masked_sum;
        t.masked_count_ = ckpt.masked_count;
        t.last_loss_ = ckpt.last_loss;
        t.history_ = RunHistory::from_jsonl(ckpt.history_jsonl);
        return t;
    }

    [[nodiscard]] CheckpointData checkpoint() const {
        CheckpointData c;
        c.config_text = config_to_text(cfg_);
        c.params = params_;
        c.ema = ema_;
        c.selected = selected_;
        c.selected_val_accuracy = best_val_;
        c.selected_step = selected_step_;
        c.optimizer = opt_;
        c.step = step_;
        std::ostringstream rs;
        rs << sampler_;
        c.sampler_state = rs.str();
        c.masked_sum = masked_sum_;
        c.masked_count = masked_count_;
        c.last_loss = last_loss_;
        c.history_jsonl = history_.to_jsonl();
        c.normalizer = split_->normalizer;
        return c;
    }

    /// One optimization step. Throws TrainingAborted, leaving state untouched,
    /// when the loss or a gradient is non-finite.
    void step() {
        if (step_ >= cfg_.steps) throw std::logic_error("trainer: run already finished");
        const SplitDataset& split = *split_;
        const std::size_t t = step_;
        const double lr = scheduled_lr(cfg_.schedule, t, cfg_.steps, cfg_.lr, cfg_.cosine_factor);

        const std::size_t n_lab = cfg_.batch_size_labeled;
        const bool has_unlabeled = !split.unlabeled.empty();
        const std::size_t n_unl = has_unlabeled ? cfg_.unlabeled_ratio * n_lab : 0;
        std::uniform_int_distribution<std::size_t> pick_lab(0, split.labeled.size() - 1);
        std::vector<std::size_t> lab_idx(n_lab), unl_idx(n_unl);
        for (auto& i : lab_idx) i = pick_lab(sampler_);
        if (has_unlabeled) {
            std::uniform_int_distribution<std::size_t> pick_unl(0, split.unlabeled.size() - 1);
            for (auto& i : unl_idx) i = pick_unl(sampler_);
        }

        std::vector<std::vector<double>> rows;
        rows.reserve(n_lab + n_unl);
        std::vector<std::size_t> labels(n_lab);
        for (std::size_t i = 0; i < n_lab; ++i) {
            Rng rng = make_rng(cfg_.seed, Stream::labeled_weak, {t, i});
            rows.push_back(weak_(split.labeled[lab_idx[i]].x, rng));
            labels[i] = static_cast<std::size_t>(*split.labeled[lab_idx[i]].y);
        }

        std::optional<PseudoLabelBatch> guess;
        if (has_unlabeled) {
            std::vector<std::vector<double>> unl_x;
            unl_x.reserve(n_unl);
            for (auto i : unl_idx) unl_x.push_back(split.unlabeled[i].x);
            guess = guess_labels(ema_.shadow, unl_x, unl_idx, cfg_.views, weak_, cfg_.seed, t, cfg_.tau);
            for (std::size_t i = 0; i < n_unl; ++i) {
                Rng rng = make_rng(cfg_.seed, Stream::unlabeled_strong, {t, i});
                rows.push_back(strong_(unl_x[i], rng));
            }
        }

        ad::Graph graph;
        const BoundModel bound = bind(graph, params_);
        const HeadVars heads = forward(bound, graph.constant(kernels::stack_rows(rows)));
        if (!graph.value(heads.features).all_finite() || !graph.value(heads.probs).all_finite() || !graph.value(heads.u).all_finite()) {
            throw TrainingAborted("trainer: non-finite model output at step " + std::to_string(t));
        }

        const double a_ua = cfg_.effective_alpha_ua(), a_ue = cfg_.effective_alpha_ue();
        const CompositeTerms terms = guess ? composite_loss(bound, heads, labels, guess->soft, guess->mask, a_ua, a_ue, cfg_.lambda,
                                                            cfg_.ua_normalization)
                                           : composite_loss(bound, heads, labels, Tensor({0, split.num_classes}), {}, a_ua, a_ue, cfg_.lambda);
        const ad::Var total = terms.total;
        LossBreakdown loss = total_loss(graph.value(terms.l_s).item(), graph.value(terms.l_ua).item(), graph.value(terms.l_ue).item(),
                                        a_ua, a_ue, cfg_.lambda);
        loss.masked_fraction = guess ? guess->masked_fraction() : 0.0;
        if (!std::isfinite(graph.value(total).item())) {
            throw TrainingAborted("trainer: non-finite loss at step " + std::to_string(t));
        }

        graph.backward(total);
        const auto grads = collect_grads(graph, bound);
        try {
            if (cfg_.optimizer == OptimizerKind::sgd) {
                sgd_step(params_.tensors, grads, opt_, lr, cfg_.momentum, cfg_.weight_decay);
            } else {
                adamw_step(params_.tensors, grads, opt_, lr, cfg_.adam, cfg_.weight_decay);
            }
        } catch (const NonFiniteGradient& e) {
            throw TrainingAborted(std::string("trainer: step ") + std::to_string(t) + ": " + e.what());
        }
        ema_update_inplace(ema_, params_);

        last_loss_ = loss;
        masked_sum_ += loss.masked_fraction;
        ++masked_count_;
        ++step_;
        if (step_ % cfg_.eval_every == 0 || step_ == cfg_.steps) record(lr);
    }

    /// Steps until `until` steps have been taken in total (capped at cfg.steps).
    void run(std::size_t until) {
        until = std::min(until, cfg_.steps);
        while (step_ < until) step();
    }
    void run() { run(cfg_.steps); }

    [[nodiscard]] bool finished() const { return step_ >= cfg_.steps; }
    [[nodiscard]] std::size_t current_step() const { return step_; }
    [[nodiscard]] const TrainConfig& config() const { return cfg_; }
    [[nodiscard]] const ModelParams& params() const { return params_; }
    [[nodiscard]] const EmaState& ema() const { return ema_; }
    [[nodiscard]] const ModelParams& selected() const { return selected_; }
    [[nodiscard]] std::size_t selected_step() const { return selected_step_; }
    [[nodiscard]] const RunHistory& history() const { return history_; }
    [[nodiscard]] const LossBreakdown& last_loss() const { return last_loss_; }
    [[nodiscard]] const AugPolicy& weak_policy_used() const { return weak_; }
    [[nodiscard]] const AugPolicy& strong_policy_used() const { return strong_; }

    [[nodiscard]] TrainResult result() const {
        TrainResult r;
        r.params = params_;
        r.ema = ema_;
        r.history = history_;
        r.selected = selected_;
        r.selected_step = selected_step_;
        r.final_loss = last_loss_;
        r.test_accuracy = split_->test.empty() ? std::numeric_limits<double>::quiet_NaN() : accuracy(selected_, split_->test);
        return r;
    }

private:
    void record(double lr) {
        const SplitDataset& split = *split_;
        const ModelParams& eval_model = ema_.shadow;
        EvalRecord rec;
        rec.step = step_;
        rec.lr = lr;
        rec.loss = last_loss_;
        rec.loss.masked_fraction = masked_count_ ? masked_sum_ / static_cast<double>(masked_count_) : 0.0;
        masked_sum_ = 0.0;
        masked_count_ = 0;
        const auto quality = pseudo_label_quality(eval_model, split, cfg_.tau);
        rec.pseudo_label_accuracy = quality.masked_accuracy;
        rec.pseudo_label_coverage = quality.coverage;
        if (!split.validation.empty()) rec.val_accuracy = accuracy(eval_model, split.validation);
        if (!split.test.empty()) rec.test_accuracy = accuracy(eval_model, split.test);
        rec.cert_score_labeled = mean_of(certificate_scores(eval_model, split.labeled));
        rec.cert_score_unlabeled = split.unlabeled.empty() ? 0.0 : mean_of(certificate_scores(eval_model, split.unlabeled));

        // Model selection on validation accuracy; without a validation set the latest EMA wins.
        const double val = rec.val_accuracy.value_or(std::numeric_limits<double>::infinity());
        if (val > best_val_ || !rec.val_accuracy) {
            best_val_ = rec.val_accuracy.value_or(best_val_);
            selected_ = eval_model;
            selected_step_ = step_;
        }
        history_.append(std::move(rec));
    }

    TrainConfig cfg_;
    const SplitDataset* split_;
    ModelParams params_;
    EmaState ema_;
    ModelParams selected_;
    double best_val_ = -1.0;
    std::size_t selected_step_ = 0;
    OptimizerState opt_;
    std::size_t step_ = 0;
    Rng sampler_;
    AugPolicy weak_;
    AugPolicy strong_;
    double masked_sum_ = 0.0;
    std::uint64_t masked_count_ = 0;
    LossBreakdown last_loss_;
    RunHistory history_;
};

inline TrainResult train(const TrainConfig& cfg, const SplitDataset& split) {
    Trainer t(cfg, split);
    t.run();
    return t.result();
}

// ---- ablation harness -------------------------------------------------------------

struct AblationRow {
    std::string variant;
    double test_accuracy = std::numeric_limits<double>::quiet_NaN();
    LossBreakdown final_loss;
    std::string split_checksum;
    std::string error;  // empty on success
};

/// Applies a variant name to a config: full | no_ua | no_ue | neither | lambda=<value>.
inline TrainConfig apply_variant(TrainConfig cfg, const std::string& variant) {
    if (variant == "full") {
        cfg.enable_ua = cfg.enable_ue = true;
    } else if (variant == "no_ua") {
        cfg.enable_ua = false;
        cfg.enable_ue = true;
    } else if (variant == "no_ue") {
        cfg.enable_ua = true;
        cfg.enable_ue = false;
    } else if (variant == "neither") {
        cfg.enable_ua = cfg.enable_ue = false;
    } else if (variant.rfind("lambda=", 0) == 0) {
        auto v = detail::parse_double(std::string_view(variant).substr(7));
        if (!v || *v < 0.0) throw ConfigError("variant '" + variant + "': lambda must be a nonnegative real");
        cfg.enable_ua = cfg.enable_ue = true;
        cfg.lambda = *v;
    } else {
        throw ConfigError("unknown variant '" + variant + "' (expected full, no_ua, no_ue, neither, lambda=<value>)");
    }
    return cfg;
}

inline std::vector<std::string> parse_variant_list(std::string_view list) {
    std::vector<std::string> out;
    for (auto part : detail::split_commas(list)) {
        auto name = std::string(detail::trim(part));
        if (name.empty()) continue;
        (void)apply_variant(TrainConfig{}, name);  // validates the name
        out.push_back(std::move(name));
    }
    if (out.empty()) throw ConfigError("variant list is empty");
    return out;
}

/// Runs every variant on one shared split. A failing row records its error and
/// the remaining rows still run.
inline std::vector<AblationRow> ablate(const TrainConfig& cfg, const std::vector<std::string>& variants, const SplitDataset& split) {
    const std::string checksum = split_checksum(split);
    std::vector<AblationRow> rows;
    for (const auto& v : variants) {
        AblationRow row;
        row.variant = v;
        row.split_checksum = checksum;
        try {
            const auto result = train(apply_variant(cfg, v), split);
            row.test_accuracy = result.test_accuracy;
            row.final_loss = result.final_loss;
        } catch (const std::exception& e) {
            row.error = e.what();
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

inline std::vector<AblationRow> ablate(const TrainConfig& cfg, const std::vector<std::string>& variants) {
    const SplitDataset split = build_split(cfg);
    return ablate(cfg, variants, split);
}

inline std::string ablation_csv(const std::vector<AblationRow>& rows) {
    std::string out = "variant,test_accuracy,l_s,l_ua,l_ue,total,split_checksum\n";
    for (const auto& r : rows) {
        out += r.variant + ',' + detail::format_double(r.test_accuracy) + ',' + detail::format_double(r.final_loss.l_s) + ',' +
               detail::format_double(r.final_loss.l_ua) + ',' + detail::format_double(r.final_loss.l_ue) + ',' +
               detail::format_double(r.final_loss.total) + ',' + r.split_checksum + '\n';
    }
    return out;
}

}  // namespace ussl
