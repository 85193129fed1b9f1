// Acceptance suite: one line per criterion, non-zero exit if any fails.
// Usage: ussl_acceptance [criterion numbers...]   (default: all)

#include "ussl/ussl.hpp"

#include "oracles.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace ussl;

namespace {

struct Verdict {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c);
    return buf;
}

Tensor gaussian(Shape shape, Rng& rng, double sd = 1.0) {
    std::normal_distribution<double> g(0.0, sd);
    Tensor t(std::move(shape));
    for (auto& v : t.values) v = g(rng);
    return t;
}

Tensor simplex_rows(std::size_t rows, std::size_t cols, Rng& rng) {
    std::uniform_real_distribution<double> u(0.05, 1.0);
    Tensor t({rows, cols});
    for (std::size_t i = 0; i < rows; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < cols; ++j) s += (t.at(i, j) = u(rng));
        for (std::size_t j = 0; j < cols; ++j) t.at(i, j) /= s;
    }
    return t;
}

Tensor unit_interval(std::size_t rows, std::size_t cols, Rng& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Tensor t({rows, cols});
    for (auto& v : t.values) v = u(rng);
    return t;
}

// ---- 1: gradient oracle ------------------------------------------------------------------

oracle::Matrix to_matrix(const Tensor& t) {
    oracle::Matrix m(t.shape[0], std::vector<double>(t.shape[1]));
    for (std::size_t i = 0; i < t.shape[0]; ++i)
        for (std::size_t j = 0; j < t.shape[1]; ++j) m[i][j] = t.at(i, j);
    return m;
}

oracle::Net to_net(const std::vector<Tensor>& p) {
    return {to_matrix(p[0]), p[1].values, to_matrix(p[2]), p[3].values, to_matrix(p[4]), p[5].values,
            to_matrix(p[6]), p[7].values, to_matrix(p[8])};
}

Verdict gradient_oracle() {
    ModelConfig mc;
    mc.input_dim = 2;
    mc.num_classes = 3;
    mc.hidden = {6};
    mc.feature_dim = 8;
    mc.certificates = 4;
    ModelParams model = init_model(mc, 2024);
    Rng rng(17);
    for (auto& p : model.tensors) p.value = gaussian(p.value.shape, rng, 0.7);

    const oracle::Matrix xl{{0.4, -1.1}}, xu{{-0.8, 0.3}, {1.2, 0.9}};
    const std::vector<std::size_t> yl{2};
    const oracle::Matrix q{{0.1, 0.7, 0.2}, {0.3, 0.3, 0.4}};
    const std::vector<std::uint8_t> mask{1, 0};
    const double a_ua = 75.0, a_ue = 1.0, lambda = 0.1;

    double worst = 0.0, value_gap = 0.0;
    std::size_t checked = 0;
    for (const auto norm : {AleatoricNorm::masked, AleatoricNorm::unlabeled}) {
        const bool per_row = norm == AleatoricNorm::unlabeled;
        ad::Graph g;
        const auto bound = bind(g, model);
        const auto heads = forward(bound, g.constant(Tensor::matrix(3, 2, {xl[0][0], xl[0][1], xu[0][0], xu[0][1], xu[1][0], xu[1][1]})));
        const auto terms = composite_loss(bound, heads, yl, Tensor::matrix(2, 3, {q[0][0], q[0][1], q[0][2], q[1][0], q[1][1], q[1][2]}),
                                          mask, a_ua, a_ue, lambda, norm);
        g.backward(terms.total);
        const auto grads = collect_grads(g, bound);

        std::vector<Tensor> values;
        for (const auto& p : model.tensors) values.push_back(p.value);
        value_gap = std::max(value_gap, std::abs(g.value(terms.total).item() -
                                                 oracle::composite(to_net(values), xl, yl, xu, q, mask, a_ua, a_ue, lambda, per_row)));
        const auto fd = ad::finite_diff_grad(
            [&](const std::vector<Tensor>& ps) { return oracle::composite(to_net(ps), xl, yl, xu, q, mask, a_ua, a_ue, lambda, per_row); },
            values, 1e-5);
        for (std::size_t t = 0; t < grads.size(); ++t)
            for (std::size_t j = 0; j < grads[t].size(); ++j) {
                const double a = grads[t].values[j], b = fd[t].values[j];
                worst = std::max(worst, std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8}));
                ++checked;
            }
    }
    return {worst <= 1e-4 && value_gap <= 1e-12,
            fmt("%.0f gradient entries (both normalizations), max relative error %.2e, loss gap %.1e", static_cast<double>(checked), worst, value_gap)};
}

// ---- 2: aleatoric closed form ----------------------------------------------------------

Verdict aleatoric_closed_form() {
    Rng rng(2);
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t h = 2 + static_cast<std::size_t>(trial % 5);
        const Tensor p = simplex_rows(1, h, rng), q = simplex_rows(1, h, rng);
        const std::vector<std::uint8_t> mask{1};
        double half_sq = 0.0;
        for (std::size_t j = 0; j < h; ++j) half_sq += 0.5 * (q.values[j] - p.values[j]) * (q.values[j] - p.values[j]);
        worst = std::max(worst, std::abs(aleatoric_nll(p, q, Tensor({1, h}, 0.0), mask) - half_sq));
    }
    const std::vector<std::uint8_t> mask{1};
    const double worked = aleatoric_nll(Tensor::matrix(1, 2, {0.7, 0.3}), Tensor::matrix(1, 2, {1.0, 0.0}), Tensor::matrix(1, 2, {0.5, 0.5}), mask);
    const double gap = std::abs(worked - oracle::diagonal_nll_scalar({0.7, 0.3}, {1.0, 0.0}, {0.5, 0.5}));
    return {worst <= 1e-10 && gap <= 1e-9, fmt("u=0 max gap %.1e, worked example %.6f (gap %.1e)", worst, worked, gap)};
}

// ---- 3: diagonal vs dense Gaussian -------------------------------------------------------

Verdict dense_equivalence() {
    Rng rng(3);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t h = 2 + static_cast<std::size_t>(trial % 9);
        const Tensor p = simplex_rows(1, h, rng), q = simplex_rows(1, h, rng), u = unit_interval(1, h, rng);
        const std::vector<std::uint8_t> mask{1};
        worst = std::max(worst, std::abs(aleatoric_nll(p, q, u, mask) - oracle::dense_gaussian_nll(p.values, q.values, u.values)));
    }
    return {worst <= 1e-10, fmt("100 instances, max gap %.1e", worst)};
}

// ---- 4: certificate properties -------------------------------------------------------------

Verdict certificate_properties() {
    Rng rng(4);
    const Tensor ortho = orthonormal_columns(32, 16, rng);
    const double at_zero = certificate_loss(ortho, Tensor({64, 32}, 0.0), 0.1);

    // Descend on C alone against features of the default network on two-moons inputs.
    TrainConfig cfg;
    const auto split = build_split(cfg);
    const auto model = init_model(model_config_for(cfg, split), cfg.seed);
    const std::vector<Sample> batch(split.unlabeled.begin(), split.unlabeled.begin() + 128);
    const Tensor phi = feature_extract(model, stack_features(batch));
    Tensor c = gaussian({32, 16}, rng, 1.0 / std::sqrt(32.0));
    const double before = orthogonality_defect(c);
    for (int step = 0; step < 200; ++step) {
        ad::Graph g;
        const auto cv = g.parameter(c);
        g.backward(certificate_loss(cv, g.constant(phi), 0.1));
        const Tensor& grad = g.grad(cv);
        for (std::size_t i = 0; i < c.size(); ++i) c.values[i] -= 0.1 * grad.values[i];
    }
    const double after = orthogonality_defect(c);
    const double reduction = 1.0 - after / before;
    return {at_zero <= 1e-15 && reduction >= 0.9,
            fmt("loss at (orthonormal, 0) = %.1e; defect %.3f -> %.4f", at_zero, before, after) + fmt(" (%.1f%% reduction)", 100.0 * reduction)};
}

// ---- 5: threshold semantics ----------------------------------------------------------------

Verdict threshold_semantics() {
    Rng rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> conf(1000);
    for (auto& c : conf) c = u(rng);
    for (std::size_t i = 0; i < 5; ++i) conf[i] = std::vector<double>{0.0, 0.5, 0.9, 0.95, 1.0}[i];  // ties on every threshold
    std::size_t disagreements = 0, prev = conf.size() + 1;
    bool monotone = true;
    std::string counts;
    for (double tau : {0.0, 0.5, 0.9, 0.95, 1.0}) {
        const auto mask = threshold_mask(conf, tau);
        std::size_t n = 0;
        for (std::size_t i = 0; i < conf.size(); ++i) {
            disagreements += mask[i] != (conf[i] > tau ? 1 : 0);
            n += mask[i];
        }
        monotone = monotone && n <= prev;
        prev = n;
        counts += (counts.empty() ? "" : ",") + std::to_string(n);
    }
    return {disagreements == 0 && monotone, "masked counts " + counts + ", disagreements " + std::to_string(disagreements)};
}

// ---- 6 and 7: SSL gain and certificate alignment --------------------------------------------

struct PairedRuns {
    std::vector<double> acc[4];  // full, neither, no_ua, no_ue
    std::vector<double> sep[2];  // full, neither
    bool done = false;
};

PairedRuns& paired_runs() {
    static PairedRuns runs;
    if (runs.done) return runs;
    const char* variants[] = {"full", "neither", "no_ua", "no_ue"};
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        TrainConfig cfg;
        cfg.seed = seed;
        const auto split = build_split(cfg);
        for (std::size_t v = 0; v < 4; ++v) {
            double acc = 0.0, sep = std::numeric_limits<double>::infinity();
            try {
                const auto r = train(apply_variant(cfg, variants[v]), split);
                acc = r.test_accuracy;
                if (v < 2) sep = certificate_histogram(r.selected, split.labeled, split.unlabeled, cfg.histogram_bins).separation;
            } catch (const std::exception& e) {
                std::fprintf(stderr, "  seed %llu %s failed: %s\n", static_cast<unsigned long long>(seed), variants[v], e.what());
            }
            runs.acc[v].push_back(acc);
            if (v < 2) runs.sep[v].push_back(sep);
        }
    }
    runs.done = true;
    return runs;
}

double mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

std::string join(const std::vector<double>& v) {
    std::string s;
    for (double x : v) s += (s.empty() ? "" : " ") + fmt("%.3f", x);
    return s;
}

Verdict ssl_gain() {
    const auto& r = paired_runs();
    const double full = mean(r.acc[0]), neither = mean(r.acc[1]), no_ua = mean(r.acc[2]), no_ue = mean(r.acc[3]);
    const bool pass = full - neither >= 0.05 && full > no_ua && full > no_ue;
    return {pass, fmt("mean test accuracy full %.4f, neither %.4f (gain %+.4f)", full, neither, full - neither) +
                      fmt(", no_ua %.4f, no_ue %.4f", no_ua, no_ue) + "; full per seed " + join(r.acc[0])};
}

Verdict certificate_alignment() {
    const auto& r = paired_runs();
    int wins = 0;
    for (std::size_t s = 0; s < r.sep[0].size(); ++s) wins += r.sep[0][s] < r.sep[1][s];
    return {wins >= 4, std::to_string(wins) + "/5 seeds; separation full [" + join(r.sep[0]) + "] vs neither [" + join(r.sep[1]) + "]"};
}

// ---- 8: determinism and checkpointing ---------------------------------------------------------

Verdict determinism_and_resume() {
    TrainConfig cfg;
    cfg.seed = 11;
    const auto split = build_split(cfg);
    Trainer a(cfg, split), b(cfg, split);
    a.run();
    b.run();
    const bool same_history = a.history().to_jsonl() == b.history().to_jsonl() && !a.history().empty();

    Trainer first(cfg, split);
    first.run(cfg.steps / 2);
    std::stringstream bytes;
    write_checkpoint(bytes, first.checkpoint());
    Trainer resumed = Trainer::resume(read_checkpoint(bytes), cfg, split);
    resumed.run();
    const bool same_params = resumed.params() == a.params() && resumed.ema() == a.ema();
    return {same_history && same_params, std::string("history ") + (same_history ? "identical" : "DIFFERS") + ", resume at step " +
                                             std::to_string(cfg.steps / 2) + (same_params ? " bit-exact" : " DIFFERS")};
}

// ---- 9: EMA and schedule units --------------------------------------------------------------------

Verdict ema_and_schedule() {
    ModelConfig mc;
    const auto a = init_model(mc, 1), b = init_model(mc, 2);
    bool ok = ema_update(EmaState{a, 0.0}, b).shadow == b && ema_update(EmaState{a, 1.0}, b).shadow == a;
    const auto mid = ema_update(EmaState{a, 0.5}, b).shadow;
    for (std::size_t i = 0; i < a.tensors.size(); ++i)
        for (std::size_t j = 0; j < a.tensors[i].value.size(); ++j)
            ok = ok && mid.tensors[i].value.values[j] == 0.5 * a.tensors[i].value.values[j] + 0.5 * b.tensors[i].value.values[j];
    const bool lr_ok = cosine_lr(0, 2000, 0.03, 0.5) == 0.03 && cosine_lr(2000, 2000, 0.03, 0.5) == 0.0;
    return {ok && lr_ok, std::string("ema identities ") + (ok ? "exact" : "INEXACT") + ", cosine endpoints " + (lr_ok ? "exact" : "INEXACT")};
}

struct Criterion {
    int id;
    const char* name;
    double budget_s;
    std::function<Verdict()> run;
};

}  // namespace

int main(int argc, char** argv) {
    const std::vector<Criterion> all{
        {1, "gradient oracle", 5.0, gradient_oracle},
        {2, "aleatoric closed form", 1.0, aleatoric_closed_form},
        {3, "diagonal/dense equivalence", 5.0, dense_equivalence},
        {4, "certificate properties", 10.0, certificate_properties},
        {5, "threshold semantics", 1.0, threshold_semantics},
        {6, "SSL gain over supervised-only", 300.0, ssl_gain},
        {7, "certificate score alignment", 300.0, certificate_alignment},
        {8, "determinism and resume", 120.0, determinism_and_resume},
        {9, "EMA and schedule units", 1.0, ema_and_schedule},
    };
    std::set<int> wanted;
    for (int i = 1; i < argc; ++i) wanted.insert(std::stoi(argv[i]));

    int failures = 0;
    double paired_seconds = 0.0;
    for (const auto& c : all) {
        if (!wanted.empty() && !wanted.count(c.id)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = c.run();
        } catch (const std::exception& e) {
            v = {false, std::string("threw: ") + e.what()};
        }
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        // Criteria 6 and 7 share one set of paired runs and one budget.
        if (c.id == 6 || c.id == 7) secs = (paired_seconds += secs);
        const bool in_time = secs < c.budget_s;
        const bool pass = v.pass && in_time;
        failures += !pass;
        std::printf("[%s] %d %s: %s (%.2fs%s)\n", pass ? "PASS" : "FAIL", c.id, c.name, v.detail.c_str(), secs,
                    in_time ? "" : fmt(", over %.0fs budget", c.budget_s).c_str());
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
