// ussl: train, evaluate, ablate and report on semi-supervised runs.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure.

#include "ussl/ussl.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;

struct RuntimeFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw RuntimeFailure("cannot write '" + path.string() + "'");
    out << text;
    if (!out) throw RuntimeFailure("write failed for '" + path.string() + "'");
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw RuntimeFailure("cannot create directory '" + dir.string() + "': " + ec.message());
}

ussl::TrainConfig load_with_overrides(const std::string& path, const std::vector<std::string>& sets, std::optional<std::uint64_t> seed,
                                      const std::string& out) {
    ussl::TrainConfig cfg = ussl::load_config(path);
    for (const auto& kv : sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw ussl::ConfigError("--set expects KEY=VALUE, got '" + kv + "'");
        ussl::set_config_value(cfg, ussl::detail::trim(std::string_view(kv).substr(0, eq)),
                               ussl::detail::trim(std::string_view(kv).substr(eq + 1)));
    }
    if (seed) cfg.seed = *seed;
    if (!out.empty()) cfg.out_dir = out;
    ussl::validate(cfg);
    return cfg;
}

std::string opt_json(const std::optional<double>& v) { return v ? ussl::detail::format_double(*v) : "null"; }

// ---- train ----------------------------------------------------------------------------

int run_train(const std::string& config_path, const std::vector<std::string>& sets, std::optional<std::uint64_t> seed,
              const std::string& out) {
    const ussl::TrainConfig cfg = load_with_overrides(config_path, sets, seed, out);
    const fs::path dir = cfg.out_dir;
    ensure_dir(dir);
    write_text(dir / "effective.cfg", ussl::config_to_text(cfg));

    const ussl::SplitDataset split = ussl::build_split(cfg);
    ussl::save_split_csv(split, (dir / "split.csv").string());
    ussl::Trainer trainer(cfg, split);
    std::cout << "split " << ussl::split_checksum(split) << ": " << split.labeled.size() << " labeled, " << split.unlabeled.size()
              << " unlabeled, " << split.validation.size() << " validation, " << split.test.size() << " test\n";

    std::size_t reported = 0;
    try {
        while (!trainer.finished()) {
            trainer.step();
            const auto t = trainer.current_step();
            if (cfg.checkpoint_every && t % cfg.checkpoint_every == 0 && !trainer.finished()) {
                ussl::save_checkpoint(trainer.checkpoint(), (dir / ("checkpoint_" + std::to_string(t) + ".bin")).string());
            }
            const auto& records = trainer.history().records();
            if (records.size() > reported) {
                const auto& r = records.back();
                std::cout << "step " << r.step << " lr " << r.lr << " loss " << r.loss.total << " mask " << r.loss.masked_fraction
                          << " val " << opt_json(r.val_accuracy) << " test " << opt_json(r.test_accuracy) << '\n';
                reported = records.size();
            }
        }
    } catch (const ussl::TrainingAborted& e) {
        const auto path = dir / "aborted.bin";
        ussl::save_checkpoint(trainer.checkpoint(), path.string());
        trainer.history().save((dir / "history.jsonl").string());
        throw RuntimeFailure(std::string(e.what()) + " (state before the step saved to '" + path.string() + "')");
    }

    ussl::save_checkpoint(trainer.checkpoint(), (dir / "checkpoint.bin").string());
    trainer.history().save((dir / "history.jsonl").string());
    const auto result = trainer.result();
    std::cout << "selected step " << result.selected_step << " test accuracy " << result.test_accuracy << '\n';
    return 0;
}

// ---- eval -----------------------------------------------------------------------------

// SPEC is one of:
//   checkpoint          rebuild the split from the configuration stored in the checkpoint
//   <path>.cfg          rebuild the split from another configuration file
//   csv:PATH[:COLUMN]   labeled CSV, standardized with the checkpoint's normalizer
int run_eval(const std::string& ckpt_path, const std::string& spec) {
    const ussl::CheckpointData ckpt = ussl::load_checkpoint(ckpt_path);
    const ussl::ModelParams& ema = ckpt.ema.shadow;
    nlohmann::ordered_json out;
    out["step"] = ckpt.step;

    if (spec.rfind("csv:", 0) == 0) {
        std::string path = spec.substr(4), column = "label";
        if (const auto colon = path.rfind(':'); colon != std::string::npos && colon + 1 < path.size() && !fs::exists(path)) {
            column = path.substr(colon + 1);
            path = path.substr(0, colon);
        }
        ussl::Dataset ds = ussl::load_csv_dataset(path, column);
        std::vector<ussl::Sample> eval;
        for (auto& s : ds.samples) {
            if (!s.y) continue;
            s.x = ckpt.normalizer.apply(std::move(s.x));
            eval.push_back(std::move(s));
        }
        out["samples"] = eval.size();
        out["accuracy"] = ussl::accuracy(ema, eval);
        out["selected_accuracy"] = ussl::accuracy(ckpt.selected, eval);
    } else {
        const ussl::TrainConfig cfg = spec == "checkpoint" ? ussl::parse_config(ckpt.config_text) : ussl::load_config(spec);
        const ussl::SplitDataset split = ussl::build_split(cfg);
        out["split_checksum"] = ussl::split_checksum(split);
        auto acc = [&](const ussl::ModelParams& m, const std::vector<ussl::Sample>& s) {
            return s.empty() ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(ussl::accuracy(m, s));
        };
        out["val_accuracy"] = acc(ema, split.validation);
        out["test_accuracy"] = acc(ema, split.test);
        out["selected_step"] = ckpt.selected_step;
        out["selected_test_accuracy"] = acc(ckpt.selected, split.test);
        const auto q = ussl::pseudo_label_quality(ema, split, cfg.tau);
        out["pseudo_label_coverage"] = q.coverage;
        out["pseudo_label_accuracy"] = q.masked_accuracy ? nlohmann::ordered_json(*q.masked_accuracy) : nlohmann::ordered_json(nullptr);
        out["pseudo_label_unmasked_accuracy"] =
            q.unmasked_accuracy ? nlohmann::ordered_json(*q.unmasked_accuracy) : nlohmann::ordered_json(nullptr);
        if (!split.unlabeled.empty()) {
            const auto h = ussl::certificate_histogram(ema, split.labeled, split.unlabeled, cfg.histogram_bins);
            out["cert_separation"] = h.separation;
        }
    }
    std::cout << out.dump(2) << '\n';
    return 0;
}

// ---- ablate ---------------------------------------------------------------------------

int run_ablate(const std::string& config_path, const std::string& variants, const std::vector<std::string>& sets,
               std::optional<std::uint64_t> seed, const std::string& out) {
    const ussl::TrainConfig cfg = load_with_overrides(config_path, sets, seed, out);
    const auto names = ussl::parse_variant_list(variants);
    const fs::path dir = cfg.out_dir;
    ensure_dir(dir);
    write_text(dir / "effective.cfg", ussl::config_to_text(cfg));
    const auto rows = ussl::ablate(cfg, names);
    const std::string table = ussl::ablation_csv(rows);
    write_text(dir / "ablation.csv", table);
    std::cout << table;
    bool failed = false;
    for (const auto& r : rows) {
        if (!r.error.empty()) {
            std::cerr << "variant " << r.variant << " failed: " << r.error << '\n';
            failed = true;
        }
    }
    return failed ? kExitRuntime : 0;
}

// ---- report ---------------------------------------------------------------------------

std::string curves_csv(const ussl::RunHistory& h) {
    using ussl::detail::format_double;
    auto cell = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
    std::string out =
        "step,lr,l_s,l_ua,l_ue,total,masked_fraction,pseudo_label_accuracy,pseudo_label_coverage,val_accuracy,test_accuracy,"
        "cert_score_labeled,cert_score_unlabeled\n";
    for (const auto& r : h.records()) {
        out += std::to_string(r.step) + ',' + format_double(r.lr) + ',' + format_double(r.loss.l_s) + ',' + format_double(r.loss.l_ua) +
               ',' + format_double(r.loss.l_ue) + ',' + format_double(r.loss.total) + ',' + format_double(r.loss.masked_fraction) + ',' +
               cell(r.pseudo_label_accuracy) + ',' + format_double(r.pseudo_label_coverage) + ',' + cell(r.val_accuracy) + ',' +
               cell(r.test_accuracy) + ',' + format_double(r.cert_score_labeled) + ',' + format_double(r.cert_score_unlabeled) + '\n';
    }
    return out;
}

int run_report(const std::string& history_path, const std::string& ckpt_path, const std::string& out) {
    const ussl::RunHistory history = ussl::RunHistory::load(history_path);
    const fs::path dir = out.empty() ? fs::path(history_path).parent_path() : fs::path(out);
    ensure_dir(dir.empty() ? fs::path(".") : dir);
    write_text(dir / "curves.csv", curves_csv(history));
    std::cout << "wrote " << (dir / "curves.csv").string() << '\n';

    std::string checkpoint = ckpt_path;
    if (checkpoint.empty()) {
        const auto sibling = fs::path(history_path).parent_path() / "checkpoint.bin";
        if (fs::exists(sibling)) checkpoint = sibling.string();
    }
    if (checkpoint.empty()) return 0;

    const ussl::CheckpointData ckpt = ussl::load_checkpoint(checkpoint);
    const ussl::TrainConfig cfg = ussl::parse_config(ckpt.config_text);
    const ussl::SplitDataset split = ussl::build_split(cfg);
    const auto& model = ckpt.selected;
    if (!split.unlabeled.empty()) {
        const auto report = ussl::certificate_histogram(model, split.labeled, split.unlabeled, cfg.histogram_bins);
        ussl::write_histogram_csv(report, (dir / "histogram.csv").string());
        ussl::write_histogram_summary_csv(report, (dir / "histogram_summary.csv").string());
        std::cout << "wrote " << (dir / "histogram.csv").string() << " (separation " << report.separation << ")\n";
    }
    ussl::export_embeddings(model, split, ussl::weak_policy(cfg.augment, split.image), ussl::strong_policy(cfg.augment, split.image),
                            cfg.seed, (dir / "embeddings.csv").string());
    std::cout << "wrote " << (dir / "embeddings.csv").string() << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Semi-supervised training with uncertainty-aware losses"};
    app.require_subcommand(1);

    std::string config, out, checkpoint, data, variants, history;
    std::vector<std::string> sets;
    std::optional<std::uint64_t> seed;

    auto* train = app.add_subcommand("train", "Train one run and write history and checkpoints");
    train->add_option("--config", config, "Run configuration (key = value)")->required();
    train->add_option("--seed", seed, "Override the run seed");
    train->add_option("--out", out, "Override the output directory");
    train->add_option("--set", sets, "Override any key, KEY=VALUE (repeatable)");

    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
    eval->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
    eval->add_option("--data", data, "checkpoint | CONFIG.cfg | csv:PATH[:COLUMN]")->required();

    auto* abl = app.add_subcommand("ablate", "Train each variant on one shared split");
    abl->add_option("--config", config, "Run configuration (key = value)")->required();
    abl->add_option("--variants", variants, "Comma list of full, no_ua, no_ue, neither, lambda=X")->required();
    abl->add_option("--seed", seed, "Override the run seed");
    abl->add_option("--out", out, "Override the output directory");
    abl->add_option("--set", sets, "Override any key, KEY=VALUE (repeatable)");

    auto* rep = app.add_subcommand("report", "Write curve, histogram and embedding data files");
    rep->add_option("--history", history, "history.jsonl of a run")->required();
    rep->add_option("--checkpoint", checkpoint, "Checkpoint (default: checkpoint.bin next to the history)");
    rep->add_option("--out", out, "Output directory (default: the history's directory)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        std::cerr << app.help();
        return kExitConfig;
    }

    try {
        if (*train) return run_train(config, sets, seed, out);
        if (*eval) return run_eval(checkpoint, data);
        if (*abl) return run_ablate(config, variants, sets, seed, out);
        return run_report(history, checkpoint, out);
    } catch (const ussl::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
}
