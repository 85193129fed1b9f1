#pragma once

// Run configuration: flat `key = value` text, '#' starts a comment.
// Every key has a default; unknown keys and invalid values raise ConfigError.

#include "ussl/augment.hpp"
#include "ussl/datasets.hpp"
#include "ussl/losses.hpp"
#include "ussl/optim.hpp"

#include <charconv>
#include <cstdint>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ussl {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class DataKind { two_moons, blobs, csv, idx };

struct DataConfig {
    DataKind kind = DataKind::two_moons;
    std::size_t n = 1000;
    double noise = 0.1;
    std::size_t n_test = 1000;
    std::vector<std::vector<double>> centers{{0.0, 0.0}, {4.0, 0.0}, {2.0, 3.0}};
    std::string path;
    std::string label_column = "label";
    std::string labels_path;  // idx labels
    double test_fraction = 0.2;

    friend bool operator==(const DataConfig&, const DataConfig&) = default;
};

struct TrainConfig {
    DataConfig data;
    std::size_t labels_per_class = 4;
    double val_fraction = 0.1;

    std::vector<std::size_t> hidden{64, 64};
    std::size_t feature_dim = 32;
    std::size_t certificates = 16;

    std::size_t batch_size_labeled = 16;
    std::size_t unlabeled_ratio = 7;
    std::size_t steps = 2000;
    std::size_t eval_every = 50;

    OptimizerKind optimizer = OptimizerKind::sgd;
    double lr = 0.03;
    double weight_decay = 5e-4;
    double momentum = 0.9;
    AdamParams adam;
    Schedule schedule = Schedule::cosine;
    double cosine_factor = 0.5;

    double tau = 0.95;
    double alpha_ua = 15.0;
    AleatoricNorm ua_normalization = AleatoricNorm::unlabeled;
    double alpha_ue = 1.0;
    double lambda = 0.1;
    std::size_t views = 2;
    double ema_decay = 0.99;
    bool enable_ua = true;
    bool enable_ue = true;

    AugmentConfig augment;

    std::uint64_t seed = 0;
    std::string out_dir = "runs/default";
    std::size_t checkpoint_every = 0;
    std::size_t histogram_bins = 30;

    friend bool operator==(const TrainConfig& a, const TrainConfig& b) {
        return a.data == b.data && a.labels_per_class == b.labels_per_class && a.val_fraction == b.val_fraction &&
               a.hidden == b.hidden && a.feature_dim == b.feature_dim && a.certificates == b.certificates &&
               a.batch_size_labeled == b.batch_size_labeled && a.unlabeled_ratio == b.unlabeled_ratio && a.steps == b.steps &&
               a.eval_every == b.eval_every && a.optimizer == b.optimizer && a.lr == b.lr && a.weight_decay == b.weight_decay &&
               a.momentum == b.momentum && a.adam.beta1 == b.adam.beta1 && a.adam.beta2 == b.adam.beta2 &&
               a.adam.eps == b.adam.eps && a.schedule == b.schedule && a.cosine_factor == b.cosine_factor && a.tau == b.tau &&
               a.alpha_ua == b.alpha_ua && a.ua_normalization == b.ua_normalization && a.alpha_ue == b.alpha_ue && a.lambda == b.lambda && a.views == b.views &&
               a.ema_decay == b.ema_decay && a.enable_ua == b.enable_ua && a.enable_ue == b.enable_ue &&
               a.augment == b.augment && a.seed == b.seed && a.out_dir == b.out_dir &&
               a.checkpoint_every == b.checkpoint_every && a.histogram_bins == b.histogram_bins;
    }

    /// Weights actually applied after ablation flags.
    [[nodiscard]] double effective_alpha_ua() const { return enable_ua ? alpha_ua : 0.0; }
    [[nodiscard]] double effective_alpha_ue() const { return enable_ue ? alpha_ue : 0.0; }
};

namespace config_detail {

inline std::string fmt(double v) { return detail::format_double(v); }

inline double to_double(std::string_view key, std::string_view s) {
    auto v = detail::parse_double(s);
    if (!v) throw ConfigError("config key '" + std::string(key) + "': '" + std::string(s) + "' is not a real number");
    return *v;
}

inline std::size_t to_count(std::string_view key, std::string_view s) {
    auto v = detail::parse_int(s);
    if (!v || *v < 0) throw ConfigError("config key '" + std::string(key) + "': '" + std::string(s) + "' is not a nonnegative integer");
    return static_cast<std::size_t>(*v);
}

inline std::uint64_t to_u64(std::string_view key, std::string_view s) {
    s = detail::trim(s);
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
        throw ConfigError("config key '" + std::string(key) + "': '" + std::string(s) + "' is not an unsigned integer");
    }
    return v;
}

inline bool to_bool(std::string_view key, std::string_view s) {
    s = detail::trim(s);
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw ConfigError("config key '" + std::string(key) + "': '" + std::string(s) + "' is not a boolean (true/false)");
}

inline std::vector<std::size_t> to_counts(std::string_view key, std::string_view s) {
    std::vector<std::size_t> out;
    if (detail::trim(s).empty()) return out;
    for (auto part : detail::split_commas(s)) out.push_back(to_count(key, part));
    return out;
}

inline std::string join(const std::vector<std::size_t>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
    return s;
}

// centers as "x,y;x,y;..."
inline std::vector<std::vector<double>> to_centers(std::string_view key, std::string_view s) {
    std::vector<std::vector<double>> out;
    std::size_t start = 0;
    while (start <= s.size()) {
        auto pos = s.find(';', start);
        auto part = s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start);
        if (!detail::trim(part).empty()) {
            std::vector<double> c;
            for (auto v : detail::split_commas(part)) c.push_back(to_double(key, v));
            out.push_back(std::move(c));
        }
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

inline std::string join_centers(const std::vector<std::vector<double>>& cs) {
    std::string s;
    for (std::size_t i = 0; i < cs.size(); ++i) {
        if (i) s += ';';
        for (std::size_t j = 0; j < cs[i].size(); ++j) s += (j ? "," : "") + fmt(cs[i][j]);
    }
    return s;
}

template <typename E>
struct EnumName {
    E value;
    const char* name;
};

template <typename E, std::size_t N>
E to_enum(std::string_view key, std::string_view s, const EnumName<E> (&names)[N]) {
    s = detail::trim(s);
    std::string allowed;
    for (const auto& n : names) {
        if (s == n.name) return n.value;
        allowed += (allowed.empty() ? "" : "|") + std::string(n.name);
    }
    throw ConfigError("config key '" + std::string(key) + "': '" + std::string(s) + "' must be one of " + allowed);
}

template <typename E, std::size_t N>
std::string enum_name(E v, const EnumName<E> (&names)[N]) {
    for (const auto& n : names)
        if (n.value == v) return n.name;
    return "?";
}

inline constexpr EnumName<DataKind> kDataKinds[] = {
    {DataKind::two_moons, "two_moons"}, {DataKind::blobs, "blobs"}, {DataKind::csv, "csv"}, {DataKind::idx, "idx"}};
inline constexpr EnumName<OptimizerKind> kOptimizers[] = {{OptimizerKind::sgd, "sgd"}, {OptimizerKind::adamw, "adamw"}};
inline constexpr EnumName<Schedule> kSchedules[] = {
    {Schedule::cosine, "cosine"}, {Schedule::annealing, "annealing"}, {Schedule::constant, "constant"}};
inline constexpr EnumName<AleatoricNorm> kAleatoricNorms[] = {{AleatoricNorm::masked, "masked"}, {AleatoricNorm::unlabeled, "unlabeled"}};

inline std::vector<TransformKind> to_transforms(std::string_view key, std::string_view s) {
    std::vector<TransformKind> out;
    if (detail::trim(s).empty()) return out;
    for (auto part : detail::split_commas(s)) {
        auto k = parse_transform_kind(std::string(detail::trim(part)));
        if (!k) throw ConfigError("config key '" + std::string(key) + "': unknown transform '" + std::string(detail::trim(part)) + "'");
        out.push_back(*k);
    }
    return out;
}

inline std::string join_transforms(const std::vector<TransformKind>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::string(transform_name(v[i]));
    return s;
}

struct Field {
    const char* key;
    std::function<void(TrainConfig&, std::string_view)> set;
    std::function<std::string(const TrainConfig&)> get;
};

#define USSL_REAL(KEY, MEMBER) \
    Field{KEY, [](TrainConfig& c, std::string_view v) { c.MEMBER = to_double(KEY, v); }, [](const TrainConfig& c) { return fmt(c.MEMBER); }}
#define USSL_COUNT(KEY, MEMBER) \
    Field{KEY, [](TrainConfig& c, std::string_view v) { c.MEMBER = to_count(KEY, v); }, [](const TrainConfig& c) { return std::to_string(c.MEMBER); }}
#define USSL_BOOL(KEY, MEMBER)                                                                \
    Field{KEY, [](TrainConfig& c, std::string_view v) { c.MEMBER = to_bool(KEY, v); }, \
          [](const TrainConfig& c) { return std::string(c.MEMBER ? "true" : "false"); }}
#define USSL_TEXT(KEY, MEMBER) \
    Field{KEY, [](TrainConfig& c, std::string_view v) { c.MEMBER = std::string(detail::trim(v)); }, [](const TrainConfig& c) { return c.MEMBER; }}

inline const std::vector<Field>& fields() {
    static const std::vector<Field> table = {
        Field{"data.kind", [](TrainConfig& c, std::string_view v) { c.data.kind = to_enum("data.kind", v, kDataKinds); },
              [](const TrainConfig& c) { return enum_name(c.data.kind, kDataKinds); }},
        USSL_COUNT("data.n", data.n),
        USSL_REAL("data.noise", data.noise),
        USSL_COUNT("data.n_test", data.n_test),
        Field{"data.centers", [](TrainConfig& c, std::string_view v) { c.data.centers = to_centers("data.centers", v); },
              [](const TrainConfig& c) { return join_centers(c.data.centers); }},
        USSL_TEXT("data.path", data.path),
        USSL_TEXT("data.label_column", data.label_column),
        USSL_TEXT("data.labels_path", data.labels_path),
        USSL_REAL("data.test_fraction", data.test_fraction),
        USSL_COUNT("labels_per_class", labels_per_class),
        USSL_REAL("val_fraction", val_fraction),
        Field{"model.hidden", [](TrainConfig& c, std::string_view v) { c.hidden = to_counts("model.hidden", v); },
              [](const TrainConfig& c) { return join(c.hidden); }},
        USSL_COUNT("model.feature_dim", feature_dim),
        USSL_COUNT("model.certificates", certificates),
        USSL_COUNT("batch_size_labeled", batch_size_labeled),
        USSL_COUNT("unlabeled_ratio", unlabeled_ratio),
        USSL_COUNT("steps", steps),
        USSL_COUNT("eval_every", eval_every),
        Field{"optimizer", [](TrainConfig& c, std::string_view v) { c.optimizer = to_enum("optimizer", v, kOptimizers); },
              [](const TrainConfig& c) { return enum_name(c.optimizer, kOptimizers); }},
        USSL_REAL("lr", lr),
        USSL_REAL("weight_decay", weight_decay),
        USSL_REAL("momentum", momentum),
        USSL_REAL("adam.beta1", adam.beta1),
        USSL_REAL("adam.beta2", adam.beta2),
        USSL_REAL("adam.eps", adam.eps),
        Field{"schedule", [](TrainConfig& c, std::string_view v) { c.schedule = to_enum("schedule", v, kSchedules); },
              [](const TrainConfig& c) { return enum_name(c.schedule, kSchedules); }},
        USSL_REAL("cosine_factor", cosine_factor),
        USSL_REAL("tau", tau),
        USSL_REAL("alpha_ua", alpha_ua),
        Field{"ua_normalization", [](TrainConfig& c, std::string_view v) { c.ua_normalization = to_enum("ua_normalization", v, kAleatoricNorms); },
              [](const TrainConfig& c) { return enum_name(c.ua_normalization, kAleatoricNorms); }},
        USSL_REAL("alpha_ue", alpha_ue),
        USSL_REAL("lambda", lambda),
        USSL_COUNT("views", views),
        USSL_REAL("ema_decay", ema_decay),
        USSL_BOOL("enable_ua", enable_ua),
        USSL_BOOL("enable_ue", enable_ue),
        USSL_REAL("aug.weak_jitter", augment.weak_jitter),
        Field{"aug.strong_set", [](TrainConfig& c, std::string_view v) { c.augment.strong_set = to_transforms("aug.strong_set", v); },
              [](const TrainConfig& c) { return join_transforms(c.augment.strong_set); }},
        USSL_REAL("aug.strong_jitter", augment.strong_jitter),
        USSL_REAL("aug.dropout_rate", augment.dropout_rate),
        USSL_REAL("aug.rotate_max", augment.rotate_max),
        USSL_REAL("aug.scale_low", augment.scale_low),
        USSL_REAL("aug.scale_high", augment.scale_high),
        USSL_REAL("aug.flip_prob", augment.flip_prob),
        USSL_REAL("aug.weak_shift", augment.weak_shift),
        USSL_REAL("aug.translate", augment.translate),
        USSL_REAL("aug.cutout", augment.cutout),
        USSL_REAL("aug.brightness", augment.brightness),
        USSL_REAL("aug.contrast", augment.contrast),
        USSL_REAL("aug.image_rotate_deg", augment.image_rotate_deg),
        Field{"seed", [](TrainConfig& c, std::string_view v) { c.seed = to_u64("seed", v); },
              [](const TrainConfig& c) { return std::to_string(c.seed); }},
        USSL_TEXT("out_dir", out_dir),
        USSL_COUNT("checkpoint_every", checkpoint_every),
        USSL_COUNT("histogram_bins", histogram_bins),
    };
    return table;
}

#undef USSL_REAL
#undef USSL_COUNT
#undef USSL_BOOL
#undef USSL_TEXT

}  // namespace config_detail

/// Sets one key; throws ConfigError for unknown keys or unparsable values.
inline void set_config_value(TrainConfig& cfg, std::string_view key, std::string_view value) {
    for (const auto& f : config_detail::fields()) {
        if (key == f.key) {
            f.set(cfg, value);
            return;
        }
    }
    throw ConfigError("unknown config key '" + std::string(key) + "'");
}

inline void validate(const TrainConfig& c) {
    auto fail = [](const std::string& key, const std::string& constraint) {
        throw ConfigError("config key '" + key + "': " + constraint);
    };
    if (c.tau < 0.0 || c.tau > 1.0) fail("tau", "must lie in [0, 1]");
    if (c.alpha_ua < 0.0) fail("alpha_ua", "must be >= 0");
    if (c.alpha_ue < 0.0) fail("alpha_ue", "must be >= 0");
    if (c.lambda < 0.0) fail("lambda", "must be >= 0");
    if (c.unlabeled_ratio < 1) fail("unlabeled_ratio", "must be >= 1");
    if (c.steps < 1) fail("steps", "must be >= 1");
    if (c.eval_every < 1) fail("eval_every", "must be >= 1");
    if (c.batch_size_labeled < 1) fail("batch_size_labeled", "must be >= 1");
    if (c.views < 1) fail("views", "must be >= 1");
    if (!(c.lr > 0.0)) fail("lr", "must be > 0");
    if (c.weight_decay < 0.0) fail("weight_decay", "must be >= 0");
    if (c.momentum < 0.0 || c.momentum >= 1.0) fail("momentum", "must lie in [0, 1)");
    if (c.ema_decay < 0.0 || c.ema_decay > 1.0) fail("ema_decay", "must lie in [0, 1]");
    if (c.cosine_factor <= 0.0 || c.cosine_factor > 0.5) fail("cosine_factor", "must lie in (0, 0.5]");
    if (c.val_fraction < 0.0 || c.val_fraction >= 1.0) fail("val_fraction", "must lie in [0, 1)");
    if (c.labels_per_class < 1) fail("labels_per_class", "must be >= 1");
    if (c.feature_dim < 1) fail("model.feature_dim", "must be >= 1");
    if (c.certificates < 1 || c.certificates > c.feature_dim) fail("model.certificates", "must lie in [1, model.feature_dim]");
    if (c.histogram_bins < 2) fail("histogram_bins", "must be >= 2");
    if (c.data.noise < 0.0) fail("data.noise", "must be >= 0");
    if (c.data.n < 2) fail("data.n", "must be >= 2");
    if (c.data.test_fraction < 0.0 || c.data.test_fraction >= 1.0) fail("data.test_fraction", "must lie in [0, 1)");
    if (c.data.kind == DataKind::blobs) {
        if (c.data.centers.size() < 2) fail("data.centers", "needs at least two centers");
        for (const auto& ctr : c.data.centers)
            if (ctr.size() != c.data.centers.front().size() || ctr.empty()) fail("data.centers", "centers must share one positive dimension");
    }
    if ((c.data.kind == DataKind::csv || c.data.kind == DataKind::idx) && c.data.path.empty()) fail("data.path", "required for csv/idx data");
    if (c.augment.scale_low > c.augment.scale_high) fail("aug.scale_low", "must not exceed aug.scale_high");
    if (c.augment.weak_jitter < 0.0) fail("aug.weak_jitter", "must be >= 0");
    if (c.augment.strong_jitter < 0.0) fail("aug.strong_jitter", "must be >= 0");
    if (c.augment.dropout_rate < 0.0 || c.augment.dropout_rate > 1.0) fail("aug.dropout_rate", "must lie in [0, 1]");
    if (c.augment.flip_prob < 0.0 || c.augment.flip_prob > 1.0) fail("aug.flip_prob", "must lie in [0, 1]");
}

inline TrainConfig parse_config(std::string_view text, TrainConfig cfg = {}) {
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view view = line;
        if (auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
        view = detail::trim(view);
        if (view.empty()) continue;
        const auto eq = view.find('=');
        if (eq == std::string_view::npos) throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
        set_config_value(cfg, detail::trim(view.substr(0, eq)), detail::trim(view.substr(eq + 1)));
    }
    validate(cfg);
    return cfg;
}

inline TrainConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config file not found: '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

/// Every key with its effective value, one per line, in a fixed order.
inline std::string config_to_text(const TrainConfig& cfg) {
    std::string out;
    for (const auto& f : config_detail::fields()) out += std::string(f.key) + " = " + f.get(cfg) + "\n";
    return out;
}

inline std::vector<std::string> config_keys() {
    std::vector<std::string> keys;
    for (const auto& f : config_detail::fields()) keys.emplace_back(f.key);
    return keys;
}

}  // namespace ussl
