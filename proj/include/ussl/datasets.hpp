#pragma once

// Synthetic generators, CSV/IDX ingestion and the labeled/unlabeled/validation split.

#include "ussl/rng.hpp"
#include "ussl/tensor.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <map>
#include <numbers>
#include <numeric>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ussl {

class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Sample {
    std::vector<double> x;
    std::optional<int> y;

    friend bool operator==(const Sample&, const Sample&) = default;
};

struct ImageShape {
    std::size_t rows = 0;
    std::size_t cols = 0;

    friend bool operator==(const ImageShape&, const ImageShape&) = default;
};

/// Unsplit pool. Samples without a label are unlabeled by construction.
struct Dataset {
    std::vector<Sample> samples;
    std::size_t num_classes = 0;
    std::size_t feature_dim = 0;
    std::optional<ImageShape> image;

    [[nodiscard]] std::size_t labeled_count() const {
        return static_cast<std::size_t>(std::count_if(samples.begin(), samples.end(), [](const Sample& s) { return s.y.has_value(); }));
    }
};

/// Per-feature affine standardization fitted on the training pool.
struct Normalizer {
    std::vector<double> mean;
    std::vector<double> stddev;

    [[nodiscard]] bool empty() const { return mean.empty(); }

    [[nodiscard]] std::vector<double> apply(std::vector<double> x) const {
        if (empty()) return x;
        if (x.size() != mean.size()) {
            throw DataError("normalizer: sample has " + std::to_string(x.size()) + " features, expected " +
                            std::to_string(mean.size()));
        }
        for (std::size_t j = 0; j < x.size(); ++j) x[j] = (x[j] - mean[j]) / stddev[j];
        return x;
    }

    friend bool operator==(const Normalizer&, const Normalizer&) = default;
};

class SplitDataset {
public:
    std::vector<Sample> labeled;
    std::vector<Sample> unlabeled;  // y is always empty here
    std::vector<Sample> validation;
    std::vector<Sample> test;
    std::size_t num_classes = 0;
    std::size_t feature_dim = 0;
    std::optional<ImageShape> image;
    Normalizer normalizer;

    // Positions in the source pool, for partition checks and checksums.
    std::vector<std::size_t> labeled_indices;
    std::vector<std::size_t> unlabeled_indices;
    std::vector<std::size_t> validation_indices;

    /// Hidden ground truth of the unlabeled pool. Evaluation code only.
    [[nodiscard]] const std::vector<std::optional<int>>& unlabeled_truth_for_evaluation() const { return unlabeled_truth_; }

    void set_unlabeled_truth(std::vector<std::optional<int>> truth) { unlabeled_truth_ = std::move(truth); }

private:
    std::vector<std::optional<int>> unlabeled_truth_;
};

// ---- generators ----------------------------------------------------------------

/// Two interleaving half-circles of radius 1. Class 0 is the upper arc centred at
/// the origin, class 1 the lower arc centred at (1, 0.5).
inline Dataset make_two_moons(std::size_t n, double noise, std::uint64_t seed) {
    if (n < 2) throw std::invalid_argument("make_two_moons: n must be at least 2");
    if (!(noise >= 0.0)) throw std::invalid_argument("make_two_moons: noise must be nonnegative");
    Rng rng = make_rng(seed, Stream::dataset);
    std::uniform_real_distribution<double> angle(0.0, std::numbers::pi);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Dataset ds;
    ds.num_classes = 2;
    ds.feature_dim = 2;
    ds.samples.reserve(n);
    const std::size_t upper = (n + 1) / 2;
    for (std::size_t i = 0; i < n; ++i) {
        const double t = angle(rng);
        const int cls = i < upper ? 0 : 1;
        double px = cls == 0 ? std::cos(t) : 1.0 - std::cos(t);
        double py = cls == 0 ? std::sin(t) : 0.5 - std::sin(t);
        if (noise > 0.0) {
            px += noise * gauss(rng);
            py += noise * gauss(rng);
        }
        ds.samples.push_back({{px, py}, cls});
    }
    std::shuffle(ds.samples.begin(), ds.samples.end(), rng);
    return ds;
}

/// Isotropic Gaussian clusters with balanced class counts. Duplicate centers are
/// allowed and make an intentionally inseparable problem.
inline Dataset make_blobs(std::size_t n, const std::vector<std::vector<double>>& centers, double noise, std::uint64_t seed) {
    if (centers.size() < 2) throw std::invalid_argument("make_blobs: need at least two centers");
    if (!(noise >= 0.0)) throw std::invalid_argument("make_blobs: noise must be nonnegative");
    const std::size_t dim = centers.front().size();
    for (const auto& c : centers)
        if (c.size() != dim || dim == 0) throw std::invalid_argument("make_blobs: centers must share a positive dimension");
    Rng rng = make_rng(seed, Stream::dataset);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Dataset ds;
    ds.num_classes = centers.size();
    ds.feature_dim = dim;
    ds.samples.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto cls = i % centers.size();
        std::vector<double> x = centers[cls];
        if (noise > 0.0)
            for (auto& v : x) v += noise * gauss(rng);
        ds.samples.push_back({std::move(x), static_cast<int>(cls)});
    }
    std::shuffle(ds.samples.begin(), ds.samples.end(), rng);
    return ds;
}

// ---- CSV -------------------------------------------------------------------------

namespace detail {

inline std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline std::optional<double> parse_double(std::string_view s) {
    s = trim(s);
    if (s.empty()) return std::nullopt;
    if (s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

inline std::optional<long long> parse_int(std::string_view s) {
    s = trim(s);
    if (s.empty()) return std::nullopt;
    long long v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

inline std::string format_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line_numbers;
};

inline CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open CSV file '" + path + "'");
    CsvTable table;
    std::string line;
    std::size_t line_no = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        std::vector<std::string> cells;
        for (auto cell : split_commas(line)) cells.emplace_back(trim(cell));
        if (!have_header) {
            table.header = std::move(cells);
            have_header = true;
            continue;
        }
        if (cells.size() != table.header.size()) {
            throw DataError(path + ": line " + std::to_string(line_no) + " has " + std::to_string(cells.size()) +
                            " fields, header has " + std::to_string(table.header.size()));
        }
        table.rows.push_back(std::move(cells));
        table.line_numbers.push_back(line_no);
    }
    return table;
}

inline int parse_label(std::string_view cell, const std::string& path, std::size_t line_no) {
    auto v = parse_int(cell);
    if (!v || *v < 0) {
        throw DataError(path + ": row " + std::to_string(line_no) + ": label '" + std::string(cell) +
                        "' is not a nonnegative integer");
    }
    return static_cast<int>(*v);
}

}  // namespace detail

/// Reads a headed CSV. Rows whose label cell is empty become unlabeled samples.
inline Dataset load_csv_dataset(const std::string& path, const std::string& label_column) {
    const auto table = detail::read_csv(path);
    Dataset ds;
    if (table.header.empty()) return ds;
    const auto it = std::find(table.header.begin(), table.header.end(), label_column);
    if (it == table.header.end()) throw DataError(path + ": no label column named '" + label_column + "'");
    const auto label_col = static_cast<std::size_t>(it - table.header.begin());
    ds.feature_dim = table.header.size() - 1;
    int max_label = -1;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& cells = table.rows[r];
        Sample s;
        s.x.reserve(ds.feature_dim);
        for (std::size_t c = 0; c < cells.size(); ++c) {
            if (c == label_col) {
                if (!cells[c].empty()) {
                    s.y = detail::parse_label(cells[c], path, table.line_numbers[r]);
                    max_label = std::max(max_label, *s.y);
                }
                continue;
            }
            auto v = detail::parse_double(cells[c]);
            if (!v) {
                throw DataError(path + ": row " + std::to_string(table.line_numbers[r]) + ", column " +
                                std::to_string(c + 1) + " ('" + table.header[c] + "'): '" + cells[c] +
                                "' is not a number");
            }
            s.x.push_back(*v);
        }
        ds.samples.push_back(std::move(s));
    }
    ds.num_classes = static_cast<std::size_t>(max_label + 1);
    return ds;
}

// ---- IDX -------------------------------------------------------------------------

namespace detail {

inline std::vector<unsigned char> read_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open IDX file '" + path + "'");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::uint32_t read_be32(const std::vector<unsigned char>& b, std::size_t off, const std::string& path) {
    if (off + 4 > b.size()) throw DataError(path + ": truncated IDX header");
    return (std::uint32_t{b[off]} << 24) | (std::uint32_t{b[off + 1]} << 16) | (std::uint32_t{b[off + 2]} << 8) |
           std::uint32_t{b[off + 3]};
}

}  // namespace detail

/// Grayscale images (magic 0x00000803) with optional labels (0x00000801).
/// Pixels are scaled to [0,1]; standardization happens after splitting.
inline Dataset load_idx_dataset(const std::string& images_path, const std::string& labels_path = {}) {
    const auto img = detail::read_bytes(images_path);
    if (detail::read_be32(img, 0, images_path) != 0x00000803U) throw DataError(images_path + ": bad IDX image magic");
    const std::size_t count = detail::read_be32(img, 4, images_path);
    const std::size_t rows = detail::read_be32(img, 8, images_path);
    const std::size_t cols = detail::read_be32(img, 12, images_path);
    const std::size_t pixels = rows * cols;
    if (pixels == 0) throw DataError(images_path + ": zero-sized images");
    if (img.size() < 16 + count * pixels) throw DataError(images_path + ": truncated pixel data");

    std::vector<unsigned char> lab;
    if (!labels_path.empty()) {
        lab = detail::read_bytes(labels_path);
        if (detail::read_be32(lab, 0, labels_path) != 0x00000801U) throw DataError(labels_path + ": bad IDX label magic");
        if (detail::read_be32(lab, 4, labels_path) != count) throw DataError(labels_path + ": label count differs from image count");
        if (lab.size() < 8 + count) throw DataError(labels_path + ": truncated label data");
    }

    Dataset ds;
    ds.feature_dim = pixels;
    ds.image = ImageShape{rows, cols};
    int max_label = -1;
    for (std::size_t i = 0; i < count; ++i) {
        Sample s;
        s.x.resize(pixels);
        for (std::size_t p = 0; p < pixels; ++p) s.x[p] = img[16 + i * pixels + p] / 255.0;
        if (!lab.empty()) {
            s.y = lab[8 + i];
            max_label = std::max(max_label, *s.y);
        }
        ds.samples.push_back(std::move(s));
    }
    ds.num_classes = static_cast<std::size_t>(max_label + 1);
    return ds;
}

// ---- splitting ---------------------------------------------------------------------

namespace detail {

// Picks `per_class[c]` indices of class c from `available` without replacement.
inline std::vector<std::size_t> take_per_class(const Dataset& ds, std::vector<std::size_t>& available,
                                               const std::vector<std::size_t>& per_class, Rng& rng) {
    std::vector<std::vector<std::size_t>> by_class(ds.num_classes);
    for (auto idx : available) {
        const auto& y = ds.samples[idx].y;
        if (y) by_class[static_cast<std::size_t>(*y)].push_back(idx);
    }
    std::vector<std::size_t> chosen;
    for (std::size_t c = 0; c < ds.num_classes; ++c) {
        auto& pool = by_class[c];
        if (pool.size() < per_class[c]) {
            throw DataError("split: class " + std::to_string(c) + " has " + std::to_string(pool.size()) +
                            " labeled samples, " + std::to_string(per_class[c]) + " required");
        }
        std::shuffle(pool.begin(), pool.end(), rng);
        chosen.insert(chosen.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(per_class[c]));
    }
    std::sort(chosen.begin(), chosen.end());
    std::vector<std::size_t> rest;
    std::set_difference(available.begin(), available.end(), chosen.begin(), chosen.end(), std::back_inserter(rest));
    available = std::move(rest);
    return chosen;
}

// Splits `total` over classes as evenly as possible; lower class indices take the remainder.
inline std::vector<std::size_t> balanced_counts(std::size_t total, std::size_t classes) {
    std::vector<std::size_t> counts(classes, total / classes);
    for (std::size_t c = 0; c < total % classes; ++c) ++counts[c];
    return counts;
}

inline std::vector<Sample> gather(const Dataset& ds, const std::vector<std::size_t>& idx) {
    std::vector<Sample> out;
    out.reserve(idx.size());
    for (auto i : idx) out.push_back(ds.samples[i]);
    return out;
}

}  // namespace detail

/// Carves a per-class balanced holdout of round(fraction × labeled count) samples.
/// Returns (remaining pool, holdout).
inline std::pair<Dataset, Dataset> carve_balanced(const Dataset& ds, double fraction, std::uint64_t seed) {
    if (!(fraction >= 0.0 && fraction < 1.0)) throw std::invalid_argument("carve_balanced: fraction must lie in [0, 1)");
    std::vector<std::size_t> available(ds.samples.size());
    std::iota(available.begin(), available.end(), std::size_t{0});
    Rng rng = make_rng(seed, Stream::test_set);
    const auto total = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(ds.labeled_count())));
    const auto held = ds.num_classes ? detail::take_per_class(ds, available, detail::balanced_counts(total, ds.num_classes), rng)
                                     : std::vector<std::size_t>{};
    Dataset rest = ds, holdout = ds;
    rest.samples = detail::gather(ds, available);
    holdout.samples = detail::gather(ds, held);
    return {std::move(rest), std::move(holdout)};
}

/// Per-class balanced labeled split. Validation is carved first with the same
/// balancing; the remainder of the pool (including rows that arrived without a
/// label) becomes the unlabeled set, whose labels are fenced off.
inline SplitDataset split_labeled(const Dataset& ds, std::size_t labels_per_class, double val_fraction, std::uint64_t seed) {
    if (!(val_fraction >= 0.0 && val_fraction < 1.0)) throw std::invalid_argument("split_labeled: val_fraction must lie in [0, 1)");
    if (ds.num_classes == 0) throw DataError("split_labeled: dataset has no labeled classes");
    if (labels_per_class * ds.num_classes > ds.samples.size()) {
        throw DataError("split_labeled: " + std::to_string(labels_per_class) + " labels per class x " +
                        std::to_string(ds.num_classes) + " classes exceeds pool size " + std::to_string(ds.samples.size()));
    }
    Rng rng = make_rng(seed, Stream::split);
    std::vector<std::size_t> available(ds.samples.size());
    std::iota(available.begin(), available.end(), std::size_t{0});

    const auto val_total = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(ds.labeled_count())));
    auto val_idx = detail::take_per_class(ds, available, detail::balanced_counts(val_total, ds.num_classes), rng);
    auto lab_idx = detail::take_per_class(ds, available, std::vector<std::size_t>(ds.num_classes, labels_per_class), rng);

    SplitDataset split;
    split.num_classes = ds.num_classes;
    split.feature_dim = ds.feature_dim;
    split.image = ds.image;
    split.labeled = detail::gather(ds, lab_idx);
    split.validation = detail::gather(ds, val_idx);
    std::vector<std::optional<int>> truth;
    for (auto i : available) {
        truth.push_back(ds.samples[i].y);
        split.unlabeled.push_back({ds.samples[i].x, std::nullopt});
    }
    split.set_unlabeled_truth(std::move(truth));
    split.labeled_indices = std::move(lab_idx);
    split.validation_indices = std::move(val_idx);
    split.unlabeled_indices = std::move(available);
    return split;
}

inline void attach_test_set(SplitDataset& split, const Dataset& test) {
    if (test.feature_dim != split.feature_dim) throw DataError("test set feature dimension differs from training pool");
    split.test.clear();
    for (const auto& s : test.samples)
        if (s.y) split.test.push_back(s);
}

/// Fits mean/stddev on labeled + unlabeled training samples and rewrites every
/// partition. Images share one statistic across all pixels (one channel).
inline Normalizer fit_normalizer(const SplitDataset& split) {
    const std::size_t dim = split.feature_dim;
    Normalizer norm;
    norm.mean.assign(dim, 0.0);
    norm.stddev.assign(dim, 1.0);
    std::vector<const Sample*> pool;
    for (const auto& s : split.labeled) pool.push_back(&s);
    for (const auto& s : split.unlabeled) pool.push_back(&s);
    if (pool.empty()) return norm;
    const double n = static_cast<double>(pool.size());
    if (split.image) {
        double sum = 0.0, sq = 0.0;
        for (auto* s : pool)
            for (double v : s->x) sum += v;
        const double mu = sum / (n * static_cast<double>(dim));
        for (auto* s : pool)
            for (double v : s->x) sq += (v - mu) * (v - mu);
        double sd = std::sqrt(sq / (n * static_cast<double>(dim)));
        if (!(sd > 0.0)) sd = 1.0;
        norm.mean.assign(dim, mu);
        norm.stddev.assign(dim, sd);
        return norm;
    }
    for (std::size_t j = 0; j < dim; ++j) {
        double sum = 0.0, sq = 0.0;
        for (auto* s : pool) sum += s->x[j];
        const double mu = sum / n;
        for (auto* s : pool) sq += (s->x[j] - mu) * (s->x[j] - mu);
        double sd = std::sqrt(sq / n);
        if (!(sd > 0.0)) sd = 1.0;
        norm.mean[j] = mu;
        norm.stddev[j] = sd;
    }
    return norm;
}

inline SplitDataset standardize(SplitDataset split) {
    const Normalizer norm = fit_normalizer(split);
    for (auto* part : {&split.labeled, &split.unlabeled, &split.validation, &split.test})
        for (auto& s : *part) s.x = norm.apply(std::move(s.x));
    split.normalizer = norm;
    return split;
}

// ---- checksum and serialization -------------------------------------------------------

/// FNV-1a over partition indices and feature bits, as 16 hex digits.
inline std::string split_checksum(const SplitDataset& split) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto eat = [&h](std::uint64_t v) {
        for (int b = 0; b < 8; ++b) {
            h ^= (v >> (8 * b)) & 0xFFU;
            h *= 0x100000001b3ULL;
        }
    };
    auto eat_part = [&](const std::vector<Sample>& part, std::uint64_t tag) {
        eat(tag);
        eat(part.size());
        for (const auto& s : part) {
            eat(s.y ? static_cast<std::uint64_t>(*s.y) + 1 : 0);
            for (double v : s.x) {
                std::uint64_t bits = 0;
                std::memcpy(&bits, &v, sizeof bits);
                eat(bits);
            }
        }
    };
    for (auto i : split.labeled_indices) eat(i);
    for (auto i : split.unlabeled_indices) eat(i ^ 0xAAAAULL);
    for (auto i : split.validation_indices) eat(i ^ 0x5555ULL);
    eat_part(split.labeled, 1);
    eat_part(split.unlabeled, 2);
    eat_part(split.validation, 3);
    eat_part(split.test, 4);
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

/// Writes every partition to one CSV: index,partition,label,truth,x0..x{d-1}.
/// Reals are written in shortest round-trip form.
inline void save_split_csv(const SplitDataset& split, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path + "'");
    out << "index,partition,label,truth";
    for (std::size_t j = 0; j < split.feature_dim; ++j) out << ",x" << j;
    out << '\n';
    auto write = [&](const Sample& s, std::size_t index, const char* part, std::optional<int> truth) {
        out << index << ',' << part << ',' << (s.y ? std::to_string(*s.y) : "") << ','
            << (truth ? std::to_string(*truth) : "");
        for (double v : s.x) out << ',' << detail::format_double(v);
        out << '\n';
    };
    for (std::size_t i = 0; i < split.labeled.size(); ++i) write(split.labeled[i], split.labeled_indices[i], "labeled", split.labeled[i].y);
    const auto& truth = split.unlabeled_truth_for_evaluation();
    for (std::size_t i = 0; i < split.unlabeled.size(); ++i)
        write(split.unlabeled[i], split.unlabeled_indices[i], "unlabeled", i < truth.size() ? truth[i] : std::nullopt);
    for (std::size_t i = 0; i < split.validation.size(); ++i)
        write(split.validation[i], split.validation_indices[i], "validation", split.validation[i].y);
    for (std::size_t i = 0; i < split.test.size(); ++i) write(split.test[i], i, "test", split.test[i].y);
    if (!out) throw DataError("write failed for '" + path + "'");
}

inline SplitDataset load_split_csv(const std::string& path, std::size_t num_classes) {
    const auto table = detail::read_csv(path);
    if (table.header.size() < 5 || table.header[0] != "index" || table.header[1] != "partition") {
        throw DataError(path + ": not a split CSV (expected index,partition,label,truth,x0,...)");
    }
    SplitDataset split;
    split.num_classes = num_classes;
    split.feature_dim = table.header.size() - 4;
    std::vector<std::optional<int>> truth;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& cells = table.rows[r];
        const auto line = table.line_numbers[r];
        const auto index = detail::parse_int(cells[0]);
        if (!index || *index < 0) throw DataError(path + ": row " + std::to_string(line) + ": bad index");
        Sample s;
        if (!cells[2].empty()) s.y = detail::parse_label(cells[2], path, line);
        std::optional<int> t;
        if (!cells[3].empty()) t = detail::parse_label(cells[3], path, line);
        for (std::size_t c = 4; c < cells.size(); ++c) {
            auto v = detail::parse_double(cells[c]);
            if (!v) throw DataError(path + ": row " + std::to_string(line) + ", column " + std::to_string(c + 1) + " is not a number");
            s.x.push_back(*v);
        }
        const auto idx = static_cast<std::size_t>(*index);
        const auto& part = cells[1];
        if (part == "labeled") {
            split.labeled.push_back(std::move(s));
            split.labeled_indices.push_back(idx);
        } else if (part == "unlabeled") {
            s.y.reset();
            split.unlabeled.push_back(std::move(s));
            split.unlabeled_indices.push_back(idx);
            truth.push_back(t);
        } else if (part == "validation") {
            split.validation.push_back(std::move(s));
            split.validation_indices.push_back(idx);
        } else if (part == "test") {
            split.test.push_back(std::move(s));
        } else {
            throw DataError(path + ": row " + std::to_string(line) + ": unknown partition '" + part + "'");
        }
    }
    split.set_unlabeled_truth(std::move(truth));
    return split;
}

}  // namespace ussl
