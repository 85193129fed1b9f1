#pragma once

// Binary checkpoint container (little-endian host layout).
//
//   "USSLCKPT" | u32 version
//   then tagged sections in fixed order; strings and tensors are length-prefixed
//   and doubles are stored as raw IEEE-754 bits, so a round trip is bit-exact.

#include "ussl/datasets.hpp"
#include "ussl/history.hpp"
#include "ussl/losses.hpp"
#include "ussl/model.hpp"
#include "ussl/optim.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace ussl {

class CheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr char kCheckpointMagic[8] = {'U', 'S', 'S', 'L', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Everything needed to resume a run or evaluate its models.
struct CheckpointData {
    std::string config_text;
    ModelParams params;
    EmaState ema;
    ModelParams selected;       // best-validation EMA snapshot
    double selected_val_accuracy = -1.0;
    std::uint64_t selected_step = 0;
    OptimizerState optimizer;
    std::uint64_t step = 0;
    std::string sampler_state;  // textual std::mt19937_64 state
    double masked_sum = 0.0;
    std::uint64_t masked_count = 0;
    LossBreakdown last_loss;
    std::string history_jsonl;
    Normalizer normalizer;

    friend bool operator==(const CheckpointData&, const CheckpointData&) = default;
};

namespace ckpt_detail {

class Writer {
public:
    explicit Writer(std::ostream& out) : out_(out) {}

    void u32(std::uint32_t v) { raw(&v, sizeof v); }
    void u64(std::uint64_t v) { raw(&v, sizeof v); }
    void f64(double v) { raw(&v, sizeof v); }
    void str(const std::string& s) {
        u64(s.size());
        raw(s.data(), s.size());
    }
    void reals(const std::vector<double>& v) {
        u64(v.size());
        raw(v.data(), v.size() * sizeof(double));
    }
    void tensor(const Tensor& t) {
        u64(t.shape.size());
        for (auto e : t.shape) u64(e);
        reals(t.values);
    }
    void tensors(const std::vector<Tensor>& ts) {
        u64(ts.size());
        for (const auto& t : ts) tensor(t);
    }
    void model(const ModelParams& m) {
        u64(m.config.input_dim);
        u64(m.config.num_classes);
        u64(m.config.hidden.size());
        for (auto w : m.config.hidden) u64(w);
        u64(m.config.feature_dim);
        u64(m.config.certificates);
        u64(m.tensors.size());
        for (const auto& p : m.tensors) {
            str(p.name);
            tensor(p.value);
        }
    }
    void tag(const char* t) { raw(t, 4); }

private:
    void raw(const void* p, std::size_t n) { out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }
    std::ostream& out_;
};

class Reader {
public:
    explicit Reader(std::istream& in) : in_(in) {}

    std::uint32_t u32() { return pod<std::uint32_t>(); }
    std::uint64_t u64() { return pod<std::uint64_t>(); }
    double f64() { return pod<double>(); }
    std::string str() {
        const auto n = bounded(u64());
        std::string s(n, '\0');
        raw(s.data(), n);
        return s;
    }
    std::vector<double> reals() {
        const auto n = bounded(u64());
        std::vector<double> v(n);
        raw(v.data(), n * sizeof(double));
        return v;
    }
    Tensor tensor() {
        const auto rank = bounded(u64());
        Shape shape(rank);
        for (auto& e : shape) e = bounded(u64());
        try {
            return Tensor(std::move(shape), reals());
        } catch (const ShapeError& e) {
            throw CheckpointError(std::string("checkpoint: corrupt tensor: ") + e.what());
        }
    }
    std::vector<Tensor> tensors() {
        const auto n = bounded(u64());
        std::vector<Tensor> ts;
        for (std::size_t i = 0; i < n; ++i) ts.push_back(tensor());
        return ts;
    }
    ModelParams model() {
        ModelParams m;
        m.config.input_dim = u64();
        m.config.num_classes = u64();
        m.config.hidden.resize(bounded(u64()));
        for (auto& w : m.config.hidden) w = u64();
        m.config.feature_dim = u64();
        m.config.certificates = u64();
        const auto n = bounded(u64());
        for (std::size_t i = 0; i < n; ++i) {
            Parameter p;
            p.name = str();
            p.value = tensor();
            m.tensors.push_back(std::move(p));
        }
        return m;
    }
    void expect_tag(const char* t) {
        char buf[4];
        raw(buf, 4);
        if (std::memcmp(buf, t, 4) != 0) throw CheckpointError(std::string("checkpoint: missing section '") + std::string(t, 4) + "'");
    }

private:
    static std::size_t bounded(std::uint64_t n) {
        if (n > (std::uint64_t{1} << 32)) throw CheckpointError("checkpoint: implausible length field");
        return static_cast<std::size_t>(n);
    }
    template <typename T>
    T pod() {
        T v{};
        raw(&v, sizeof v);
        return v;
    }
    void raw(void* p, std::size_t n) {
        in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in_.gcount()) != n) throw CheckpointError("checkpoint: truncated file");
    }
    std::istream& in_;
};

}  // namespace ckpt_detail

inline void write_checkpoint(std::ostream& out, const CheckpointData& c) {
    ckpt_detail::Writer w(out);
    out.write(kCheckpointMagic, sizeof kCheckpointMagic);
    w.u32(kCheckpointVersion);
    w.tag("CONF");
    w.str(c.config_text);
    w.tag("PARM");
    w.model(c.params);
    w.tag("EMA_");
    w.f64(c.ema.decay);
    w.model(c.ema.shadow);
    w.tag("SELM");
    w.model(c.selected);
    w.f64(c.selected_val_accuracy);
    w.u64(c.selected_step);
    w.tag("OPTM");
    w.u64(c.optimizer.steps);
    w.tensors(c.optimizer.first);
    w.tensors(c.optimizer.second);
    w.tag("STEP");
    w.u64(c.step);
    w.str(c.sampler_state);
    w.f64(c.masked_sum);
    w.u64(c.masked_count);
    w.tag("LOSS");
    for (double v : {c.last_loss.l_s, c.last_loss.l_ua, c.last_loss.l_ue, c.last_loss.total, c.last_loss.alpha_ua,
                     c.last_loss.alpha_ue, c.last_loss.lambda, c.last_loss.masked_fraction})
        w.f64(v);
    w.tag("HIST");
    w.str(c.history_jsonl);
    w.tag("NORM");
    w.reals(c.normalizer.mean);
    w.reals(c.normalizer.stddev);
    w.tag("END_");
}

inline CheckpointData read_checkpoint(std::istream& in) {
    char magic[8];
    in.read(magic, sizeof magic);
    if (in.gcount() != sizeof magic || std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0) {
        throw CheckpointError("checkpoint: bad magic, not a checkpoint file");
    }
    ckpt_detail::Reader r(in);
    const auto version = r.u32();
    if (version != kCheckpointVersion) throw CheckpointError("checkpoint: unsupported version " + std::to_string(version));
    CheckpointData c;
    r.expect_tag("CONF");
    c.config_text = r.str();
    r.expect_tag("PARM");
    c.params = r.model();
    r.expect_tag("EMA_");
    c.ema.decay = r.f64();
    c.ema.shadow = r.model();
    r.expect_tag("SELM");
    c.selected = r.model();
    c.selected_val_accuracy = r.f64();
    c.selected_step = r.u64();
    r.expect_tag("OPTM");
    c.optimizer.steps = r.u64();
    c.optimizer.first = r.tensors();
    c.optimizer.second = r.tensors();
    r.expect_tag("STEP");
    c.step = r.u64();
    c.sampler_state = r.str();
    c.masked_sum = r.f64();
    c.masked_count = r.u64();
    r.expect_tag("LOSS");
    c.last_loss.l_s = r.f64();
    c.last_loss.l_ua = r.f64();
    c.last_loss.l_ue = r.f64();
    c.last_loss.total = r.f64();
    c.last_loss.alpha_ua = r.f64();
    c.last_loss.alpha_ue = r.f64();
    c.last_loss.lambda = r.f64();
    c.last_loss.masked_fraction = r.f64();
    r.expect_tag("HIST");
    c.history_jsonl = r.str();
    r.expect_tag("NORM");
    c.normalizer.mean = r.reals();
    c.normalizer.stddev = r.reals();
    r.expect_tag("END_");
    return c;
}

inline void save_checkpoint(const CheckpointData& c, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw CheckpointError("cannot write checkpoint '" + path + "'");
    write_checkpoint(out, c);
    if (!out) throw CheckpointError("write failed for checkpoint '" + path + "'");
}

inline CheckpointData load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("cannot open checkpoint '" + path + "'");
    return read_checkpoint(in);
}

}  // namespace ussl
