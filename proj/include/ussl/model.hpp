#pragma once

// MLP feature extractor with three heads sharing one feature vector:
//   class logits (-> softmax probabilities), per-class uncertainty u = sigmoid(.),
//   and certificate residuals C^T phi(x).
// The same kernels serve the differentiable forward and graph-free inference.

#include "ussl/autodiff.hpp"
#include "ussl/rng.hpp"
#include "ussl/tensor.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace ussl {

struct ModelConfig {
    std::size_t input_dim = 2;
    std::size_t num_classes = 2;
    std::vector<std::size_t> hidden{64, 64};
    std::size_t feature_dim = 32;
    std::size_t certificates = 16;

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct Parameter {
    std::string name;
    Tensor value;

    friend bool operator==(const Parameter&, const Parameter&) = default;
};

/// Parameter tensors in a fixed order:
///   phi.{l}.weight [in,out], phi.{l}.bias [1,out]   for each extractor layer
///   logits.weight [d,h], logits.bias [1,h]
///   uncertainty.weight [d,h], uncertainty.bias [1,h]
///   certificates [d,k]
struct ModelParams {
    ModelConfig config;
    std::vector<Parameter> tensors;

    [[nodiscard]] std::size_t extractor_layers() const { return config.hidden.size() + 1; }
    [[nodiscard]] std::size_t logits_index() const { return 2 * extractor_layers(); }
    [[nodiscard]] std::size_t uncertainty_index() const { return logits_index() + 2; }
    [[nodiscard]] std::size_t certificate_index() const { return logits_index() + 4; }

    [[nodiscard]] const Tensor& certificates() const { return tensors[certificate_index()].value; }
    Tensor& certificates() { return tensors[certificate_index()].value; }

    [[nodiscard]] std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& p : tensors) n += p.value.size();
        return n;
    }

    friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

namespace detail {

inline void validate_model_config(const ModelConfig& c) {
    if (c.input_dim == 0 || c.num_classes < 2 || c.feature_dim == 0 || c.certificates == 0) {
        throw std::invalid_argument("model: dimensions must be positive and num_classes >= 2");
    }
    for (auto w : c.hidden)
        if (w == 0) throw std::invalid_argument("model: hidden widths must be positive");
    if (c.certificates > c.feature_dim) {
        throw std::invalid_argument("model: certificates k=" + std::to_string(c.certificates) +
                                    " exceeds feature dim d=" + std::to_string(c.feature_dim) + "; orthonormal columns need k <= d");
    }
}

inline std::vector<std::pair<std::size_t, std::size_t>> extractor_dims(const ModelConfig& c) {
    std::vector<std::pair<std::size_t, std::size_t>> dims;
    std::size_t in = c.input_dim;
    for (auto w : c.hidden) {
        dims.emplace_back(in, w);
        in = w;
    }
    dims.emplace_back(in, c.feature_dim);
    return dims;
}

}  // namespace detail

/// All-zero parameters with the layout of `config`.
inline ModelParams zero_model(const ModelConfig& config) {
    detail::validate_model_config(config);
    ModelParams m;
    m.config = config;
    const auto dims = detail::extractor_dims(config);
    for (std::size_t l = 0; l < dims.size(); ++l) {
        m.tensors.push_back({"phi." + std::to_string(l) + ".weight", Tensor({dims[l].first, dims[l].second})});
        m.tensors.push_back({"phi." + std::to_string(l) + ".bias", Tensor({1, dims[l].second})});
    }
    const auto d = config.feature_dim, h = config.num_classes;
    m.tensors.push_back({"logits.weight", Tensor({d, h})});
    m.tensors.push_back({"logits.bias", Tensor({1, h})});
    m.tensors.push_back({"uncertainty.weight", Tensor({d, h})});
    m.tensors.push_back({"uncertainty.bias", Tensor({1, h})});
    m.tensors.push_back({"certificates", Tensor({d, config.certificates})});
    return m;
}

/// Columns of a Gaussian [d,k] matrix orthonormalized by modified Gram-Schmidt
/// (the Q factor of its thin QR decomposition).
inline Tensor orthonormal_columns(std::size_t d, std::size_t k, Rng& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Tensor q({d, k});
    for (auto& v : q.values) v = gauss(rng);
    for (std::size_t j = 0; j < k; ++j) {
        for (std::size_t p = 0; p < j; ++p) {
            double dot = 0.0;
            for (std::size_t i = 0; i < d; ++i) dot += q.at(i, j) * q.at(i, p);
            for (std::size_t i = 0; i < d; ++i) q.at(i, j) -= dot * q.at(i, p);
        }
        double norm = 0.0;
        for (std::size_t i = 0; i < d; ++i) norm += q.at(i, j) * q.at(i, j);
        norm = std::sqrt(norm);
        for (std::size_t i = 0; i < d; ++i) q.at(i, j) /= norm;
    }
    return q;
}

/// He-uniform extractor weights, 1/sqrt(fan_in) uniform head weights, zero
/// biases, orthonormal certificate columns.
inline ModelParams init_model(const ModelConfig& config, std::uint64_t seed) {
    ModelParams m = zero_model(config);
    Rng rng = make_rng(seed, Stream::init);
    auto fill_uniform = [&rng](Tensor& t, double bound) {
        std::uniform_real_distribution<double> u(-bound, bound);
        for (auto& v : t.values) v = u(rng);
    };
    for (std::size_t l = 0; l < m.extractor_layers(); ++l) {
        auto& w = m.tensors[2 * l].value;
        fill_uniform(w, std::sqrt(6.0 / static_cast<double>(w.shape[0])));
    }
    const double head_bound = 1.0 / std::sqrt(static_cast<double>(config.feature_dim));
    fill_uniform(m.tensors[m.logits_index()].value, head_bound);
    fill_uniform(m.tensors[m.uncertainty_index()].value, head_bound);
    m.certificates() = orthonormal_columns(config.feature_dim, config.certificates, rng);
    return m;
}

// ---- graph-free inference ---------------------------------------------------------

struct HeadValues {
    Tensor features;   // [B,d]
    Tensor logits;     // [B,h]
    Tensor probs;      // [B,h]
    Tensor u;          // [B,h], in [0,1]
    Tensor residual;   // [B,k]
};

inline void check_input(const ModelParams& params, const Tensor& x) {
    if (x.rank() != 2 || x.shape[1] != params.config.input_dim) {
        throw ShapeError("model: input of shape " + shape_str(x.shape) + " does not match input dim " +
                         std::to_string(params.config.input_dim));
    }
}

/// phi(x): relu after every hidden layer, linear final projection to d.
inline Tensor feature_extract(const ModelParams& params, const Tensor& x) {
    check_input(params, x);
    Tensor h = x;
    const std::size_t layers = params.extractor_layers();
    for (std::size_t l = 0; l < layers; ++l) {
        h = kernels::affine(h, params.tensors[2 * l].value, params.tensors[2 * l + 1].value);
        if (l + 1 < layers) h = kernels::relu(h);
    }
    return h;
}

inline Tensor predict_logits(const ModelParams& params, const Tensor& features) {
    const auto i = params.logits_index();
    return kernels::affine(features, params.tensors[i].value, params.tensors[i + 1].value);
}

inline Tensor predict_probs(const ModelParams& params, const Tensor& features) {
    return kernels::softmax(predict_logits(params, features));
}

inline Tensor predict_uncertainty(const ModelParams& params, const Tensor& features) {
    const auto i = params.uncertainty_index();
    return kernels::sigmoid(kernels::affine(features, params.tensors[i].value, params.tensors[i + 1].value));
}

inline Tensor predict_certificates(const ModelParams& params, const Tensor& features) {
    return kernels::matmul(features, params.certificates());
}

/// Per-row epistemic score ||C^T phi(x)||^2.
inline std::vector<double> certificate_scores(const Tensor& residual) {
    std::vector<double> scores(residual.rows(), 0.0);
    const std::size_t k = residual.cols();
    for (std::size_t i = 0; i < scores.size(); ++i)
        for (std::size_t j = 0; j < k; ++j) scores[i] += residual.values[i * k + j] * residual.values[i * k + j];
    return scores;
}

/// One pass yielding all heads from the shared features.
inline HeadValues evaluate(const ModelParams& params, const Tensor& x) {
    HeadValues out;
    out.features = feature_extract(params, x);
    out.logits = predict_logits(params, out.features);
    out.probs = kernels::softmax(out.logits);
    out.u = predict_uncertainty(params, out.features);
    out.residual = predict_certificates(params, out.features);
    return out;
}

// ---- differentiable forward -------------------------------------------------------

/// Parameters registered as requires-grad leaves of one graph, in ModelParams order.
struct BoundModel {
    const ModelParams* params = nullptr;
    std::vector<ad::Var> vars;

    [[nodiscard]] ad::Var certificates() const { return vars[params->certificate_index()]; }
};

inline BoundModel bind(ad::Graph& graph, const ModelParams& params) {
    BoundModel b{&params, {}};
    b.vars.reserve(params.tensors.size());
    for (const auto& p : params.tensors) b.vars.push_back(graph.parameter(p.value));
    return b;
}

struct HeadVars {
    ad::Var features;
    ad::Var logits;
    ad::Var probs;
    ad::Var u;
    ad::Var residual;
};

inline HeadVars forward(const BoundModel& model, ad::Var x) {
    const ModelParams& params = *model.params;
    check_input(params, x.graph->value(x));
    ad::Var h = x;
    const std::size_t layers = params.extractor_layers();
    for (std::size_t l = 0; l < layers; ++l) {
        h = ad::matmul(h, model.vars[2 * l]) + model.vars[2 * l + 1];
        if (l + 1 < layers) h = ad::relu(h);
    }
    HeadVars out;
    out.features = h;
    const auto li = params.logits_index();
    out.logits = ad::matmul(h, model.vars[li]) + model.vars[li + 1];
    out.probs = ad::softmax(out.logits);
    const auto ui = params.uncertainty_index();
    out.u = ad::sigmoid(ad::matmul(h, model.vars[ui]) + model.vars[ui + 1]);
    out.residual = ad::matmul(h, model.certificates());
    return out;
}

/// Gradients of the last backward(), in ModelParams order.
inline std::vector<Tensor> collect_grads(const ad::Graph& graph, const BoundModel& model) {
    std::vector<Tensor> grads;
    grads.reserve(model.vars.size());
    for (auto v : model.vars) grads.push_back(graph.grad(v));
    return grads;
}

// ---- EMA shadow -----------------------------------------------------------------------

struct EmaState {
    ModelParams shadow;
    double decay = 0.999;

    friend bool operator==(const EmaState&, const EmaState&) = default;
};

inline void check_same_layout(const ModelParams& a, const ModelParams& b, const char* op) {
    if (a.tensors.size() != b.tensors.size()) throw ShapeError(std::string(op) + ": parameter counts differ");
    for (std::size_t i = 0; i < a.tensors.size(); ++i) {
        if (a.tensors[i].value.shape != b.tensors[i].value.shape) {
            throw ShapeError(std::string(op) + ": '" + a.tensors[i].name + "' has shape " + shape_str(a.tensors[i].value.shape) +
                             " vs " + shape_str(b.tensors[i].value.shape));
        }
    }
}

/// shadow <- decay * shadow + (1 - decay) * params
inline void ema_update_inplace(EmaState& ema, const ModelParams& params) {
    check_same_layout(ema.shadow, params, "ema_update");
    const double beta = ema.decay;
    for (std::size_t i = 0; i < params.tensors.size(); ++i) {
        auto& s = ema.shadow.tensors[i].value.values;
        const auto& p = params.tensors[i].value.values;
        for (std::size_t j = 0; j < s.size(); ++j) s[j] = beta * s[j] + (1.0 - beta) * p[j];
    }
}

inline EmaState ema_update(EmaState ema, const ModelParams& params) {
    ema_update_inplace(ema, params);
    return ema;
}

}  // namespace ussl
