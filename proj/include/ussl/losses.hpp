#pragma once

// Composite objective: supervised cross-entropy, aleatoric Gaussian NLL with a
// diagonal exp(2u) covariance over masked pseudo-labeled strong views, and the
// orthogonal-certificate loss. Each term is built from autodiff primitives;
// Tensor overloads evaluate a term on constants.

#include "ussl/autodiff.hpp"

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ussl {

class LossDomainError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

inline constexpr double kProbabilityFloor = 1e-12;

/// Mean over the batch of -ln p[i, y_i], with p clamped at 1e-12.
inline ad::Var supervised_ce(ad::Var probs, std::span<const std::size_t> labels) {
    ad::Graph& g = *probs.graph;
    const Tensor& p = g.value(probs);
    const std::size_t batch = p.rows(), h = p.cols();
    if (labels.empty()) throw LossDomainError("supervised_ce: empty batch");
    if (labels.size() != batch) {
        throw ShapeError("supervised_ce: " + std::to_string(labels.size()) + " labels for probabilities of shape " + shape_str(p.shape));
    }
    Tensor onehot(p.shape, 0.0);
    for (std::size_t i = 0; i < batch; ++i) {
        if (labels[i] >= h) throw LossDomainError("supervised_ce: label " + std::to_string(labels[i]) + " out of range");
        onehot.values[i * h + labels[i]] = 1.0;
    }
    const ad::Var picked = ad::sum(ad::ln(ad::clamp_min(probs, kProbabilityFloor)) * g.constant(std::move(onehot)));
    return ad::scale(picked, -1.0 / static_cast<double>(batch));
}

/// Divisor of the aleatoric sum: the masked count, or every unlabeled row
/// (masked-out rows then contribute zero but still count).
enum class AleatoricNorm { masked, unlabeled };

/// Sum over masked samples of sum_j [ 0.5 (q_ij - p_ij)^2 exp(-2 u_ij) + u_ij ],
/// the Gaussian NLL with covariance diag(exp(2u)) up to its constant term,
/// divided according to `norm`. An all-zero mask yields the constant 0.
inline ad::Var aleatoric_nll(ad::Var probs, const Tensor& targets, ad::Var u, std::span<const std::uint8_t> mask,
                             AleatoricNorm norm = AleatoricNorm::masked) {
    ad::Graph& g = *probs.graph;
    const Tensor& p = g.value(probs);
    const Tensor& uv = g.value(u);
    if (targets.shape != p.shape || uv.shape != p.shape) {
        throw ShapeError("aleatoric_nll: shapes differ, p " + shape_str(p.shape) + ", q " + shape_str(targets.shape) + ", u " +
                         shape_str(uv.shape));
    }
    if (mask.size() != p.rows()) throw ShapeError("aleatoric_nll: mask length differs from batch size");
    for (std::size_t i = 0; i < uv.size(); ++i) {
        if (!(uv.values[i] >= 0.0 && uv.values[i] <= 1.0)) {
            throw LossDomainError("aleatoric_nll: u[" + std::to_string(i) + "] = " + std::to_string(uv.values[i]) + " lies outside [0, 1]");
        }
    }
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < mask.size(); ++i)
        if (mask[i]) rows.push_back(i);
    if (rows.empty()) return g.constant(Tensor::scalar(0.0));

    const ad::Var p_sel = ad::select_rows(probs, rows);
    const ad::Var u_sel = ad::select_rows(u, rows);
    const ad::Var q_sel = g.constant(kernels::select_rows(targets, rows));
    const ad::Var quad = ad::scale(ad::square(q_sel - p_sel) * ad::exp(ad::scale(u_sel, -2.0)), 0.5);
    const std::size_t divisor = norm == AleatoricNorm::masked ? rows.size() : mask.size();
    return ad::scale(ad::sum(quad + u_sel), 1.0 / static_cast<double>(divisor));
}

/// (1/B) sum_i ||C^T phi_i||^2 / k + lambda ||C^T C - I_k||_F^2
inline ad::Var certificate_loss(ad::Var certificates, ad::Var features, double lambda) {
    ad::Graph& g = *certificates.graph;
    const Tensor& c = g.value(certificates);
    const Tensor& f = g.value(features);
    if (c.rank() != 2 || f.rank() != 2 || f.shape[1] != c.shape[0]) {
        throw ShapeError("certificate_loss: features " + shape_str(f.shape) + " incompatible with certificates " + shape_str(c.shape));
    }
    const std::size_t k = c.shape[1];
    const double batch = static_cast<double>(f.shape[0]);
    const ad::Var residual = ad::matmul(features, certificates);
    const ad::Var fit = ad::scale(ad::sum(ad::square(residual)), 1.0 / (batch * static_cast<double>(k)));
    Tensor eye({k, k}, 0.0);
    for (std::size_t i = 0; i < k; ++i) eye.at(i, i) = 1.0;
    const ad::Var gram = ad::matmul(ad::transpose(certificates), certificates) - g.constant(std::move(eye));
    return fit + ad::scale(ad::sum(ad::square(gram)), lambda);
}

/// ||C^T C - I_k||_F
inline double orthogonality_defect(const Tensor& c) {
    const Tensor gram = kernels::matmul(kernels::transpose(c), c);
    double s = 0.0;
    for (std::size_t i = 0; i < gram.shape[0]; ++i)
        for (std::size_t j = 0; j < gram.shape[1]; ++j) {
            const double v = gram.at(i, j) - (i == j ? 1.0 : 0.0);
            s += v * v;
        }
    return std::sqrt(s);
}

// ---- value-level convenience -----------------------------------------------------------

inline double supervised_ce(const Tensor& probs, std::span<const std::size_t> labels) {
    ad::Graph g;
    return g.value(supervised_ce(g.constant(probs), labels)).item();
}

inline double aleatoric_nll(const Tensor& probs, const Tensor& targets, const Tensor& u, std::span<const std::uint8_t> mask,
                            AleatoricNorm norm = AleatoricNorm::masked) {
    ad::Graph g;
    return g.value(aleatoric_nll(g.constant(probs), targets, g.constant(u), mask, norm)).item();
}

inline double certificate_loss(const Tensor& certificates, const Tensor& features, double lambda) {
    ad::Graph g;
    return g.value(certificate_loss(g.constant(certificates), g.constant(features), lambda)).item();
}

// ---- composition -------------------------------------------------------------------------

struct LossBreakdown {
    double l_s = 0.0;
    double l_ua = 0.0;
    double l_ue = 0.0;
    double total = 0.0;
    double alpha_ua = 0.0;
    double alpha_ue = 0.0;
    double lambda = 0.0;
    double masked_fraction = 0.0;

    friend bool operator==(const LossBreakdown&, const LossBreakdown&) = default;
};

/// total = l_s + alpha_ua * l_ua + alpha_ue * l_ue
inline LossBreakdown total_loss(double l_s, double l_ua, double l_ue, double alpha_ua, double alpha_ue, double lambda = 0.0) {
    if (alpha_ua < 0.0 || alpha_ue < 0.0) throw std::invalid_argument("total_loss: weights must be nonnegative");
    LossBreakdown b;
    b.l_s = l_s;
    b.l_ua = l_ua;
    b.l_ue = l_ue;
    b.alpha_ua = alpha_ua;
    b.alpha_ue = alpha_ue;
    b.lambda = lambda;
    b.total = l_s + alpha_ua * l_ua + alpha_ue * l_ue;
    return b;
}

}  // namespace ussl
