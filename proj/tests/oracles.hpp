#pragma once

// Reference implementations for tests. Deliberately written with plain loops and
// no library kernels so they fail independently of the code under test.

#include "ussl/tensor.hpp"

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

namespace oracle {

using Matrix = std::vector<std::vector<double>>;

/// 0.5 d^T S^{-1} d + 0.5 ln|S| with S = diag(sigma^2), sigma^2 = e^{2u}, evaluated per coordinate.
inline double diagonal_nll_scalar(const std::vector<double>& p, const std::vector<double>& q, const std::vector<double>& u) {
    double quad = 0.0, logdet = 0.0;
    for (std::size_t j = 0; j < p.size(); ++j) {
        const double var = std::exp(2.0 * u[j]);
        const double d = q[j] - p[j];
        quad += d * d / var;
        logdet += std::log(var);
    }
    return 0.5 * quad + 0.5 * logdet;
}

/// Inverse and log-determinant by Gauss-Jordan elimination with partial pivoting.
inline std::pair<Matrix, double> invert_logdet(Matrix a) {
    const std::size_t n = a.size();
    Matrix inv(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) inv[i][i] = 1.0;
    double logdet = 0.0;
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
        if (a[pivot][col] == 0.0) throw std::runtime_error("oracle: singular matrix");
        std::swap(a[pivot], a[col]);
        std::swap(inv[pivot], inv[col]);
        const double diag = a[col][col];
        logdet += std::log(std::abs(diag));
        for (std::size_t j = 0; j < n; ++j) {
            a[col][j] /= diag;
            inv[col][j] /= diag;
        }
        for (std::size_t r = 0; r < n; ++r) {
            if (r == col) continue;
            const double f = a[r][col];
            for (std::size_t j = 0; j < n; ++j) {
                a[r][j] -= f * a[col][j];
                inv[r][j] -= f * inv[col][j];
            }
        }
    }
    return {inv, logdet};
}

/// Gaussian NLL (without the constant) using a dense covariance diag(e^{2u}).
inline double dense_gaussian_nll(const std::vector<double>& p, const std::vector<double>& q, const std::vector<double>& u) {
    const std::size_t h = p.size();
    Matrix sigma(h, std::vector<double>(h, 0.0));
    for (std::size_t j = 0; j < h; ++j) sigma[j][j] = std::exp(2.0 * u[j]);
    const auto [inv, logdet] = invert_logdet(sigma);
    double quad = 0.0;
    for (std::size_t a = 0; a < h; ++a)
        for (std::size_t b = 0; b < h; ++b) quad += (q[a] - p[a]) * inv[a][b] * (q[b] - p[b]);
    return 0.5 * quad + 0.5 * logdet;
}

/// (1/B) sum_i ||C^T phi_i||^2 / k + lambda ||C^T C - I||_F^2 by explicit loops.
inline double certificate_loss(const ussl::Tensor& c, const ussl::Tensor& phi, double lambda) {
    const std::size_t d = c.shape[0], k = c.shape[1], b = phi.shape[0];
    double fit = 0.0;
    for (std::size_t i = 0; i < b; ++i)
        for (std::size_t m = 0; m < k; ++m) {
            double r = 0.0;
            for (std::size_t j = 0; j < d; ++j) r += c.values[j * k + m] * phi.values[i * d + j];
            fit += r * r;
        }
    double pen = 0.0;
    for (std::size_t m = 0; m < k; ++m)
        for (std::size_t n = 0; n < k; ++n) {
            double g = 0.0;
            for (std::size_t j = 0; j < d; ++j) g += c.values[j * k + m] * c.values[j * k + n];
            if (m == n) g -= 1.0;
            pen += g * g;
        }
    return fit / static_cast<double>(b * k) + lambda * pen;
}

// ---- composite objective on a one-hidden-layer model ----------------------------------

struct Net {
    Matrix w1;                 // [in][hidden]
    std::vector<double> b1;    // [hidden]
    Matrix w2;                 // [hidden][d]
    std::vector<double> b2;    // [d]
    Matrix wl;                 // [d][h]
    std::vector<double> bl;
    Matrix wu;                 // [d][h]
    std::vector<double> bu;
    Matrix c;                  // [d][k]
};

struct Heads {
    std::vector<double> phi, p, u;
};

inline Heads run(const Net& n, const std::vector<double>& x) {
    const std::size_t hid = n.b1.size(), d = n.b2.size(), h = n.bl.size();
    std::vector<double> a(hid);
    for (std::size_t j = 0; j < hid; ++j) {
        double s = n.b1[j];
        for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * n.w1[i][j];
        a[j] = s > 0.0 ? s : 0.0;
    }
    Heads out;
    out.phi.assign(d, 0.0);
    for (std::size_t j = 0; j < d; ++j) {
        double s = n.b2[j];
        for (std::size_t i = 0; i < hid; ++i) s += a[i] * n.w2[i][j];
        out.phi[j] = s;
    }
    std::vector<double> z(h);
    double zmax = -1e300;
    for (std::size_t j = 0; j < h; ++j) {
        double s = n.bl[j];
        for (std::size_t i = 0; i < d; ++i) s += out.phi[i] * n.wl[i][j];
        z[j] = s;
        zmax = std::max(zmax, s);
    }
    double denom = 0.0;
    for (double v : z) denom += std::exp(v - zmax);
    out.p.resize(h);
    for (std::size_t j = 0; j < h; ++j) out.p[j] = std::exp(z[j] - zmax) / denom;
    out.u.resize(h);
    for (std::size_t j = 0; j < h; ++j) {
        double s = n.bu[j];
        for (std::size_t i = 0; i < d; ++i) s += out.phi[i] * n.wu[i][j];
        out.u[j] = 1.0 / (1.0 + std::exp(-s));
    }
    return out;
}

/// l_s + a_ua * l_ua + a_ue * l_ue over one batch of labeled rows and unlabeled rows
/// with fixed targets q and mask; features of all rows feed the certificate term.
inline double composite(const Net& n, const Matrix& xl, const std::vector<std::size_t>& yl, const Matrix& xu, const Matrix& q,
                        const std::vector<std::uint8_t>& mask, double a_ua, double a_ue, double lambda, bool divide_by_all_unlabeled = false) {
    const std::size_t d = n.b2.size(), k = n.c[0].size();
    double ls = 0.0;
    Matrix feats;
    for (std::size_t i = 0; i < xl.size(); ++i) {
        const auto o = run(n, xl[i]);
        ls -= std::log(std::max(o.p[yl[i]], 1e-12));
        feats.push_back(o.phi);
    }
    ls /= static_cast<double>(xl.size());
    double lua = 0.0;
    std::size_t masked = 0;
    for (std::size_t i = 0; i < xu.size(); ++i) {
        const auto o = run(n, xu[i]);
        feats.push_back(o.phi);
        if (!mask[i]) continue;
        ++masked;
        for (std::size_t j = 0; j < o.p.size(); ++j) lua += 0.5 * (q[i][j] - o.p[j]) * (q[i][j] - o.p[j]) * std::exp(-2.0 * o.u[j]) + o.u[j];
    }
    if (masked) lua /= static_cast<double>(divide_by_all_unlabeled ? xu.size() : masked);
    ussl::Tensor ct({d, k}), ft({feats.size(), d});
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t m = 0; m < k; ++m) ct.values[i * k + m] = n.c[i][m];
    for (std::size_t i = 0; i < feats.size(); ++i)
        for (std::size_t j = 0; j < d; ++j) ft.values[i * d + j] = feats[i][j];
    const double lue = oracle::certificate_loss(ct, ft, lambda);
    return ls + a_ua * lua + a_ue * lue;
}

}  // namespace oracle
