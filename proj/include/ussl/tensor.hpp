#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace ussl {

using Shape = std::vector<std::size_t>;

class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

inline std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ", ";
        os << shape[i];
    }
    os << ']';
    return os.str();
}

inline std::size_t numel(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

/// Dense row-major array of doubles. Scalars have shape {1}.
struct Tensor {
    Shape shape{1};
    std::vector<double> values = std::vector<double>(1, 0.0);

    Tensor() = default;

    explicit Tensor(Shape s, double fill = 0.0) : shape(std::move(s)), values(numel(shape), fill) {
        check_extents();
    }

    Tensor(Shape s, std::vector<double> v) : shape(std::move(s)), values(std::move(v)) {
        check_extents();
        if (values.size() != numel(shape)) {
            throw ShapeError("tensor: " + std::to_string(values.size()) + " values do not fill shape " +
                             shape_str(shape));
        }
    }

    static Tensor scalar(double v) { return Tensor({1}, std::vector<double>{v}); }

    static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> v) {
        return Tensor({rows, cols}, std::move(v));
    }

    [[nodiscard]] std::size_t size() const noexcept { return values.size(); }
    [[nodiscard]] bool is_scalar() const noexcept { return values.size() == 1; }
    [[nodiscard]] std::size_t rank() const noexcept { return shape.size(); }

    // 1-D tensors are treated as a single row.
    [[nodiscard]] std::size_t rows() const noexcept { return shape.size() >= 2 ? shape[0] : 1; }
    [[nodiscard]] std::size_t cols() const noexcept { return shape.size() >= 2 ? values.size() / shape[0] : values.size(); }

    [[nodiscard]] double item() const {
        if (!is_scalar()) throw ShapeError("item: tensor of shape " + shape_str(shape) + " is not a scalar");
        return values[0];
    }

    double& at(std::size_t r, std::size_t c) { return values[r * cols() + c]; }
    [[nodiscard]] double at(std::size_t r, std::size_t c) const { return values[r * cols() + c]; }

    [[nodiscard]] bool all_finite() const {
        return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
    }

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    void check_extents() const {
        for (auto e : shape) {
            if (e == 0) throw ShapeError("tensor: zero extent in shape " + shape_str(shape));
        }
        if (shape.empty()) throw ShapeError("tensor: empty shape");
    }
};

// Value-level kernels shared by the autodiff graph and the graph-free inference path,
// so both produce bit-identical results.
namespace kernels {

inline void require_matrix(std::string_view op, const Tensor& t) {
    if (t.rank() != 2) throw ShapeError(std::string(op) + ": expected a matrix, got " + shape_str(t.shape));
}

/// [m,k] x [k,n] -> [m,n]. Each output row depends only on the matching input row.
inline Tensor matmul(const Tensor& a, const Tensor& b) {
    require_matrix("matmul", a);
    require_matrix("matmul", b);
    const std::size_t m = a.shape[0], k = a.shape[1], n = b.shape[1];
    if (b.shape[0] != k) {
        throw ShapeError("matmul: inner dimensions differ, " + shape_str(a.shape) + " vs " + shape_str(b.shape));
    }
    Tensor out({m, n});
    for (std::size_t i = 0; i < m; ++i) {
        double* orow = &out.values[i * n];
        const double* arow = &a.values[i * k];
        for (std::size_t p = 0; p < k; ++p) {
            const double av = arow[p];
            const double* brow = &b.values[p * n];
            for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
    }
    return out;
}

inline Tensor transpose(const Tensor& a) {
    require_matrix("transpose", a);
    const std::size_t m = a.shape[0], n = a.shape[1];
    Tensor out({n, m});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out.values[j * m + i] = a.values[i * n + j];
    return out;
}

/// a [m,n] + bias [1,n] broadcast over rows.
inline Tensor add_row(const Tensor& a, const Tensor& bias) {
    Tensor out = a;
    const std::size_t n = a.cols();
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < n; ++j) out.values[i * n + j] += bias.values[j];
    return out;
}

inline Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b) { return add_row(matmul(x, w), b); }

template <typename F>
Tensor map(const Tensor& a, F&& f) {
    Tensor out = a;
    for (auto& v : out.values) v = f(v);
    return out;
}

inline double sigmoid(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

inline Tensor relu(const Tensor& a) {
    return map(a, [](double v) { return v > 0.0 ? v : 0.0; });
}

inline Tensor sigmoid(const Tensor& a) {
    return map(a, [](double v) { return sigmoid(v); });
}

/// Row-wise softmax with max subtraction.
inline Tensor softmax(const Tensor& a) {
    Tensor out = a;
    const std::size_t n = a.cols();
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double* row = &out.values[i * n];
        const double mx = *std::max_element(row, row + n);
        double total = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            row[j] = std::exp(row[j] - mx);
            total += row[j];
        }
        for (std::size_t j = 0; j < n; ++j) row[j] /= total;
    }
    return out;
}

inline Tensor select_rows(const Tensor& a, const std::vector<std::size_t>& rows) {
    require_matrix("select_rows", a);
    const std::size_t n = a.shape[1];
    if (rows.empty()) throw ShapeError("select_rows: empty row selection from " + shape_str(a.shape));
    Tensor out({rows.size(), n});
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i] >= a.shape[0]) {
            throw ShapeError("select_rows: row " + std::to_string(rows[i]) + " out of range for " + shape_str(a.shape));
        }
        std::copy_n(&a.values[rows[i] * n], n, &out.values[i * n]);
    }
    return out;
}

inline Tensor concat_rows(const Tensor& a, const Tensor& b) {
    require_matrix("concat_rows", a);
    require_matrix("concat_rows", b);
    if (a.shape[1] != b.shape[1]) {
        throw ShapeError("concat_rows: column counts differ, " + shape_str(a.shape) + " vs " + shape_str(b.shape));
    }
    Tensor out({a.shape[0] + b.shape[0], a.shape[1]});
    std::copy(a.values.begin(), a.values.end(), out.values.begin());
    std::copy(b.values.begin(), b.values.end(), out.values.begin() + static_cast<std::ptrdiff_t>(a.size()));
    return out;
}

/// Stacks equal-length feature vectors into a [rows, dim] matrix.
inline Tensor stack_rows(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) throw ShapeError("stack_rows: no rows");
    const std::size_t dim = rows.front().size();
    Tensor out({rows.size(), dim});
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != dim) {
            throw ShapeError("stack_rows: row " + std::to_string(i) + " has " + std::to_string(rows[i].size()) +
                             " values, expected " + std::to_string(dim));
        }
        std::copy(rows[i].begin(), rows[i].end(), out.values.begin() + static_cast<std::ptrdiff_t>(i * dim));
    }
    return out;
}

inline std::vector<double> row(const Tensor& a, std::size_t r) {
    const std::size_t n = a.cols();
    return {a.values.begin() + static_cast<std::ptrdiff_t>(r * n),
            a.values.begin() + static_cast<std::ptrdiff_t>((r + 1) * n)};
}

inline std::size_t argmax_row(const Tensor& a, std::size_t r) {
    const std::size_t n = a.cols();
    const double* p = &a.values[r * n];
    return static_cast<std::size_t>(std::max_element(p, p + n) - p);
}

}  // namespace kernels
}  // namespace ussl
