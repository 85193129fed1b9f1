#pragma once

// Tape-based reverse-mode differentiation over dense double tensors.
//
// A Graph records nodes in creation order, which is a topological order by
// construction. Each primitive stores its forward value; backward() walks the
// tape in reverse applying the exact vector-Jacobian product of each primitive.
//
// Broadcasting is limited to: equal shapes, a scalar on either side, and a
// [1,n] row on the right of an [m,n] matrix (bias rows).

#include "ussl/tensor.hpp"

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace ussl::ad {

class BackwardError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

enum class OpKind : std::uint8_t {
    leaf,
    add,
    sub,
    mul,
    matmul,
    transpose,
    exp,
    log,
    sigmoid,
    softmax,
    relu,
    square,
    sum,
    mean,
    frobenius_norm,
    scale,
    clamp_min,
    select_rows,
    concat_rows,
};

inline const char* op_name(OpKind k) {
    switch (k) {
        case OpKind::leaf: return "leaf";
        case OpKind::add: return "add";
        case OpKind::sub: return "sub";
        case OpKind::mul: return "mul";
        case OpKind::matmul: return "matmul";
        case OpKind::transpose: return "transpose";
        case OpKind::exp: return "exp";
        case OpKind::log: return "ln";
        case OpKind::sigmoid: return "sigmoid";
        case OpKind::softmax: return "softmax";
        case OpKind::relu: return "relu";
        case OpKind::square: return "square";
        case OpKind::sum: return "sum";
        case OpKind::mean: return "mean";
        case OpKind::frobenius_norm: return "frobenius_norm";
        case OpKind::scale: return "scale";
        case OpKind::clamp_min: return "clamp_min";
        case OpKind::select_rows: return "select_rows";
        case OpKind::concat_rows: return "concat_rows";
    }
    return "?";
}

// How the right operand of a binary elementwise op lines up with the left.
enum class Broadcast : std::uint8_t { same, lhs_scalar, rhs_scalar, rhs_row };

class Graph;

/// Handle to a node in a Graph. Cheap to copy; valid while the graph lives.
struct Var {
    Graph* graph = nullptr;
    std::size_t id = 0;
};

class Graph {
public:
    Graph() = default;
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    Var parameter(Tensor value) { return push_leaf(std::move(value), true); }
    Var constant(Tensor value) { return push_leaf(std::move(value), false); }

    [[nodiscard]] const Tensor& value(Var v) const { return nodes_.at(v.id).value; }

    /// Gradient of the last backward() output wrt this node. Zero for unused nodes.
    [[nodiscard]] const Tensor& grad(Var v) const {
        if (!backward_done_) throw BackwardError("grad: backward() has not been run on this graph");
        return grads_.at(v.id);
    }

    [[nodiscard]] bool requires_grad(Var v) const { return nodes_.at(v.id).needs_grad; }
    [[nodiscard]] OpKind kind(Var v) const { return nodes_.at(v.id).kind; }
    [[nodiscard]] std::size_t size() const noexcept { return nodes_.size(); }

    void backward(Var output);

    /// Clears gradients so that backward() may run again.
    void zero_grad() {
        grads_.clear();
        backward_done_ = false;
    }

    // Node construction, used by the primitive functions below.
    struct Node {
        OpKind kind = OpKind::leaf;
        std::size_t lhs = 0;
        std::size_t rhs = 0;
        int arity = 0;
        Broadcast broadcast = Broadcast::same;
        double scalar = 0.0;
        std::vector<std::size_t> rows;
        Tensor value;
        bool needs_grad = false;
    };

    Var push(Node node) {
        if (backward_done_) throw BackwardError("graph: cannot extend a graph after backward()");
        node.needs_grad = (node.arity >= 1 && nodes_[node.lhs].needs_grad) ||
                          (node.arity == 2 && nodes_[node.rhs].needs_grad);
        nodes_.push_back(std::move(node));
        return {this, nodes_.size() - 1};
    }

    [[nodiscard]] const Node& node(std::size_t id) const { return nodes_[id]; }

private:
    Var push_leaf(Tensor value, bool requires_grad) {
        if (backward_done_) throw BackwardError("graph: cannot extend a graph after backward()");
        Node n;
        n.kind = OpKind::leaf;
        n.value = std::move(value);
        n.needs_grad = requires_grad;
        nodes_.push_back(std::move(n));
        return {this, nodes_.size() - 1};
    }

    void propagate(std::size_t id);

    std::vector<Node> nodes_;
    std::vector<Tensor> grads_;
    bool backward_done_ = false;
};

namespace detail {

inline Graph& graph_of(Var a, Var b, const char* op) {
    if (a.graph == nullptr || a.graph != b.graph) {
        throw std::invalid_argument(std::string(op) + ": operands belong to different graphs");
    }
    return *a.graph;
}

inline Graph& graph_of(Var a, const char* op) {
    if (a.graph == nullptr) throw std::invalid_argument(std::string(op) + ": null variable");
    return *a.graph;
}

inline Broadcast resolve_broadcast(OpKind kind, const Tensor& a, const Tensor& b) {
    if (a.shape == b.shape) return Broadcast::same;
    if (b.is_scalar()) return Broadcast::rhs_scalar;
    if (a.is_scalar()) return Broadcast::lhs_scalar;
    if (a.rank() == 2 && b.rank() == 2 && b.shape[0] == 1 && b.shape[1] == a.shape[1]) return Broadcast::rhs_row;
    throw ShapeError(std::string(op_name(kind)) + ": incompatible shapes " + shape_str(a.shape) + " and " +
                     shape_str(b.shape));
}

inline std::size_t rhs_index(Broadcast bc, std::size_t i, std::size_t cols) {
    switch (bc) {
        case Broadcast::same: return i;
        case Broadcast::rhs_scalar: return 0;
        case Broadcast::rhs_row: return i % cols;
        case Broadcast::lhs_scalar: return i;
    }
    return i;
}

template <typename F>
Var binary(OpKind kind, Var a, Var b, F&& f) {
    Graph& g = graph_of(a, b, op_name(kind));
    const Tensor& av = g.value(a);
    const Tensor& bv = g.value(b);
    const Broadcast bc = resolve_broadcast(kind, av, bv);
    Graph::Node n;
    n.kind = kind;
    n.lhs = a.id;
    n.rhs = b.id;
    n.arity = 2;
    n.broadcast = bc;
    if (bc == Broadcast::lhs_scalar) {
        n.value = Tensor(bv.shape);
        for (std::size_t i = 0; i < bv.size(); ++i) n.value.values[i] = f(av.values[0], bv.values[i]);
    } else {
        n.value = Tensor(av.shape);
        const std::size_t cols = av.cols();
        for (std::size_t i = 0; i < av.size(); ++i) n.value.values[i] = f(av.values[i], bv.values[rhs_index(bc, i, cols)]);
    }
    return g.push(std::move(n));
}

inline Var unary(OpKind kind, Var a, Tensor value, double scalar = 0.0) {
    Graph& g = graph_of(a, op_name(kind));
    Graph::Node n;
    n.kind = kind;
    n.lhs = a.id;
    n.arity = 1;
    n.scalar = scalar;
    n.value = std::move(value);
    return g.push(std::move(n));
}

}  // namespace detail

// ---- primitives --------------------------------------------------------------

inline Var add(Var a, Var b) { return detail::binary(OpKind::add, a, b, [](double x, double y) { return x + y; }); }
inline Var sub(Var a, Var b) { return detail::binary(OpKind::sub, a, b, [](double x, double y) { return x - y; }); }
inline Var mul(Var a, Var b) { return detail::binary(OpKind::mul, a, b, [](double x, double y) { return x * y; }); }

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }

inline Var matmul(Var a, Var b) {
    Graph& g = detail::graph_of(a, b, "matmul");
    Graph::Node n;
    n.kind = OpKind::matmul;
    n.lhs = a.id;
    n.rhs = b.id;
    n.arity = 2;
    n.value = kernels::matmul(g.value(a), g.value(b));
    return g.push(std::move(n));
}

inline Var transpose(Var a) { return detail::unary(OpKind::transpose, a, kernels::transpose(a.graph->value(a))); }

inline Var exp(Var a) {
    return detail::unary(OpKind::exp, a, kernels::map(a.graph->value(a), [](double v) { return std::exp(v); }));
}

inline Var ln(Var a) {
    return detail::unary(OpKind::log, a, kernels::map(a.graph->value(a), [](double v) { return std::log(v); }));
}

inline Var sigmoid(Var a) { return detail::unary(OpKind::sigmoid, a, kernels::sigmoid(a.graph->value(a))); }

/// Row-wise softmax; a 1-D tensor is one row.
inline Var softmax(Var a) { return detail::unary(OpKind::softmax, a, kernels::softmax(a.graph->value(a))); }

inline Var relu(Var a) { return detail::unary(OpKind::relu, a, kernels::relu(a.graph->value(a))); }

inline Var square(Var a) {
    return detail::unary(OpKind::square, a, kernels::map(a.graph->value(a), [](double v) { return v * v; }));
}

inline Var sum(Var a) {
    const auto& v = detail::graph_of(a, "sum").value(a).values;
    double s = 0.0;
    for (double x : v) s += x;
    return detail::unary(OpKind::sum, a, Tensor::scalar(s));
}

inline Var mean(Var a) {
    const auto& v = detail::graph_of(a, "mean").value(a).values;
    double s = 0.0;
    for (double x : v) s += x;
    return detail::unary(OpKind::mean, a, Tensor::scalar(s / static_cast<double>(v.size())));
}

inline Var frobenius_norm(Var a) {
    const auto& v = detail::graph_of(a, "frobenius_norm").value(a).values;
    double s = 0.0;
    for (double x : v) s += x * x;
    return detail::unary(OpKind::frobenius_norm, a, Tensor::scalar(std::sqrt(s)));
}

/// Multiplies by a constant.
inline Var scale(Var a, double factor) {
    return detail::unary(OpKind::scale, a,
                         kernels::map(detail::graph_of(a, "scale").value(a), [factor](double v) { return v * factor; }),
                         factor);
}

/// max(a, floor); gradient passes only where a > floor.
inline Var clamp_min(Var a, double floor) {
    return detail::unary(OpKind::clamp_min, a,
                         kernels::map(detail::graph_of(a, "clamp_min").value(a),
                                      [floor](double v) { return v > floor ? v : floor; }),
                         floor);
}

inline Var select_rows(Var a, std::vector<std::size_t> rows) {
    Graph& g = detail::graph_of(a, "select_rows");
    Graph::Node n;
    n.kind = OpKind::select_rows;
    n.lhs = a.id;
    n.arity = 1;
    n.value = kernels::select_rows(g.value(a), rows);
    n.rows = std::move(rows);
    return g.push(std::move(n));
}

inline Var concat_rows(Var a, Var b) {
    Graph& g = detail::graph_of(a, b, "concat_rows");
    Graph::Node n;
    n.kind = OpKind::concat_rows;
    n.lhs = a.id;
    n.rhs = b.id;
    n.arity = 2;
    n.value = kernels::concat_rows(g.value(a), g.value(b));
    return g.push(std::move(n));
}

// ---- backward ----------------------------------------------------------------

inline void Graph::backward(Var output) {
    if (output.graph != this) throw std::invalid_argument("backward: output belongs to a different graph");
    if (backward_done_) throw BackwardError("backward: already run on this graph; call zero_grad() first");
    const Tensor& out = nodes_.at(output.id).value;
    if (!out.is_scalar()) throw BackwardError("backward: output of shape " + shape_str(out.shape) + " is not a scalar");

    grads_.clear();
    grads_.reserve(nodes_.size());
    for (const auto& n : nodes_) grads_.emplace_back(n.value.shape, 0.0);
    grads_[output.id].values[0] = 1.0;
    backward_done_ = true;

    for (std::size_t id = output.id + 1; id-- > 0;) {
        if (nodes_[id].needs_grad && nodes_[id].kind != OpKind::leaf) propagate(id);
    }
}

inline void Graph::propagate(std::size_t id) {
    const Node& n = nodes_[id];
    const Tensor& g = grads_[id];
    const bool lhs_needs = n.arity >= 1 && nodes_[n.lhs].needs_grad;
    const bool rhs_needs = n.arity == 2 && nodes_[n.rhs].needs_grad;
    auto& ga = grads_[n.lhs].values;

    switch (n.kind) {
        case OpKind::leaf: break;

        case OpKind::add:
        case OpKind::sub:
        case OpKind::mul: {
            const Tensor& av = nodes_[n.lhs].value;
            const Tensor& bv = nodes_[n.rhs].value;
            auto& gb = grads_[n.rhs].values;
            const double sign = n.kind == OpKind::sub ? -1.0 : 1.0;
            const bool is_mul = n.kind == OpKind::mul;
            if (n.broadcast == Broadcast::lhs_scalar) {
                for (std::size_t i = 0; i < g.size(); ++i) {
                    const double gi = g.values[i];
                    if (lhs_needs) ga[0] += is_mul ? gi * bv.values[i] : gi;
                    if (rhs_needs) gb[i] += is_mul ? gi * av.values[0] : sign * gi;
                }
            } else {
                const std::size_t cols = av.cols();
                for (std::size_t i = 0; i < g.size(); ++i) {
                    const double gi = g.values[i];
                    const std::size_t j = detail::rhs_index(n.broadcast, i, cols);
                    if (lhs_needs) ga[i] += is_mul ? gi * bv.values[j] : gi;
                    if (rhs_needs) gb[j] += is_mul ? gi * av.values[i] : sign * gi;
                }
            }
            break;
        }

        case OpKind::matmul: {
            const Tensor& av = nodes_[n.lhs].value;
            const Tensor& bv = nodes_[n.rhs].value;
            const std::size_t m = av.shape[0], k = av.shape[1], cols = bv.shape[1];
            if (lhs_needs) {
                // dA = G B^T
                for (std::size_t i = 0; i < m; ++i) {
                    const double* grow = &g.values[i * cols];
                    for (std::size_t p = 0; p < k; ++p) {
                        const double* brow = &bv.values[p * cols];
                        double acc = 0.0;
                        for (std::size_t j = 0; j < cols; ++j) acc += grow[j] * brow[j];
                        ga[i * k + p] += acc;
                    }
                }
            }
            if (rhs_needs) {
                // dB = A^T G
                auto& gb = grads_[n.rhs].values;
                for (std::size_t i = 0; i < m; ++i) {
                    const double* grow = &g.values[i * cols];
                    for (std::size_t p = 0; p < k; ++p) {
                        const double a_ip = av.values[i * k + p];
                        if (a_ip == 0.0) continue;
                        double* gbrow = &gb[p * cols];
                        for (std::size_t j = 0; j < cols; ++j) gbrow[j] += a_ip * grow[j];
                    }
                }
            }
            break;
        }

        case OpKind::transpose: {
            const Tensor gt = kernels::transpose(g);
            for (std::size_t i = 0; i < gt.size(); ++i) ga[i] += gt.values[i];
            break;
        }

        case OpKind::exp:
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g.values[i] * n.value.values[i];
            break;

        case OpKind::log: {
            const auto& av = nodes_[n.lhs].value.values;
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g.values[i] / av[i];
            break;
        }

        case OpKind::sigmoid:
            for (std::size_t i = 0; i < g.size(); ++i) {
                const double s = n.value.values[i];
                ga[i] += g.values[i] * s * (1.0 - s);
            }
            break;

        case OpKind::softmax: {
            const std::size_t cols = n.value.cols();
            for (std::size_t r = 0; r < n.value.rows(); ++r) {
                const double* s = &n.value.values[r * cols];
                const double* gr = &g.values[r * cols];
                double dot = 0.0;
                for (std::size_t j = 0; j < cols; ++j) dot += gr[j] * s[j];
                for (std::size_t j = 0; j < cols; ++j) ga[r * cols + j] += s[j] * (gr[j] - dot);
            }
            break;
        }

        case OpKind::relu: {
            const auto& av = nodes_[n.lhs].value.values;
            for (std::size_t i = 0; i < g.size(); ++i)
                if (av[i] > 0.0) ga[i] += g.values[i];
            break;
        }

        case OpKind::square: {
            const auto& av = nodes_[n.lhs].value.values;
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += 2.0 * av[i] * g.values[i];
            break;
        }

        case OpKind::sum:
            for (auto& v : ga) v += g.values[0];
            break;

        case OpKind::mean: {
            const double share = g.values[0] / static_cast<double>(ga.size());
            for (auto& v : ga) v += share;
            break;
        }

        case OpKind::frobenius_norm: {
            const double norm = n.value.values[0];
            if (norm == 0.0) break;  // subgradient 0 at the origin
            const auto& av = nodes_[n.lhs].value.values;
            for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g.values[0] * av[i] / norm;
            break;
        }

        case OpKind::scale:
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g.values[i] * n.scalar;
            break;

        case OpKind::clamp_min: {
            const auto& av = nodes_[n.lhs].value.values;
            for (std::size_t i = 0; i < g.size(); ++i)
                if (av[i] > n.scalar) ga[i] += g.values[i];
            break;
        }

        case OpKind::select_rows: {
            const std::size_t cols = n.value.cols();
            for (std::size_t i = 0; i < n.rows.size(); ++i)
                for (std::size_t j = 0; j < cols; ++j) ga[n.rows[i] * cols + j] += g.values[i * cols + j];
            break;
        }

        case OpKind::concat_rows: {
            const std::size_t split = nodes_[n.lhs].value.size();
            if (lhs_needs)
                for (std::size_t i = 0; i < split; ++i) ga[i] += g.values[i];
            if (rhs_needs) {
                auto& gb = grads_[n.rhs].values;
                for (std::size_t i = split; i < g.size(); ++i) gb[i - split] += g.values[i];
            }
            break;
        }
    }
}

// ---- finite-difference oracle --------------------------------------------------

class NonFiniteError : public std::runtime_error {
public:
    NonFiniteError(std::size_t tensor, std::size_t element, const std::string& what)
        : std::runtime_error(what), tensor_index(tensor), element_index(element) {}
    std::size_t tensor_index;
    std::size_t element_index;
};

using ScalarFn = std::function<double(const std::vector<Tensor>&)>;

/// Central differences (f(θ+εe_j) − f(θ−εe_j)) / 2ε for every coordinate of every tensor.
inline std::vector<Tensor> finite_diff_grad(const ScalarFn& fn, std::vector<Tensor> params, double epsilon) {
    if (!(epsilon > 0.0)) throw std::invalid_argument("finite_diff_grad: epsilon must be positive");
    std::vector<Tensor> grads;
    grads.reserve(params.size());
    for (std::size_t t = 0; t < params.size(); ++t) {
        Tensor grad(params[t].shape, 0.0);
        for (std::size_t j = 0; j < params[t].size(); ++j) {
            const double saved = params[t].values[j];
            params[t].values[j] = saved + epsilon;
            const double up = fn(params);
            params[t].values[j] = saved - epsilon;
            const double down = fn(params);
            params[t].values[j] = saved;
            if (!std::isfinite(up) || !std::isfinite(down)) {
                throw NonFiniteError(t, j,
                                     "finite_diff_grad: non-finite function value at tensor " + std::to_string(t) +
                                         ", element " + std::to_string(j));
            }
            grad.values[j] = (up - down) / (2.0 * epsilon);
        }
        grads.push_back(std::move(grad));
    }
    return grads;
}

}  // namespace ussl::ad
