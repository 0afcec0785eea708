#pragma once

#include <cmath>

#include "downscale/autograd/graph.hpp"

namespace downscale::ag {

namespace detail {

// Returns the parent's grad buffer if it participates in backprop.
template <typename T>
inline Tensor<T>* grad_target(Node<T>& node, std::size_t parent_idx) {
    auto& p = node.parents[parent_idx];
    if (!p || !p->requires_grad) return nullptr;
    return &p->ensure_grad();
}

}  // namespace detail

template <typename T, typename Fwd, typename Dfdx>
Var<T> unary_elementwise(const Var<T>& x, Fwd fwd, Dfdx dfdx, const char* op) {
    Tensor<T> y(x->value.shape());
    const std::int64_t n = y.numel();
    for (std::int64_t i = 0; i < n; ++i) y[i] = fwd(x->value[i]);
    return make_node<T>(
        std::move(y), {x},
        [dfdx](Node<T>& node) {
            if (auto* gx = detail::grad_target(node, 0)) {
                const Tensor<T>& xv = node.parents[0]->value;
                for (std::int64_t i = 0; i < node.grad.numel(); ++i)
                    (*gx)[i] += node.grad[i] * dfdx(xv[i], node.value[i]);
            }
        },
        op);
}

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
    if (!a->value.same_shape(b->value)) fail<ShapeError>("add: shape mismatch");
    Tensor<T> y(a->value.shape());
    for (std::int64_t i = 0; i < y.numel(); ++i) y[i] = a->value[i] + b->value[i];
    return make_node<T>(
        std::move(y), {a, b},
        [](Node<T>& node) {
            for (std::size_t k = 0; k < 2; ++k)
                if (auto* g = detail::grad_target(node, k))
                    for (std::int64_t i = 0; i < node.grad.numel(); ++i) (*g)[i] += node.grad[i];
        },
        "add");
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
    if (!a->value.same_shape(b->value)) fail<ShapeError>("sub: shape mismatch");
    Tensor<T> y(a->value.shape());
    for (std::int64_t i = 0; i < y.numel(); ++i) y[i] = a->value[i] - b->value[i];
    return make_node<T>(
        std::move(y), {a, b},
        [](Node<T>& node) {
            if (auto* g = detail::grad_target(node, 0))
                for (std::int64_t i = 0; i < node.grad.numel(); ++i) (*g)[i] += node.grad[i];
            if (auto* g = detail::grad_target(node, 1))
                for (std::int64_t i = 0; i < node.grad.numel(); ++i) (*g)[i] -= node.grad[i];
        },
        "sub");
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
    if (!a->value.same_shape(b->value)) fail<ShapeError>("mul: shape mismatch");
    Tensor<T> y(a->value.shape());
    for (std::int64_t i = 0; i < y.numel(); ++i) y[i] = a->value[i] * b->value[i];
    return make_node<T>(
        std::move(y), {a, b},
        [](Node<T>& node) {
            const Tensor<T>& av = node.parents[0]->value;
            const Tensor<T>& bv = node.parents[1]->value;
            if (auto* g = detail::grad_target(node, 0))
                for (std::int64_t i = 0; i < node.grad.numel(); ++i) (*g)[i] += node.grad[i] * bv[i];
            if (auto* g = detail::grad_target(node, 1))
                for (std::int64_t i = 0; i < node.grad.numel(); ++i) (*g)[i] += node.grad[i] * av[i];
        },
        "mul");
}

template <typename T>
Var<T> neg(const Var<T>& x) {
    return unary_elementwise<T>(
        x, [](T v) { return -v; }, [](T, T) { return T(-1); }, "neg");
}

template <typename T>
Var<T> scale(const Var<T>& x, T s) {
    return unary_elementwise<T>(
        x, [s](T v) { return s * v; }, [s](T, T) { return s; }, "scale");
}

template <typename T>
Var<T> add_scalar(const Var<T>& x, T c) {
    return unary_elementwise<T>(
        x, [c](T v) { return v + c; }, [](T, T) { return T(1); }, "add_scalar");
}

template <typename T>
Var<T> relu(const Var<T>& x) {
    return unary_elementwise<T>(
        x, [](T v) { return v > T(0) ? v : T(0); },
        [](T v, T) { return v > T(0) ? T(1) : T(0); }, "relu");
}

template <typename T>
Var<T> leaky_relu(const Var<T>& x, T slope) {
    return unary_elementwise<T>(
        x, [slope](T v) { return v > T(0) ? v : slope * v; },
        [slope](T v, T) { return v > T(0) ? T(1) : slope; }, "leaky_relu");
}

template <typename T>
Var<T> sigmoid(const Var<T>& x) {
    return unary_elementwise<T>(
        x, [](T v) { return T(1) / (T(1) + std::exp(-v)); },
        [](T, T y) { return y * (T(1) - y); }, "sigmoid");
}

template <typename T>
Var<T> silu(const Var<T>& x) {
    return unary_elementwise<T>(
        x,
        [](T v) { return v / (T(1) + std::exp(-v)); },
        [](T v, T) {
            T s = T(1) / (T(1) + std::exp(-v));
            return s * (T(1) + v * (T(1) - s));
        },
        "silu");
}

template <typename T>
Var<T> gelu(const Var<T>& x) {
    constexpr double inv_sqrt2 = 0.70710678118654752440;
    constexpr double inv_sqrt2pi = 0.39894228040143267794;
    return unary_elementwise<T>(
        x,
        [=](T v) {
            return static_cast<T>(0.5 * static_cast<double>(v) *
                                  (1.0 + std::erf(static_cast<double>(v) * inv_sqrt2)));
        },
        [=](T v, T) {
            double vd = static_cast<double>(v);
            double cdf = 0.5 * (1.0 + std::erf(vd * inv_sqrt2));
            double pdf = inv_sqrt2pi * std::exp(-0.5 * vd * vd);
            return static_cast<T>(cdf + vd * pdf);
        },
        "gelu");
}

template <typename T>
Var<T> exp(const Var<T>& x) {
    return unary_elementwise<T>(
        x, [](T v) { return std::exp(v); }, [](T, T y) { return y; }, "exp");
}

template <typename T>
Var<T> softshrink(const Var<T>& x, T lambda) {
    return unary_elementwise<T>(
        x,
        [lambda](T v) {
            if (v > lambda) return v - lambda;
            if (v < -lambda) return v + lambda;
            return T(0);
        },
        [lambda](T v, T) { return (v > lambda || v < -lambda) ? T(1) : T(0); }, "softshrink");
}

template <typename T>
Var<T> clamp(const Var<T>& x, T lo, T hi) {
    return unary_elementwise<T>(
        x, [lo, hi](T v) { return v < lo ? lo : (v > hi ? hi : v); },
        [lo, hi](T v, T) { return (v > lo && v < hi) ? T(1) : T(0); }, "clamp");
}

template <typename T>
Var<T> abs(const Var<T>& x) {
    return unary_elementwise<T>(
        x, [](T v) { return v < T(0) ? -v : v; },
        [](T v, T) { return v < T(0) ? T(-1) : (v > T(0) ? T(1) : T(0)); }, "abs");
}

template <typename T>
Var<T> sum_all(const Var<T>& x) {
    Tensor<T> y = Tensor<T>::scalar(x->value.sum());
    return make_node<T>(
        std::move(y), {x},
        [](Node<T>& node) {
            if (auto* g = detail::grad_target(node, 0)) {
                const T gv = node.grad[0];
                for (std::int64_t i = 0; i < g->numel(); ++i) (*g)[i] += gv;
            }
        },
        "sum_all");
}

template <typename T>
Var<T> mean_all(const Var<T>& x) {
    const std::int64_t n = x->value.numel();
    Tensor<T> y = Tensor<T>::scalar(static_cast<T>(x->value.sum() / static_cast<T>(n)));
    return make_node<T>(
        std::move(y), {x},
        [n](Node<T>& node) {
            if (auto* g = detail::grad_target(node, 0)) {
                const T gv = node.grad[0] / static_cast<T>(n);
                for (std::int64_t i = 0; i < g->numel(); ++i) (*g)[i] += gv;
            }
        },
        "mean_all");
}

// y = x * (1 + s) + b with x:(N,C,H,W), s,b:(N,C). FiLM-style modulation.
template <typename T>
Var<T> scale_shift_spatial(const Var<T>& x, const Var<T>& s, const Var<T>& b) {
    const auto& xs = x->value.shape();
    if (xs.size() != 4) fail<ShapeError>("scale_shift_spatial: x must be (N,C,H,W)");
    const std::int64_t N = xs[0], C = xs[1], HW = xs[2] * xs[3];
    if (s->value.numel() != N * C || b->value.numel() != N * C)
        fail<ShapeError>("scale_shift_spatial: modulation must be (N,C)");
    Tensor<T> y(xs);
    for (std::int64_t n = 0; n < N; ++n)
        for (std::int64_t c = 0; c < C; ++c) {
            const T sc = T(1) + s->value[n * C + c];
            const T sh = b->value[n * C + c];
            const std::int64_t base = (n * C + c) * HW;
            for (std::int64_t i = 0; i < HW; ++i) y[base + i] = x->value[base + i] * sc + sh;
        }
    return make_node<T>(
        std::move(y), {x, s, b},
        [N, C, HW](Node<T>& node) {
            const Tensor<T>& xv = node.parents[0]->value;
            const Tensor<T>& sv = node.parents[1]->value;
            Tensor<T>* gx = detail::grad_target(node, 0);
            Tensor<T>* gs = detail::grad_target(node, 1);
            Tensor<T>* gb = detail::grad_target(node, 2);
            for (std::int64_t n = 0; n < N; ++n)
                for (std::int64_t c = 0; c < C; ++c) {
                    const std::int64_t base = (n * C + c) * HW;
                    const T sc = T(1) + sv[n * C + c];
                    T acc_s = T(0), acc_b = T(0);
                    for (std::int64_t i = 0; i < HW; ++i) {
                        const T g = node.grad[base + i];
                        if (gx) (*gx)[base + i] += g * sc;
                        acc_s += g * xv[base + i];
                        acc_b += g;
                    }
                    if (gs) (*gs)[n * C + c] += acc_s;
                    if (gb) (*gb)[n * C + c] += acc_b;
                }
        },
        "scale_shift_spatial");
}

template <typename T>
Var<T> mse_loss(const Var<T>& pred, const Var<T>& target) {
    auto d = sub(pred, target);
    return mean_all(mul(d, d));
}

template <typename T>
Var<T> mae_loss(const Var<T>& pred, const Var<T>& target) {
    return mean_all(abs(sub(pred, target)));
}

}  // namespace downscale::ag
