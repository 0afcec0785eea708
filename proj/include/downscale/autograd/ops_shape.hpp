#pragma once

#include <algorithm>

#include "downscale/autograd/ops_elementwise.hpp"

namespace downscale::ag {

template <typename T>
Var<T> concat_channels(const Var<T>& a, const Var<T>& b) {
    const auto& as = a->value.shape();
    const auto& bs = b->value.shape();
    if (as.size() != 4 || bs.size() != 4 || as[0] != bs[0] || as[2] != bs[2] || as[3] != bs[3])
        fail<ShapeError>("concat_channels: " + a->value.shape_str() + " vs " +
                         b->value.shape_str());
    const std::int64_t N = as[0], Ca = as[1], Cb = bs[1], HW = as[2] * as[3];
    Tensor<T> y({N, Ca + Cb, as[2], as[3]});
    for (std::int64_t n = 0; n < N; ++n) {
        std::copy_n(a->value.data() + n * Ca * HW, Ca * HW, y.data() + n * (Ca + Cb) * HW);
        std::copy_n(b->value.data() + n * Cb * HW, Cb * HW,
                    y.data() + (n * (Ca + Cb) + Ca) * HW);
    }
    return make_node<T>(
        std::move(y), {a, b},
        [N, Ca, Cb, HW](Node<T>& node) {
            if (auto* ga = detail::grad_target(node, 0))
                for (std::int64_t n = 0; n < N; ++n)
                    for (std::int64_t i = 0; i < Ca * HW; ++i)
                        (*ga)[n * Ca * HW + i] += node.grad[n * (Ca + Cb) * HW + i];
            if (auto* gb = detail::grad_target(node, 1))
                for (std::int64_t n = 0; n < N; ++n)
                    for (std::int64_t i = 0; i < Cb * HW; ++i)
                        (*gb)[n * Cb * HW + i] += node.grad[(n * (Ca + Cb) + Ca) * HW + i];
        },
        "concat_channels");
}

template <typename T>
Var<T> slice_channels(const Var<T>& x, std::int64_t c0, std::int64_t c1) {
    const auto& xs = x->value.shape();
    if (xs.size() != 4 || c0 < 0 || c1 > xs[1] || c0 >= c1)
        fail<ShapeError>("slice_channels: bad range");
    const std::int64_t N = xs[0], C = xs[1], HW = xs[2] * xs[3], Cs = c1 - c0;
    Tensor<T> y({N, Cs, xs[2], xs[3]});
    for (std::int64_t n = 0; n < N; ++n)
        std::copy_n(x->value.data() + (n * C + c0) * HW, Cs * HW, y.data() + n * Cs * HW);
    return make_node<T>(
        std::move(y), {x},
        [N, C, HW, c0, Cs](Node<T>& node) {
            if (auto* gx = detail::grad_target(node, 0))
                for (std::int64_t n = 0; n < N; ++n)
                    for (std::int64_t i = 0; i < Cs * HW; ++i)
                        (*gx)[(n * C + c0) * HW + i] += node.grad[n * Cs * HW + i];
        },
        "slice_channels");
}

template <typename T>
Var<T> max_pool2d(const Var<T>& x, std::int64_t k) {
    const auto& xs = x->value.shape();
    if (xs.size() != 4 || xs[2] % k != 0 || xs[3] % k != 0)
        fail<ShapeError>("max_pool2d: spatial dims must divide by kernel");
    const std::int64_t N = xs[0], C = xs[1], H = xs[2], W = xs[3], Ho = H / k, Wo = W / k;
    Tensor<T> y({N, C, Ho, Wo});
    std::vector<std::int64_t> argmax(static_cast<std::size_t>(y.numel()));
    for (std::int64_t nc = 0; nc < N * C; ++nc) {
        const T* p = x->value.data() + nc * H * W;
        for (std::int64_t i = 0; i < Ho; ++i)
            for (std::int64_t j = 0; j < Wo; ++j) {
                std::int64_t best = (i * k) * W + j * k;
                T bv = p[best];
                for (std::int64_t di = 0; di < k; ++di)
                    for (std::int64_t dj = 0; dj < k; ++dj) {
                        const std::int64_t idx = (i * k + di) * W + j * k + dj;
                        if (p[idx] > bv) {
                            bv = p[idx];
                            best = idx;
                        }
                    }
                const std::int64_t oi = nc * Ho * Wo + i * Wo + j;
                y[oi] = bv;
                argmax[static_cast<std::size_t>(oi)] = nc * H * W + best;
            }
    }
    return make_node<T>(
        std::move(y), {x},
        [argmax = std::move(argmax)](Node<T>& node) {
            if (auto* gx = detail::grad_target(node, 0))
                for (std::int64_t i = 0; i < node.grad.numel(); ++i)
                    (*gx)[argmax[static_cast<std::size_t>(i)]] += node.grad[i];
        },
        "max_pool2d");
}

template <typename T>
Var<T> avg_pool2d(const Var<T>& x, std::int64_t k) {
    const auto& xs = x->value.shape();
    if (xs.size() != 4 || xs[2] % k != 0 || xs[3] % k != 0)
        fail<ShapeError>("avg_pool2d: spatial dims must divide by kernel");
    const std::int64_t N = xs[0], C = xs[1], H = xs[2], W = xs[3], Ho = H / k, Wo = W / k;
    const T inv = T(1) / static_cast<T>(k * k);
    Tensor<T> y({N, C, Ho, Wo});
    for (std::int64_t nc = 0; nc < N * C; ++nc) {
        const T* p = x->value.data() + nc * H * W;
        for (std::int64_t i = 0; i < Ho; ++i)
            for (std::int64_t j = 0; j < Wo; ++j) {
                T s = T(0);
                for (std::int64_t di = 0; di < k; ++di)
                    for (std::int64_t dj = 0; dj < k; ++dj)
                        s += p[(i * k + di) * W + j * k + dj];
                y[nc * Ho * Wo + i * Wo + j] = s * inv;
            }
    }
    return make_node<T>(
        std::move(y), {x},
        [N, C, H, W, Ho, Wo, k, inv](Node<T>& node) {
            if (auto* gx = detail::grad_target(node, 0))
                for (std::int64_t nc = 0; nc < N * C; ++nc)
                    for (std::int64_t i = 0; i < Ho; ++i)
                        for (std::int64_t j = 0; j < Wo; ++j) {
                            const T g = node.grad[nc * Ho * Wo + i * Wo + j] * inv;
                            for (std::int64_t di = 0; di < k; ++di)
                                for (std::int64_t dj = 0; dj < k; ++dj)
                                    (*gx)[nc * H * W + (i * k + di) * W + j * k + dj] += g;
                        }
        },
        "avg_pool2d");
}

// Global average over H,W: (N,C,H,W) -> (N,C)
template <typename T>
Var<T> global_avg_pool(const Var<T>& x) {
    const auto& xs = x->value.shape();
    if (xs.size() != 4) fail<ShapeError>("global_avg_pool: expected (N,C,H,W)");
    const std::int64_t NC = xs[0] * xs[1], HW = xs[2] * xs[3];
    const T inv = T(1) / static_cast<T>(HW);
    Tensor<T> y({xs[0], xs[1]});
    for (std::int64_t nc = 0; nc < NC; ++nc) {
        T s = T(0);
        const T* p = x->value.data() + nc * HW;
        for (std::int64_t i = 0; i < HW; ++i) s += p[i];
        y[nc] = s * inv;
    }
    return make_node<T>(
        std::move(y), {x},
        [NC, HW, inv](Node<T>& node) {
            if (auto* gx = detail::grad_target(node, 0))
                for (std::int64_t nc = 0; nc < NC; ++nc) {
                    const T g = node.grad[nc] * inv;
                    for (std::int64_t i = 0; i < HW; ++i) (*gx)[nc * HW + i] += g;
                }
        },
        "global_avg_pool");
}

template <typename T>
Var<T> upsample_nearest(const Var<T>& x, std::int64_t k) {
    const auto& xs = x->value.shape();
    if (xs.size() != 4) fail<ShapeError>("upsample_nearest: expected (N,C,H,W)");
    const std::int64_t NC = xs[0] * xs[1], H = xs[2], W = xs[3];
    Tensor<T> y({xs[0], xs[1], H * k, W * k});
    for (std::int64_t nc = 0; nc < NC; ++nc) {
        const T* p = x->value.data() + nc * H * W;
        T* q = y.data() + nc * H * W * k * k;
        for (std::int64_t i = 0; i < H * k; ++i)
            for (std::int64_t j = 0; j < W * k; ++j)
                q[i * W * k + j] = p[(i / k) * W + j / k];
    }
    return make_node<T>(
        std::move(y), {x},
        [NC, H, W, k](Node<T>& node) {
            if (auto* gx = detail::grad_target(node, 0))
                for (std::int64_t nc = 0; nc < NC; ++nc) {
                    const T* g = node.grad.data() + nc * H * W * k * k;
                    for (std::int64_t i = 0; i < H * k; ++i)
                        for (std::int64_t j = 0; j < W * k; ++j)
                            (*gx)[nc * H * W + (i / k) * W + j / k] += g[i * W * k + j];
                }
        },
        "upsample_nearest");
}

// Zero padding of the spatial dims.
template <typename T>
Var<T> pad2d(const Var<T>& x, std::int64_t p) {
    const auto& xs = x->value.shape();
    if (xs.size() != 4 || p < 0) fail<ShapeError>("pad2d: expected (N,C,H,W)");
    const std::int64_t NC = xs[0] * xs[1], H = xs[2], W = xs[3];
    const std::int64_t Hp = H + 2 * p, Wp = W + 2 * p;
    Tensor<T> y({xs[0], xs[1], Hp, Wp}, T(0));
    for (std::int64_t nc = 0; nc < NC; ++nc)
        for (std::int64_t i = 0; i < H; ++i)
            std::copy_n(x->value.data() + (nc * H + i) * W, W,
                        y.data() + (nc * Hp + i + p) * Wp + p);
    return make_node<T>(
        std::move(y), {x},
        [NC, H, W, Hp, Wp, p](Node<T>& node) {
            if (auto* gx = detail::grad_target(node, 0))
                for (std::int64_t nc = 0; nc < NC; ++nc)
                    for (std::int64_t i = 0; i < H; ++i)
                        for (std::int64_t j = 0; j < W; ++j)
                            (*gx)[(nc * H + i) * W + j] +=
                                node.grad[(nc * Hp + i + p) * Wp + j + p];
        },
        "pad2d");
}

template <typename T>
Var<T> crop2d(const Var<T>& x, std::int64_t i0, std::int64_t j0, std::int64_t h,
              std::int64_t w) {
    const auto& xs = x->value.shape();
    if (xs.size() != 4 || i0 < 0 || j0 < 0 || i0 + h > xs[2] || j0 + w > xs[3])
        fail<ShapeError>("crop2d: window out of range");
    const std::int64_t NC = xs[0] * xs[1], H = xs[2], W = xs[3];
    Tensor<T> y({xs[0], xs[1], h, w});
    for (std::int64_t nc = 0; nc < NC; ++nc)
        for (std::int64_t i = 0; i < h; ++i)
            std::copy_n(x->value.data() + (nc * H + i0 + i) * W + j0, w,
                        y.data() + (nc * h + i) * w);
    return make_node<T>(
        std::move(y), {x},
        [NC, H, W, i0, j0, h, w](Node<T>& node) {
            if (auto* gx = detail::grad_target(node, 0))
                for (std::int64_t nc = 0; nc < NC; ++nc)
                    for (std::int64_t i = 0; i < h; ++i)
                        for (std::int64_t j = 0; j < w; ++j)
                            (*gx)[(nc * H + i0 + i) * W + j0 + j] +=
                                node.grad[(nc * h + i) * w + j];
        },
        "crop2d");
}

// Flattens (N,C,H,W) -> (N*H*W, C) token rows for per-token MLPs.
template <typename T>
Var<T> tokens_from_nchw(const Var<T>& x) {
    const auto& xs = x->value.shape();
    if (xs.size() != 4) fail<ShapeError>("tokens_from_nchw: expected (N,C,H,W)");
    const std::int64_t N = xs[0], C = xs[1], HW = xs[2] * xs[3];
    Tensor<T> y({N * HW, C});
    for (std::int64_t n = 0; n < N; ++n)
        for (std::int64_t c = 0; c < C; ++c)
            for (std::int64_t t = 0; t < HW; ++t)
                y[(n * HW + t) * C + c] = x->value[(n * C + c) * HW + t];
    return make_node<T>(
        std::move(y), {x},
        [N, C, HW](Node<T>& node) {
            if (auto* gx = detail::grad_target(node, 0))
                for (std::int64_t n = 0; n < N; ++n)
                    for (std::int64_t c = 0; c < C; ++c)
                        for (std::int64_t t = 0; t < HW; ++t)
                            (*gx)[(n * C + c) * HW + t] += node.grad[(n * HW + t) * C + c];
        },
        "tokens_from_nchw");
}

// Inverse of tokens_from_nchw.
template <typename T>
Var<T> tokens_to_nchw(const Var<T>& x, std::int64_t N, std::int64_t H, std::int64_t W) {
    const auto& xs = x->value.shape();
    if (xs.size() != 2 || xs[0] != N * H * W) fail<ShapeError>("tokens_to_nchw: bad token count");
    const std::int64_t C = xs[1], HW = H * W;
    Tensor<T> y({N, C, H, W});
    for (std::int64_t n = 0; n < N; ++n)
        for (std::int64_t c = 0; c < C; ++c)
            for (std::int64_t t = 0; t < HW; ++t)
                y[(n * C + c) * HW + t] = x->value[(n * HW + t) * C + c];
    return make_node<T>(
        std::move(y), {x},
        [N, C, HW](Node<T>& node) {
            if (auto* gx = detail::grad_target(node, 0))
                for (std::int64_t n = 0; n < N; ++n)
                    for (std::int64_t c = 0; c < C; ++c)
                        for (std::int64_t t = 0; t < HW; ++t)
                            (*gx)[(n * HW + t) * C + c] += node.grad[(n * C + c) * HW + t];
        },
        "tokens_to_nchw");
}

}  // namespace downscale::ag
