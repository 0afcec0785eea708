#pragma once

#include "downscale/autograd/ops_elementwise.hpp"

namespace downscale::ag {

// Backward of every normalization below follows the same pattern per slice:
//   dx = invstd * (h - mean(h) - xhat * mean(h * xhat)),  h = g * gamma

// Per-channel batch normalization over (N,H,W). In training mode batch stats are
// used and the running buffers are updated in place; in eval mode the running
// buffers are used and gradients reduce to an elementwise affine map.
template <typename T>
Var<T> batch_norm2d(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta,
                    Tensor<T>& running_mean, Tensor<T>& running_var, bool training,
                    T momentum = T(0.1), T eps = T(1e-5)) {
    const auto& xs = x->value.shape();
    if (xs.size() != 4) fail<ShapeError>("batch_norm2d: expected (N,C,H,W)");
    const std::int64_t N = xs[0], C = xs[1], HW = xs[2] * xs[3];
    if (gamma->value.numel() != C || beta->value.numel() != C ||
        running_mean.numel() != C || running_var.numel() != C)
        fail<ShapeError>("batch_norm2d: per-channel parameter size mismatch");
    const std::int64_t m = N * HW;

    Tensor<T> mu({C});
    Tensor<T> invstd({C});
    for (std::int64_t c = 0; c < C; ++c) {
        T mean, var;
        if (training) {
            T s = T(0);
            for (std::int64_t n = 0; n < N; ++n) {
                const T* p = x->value.data() + (n * C + c) * HW;
                for (std::int64_t i = 0; i < HW; ++i) s += p[i];
            }
            mean = s / static_cast<T>(m);
            T v = T(0);
            for (std::int64_t n = 0; n < N; ++n) {
                const T* p = x->value.data() + (n * C + c) * HW;
                for (std::int64_t i = 0; i < HW; ++i) {
                    const T d = p[i] - mean;
                    v += d * d;
                }
            }
            var = v / static_cast<T>(m);
            running_mean[c] = (T(1) - momentum) * running_mean[c] + momentum * mean;
            const T unbiased = m > 1 ? var * static_cast<T>(m) / static_cast<T>(m - 1) : var;
            running_var[c] = (T(1) - momentum) * running_var[c] + momentum * unbiased;
        } else {
            mean = running_mean[c];
            var = running_var[c];
        }
        mu[c] = mean;
        invstd[c] = T(1) / std::sqrt(var + eps);
    }

    Tensor<T> y(xs);
    for (std::int64_t n = 0; n < N; ++n)
        for (std::int64_t c = 0; c < C; ++c) {
            const T* p = x->value.data() + (n * C + c) * HW;
            T* q = y.data() + (n * C + c) * HW;
            const T g = gamma->value[c], b = beta->value[c], mc = mu[c], is = invstd[c];
            for (std::int64_t i = 0; i < HW; ++i) q[i] = g * (p[i] - mc) * is + b;
        }

    return make_node<T>(
        std::move(y), {x, gamma, beta},
        [N, C, HW, m, mu, invstd, training](Node<T>& node) {
            Tensor<T>* gx = detail::grad_target(node, 0);
            Tensor<T>* ggamma = detail::grad_target(node, 1);
            Tensor<T>* gbeta = detail::grad_target(node, 2);
            const Tensor<T>& xv = node.parents[0]->value;
            const Tensor<T>& gv = node.parents[1]->value;
            for (std::int64_t c = 0; c < C; ++c) {
                if (!training) {
                    // Stats are constants, so dx is a plain scale.
                    const T scale = gv[c] * invstd[c];
                    for (std::int64_t n = 0; n < N; ++n) {
                        const std::int64_t base = (n * C + c) * HW;
                        for (std::int64_t i = 0; i < HW; ++i) {
                            const T g = node.grad[base + i];
                            const T xhat = (xv[base + i] - mu[c]) * invstd[c];
                            if (gx) (*gx)[base + i] += g * scale;
                            if (ggamma) (*ggamma)[c] += g * xhat;
                            if (gbeta) (*gbeta)[c] += g;
                        }
                    }
                    continue;
                }
                auto index = [&](std::int64_t k) {
                    const std::int64_t n = k / HW, i = k % HW;
                    return (n * C + c) * HW + i;
                };
                const T ga = gv[c], mean = mu[c], is = invstd[c];
                T sum_h = T(0), sum_hx = T(0);
                for (std::int64_t k = 0; k < m; ++k) {
                    const std::int64_t i = index(k);
                    const T h = node.grad[i] * ga;
                    const T xhat = (xv[i] - mean) * is;
                    sum_h += h;
                    sum_hx += h * xhat;
                    if (ggamma) (*ggamma)[c] += node.grad[i] * xhat;
                    if (gbeta) (*gbeta)[c] += node.grad[i];
                }
                if (!gx) continue;
                const T mh = sum_h / static_cast<T>(m);
                const T mhx = sum_hx / static_cast<T>(m);
                for (std::int64_t k = 0; k < m; ++k) {
                    const std::int64_t i = index(k);
                    const T h = node.grad[i] * ga;
                    const T xhat = (xv[i] - mean) * is;
                    (*gx)[i] += is * (h - mh - xhat * mhx);
                }
            }
        },
        "batch_norm2d");
}

// Group normalization: stats per (sample, group) over (C/groups, H, W).
template <typename T>
Var<T> group_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, std::int64_t groups,
                  T eps = T(1e-5)) {
    const auto& xs = x->value.shape();
    if (xs.size() != 4) fail<ShapeError>("group_norm: expected (N,C,H,W)");
    const std::int64_t N = xs[0], C = xs[1], HW = xs[2] * xs[3];
    if (C % groups != 0) fail<ShapeError>("group_norm: channels not divisible by groups");
    if (gamma->value.numel() != C || beta->value.numel() != C)
        fail<ShapeError>("group_norm: per-channel parameter size mismatch");
    const std::int64_t cpg = C / groups, m = cpg * HW;

    Tensor<T> mu({N, groups});
    Tensor<T> invstd({N, groups});
    Tensor<T> y(xs);
    for (std::int64_t n = 0; n < N; ++n)
        for (std::int64_t g = 0; g < groups; ++g) {
            const T* p = x->value.data() + (n * C + g * cpg) * HW;
            T s = T(0);
            for (std::int64_t i = 0; i < m; ++i) s += p[i];
            const T mean = s / static_cast<T>(m);
            T v = T(0);
            for (std::int64_t i = 0; i < m; ++i) {
                const T d = p[i] - mean;
                v += d * d;
            }
            const T is = T(1) / std::sqrt(v / static_cast<T>(m) + eps);
            mu[n * groups + g] = mean;
            invstd[n * groups + g] = is;
            T* q = y.data() + (n * C + g * cpg) * HW;
            for (std::int64_t cc = 0; cc < cpg; ++cc) {
                const T ga = gamma->value[g * cpg + cc], be = beta->value[g * cpg + cc];
                for (std::int64_t i = 0; i < HW; ++i)
                    q[cc * HW + i] = ga * (p[cc * HW + i] - mean) * is + be;
            }
        }

    return make_node<T>(
        std::move(y), {x, gamma, beta},
        [N, C, HW, groups, cpg, m, mu, invstd](Node<T>& node) {
            Tensor<T>* gx = detail::grad_target(node, 0);
            Tensor<T>* ggamma = detail::grad_target(node, 1);
            Tensor<T>* gbeta = detail::grad_target(node, 2);
            const Tensor<T>& xv = node.parents[0]->value;
            const Tensor<T>& gv = node.parents[1]->value;
            for (std::int64_t n = 0; n < N; ++n)
                for (std::int64_t g = 0; g < groups; ++g) {
                    const std::int64_t base = (n * C + g * cpg) * HW;
                    const T mean = mu[n * groups + g], is = invstd[n * groups + g];
                    T sum_h = T(0), sum_hx = T(0);
                    for (std::int64_t k = 0; k < m; ++k) {
                        const std::int64_t i = base + k;
                        const std::int64_t c = g * cpg + k / HW;
                        const T h = node.grad[i] * gv[c];
                        const T xhat = (xv[i] - mean) * is;
                        sum_h += h;
                        sum_hx += h * xhat;
                        if (ggamma) (*ggamma)[c] += node.grad[i] * xhat;
                        if (gbeta) (*gbeta)[c] += node.grad[i];
                    }
                    if (!gx) continue;
                    const T mh = sum_h / static_cast<T>(m);
                    const T mhx = sum_hx / static_cast<T>(m);
                    for (std::int64_t k = 0; k < m; ++k) {
                        const std::int64_t i = base + k;
                        const std::int64_t c = g * cpg + k / HW;
                        const T h = node.grad[i] * gv[c];
                        const T xhat = (xv[i] - mean) * is;
                        (*gx)[i] += is * (h - mh - xhat * mhx);
                    }
                }
        },
        "group_norm");
}

// Layer normalization across the channel axis of (N,C,H,W): one mean/var per
// spatial token, affine per channel.
template <typename T>
Var<T> layer_norm_channels(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta,
                           T eps = T(1e-5)) {
    const auto& xs = x->value.shape();
    if (xs.size() != 4) fail<ShapeError>("layer_norm_channels: expected (N,C,H,W)");
    const std::int64_t N = xs[0], C = xs[1], HW = xs[2] * xs[3];
    if (gamma->value.numel() != C || beta->value.numel() != C)
        fail<ShapeError>("layer_norm_channels: per-channel parameter size mismatch");

    Tensor<T> mu({N, HW});
    Tensor<T> invstd({N, HW});
    Tensor<T> y(xs);
    for (std::int64_t n = 0; n < N; ++n)
        for (std::int64_t t = 0; t < HW; ++t) {
            const T* p = x->value.data() + n * C * HW + t;
            T s = T(0);
            for (std::int64_t c = 0; c < C; ++c) s += p[c * HW];
            const T mean = s / static_cast<T>(C);
            T v = T(0);
            for (std::int64_t c = 0; c < C; ++c) {
                const T d = p[c * HW] - mean;
                v += d * d;
            }
            const T is = T(1) / std::sqrt(v / static_cast<T>(C) + eps);
            mu[n * HW + t] = mean;
            invstd[n * HW + t] = is;
            T* q = y.data() + n * C * HW + t;
            for (std::int64_t c = 0; c < C; ++c)
                q[c * HW] = gamma->value[c] * (p[c * HW] - mean) * is + beta->value[c];
        }

    return make_node<T>(
        std::move(y), {x, gamma, beta},
        [N, C, HW, mu, invstd](Node<T>& node) {
            Tensor<T>* gx = detail::grad_target(node, 0);
            Tensor<T>* ggamma = detail::grad_target(node, 1);
            Tensor<T>* gbeta = detail::grad_target(node, 2);
            const Tensor<T>& xv = node.parents[0]->value;
            const Tensor<T>& gv = node.parents[1]->value;
            for (std::int64_t n = 0; n < N; ++n)
                for (std::int64_t t = 0; t < HW; ++t) {
                    const std::int64_t base = n * C * HW + t;
                    const T mean = mu[n * HW + t], is = invstd[n * HW + t];
                    T sum_h = T(0), sum_hx = T(0);
                    for (std::int64_t c = 0; c < C; ++c) {
                        const std::int64_t i = base + c * HW;
                        const T h = node.grad[i] * gv[c];
                        const T xhat = (xv[i] - mean) * is;
                        sum_h += h;
                        sum_hx += h * xhat;
                        if (ggamma) (*ggamma)[c] += node.grad[i] * xhat;
                        if (gbeta) (*gbeta)[c] += node.grad[i];
                    }
                    if (!gx) continue;
                    const T mh = sum_h / static_cast<T>(C);
                    const T mhx = sum_hx / static_cast<T>(C);
                    for (std::int64_t c = 0; c < C; ++c) {
                        const std::int64_t i = base + c * HW;
                        const T h = node.grad[i] * gv[c];
                        const T xhat = (xv[i] - mean) * is;
                        (*gx)[i] += is * (h - mh - xhat * mhx);
                    }
                }
        },
        "layer_norm_channels");
}

}  // namespace downscale::ag
