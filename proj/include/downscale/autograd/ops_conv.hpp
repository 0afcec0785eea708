#pragma once

#include "downscale/autograd/ops_linear.hpp"

namespace downscale::ag {

namespace detail {

// Gathers kh*kw patches of one (C,H,W) image into (C*kh*kw, Ho*Wo), zero padding.
template <typename T>
void im2col(const T* img, std::int64_t C, std::int64_t H, std::int64_t W, std::int64_t kh,
            std::int64_t kw, std::int64_t stride, std::int64_t pad, std::int64_t Ho,
            std::int64_t Wo, T* col) {
    const std::int64_t cols = Ho * Wo;
    for (std::int64_t c = 0; c < C; ++c)
        for (std::int64_t di = 0; di < kh; ++di)
            for (std::int64_t dj = 0; dj < kw; ++dj) {
                T* dst = col + ((c * kh + di) * kw + dj) * cols;
                for (std::int64_t i = 0; i < Ho; ++i) {
                    const std::int64_t src_i = i * stride + di - pad;
                    if (src_i < 0 || src_i >= H) {
                        for (std::int64_t j = 0; j < Wo; ++j) dst[i * Wo + j] = T(0);
                        continue;
                    }
                    const T* src_row = img + (c * H + src_i) * W;
                    for (std::int64_t j = 0; j < Wo; ++j) {
                        const std::int64_t src_j = j * stride + dj - pad;
                        dst[i * Wo + j] =
                            (src_j >= 0 && src_j < W) ? src_row[src_j] : T(0);
                    }
                }
            }
}

// Adjoint of im2col: scatter-adds columns back into the (C,H,W) image grad.
template <typename T>
void col2im_add(const T* col, std::int64_t C, std::int64_t H, std::int64_t W, std::int64_t kh,
                std::int64_t kw, std::int64_t stride, std::int64_t pad, std::int64_t Ho,
                std::int64_t Wo, T* img) {
    const std::int64_t cols = Ho * Wo;
    for (std::int64_t c = 0; c < C; ++c)
        for (std::int64_t di = 0; di < kh; ++di)
            for (std::int64_t dj = 0; dj < kw; ++dj) {
                const T* src = col + ((c * kh + di) * kw + dj) * cols;
                for (std::int64_t i = 0; i < Ho; ++i) {
                    const std::int64_t dst_i = i * stride + di - pad;
                    if (dst_i < 0 || dst_i >= H) continue;
                    T* dst_row = img + (c * H + dst_i) * W;
                    for (std::int64_t j = 0; j < Wo; ++j) {
                        const std::int64_t dst_j = j * stride + dj - pad;
                        if (dst_j >= 0 && dst_j < W) dst_row[dst_j] += src[i * Wo + j];
                    }
                }
            }
}

}  // namespace detail

// x:(N,Cin,H,W), w:(Cout,Cin,kh,kw), b:(Cout) or empty. Zero padding.
template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, const Var<T>& b, std::int64_t stride = 1,
              std::int64_t pad = 0) {
    const auto& xs = x->value.shape();
    const auto& ws = w->value.shape();
    if (xs.size() != 4 || ws.size() != 4 || xs[1] != ws[1])
        fail<ShapeError>("conv2d: x " + x->value.shape_str() + " vs w " + w->value.shape_str());
    const std::int64_t N = xs[0], Cin = xs[1], H = xs[2], W = xs[3];
    const std::int64_t Cout = ws[0], kh = ws[2], kw = ws[3];
    const std::int64_t Ho = (H + 2 * pad - kh) / stride + 1;
    const std::int64_t Wo = (W + 2 * pad - kw) / stride + 1;
    if (Ho <= 0 || Wo <= 0) fail<ShapeError>("conv2d: empty output");
    if (b && b->value.numel() != Cout) fail<ShapeError>("conv2d: bias size mismatch");

    const std::int64_t K = Cin * kh * kw, cols = Ho * Wo;
    Tensor<T> y({N, Cout, Ho, Wo});
    {
        Tensor<T> col({K, cols});
        detail::ECMap<T> Wm(w->value.data(), Cout, K);
        for (std::int64_t n = 0; n < N; ++n) {
            detail::im2col(x->value.data() + n * Cin * H * W, Cin, H, W, kh, kw, stride, pad, Ho,
                           Wo, col.data());
            detail::ECMap<T> Cm(col.data(), K, cols);
            detail::EMap<T> Ym(y.data() + n * Cout * cols, Cout, cols);
            Ym.noalias() = Wm * Cm;
            if (b)
                for (std::int64_t c = 0; c < Cout; ++c) Ym.row(c).array() += b->value[c];
        }
    }
    std::vector<Var<T>> parents = b ? std::vector<Var<T>>{x, w, b} : std::vector<Var<T>>{x, w};
    return make_node<T>(
        std::move(y), std::move(parents),
        [N, Cin, H, W, Cout, kh, kw, stride, pad, Ho, Wo](Node<T>& node) {
            const std::int64_t K = Cin * kh * kw, cols = Ho * Wo;
            Tensor<T>* gx = detail::grad_target(node, 0);
            Tensor<T>* gw = detail::grad_target(node, 1);
            Tensor<T>* gb =
                node.parents.size() == 3 ? detail::grad_target(node, 2) : nullptr;
            Tensor<T> col({K, cols});
            Tensor<T> dcol({K, cols});
            detail::ECMap<T> Wm(node.parents[1]->value.data(), Cout, K);
            for (std::int64_t n = 0; n < N; ++n) {
                detail::ECMap<T> Gm(node.grad.data() + n * Cout * cols, Cout, cols);
                if (gw) {
                    detail::im2col(node.parents[0]->value.data() + n * Cin * H * W, Cin, H, W, kh,
                                   kw, stride, pad, Ho, Wo, col.data());
                    detail::ECMap<T> Cm(col.data(), K, cols);
                    detail::EMap<T> GWm(gw->data(), Cout, K);
                    GWm.noalias() += Gm * Cm.transpose();
                }
                if (gx) {
                    detail::EMap<T> Dm(dcol.data(), K, cols);
                    Dm.noalias() = Wm.transpose() * Gm;
                    detail::col2im_add(dcol.data(), Cin, H, W, kh, kw, stride, pad, Ho, Wo,
                                       gx->data() + n * Cin * H * W);
                }
                if (gb)
                    for (std::int64_t c = 0; c < Cout; ++c) (*gb)[c] += Gm.row(c).sum();
            }
        },
        "conv2d");
}

template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, std::int64_t stride = 1, std::int64_t pad = 0) {
    return conv2d(x, w, Var<T>{}, stride, pad);
}

// Transposed conv restricted to stride == kernel (non-overlapping upsampling).
// x:(N,Cin,H,W), w:(Cin,Cout,k,k), b:(Cout) or empty -> (N,Cout,H*k,W*k).
template <typename T>
Var<T> conv_transpose2d(const Var<T>& x, const Var<T>& w, const Var<T>& b, std::int64_t k) {
    const auto& xs = x->value.shape();
    const auto& ws = w->value.shape();
    if (xs.size() != 4 || ws.size() != 4 || xs[1] != ws[0] || ws[2] != k || ws[3] != k)
        fail<ShapeError>("conv_transpose2d: x " + x->value.shape_str() + " vs w " +
                         w->value.shape_str());
    const std::int64_t N = xs[0], Cin = xs[1], H = xs[2], W = xs[3];
    const std::int64_t Cout = ws[1], M = Cout * k * k, HW = H * W;
    if (b && b->value.numel() != Cout) fail<ShapeError>("conv_transpose2d: bias size mismatch");

    Tensor<T> y({N, Cout, H * k, W * k});
    {
        Tensor<T> out_mat({M, HW});
        detail::ECMap<T> Wm(w->value.data(), Cin, M);
        for (std::int64_t n = 0; n < N; ++n) {
            detail::ECMap<T> Xm(x->value.data() + n * Cin * HW, Cin, HW);
            detail::EMap<T> Om(out_mat.data(), M, HW);
            Om.noalias() = Wm.transpose() * Xm;
            T* yn = y.data() + n * Cout * HW * k * k;
            for (std::int64_t co = 0; co < Cout; ++co) {
                const T bias = b ? b->value[co] : T(0);
                for (std::int64_t di = 0; di < k; ++di)
                    for (std::int64_t dj = 0; dj < k; ++dj) {
                        const T* src = out_mat.data() + ((co * k + di) * k + dj) * HW;
                        for (std::int64_t i = 0; i < H; ++i)
                            for (std::int64_t j = 0; j < W; ++j)
                                yn[(co * H * k + i * k + di) * W * k + j * k + dj] =
                                    src[i * W + j] + bias;
                    }
            }
        }
    }
    std::vector<Var<T>> parents = b ? std::vector<Var<T>>{x, w, b} : std::vector<Var<T>>{x, w};
    return make_node<T>(
        std::move(y), std::move(parents),
        [N, Cin, H, W, Cout, k](Node<T>& node) {
            const std::int64_t M = Cout * k * k, HW = H * W;
            Tensor<T>* gx = detail::grad_target(node, 0);
            Tensor<T>* gw = detail::grad_target(node, 1);
            Tensor<T>* gb =
                node.parents.size() == 3 ? detail::grad_target(node, 2) : nullptr;
            Tensor<T> gout_mat({M, HW});
            detail::ECMap<T> Wm(node.parents[1]->value.data(), Cin, M);
            for (std::int64_t n = 0; n < N; ++n) {
                const T* gn = node.grad.data() + n * Cout * HW * k * k;
                for (std::int64_t co = 0; co < Cout; ++co)
                    for (std::int64_t di = 0; di < k; ++di)
                        for (std::int64_t dj = 0; dj < k; ++dj) {
                            T* dst = gout_mat.data() + ((co * k + di) * k + dj) * HW;
                            for (std::int64_t i = 0; i < H; ++i)
                                for (std::int64_t j = 0; j < W; ++j)
                                    dst[i * W + j] =
                                        gn[(co * H * k + i * k + di) * W * k + j * k + dj];
                        }
                detail::ECMap<T> GOm(gout_mat.data(), M, HW);
                detail::ECMap<T> Xm(node.parents[0]->value.data() + n * Cin * HW, Cin, HW);
                if (gx) {
                    detail::EMap<T> GXm(gx->data() + n * Cin * HW, Cin, HW);
                    GXm.noalias() += Wm * GOm;
                }
                if (gw) {
                    detail::EMap<T> GWm(gw->data(), Cin, M);
                    GWm.noalias() += Xm * GOm.transpose();
                }
                if (gb)
                    for (std::int64_t co = 0; co < Cout; ++co) {
                        T acc = T(0);
                        for (std::int64_t r = co * k * k; r < (co + 1) * k * k; ++r)
                            acc += GOm.row(r).sum();
                        (*gb)[co] += acc;
                    }
            }
        },
        "conv_transpose2d");
}

template <typename T>
Var<T> conv_transpose2d(const Var<T>& x, const Var<T>& w, std::int64_t k) {
    return conv_transpose2d(x, w, Var<T>{}, k);
}

}  // namespace downscale::ag
