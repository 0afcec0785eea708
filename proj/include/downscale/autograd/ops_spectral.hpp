#pragma once

#include "downscale/autograd/ops_elementwise.hpp"
#include "downscale/core/fft.hpp"

namespace downscale::ag {

// Unnormalized 2D DFT of each (H,W) plane. (N,C,H,W) -> (N,C,H,W,2) with the
// last axis holding interleaved re/im. Adjoint: dx = Re(idft_unnorm(g)).
template <typename T>
Var<T> fft2c(const Var<T>& x) {
    const auto& xs = x->value.shape();
    if (xs.size() != 4) fail<ShapeError>("fft2c: expected (N,C,H,W)");
    const std::int64_t NC = xs[0] * xs[1], H = xs[2], W = xs[3], HW = H * W;
    Tensor<T> y({xs[0], xs[1], H, W, 2});
    {
        Tensor<T> in({HW, 2}, T(0));
        for (std::int64_t nc = 0; nc < NC; ++nc) {
            const T* p = x->value.data() + nc * HW;
            for (std::int64_t i = 0; i < HW; ++i) {
                in[2 * i] = p[i];
                in[2 * i + 1] = T(0);
            }
            fft::c2c_2d<T>(H, W, in.data(), y.data() + nc * HW * 2, true);
        }
    }
    return make_node<T>(
        std::move(y), {x},
        [NC, H, W, HW](Node<T>& node) {
            if (auto* gx = detail::grad_target(node, 0)) {
                Tensor<T> out({HW, 2});
                for (std::int64_t nc = 0; nc < NC; ++nc) {
                    fft::c2c_2d<T>(H, W, node.grad.data() + nc * HW * 2, out.data(), false);
                    for (std::int64_t i = 0; i < HW; ++i) (*gx)[nc * HW + i] += out[2 * i];
                }
            }
        },
        "fft2c");
}

// Real part of the normalized inverse 2D DFT: (N,C,H,W,2) -> (N,C,H,W),
// out = Re(idft(z))/HW. Adjoint: dz = dft_unnorm(g)/HW.
template <typename T>
Var<T> ifft2c_real(const Var<T>& z) {
    const auto& zs = z->value.shape();
    if (zs.size() != 5 || zs.back() != 2) fail<ShapeError>("ifft2c_real: expected (N,C,H,W,2)");
    const std::int64_t NC = zs[0] * zs[1], H = zs[2], W = zs[3], HW = H * W;
    const T norm = T(1) / static_cast<T>(HW);
    Tensor<T> y({zs[0], zs[1], H, W});
    {
        Tensor<T> out({HW, 2});
        for (std::int64_t nc = 0; nc < NC; ++nc) {
            fft::c2c_2d<T>(H, W, z->value.data() + nc * HW * 2, out.data(), false);
            T* q = y.data() + nc * HW;
            for (std::int64_t i = 0; i < HW; ++i) q[i] = out[2 * i] * norm;
        }
    }
    return make_node<T>(
        std::move(y), {z},
        [NC, H, W, HW, norm](Node<T>& node) {
            if (auto* gz = detail::grad_target(node, 0)) {
                Tensor<T> in({HW, 2});
                Tensor<T> out({HW, 2});
                for (std::int64_t nc = 0; nc < NC; ++nc) {
                    const T* g = node.grad.data() + nc * HW;
                    for (std::int64_t i = 0; i < HW; ++i) {
                        in[2 * i] = g[i];
                        in[2 * i + 1] = T(0);
                    }
                    fft::c2c_2d<T>(H, W, in.data(), out.data(), true);
                    for (std::int64_t i = 0; i < 2 * HW; ++i)
                        (*gz)[nc * 2 * HW + i] += out[i] * norm;
                }
            }
        },
        "ifft2c_real");
}

// Block-diagonal complex channel mixing applied independently at every
// frequency: within block b, out_i = sum_j w[b,i,j] * z_j (+ bias[b,i]),
// complex products on interleaved re/im. z:(N,C,H,W,2), w:(nb,bs,bs,2),
// bias:(nb,bs,2) or empty.
template <typename T>
Var<T> spectral_block_mm(const Var<T>& z, const Var<T>& w, const Var<T>& bias) {
    const auto& zs = z->value.shape();
    const auto& ws = w->value.shape();
    if (zs.size() != 5 || zs.back() != 2) fail<ShapeError>("spectral_block_mm: bad input");
    if (ws.size() != 4 || ws[1] != ws[2] || ws[3] != 2)
        fail<ShapeError>("spectral_block_mm: weights must be (nb,bs,bs,2)");
    const std::int64_t N = zs[0], C = zs[1], HW = zs[2] * zs[3];
    const std::int64_t nb = ws[0], bs = ws[1];
    if (nb * bs != C) fail<ShapeError>("spectral_block_mm: blocks do not cover channels");
    if (bias && !(bias->value.shape() == std::vector<std::int64_t>{nb, bs, 2}))
        fail<ShapeError>("spectral_block_mm: bias must be (nb,bs,2)");

    auto zidx = [C, HW](std::int64_t n, std::int64_t c, std::int64_t t) {
        return ((n * C + c) * HW + t) * 2;
    };
    Tensor<T> y(zs);
    for (std::int64_t n = 0; n < N; ++n)
        for (std::int64_t b = 0; b < nb; ++b)
            for (std::int64_t t = 0; t < HW; ++t)
                for (std::int64_t i = 0; i < bs; ++i) {
                    T acc_re = bias ? bias->value[(b * bs + i) * 2] : T(0);
                    T acc_im = bias ? bias->value[(b * bs + i) * 2 + 1] : T(0);
                    for (std::int64_t j = 0; j < bs; ++j) {
                        const T wr = w->value[((b * bs + i) * bs + j) * 2];
                        const T wi = w->value[((b * bs + i) * bs + j) * 2 + 1];
                        const std::int64_t zi = zidx(n, b * bs + j, t);
                        const T zr = z->value[zi], zim = z->value[zi + 1];
                        acc_re += wr * zr - wi * zim;
                        acc_im += wr * zim + wi * zr;
                    }
                    const std::int64_t oi = zidx(n, b * bs + i, t);
                    y[oi] = acc_re;
                    y[oi + 1] = acc_im;
                }

    std::vector<Var<T>> parents =
        bias ? std::vector<Var<T>>{z, w, bias} : std::vector<Var<T>>{z, w};
    return make_node<T>(
        std::move(y), std::move(parents),
        [N, C, HW, nb, bs, zidx](Node<T>& node) {
            Tensor<T>* gz = detail::grad_target(node, 0);
            Tensor<T>* gw = detail::grad_target(node, 1);
            Tensor<T>* gb = node.parents.size() == 3 ? detail::grad_target(node, 2) : nullptr;
            const Tensor<T>& zv = node.parents[0]->value;
            const Tensor<T>& wv = node.parents[1]->value;
            for (std::int64_t n = 0; n < N; ++n)
                for (std::int64_t b = 0; b < nb; ++b)
                    for (std::int64_t t = 0; t < HW; ++t)
                        for (std::int64_t i = 0; i < bs; ++i) {
                            const std::int64_t oi = zidx(n, b * bs + i, t);
                            const T gr = node.grad[oi], gi = node.grad[oi + 1];
                            if (gb) {
                                (*gb)[(b * bs + i) * 2] += gr;
                                (*gb)[(b * bs + i) * 2 + 1] += gi;
                            }
                            for (std::int64_t j = 0; j < bs; ++j) {
                                const std::int64_t wij = ((b * bs + i) * bs + j) * 2;
                                const std::int64_t zj = zidx(n, b * bs + j, t);
                                const T wr = wv[wij], wi = wv[wij + 1];
                                const T zr = zv[zj], zim = zv[zj + 1];
                                if (gz) {
                                    // dz = conj(w)^T g
                                    (*gz)[zj] += gr * wr + gi * wi;
                                    (*gz)[zj + 1] += -gr * wi + gi * wr;
                                }
                                if (gw) {
                                    // dw = g conj(z)
                                    (*gw)[wij] += gr * zr + gi * zim;
                                    (*gw)[wij + 1] += -gr * zim + gi * zr;
                                }
                            }
                        }
        },
        "spectral_block_mm");
}

template <typename T>
Var<T> spectral_block_mm(const Var<T>& z, const Var<T>& w) {
    return spectral_block_mm(z, w, Var<T>{});
}

}  // namespace downscale::ag
