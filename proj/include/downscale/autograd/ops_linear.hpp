#pragma once

#include <Eigen/Dense>

#include "downscale/autograd/ops_elementwise.hpp"

namespace downscale::ag {

namespace detail {

template <typename T>
using EMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using EMap = Eigen::Map<EMat<T>>;
template <typename T>
using ECMap = Eigen::Map<const EMat<T>>;

}  // namespace detail

// y = x @ w^T + b with x:(N,in), w:(out,in), b:(out) or empty var.
template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& w, const Var<T>& b) {
    const auto& xs = x->value.shape();
    const auto& ws = w->value.shape();
    if (xs.size() != 2 || ws.size() != 2 || xs[1] != ws[1])
        fail<ShapeError>("linear: x " + x->value.shape_str() + " vs w " + w->value.shape_str());
    const std::int64_t N = xs[0], in = xs[1], out = ws[0];
    if (b && b->value.numel() != out) fail<ShapeError>("linear: bias size mismatch");

    Tensor<T> y({N, out});
    {
        detail::ECMap<T> X(x->value.data(), N, in);
        detail::ECMap<T> W(w->value.data(), out, in);
        detail::EMap<T> Y(y.data(), N, out);
        Y.noalias() = X * W.transpose();
        if (b)
            for (std::int64_t r = 0; r < N; ++r)
                for (std::int64_t c = 0; c < out; ++c) Y(r, c) += b->value[c];
    }
    std::vector<Var<T>> parents = b ? std::vector<Var<T>>{x, w, b} : std::vector<Var<T>>{x, w};
    return make_node<T>(
        std::move(y), std::move(parents),
        [N, in, out](Node<T>& node) {
            detail::ECMap<T> G(node.grad.data(), N, out);
            detail::ECMap<T> X(node.parents[0]->value.data(), N, in);
            detail::ECMap<T> W(node.parents[1]->value.data(), out, in);
            if (auto* gx = detail::grad_target(node, 0)) {
                detail::EMap<T> GX(gx->data(), N, in);
                GX.noalias() += G * W;
            }
            if (auto* gw = detail::grad_target(node, 1)) {
                detail::EMap<T> GW(gw->data(), out, in);
                GW.noalias() += G.transpose() * X;
            }
            if (node.parents.size() == 3)
                if (auto* gb = detail::grad_target(node, 2))
                    for (std::int64_t r = 0; r < N; ++r)
                        for (std::int64_t c = 0; c < out; ++c) (*gb)[c] += G(r, c);
        },
        "linear");
}

template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& w) {
    return linear(x, w, Var<T>{});
}

// a:(N,K) @ b:(K,M) -> (N,M)
template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b) {
    const auto& as = a->value.shape();
    const auto& bs = b->value.shape();
    if (as.size() != 2 || bs.size() != 2 || as[1] != bs[0])
        fail<ShapeError>("matmul: " + a->value.shape_str() + " vs " + b->value.shape_str());
    const std::int64_t N = as[0], K = as[1], M = bs[1];
    Tensor<T> y({N, M});
    {
        detail::ECMap<T> A(a->value.data(), N, K);
        detail::ECMap<T> B(b->value.data(), K, M);
        detail::EMap<T> Y(y.data(), N, M);
        Y.noalias() = A * B;
    }
    return make_node<T>(
        std::move(y), {a, b},
        [N, K, M](Node<T>& node) {
            detail::ECMap<T> G(node.grad.data(), N, M);
            detail::ECMap<T> A(node.parents[0]->value.data(), N, K);
            detail::ECMap<T> B(node.parents[1]->value.data(), K, M);
            if (auto* ga = detail::grad_target(node, 0)) {
                detail::EMap<T> GA(ga->data(), N, K);
                GA.noalias() += G * B.transpose();
            }
            if (auto* gb = detail::grad_target(node, 1)) {
                detail::EMap<T> GB(gb->data(), K, M);
                GB.noalias() += A.transpose() * G;
            }
        },
        "matmul");
}

}  // namespace downscale::ag
