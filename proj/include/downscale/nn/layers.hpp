#pragma once

#include "downscale/autograd/ops_conv.hpp"
#include "downscale/autograd/ops_norm.hpp"
#include "downscale/autograd/ops_shape.hpp"
#include "downscale/nn/module.hpp"

namespace downscale::nn {

namespace detail {

template <typename T>
Tensor<T> uniform_init(Rng& rng, std::vector<std::int64_t> shape, double bound) {
    Tensor<T> t(std::move(shape));
    for (std::int64_t i = 0; i < t.numel(); ++i)
        t[i] = static_cast<T>(rng.uniform(-bound, bound));
    return t;
}

}  // namespace detail

template <typename T>
struct Conv2d {
    Var<T> w, b;
    std::int64_t stride, pad;

    Conv2d(Module<T>& m, const std::string& name, Rng& rng, std::int64_t in, std::int64_t out,
           std::int64_t k, std::int64_t stride_ = 1, std::int64_t pad_ = 0, bool bias = true)
        : stride(stride_), pad(pad_) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(in * k * k));
        w = m.add_param(name + ".w", detail::uniform_init<T>(rng, {out, in, k, k}, bound));
        if (bias) b = m.add_param(name + ".b", detail::uniform_init<T>(rng, {out}, bound));
    }

    Var<T> operator()(const Var<T>& x) const { return ag::conv2d(x, w, b, stride, pad); }
};

template <typename T>
struct ConvTranspose2d {
    Var<T> w, b;
    std::int64_t k;

    ConvTranspose2d(Module<T>& m, const std::string& name, Rng& rng, std::int64_t in,
                    std::int64_t out, std::int64_t k_)
        : k(k_) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(out * k * k));
        w = m.add_param(name + ".w", detail::uniform_init<T>(rng, {in, out, k, k}, bound));
        b = m.add_param(name + ".b", detail::uniform_init<T>(rng, {out}, bound));
    }

    Var<T> operator()(const Var<T>& x) const { return ag::conv_transpose2d(x, w, b, k); }
};

template <typename T>
struct Linear {
    Var<T> w, b;

    Linear(Module<T>& m, const std::string& name, Rng& rng, std::int64_t in, std::int64_t out,
           bool bias = true) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(in));
        w = m.add_param(name + ".w", detail::uniform_init<T>(rng, {out, in}, bound));
        if (bias) b = m.add_param(name + ".b", detail::uniform_init<T>(rng, {out}, bound));
    }

    Var<T> operator()(const Var<T>& x) const { return ag::linear(x, w, b); }
};

template <typename T>
struct BatchNorm2d {
    Var<T> gamma, beta;
    std::shared_ptr<Tensor<T>> running_mean, running_var;
    const Module<T>* owner;
    T momentum, eps;

    BatchNorm2d(Module<T>& m, const std::string& name, std::int64_t c, T momentum_ = T(0.1),
                T eps_ = T(1e-5))
        : owner(&m), momentum(momentum_), eps(eps_) {
        gamma = m.add_param(name + ".gamma", Tensor<T>({c}, T(1)));
        beta = m.add_param(name + ".beta", Tensor<T>({c}, T(0)));
        running_mean = m.add_buffer(name + ".running_mean", Tensor<T>({c}, T(0)));
        running_var = m.add_buffer(name + ".running_var", Tensor<T>({c}, T(1)));
    }

    Var<T> operator()(const Var<T>& x) const {
        return ag::batch_norm2d(x, gamma, beta, *running_mean, *running_var, owner->training(),
                                momentum, eps);
    }
};

// Largest group count <= 8 that divides the channel count.
inline std::int64_t norm_groups(std::int64_t c) {
    std::int64_t g = std::min<std::int64_t>(8, c);
    while (c % g != 0) --g;
    return g;
}

template <typename T>
struct GroupNorm {
    Var<T> gamma, beta;
    std::int64_t groups;
    T eps;

    GroupNorm(Module<T>& m, const std::string& name, std::int64_t groups_, std::int64_t c,
              T eps_ = T(1e-5))
        : groups(groups_), eps(eps_) {
        gamma = m.add_param(name + ".gamma", Tensor<T>({c}, T(1)));
        beta = m.add_param(name + ".beta", Tensor<T>({c}, T(0)));
    }

    Var<T> operator()(const Var<T>& x) const {
        return ag::group_norm(x, gamma, beta, groups, eps);
    }
};

template <typename T>
struct LayerNormChannels {
    Var<T> gamma, beta;
    T eps;

    LayerNormChannels(Module<T>& m, const std::string& name, std::int64_t c, T eps_ = T(1e-5))
        : eps(eps_) {
        gamma = m.add_param(name + ".gamma", Tensor<T>({c}, T(1)));
        beta = m.add_param(name + ".beta", Tensor<T>({c}, T(0)));
    }

    Var<T> operator()(const Var<T>& x) const {
        return ag::layer_norm_channels(x, gamma, beta, eps);
    }
};

}  // namespace downscale::nn
