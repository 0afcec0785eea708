#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "downscale/core/tensor.hpp"

namespace downscale::diffusion {

// Noise schedule tabulated at integer times 0..T with alpha_t^2+sigma_t^2=1,
// alpha_0=1 (clean) and sigma_T=1 (pure noise).
struct DiffusionSchedule {
    std::int64_t T = 0;
    std::vector<double> alpha;  // size T+1
    std::vector<double> sigma;

    void check_t(std::int64_t t) const {
        if (t < 0 || t > T)
            fail<SamplingError>("schedule: t=" + std::to_string(t) + " outside [0," +
                                std::to_string(T) + "]");
    }
};

inline DiffusionSchedule make_schedule(std::int64_t T, const std::string& kind = "cosine") {
    if (T < 1) fail<ConfigError>("schedule: T must be >= 1");
    if (kind != "cosine") fail<ConfigError>("schedule: unknown kind " + kind);
    DiffusionSchedule s;
    s.T = T;
    s.alpha.resize(T + 1);
    s.sigma.resize(T + 1);
    for (std::int64_t t = 0; t <= T; ++t) {
        const double a = 0.5 * M_PI * static_cast<double>(t) / static_cast<double>(T);
        s.alpha[t] = std::cos(a);
        s.sigma[t] = std::sin(a);
    }
    s.alpha[0] = 1.0;
    s.sigma[0] = 0.0;
    s.alpha[T] = 0.0;
    s.sigma[T] = 1.0;
    return s;
}

// z_t = alpha_t z0 + sigma_t eps
template <typename T>
Tensor<T> forward_noise(const Tensor<T>& z0, const Tensor<T>& eps, std::int64_t t,
                        const DiffusionSchedule& s) {
    s.check_t(t);
    if (!z0.same_shape(eps)) fail<ShapeError>("forward_noise: z0/eps shape mismatch");
    Tensor<T> out(z0.shape());
    const T a = static_cast<T>(s.alpha[t]), g = static_cast<T>(s.sigma[t]);
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = a * z0[i] + g * eps[i];
    return out;
}

// v = alpha_t eps - sigma_t z0
template <typename T>
Tensor<T> v_target(const Tensor<T>& z0, const Tensor<T>& eps, std::int64_t t,
                   const DiffusionSchedule& s) {
    s.check_t(t);
    if (!z0.same_shape(eps)) fail<ShapeError>("v_target: z0/eps shape mismatch");
    Tensor<T> out(z0.shape());
    const T a = static_cast<T>(s.alpha[t]), g = static_cast<T>(s.sigma[t]);
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = a * eps[i] - g * z0[i];
    return out;
}

// Inverts the pair above: z0 = alpha z_t - sigma v; eps = sigma z_t + alpha v.
template <typename T>
std::pair<Tensor<T>, Tensor<T>> recover(const Tensor<T>& z_t, const Tensor<T>& v,
                                        std::int64_t t, const DiffusionSchedule& s) {
    s.check_t(t);
    if (!z_t.same_shape(v)) fail<ShapeError>("recover: z_t/v shape mismatch");
    Tensor<T> z0(z_t.shape()), eps(z_t.shape());
    const T a = static_cast<T>(s.alpha[t]), g = static_cast<T>(s.sigma[t]);
    for (std::int64_t i = 0; i < z_t.numel(); ++i) {
        z0[i] = a * z_t[i] - g * v[i];
        eps[i] = g * z_t[i] + a * v[i];
    }
    return {std::move(z0), std::move(eps)};
}

}  // namespace downscale::diffusion
