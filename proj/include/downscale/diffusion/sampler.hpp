#pragma once

#include "downscale/diffusion/schedule.hpp"
#include "downscale/models/conditioner.hpp"
#include "downscale/models/denoiser.hpp"

namespace downscale::diffusion {

// Deterministic reverse trajectory (eta=0): starting from seeded standard
// normal noise, step down `steps` evenly spaced schedule times, each step
// predicting v, recovering (z0, eps) and re-noising to the next time.
template <typename T>
Tensor<T> sample_latent(models::Denoiser<T>& denoiser,
                        const std::vector<ag::Var<T>>& conditioning,
                        const std::vector<std::int64_t>& latent_shape,
                        const DiffusionSchedule& sched, std::int64_t steps,
                        std::uint64_t seed) {
    if (steps < 1) fail<SamplingError>("sampler: steps must be >= 1");
    if (latent_shape.size() != 4) fail<ShapeError>("sampler: latent shape must be (N,C,h,w)");
    ag::NoGradGuard ng;
    const bool was_training = denoiser.training();
    denoiser.set_training(false);

    Rng rng = Rng::keyed(seed, fnv1a64("sample_latent"));
    Tensor<T> z = rng.normal_tensor<T>(latent_shape);
    const std::int64_t N = latent_shape[0];

    for (std::int64_t k = 0; k < steps; ++k) {
        const std::int64_t t_now = sched.T * (steps - k) / steps;
        const std::int64_t t_next = sched.T * (steps - k - 1) / steps;
        const std::vector<std::int64_t> t_batch(static_cast<std::size_t>(N), t_now);
        auto v = denoiser.forward(ag::constant(z.clone()), t_batch, conditioning);
        auto [z0, eps] = recover(z, v->value, t_now, sched);
        const T a = static_cast<T>(sched.alpha[t_next]);
        const T g = static_cast<T>(sched.sigma[t_next]);
        for (std::int64_t i = 0; i < z.numel(); ++i) z[i] = a * z0[i] + g * eps[i];
    }

    denoiser.set_training(was_training);
    return z;
}

}  // namespace downscale::diffusion
