#pragma once

#include "downscale/diffusion/sampler.hpp"
#include "downscale/train/train_vae.hpp"

namespace downscale::train {

struct LdmTrainConfig {
    std::int64_t steps = 600;
    std::int64_t batch_size = 4;
    std::int64_t hr_patch = 64;  // 0 trains on whole domains
    double lr = 2e-3;
    double ema_decay = 0.999;
    double clip_norm = 1.0;
    std::int64_t calibration_samples = 32;  // frames used to set latent_scale
    std::int64_t val_every = 100;
    std::int64_t val_max_samples = 8;
    std::uint64_t seed = 0;
};

struct LdmTrainResult {
    TrainCurve curve;
    double latent_scale = 1.0;
};

namespace detail {

// Encoder posterior mean of sigma-scaled residuals; with the lightly
// regularized latent space the posterior collapses to a near-point mass, so
// the mean is the stable choice for both training and inference.
template <typename T>
Tensor<T> encode_mean(models::Vae<T>& vae, const Tensorf& res_scaled) {
    ag::NoGradGuard ng;
    const bool was_training = vae.training();
    vae.set_training(false);
    auto [mu, logvar] = vae.encode(ag::constant(res_scaled.cast<T>()));
    (void)logvar;
    vae.set_training(was_training);
    return mu->value.clone();
}

}  // namespace detail

// RMS of encoded training residuals; diffusion runs on z * (1/rms) so the
// noised mixture matches the unit-variance noise the sampler starts from.
template <typename T>
double calibrate_latent_scale(models::Vae<T>& vae, const Tensorf& residuals,
                              const std::vector<double>& sigma, std::int64_t hr_patch,
                              std::int64_t max_samples, std::uint64_t seed) {
    const std::int64_t n = std::min<std::int64_t>(residuals.shape()[0],
                                                  std::max<std::int64_t>(1, max_samples));
    std::vector<std::int64_t> idx(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
    Tensorf x = detail::residual_patches(residuals, sigma, idx, hr_patch, seed, 0);
    Tensor<T> z = detail::encode_mean(vae, x);
    const double rms = tensor_rms(z);
    return rms > 1e-8 ? 1.0 / rms : 1.0;
}

// Joint conditioner+denoiser training against the v-prediction target in
// the frozen VAE's latent space, with EMA shadows of both modules. The UNET
// enters only through the precomputed residual archive; its digest and the
// VAE's are checked so a frozen stage can never drift silently.
template <typename T>
LdmTrainResult train_ldm(models::Conditioner<T>& cond, models::Denoiser<T>& den,
                         models::Vae<T>& frozen_vae, const models::Unet<T>* frozen_unet,
                         const data::SplitData& train_split, const Tensorf& residuals,
                         const std::vector<double>& sigma, const Normalization& norm,
                         const diffusion::DiffusionSchedule& sched, nn::Ema<T>& ema_cond,
                         nn::Ema<T>& ema_den, const LdmTrainConfig& cfg) {
    check(residuals.shape() == train_split.targets.shape(),
          "train_ldm: residual archive must align with the training split");
    if (cfg.hr_patch > 0 && cfg.hr_patch % frozen_vae.config().spatial_factor() != 0)
        fail<ConfigError>("train_ldm: patch must divide by the VAE spatial factor");
    const std::uint64_t vae_digest = frozen_vae.weights_digest();
    const std::uint64_t unet_digest = frozen_unet ? frozen_unet->weights_digest() : 0;

    LdmTrainResult out;
    out.latent_scale = calibrate_latent_scale(frozen_vae, residuals, sigma, cfg.hr_patch,
                                              cfg.calibration_samples, cfg.seed);

    std::vector<ag::Var<T>> params = cond.parameters();
    for (auto& p : den.parameters()) params.push_back(p);
    nn::AdamW<T> opt(params, {cfg.lr, 0.9, 0.999, 1e-8, 0.0});
    cond.set_training(true);
    den.set_training(true);

    for (std::int64_t step = 0; step < cfg.steps; ++step) {
        auto idx = batch_indices(train_split.size(), cfg.batch_size, cfg.seed, step);
        data::Batch raw = data::make_batch(train_split, idx);
        // Residuals ride in the targets slot so all three fields crop together.
        for (std::size_t k = 0; k < idx.size(); ++k) {
            const std::int64_t n = raw.targets.numel() / raw.targets.shape()[0];
            std::copy_n(residuals.data() + idx[k] * n, n,
                        raw.targets.data() + static_cast<std::int64_t>(k) * n);
        }
        if (cfg.hr_patch > 0)
            raw = data::crop_batch(raw, train_split.factor, cfg.hr_patch,
                                   cfg.seed + static_cast<std::uint64_t>(step) * 977);

        Tensorf res_scaled(raw.targets.shape());
        for (std::int64_t c = 0; c < res_scaled.shape()[1]; ++c) {
            const float inv = static_cast<float>(1.0 / sigma[static_cast<std::size_t>(c)]);
            const std::int64_t inner = res_scaled.shape()[2] * res_scaled.shape()[3];
            for (std::int64_t b = 0; b < res_scaled.shape()[0]; ++b) {
                const std::int64_t off = (b * res_scaled.shape()[1] + c) * inner;
                for (std::int64_t i = 0; i < inner; ++i)
                    res_scaled[off + i] = raw.targets[off + i] * inv;
            }
        }

        Tensor<T> z0 = detail::encode_mean(frozen_vae, res_scaled);
        for (std::int64_t i = 0; i < z0.numel(); ++i)
            z0[i] = static_cast<T>(static_cast<double>(z0[i]) * out.latent_scale);

        Rng step_rng = Rng::keyed(cfg.seed, fnv1a64("ldm_step"),
                                  static_cast<std::uint64_t>(step));
        const std::int64_t t = 1 + step_rng.uniform_int(sched.T);
        Tensor<T> eps = step_rng.normal_tensor<T>(z0.shape());
        Tensor<T> z_t = diffusion::forward_noise(z0, eps, t, sched);
        Tensor<T> v = diffusion::v_target(z0, eps, t, sched);

        Tensorf pred_norm = prepare_predictors(raw.predictors.clone(), norm.predictors);
        Tensorf statics_norm = data::normalize(raw.statics, norm.statics);
        auto cstack = cond.forward(ag::constant(pred_norm.template cast<T>()),
                                   ag::constant(statics_norm.template cast<T>()));
        const std::vector<std::int64_t> t_batch(static_cast<std::size_t>(z0.shape()[0]), t);
        auto v_hat = den.forward(ag::constant(std::move(z_t)), t_batch, cstack);
        auto loss = ag::mse_loss(v_hat, ag::constant(std::move(v)));
        const double loss_val = static_cast<double>(loss->value[0]);
        require_finite_loss(loss_val, "ldm training", step);
        out.curve.record(step, loss_val);

        opt.zero_grad();
        ag::backward(loss);
        nn::clip_grad_norm(params, cfg.clip_norm);
        opt.step();
        ema_cond.update();
        ema_den.update();
    }

    cond.set_training(false);
    den.set_training(false);
    if (frozen_vae.weights_digest() != vae_digest)
        fail<TrainingError>("ldm training: frozen VAE weights mutated");
    if (frozen_unet && frozen_unet->weights_digest() != unet_digest)
        fail<TrainingError>("ldm training: frozen UNET weights mutated");
    return out;
}

}  // namespace downscale::train
