#pragma once

#include "downscale/models/vae.hpp"
#include "downscale/train/residual.hpp"

namespace downscale::train {

struct VaeTrainConfig {
    std::int64_t steps = 500;
    std::int64_t batch_size = 4;
    std::int64_t hr_patch = 64;  // 0 trains on whole residual fields
    double lr = 1e-3;
    double beta = 1e-6;  // KL weight; latents stay lightly regularized
    double clip_norm = 1.0;
    std::int64_t val_every = 100;
    std::int64_t val_max_samples = 8;
    std::uint64_t seed = 0;
};

struct VaeTrainResult {
    TrainCurve curve;
    std::vector<double> sigma;     // per-channel residual scale the VAE was fed
    double recon_rmse_final = 0.0; // on held-out residuals, in residual units
};

namespace detail {

// Random (T', v, p, p) crops out of a (T, v, H, W) stack, scaled by 1/sigma.
inline Tensorf residual_patches(const Tensorf& res, const std::vector<double>& sigma,
                                const std::vector<std::int64_t>& idx, std::int64_t patch,
                                std::uint64_t seed, std::int64_t step) {
    const auto& s = res.shape();
    const std::int64_t p = patch > 0 ? patch : s[2];
    check(p <= s[2] && (patch == 0 || patch <= s[3]), "residual_patches: patch exceeds domain");
    const std::int64_t q = patch > 0 ? patch : s[3];
    Rng rng = Rng::keyed(seed, fnv1a64("residual_patches"), static_cast<std::uint64_t>(step));
    Tensorf out({static_cast<std::int64_t>(idx.size()), s[1], p, q});
    for (std::size_t k = 0; k < idx.size(); ++k) {
        const std::int64_t i0 = patch > 0 ? rng.uniform_int(s[2] - p + 1) : 0;
        const std::int64_t j0 = patch > 0 ? rng.uniform_int(s[3] - q + 1) : 0;
        for (std::int64_t c = 0; c < s[1]; ++c) {
            const float inv = static_cast<float>(1.0 / sigma[static_cast<std::size_t>(c)]);
            for (std::int64_t i = 0; i < p; ++i)
                for (std::int64_t j = 0; j < q; ++j)
                    out.at(static_cast<std::int64_t>(k), c, i, j) =
                        res.at(idx[k], c, i0 + i, j0 + j) * inv;
        }
    }
    return out;
}

}  // namespace detail

// Mean reconstruction RMSE over held-out residual fields (sigma-scaled
// units), using the posterior mean so the report is deterministic.
template <typename T>
double vae_validation_rmse(models::Vae<T>& vae, const Tensorf& res,
                           const std::vector<double>& sigma, std::int64_t max_samples) {
    ag::NoGradGuard ng;
    const bool was_training = vae.training();
    vae.set_training(false);
    const auto& s = res.shape();
    const std::int64_t n = std::min<std::int64_t>(s[0], std::max<std::int64_t>(1, max_samples));
    double total = 0.0;
    std::int64_t count = 0;
    for (std::int64_t t = 0; t < n; ++t) {
        Tensorf x = detail::residual_patches(res, sigma, {t}, 0, 0, 0);
        auto xin = ag::constant(x.cast<T>());
        auto [mu, logvar] = vae.encode(xin);
        (void)logvar;
        auto recon = vae.decode(mu);
        for (std::int64_t i = 0; i < recon->value.numel(); ++i) {
            const double d = static_cast<double>(recon->value[i]) - x[i];
            total += d * d;
        }
        count += recon->value.numel();
    }
    vae.set_training(was_training);
    return std::sqrt(total / static_cast<double>(std::max<std::int64_t>(1, count)));
}

// Reconstruction + beta * KL on sigma-scaled residual patches. A non-finite
// KL term aborts immediately: it means the encoder's log-variance blew up.
template <typename T>
VaeTrainResult train_vae(models::Vae<T>& vae, const Tensorf& res_train, const Tensorf& res_val,
                         const VaeTrainConfig& cfg) {
    check(res_train.shape().size() == 4, "train_vae: residuals must be (T,v,H,W)");
    if (cfg.hr_patch > 0 && cfg.hr_patch % vae.config().spatial_factor() != 0)
        fail<ConfigError>("train_vae: patch must divide by the VAE spatial factor");

    VaeTrainResult out;
    out.sigma = residual_sigma(res_train);
    nn::AdamW<T> opt(vae.parameters(), {cfg.lr, 0.9, 0.999, 1e-8, 0.0});
    Rng noise_rng = Rng::keyed(cfg.seed, fnv1a64("vae_noise"));
    vae.set_training(true);

    for (std::int64_t step = 0; step < cfg.steps; ++step) {
        auto idx = batch_indices(res_train.shape()[0], cfg.batch_size, cfg.seed, step);
        Tensorf x = detail::residual_patches(res_train, out.sigma, idx, cfg.hr_patch, cfg.seed,
                                             step);
        auto xin = ag::constant(x.cast<T>());
        auto [mu, logvar] = vae.encode(xin);
        auto z = vae.sample(mu, logvar, noise_rng);
        auto recon = vae.decode(z);
        auto kl = models::kl_divergence(mu, logvar);
        const double kl_val = static_cast<double>(kl->value[0]);
        if (!std::isfinite(kl_val))
            fail<TrainingError>("vae training: KL divergence is not finite at step " +
                                std::to_string(step));
        auto loss = ag::add(ag::mse_loss(recon, xin), ag::scale(kl, T(cfg.beta)));
        const double loss_val = static_cast<double>(loss->value[0]);
        require_finite_loss(loss_val, "vae training", step);
        out.curve.record(step, loss_val);

        opt.zero_grad();
        ag::backward(loss);
        nn::clip_grad_norm(vae.parameters(), cfg.clip_norm);
        opt.step();

        if (cfg.val_every > 0 && (step + 1) % cfg.val_every == 0 && res_val.numel())
            out.curve.record_val(
                step + 1, vae_validation_rmse(vae, res_val, out.sigma, cfg.val_max_samples));
    }

    if (res_val.numel())
        out.recon_rmse_final = vae_validation_rmse(vae, res_val, out.sigma, cfg.val_max_samples);
    vae.set_training(false);
    return out;
}

}  // namespace downscale::train
