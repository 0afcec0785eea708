#pragma once

#include "downscale/models/patchgan.hpp"
#include "downscale/train/train_ldm.hpp"

namespace downscale::train {

// UNET (or GAN generator) inference in physical units.
template <typename T>
Tensorf unet_infer(models::Unet<T>& unet, const Tensorf& pred_raw, const Tensorf& statics_raw,
                   const Normalization& norm, std::int64_t factor) {
    Tensorf pred_norm = prepare_predictors(pred_raw.clone(), norm.predictors);
    Tensorf statics_norm = data::normalize(statics_raw, norm.statics);
    Tensorf out = unet_predict_norm(unet, pred_norm, statics_norm, factor);
    return data::denormalize(out, norm.targets);
}

struct LdmInferConfig {
    std::int64_t steps = 100;
    std::uint64_t seed = 0;
    bool residual = true;  // off: decoded sample is the whole output
    double latent_scale = 1.0;
    std::vector<double> sigma;  // per-channel scale of the decoded fields
};

struct LdmOutputs {
    Tensorf output;         // physical units
    Tensorf unet_part;      // physical units; empty in non-residual mode
    Tensorf residual_part;  // physical units; output = unet_part + residual_part
};

// Full generative path: condition on the inputs, run the deterministic
// reverse trajectory, decode, rescale. In residual mode the decoded field is
// added elementwise to the UNET prediction (output[i] is literally
// unet_part[i] + residual_part[i], so the composition can be re-verified
// bit for bit); in non-residual mode the decoded field plus the channel
// mean is the output.
template <typename T>
LdmOutputs ldm_infer(models::Unet<T>* unet, models::Vae<T>& vae, models::Conditioner<T>& cond,
                     models::Denoiser<T>& den, const diffusion::DiffusionSchedule& sched,
                     const Tensorf& pred_raw, const Tensorf& statics_raw,
                     const Normalization& norm, const LdmInferConfig& cfg) {
    if (cfg.residual && !unet)
        fail<DependencyError>("ldm inference: residual mode requires the unet checkpoint");
    if (cfg.sigma.size() != norm.targets.size())
        fail<ConfigError>("ldm inference: sigma must have one entry per target channel");

    Tensorf pred_norm = prepare_predictors(pred_raw.clone(), norm.predictors);
    Tensorf statics_norm = data::normalize(statics_raw, norm.statics);
    const auto& ss = statics_norm.shape();
    const std::int64_t f = vae.config().spatial_factor();
    if (ss[2] % f != 0 || ss[3] % f != 0)
        fail<ShapeError>("ldm inference: HR dims must divide by " + std::to_string(f));

    ag::NoGradGuard ng;
    cond.set_training(false);
    vae.set_training(false);
    auto cstack = cond.forward(ag::constant(pred_norm.template cast<T>()),
                               ag::constant(statics_norm.template cast<T>()));

    const std::vector<std::int64_t> latent_shape = {ss[0], vae.config().latent_channels(),
                                                    ss[2] / f, ss[3] / f};
    Tensor<T> z = diffusion::sample_latent(den, cstack, latent_shape, sched, cfg.steps,
                                           cfg.seed);
    const T unscale = static_cast<T>(1.0 / cfg.latent_scale);
    for (std::int64_t i = 0; i < z.numel(); ++i) z[i] *= unscale;
    auto decoded = vae.decode(ag::constant(std::move(z)));
    Tensorf dec = decoded->value.template cast<float>();

    LdmOutputs out;
    const auto& ds = dec.shape();
    const std::int64_t inner = ds[2] * ds[3];
    out.residual_part = Tensorf(ds);
    for (std::int64_t b = 0; b < ds[0]; ++b)
        for (std::int64_t c = 0; c < ds[1]; ++c) {
            const float scale = static_cast<float>(cfg.sigma[static_cast<std::size_t>(c)] *
                                                   norm.targets.stddev[static_cast<std::size_t>(c)]);
            const std::int64_t off = (b * ds[1] + c) * inner;
            for (std::int64_t i = 0; i < inner; ++i)
                out.residual_part[off + i] = dec[off + i] * scale;
        }

    out.output = Tensorf(ds);
    if (cfg.residual) {
        const std::int64_t factor = ss[2] / pred_raw.shape()[2];
        out.unet_part = unet_infer(*unet, pred_raw, statics_raw, norm, factor);
        for (std::int64_t i = 0; i < out.output.numel(); ++i)
            out.output[i] = out.unet_part[i] + out.residual_part[i];
    } else {
        for (std::int64_t b = 0; b < ds[0]; ++b)
            for (std::int64_t c = 0; c < ds[1]; ++c) {
                const float m = static_cast<float>(norm.targets.mean[static_cast<std::size_t>(c)]);
                const std::int64_t off = (b * ds[1] + c) * inner;
                for (std::int64_t i = 0; i < inner; ++i)
                    out.output[off + i] = m + out.residual_part[off + i];
            }
    }
    return out;
}

// Physical-space quadratic interpolation of the LR channels matching each
// target channel: the no-learning reference every model must beat.
inline Tensorf interp_baseline(const data::SplitData& d) {
    const auto& ts = d.targets.shape();
    Tensorf out(ts);
    std::vector<std::int64_t> src;
    for (const auto& name : d.target_channels) {
        auto it = std::find(d.predictor_channels.begin(), d.predictor_channels.end(), name);
        if (it == d.predictor_channels.end())
            fail<ConfigError>("interp baseline: no LR predictor named " + name);
        src.push_back(it - d.predictor_channels.begin());
    }
    const auto& ps = d.predictors.shape();
    for (std::int64_t t = 0; t < ts[0]; ++t)
        for (std::size_t c = 0; c < src.size(); ++c) {
            Tensorf lr({1, ps[2], ps[3]});
            std::copy_n(d.predictors.data() + (t * ps[1] + src[c]) * ps[2] * ps[3],
                        ps[2] * ps[3], lr.data());
            data::FieldStack f{std::move(lr), {d.target_channels[c]}, {}, d.lr_grid, {}};
            data::FieldStack hi = data::interp_quadratic(f, d.factor);
            std::copy_n(hi.values.data(), ts[2] * ts[3],
                        out.data() + (t * ts[1] + static_cast<std::int64_t>(c)) * ts[2] * ts[3]);
        }
    return out;
}

}  // namespace downscale::train
