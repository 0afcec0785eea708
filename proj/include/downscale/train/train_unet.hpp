#pragma once

#include "downscale/models/unet.hpp"
#include "downscale/train/common.hpp"

namespace downscale::train {

struct UnetTrainConfig {
    std::int64_t steps = 400;
    std::int64_t batch_size = 4;
    std::int64_t hr_patch = 64;  // 0 trains on the whole domain
    double lr = 2e-3;
    double lr_final = -1.0;  // >= 0 enables cosine decay from lr down to this
    double weight_decay = 1e-4;
    double clip_norm = 1.0;
    std::int64_t val_every = 50;
    std::int64_t val_max_samples = 16;
    std::uint64_t seed = 0;
};

struct UnetTrainResult {
    TrainCurve curve;
    double val_mse_initial = 0.0;
    double val_mse_final = 0.0;
};

// Mean squared error of the model against normalized targets over up to
// `max_samples` of a split, in eval mode with no gradients.
template <typename T>
double unet_validation_mse(models::Unet<T>& unet, const data::SplitData& val,
                           const Normalization& norm, std::int64_t max_samples) {
    ag::NoGradGuard ng;
    const bool was_training = unet.training();
    unet.set_training(false);
    const std::int64_t n = std::min<std::int64_t>(val.size(), std::max<std::int64_t>(1, max_samples));
    double total = 0.0;
    std::int64_t count = 0;
    for (std::int64_t t = 0; t < n; ++t) {
        auto b = normalize_batch(data::make_batch(val, {t}), norm);
        auto out = unet.forward(assemble_input<T>(b.predictors, b.statics, val.factor));
        const Tensorf targ = b.targets;
        for (std::int64_t i = 0; i < out->value.numel(); ++i) {
            const double d = static_cast<double>(out->value[i]) - targ[i];
            total += d * d;
        }
        count += out->value.numel();
    }
    unet.set_training(was_training);
    return total / static_cast<double>(std::max<std::int64_t>(1, count));
}

// Supervised baseline: minimize MSE between the UNET output and normalized
// HR targets over random patch batches.
template <typename T>
UnetTrainResult train_unet(models::Unet<T>& unet, const data::SplitData& train_split,
                           const data::SplitData& val_split, const Normalization& norm,
                           const UnetTrainConfig& cfg) {
    check(cfg.steps >= 1 && cfg.batch_size >= 1, "train_unet: steps and batch_size >= 1");
    nn::AdamW<T> opt(unet.parameters(), {cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay});
    UnetTrainResult res;
    res.val_mse_initial = unet_validation_mse(unet, val_split, norm, cfg.val_max_samples);
    res.curve.record_val(0, res.val_mse_initial);
    unet.set_training(true);

    for (std::int64_t step = 0; step < cfg.steps; ++step) {
        opt.set_lr(cosine_lr(step, cfg.steps, cfg.lr, cfg.lr_final));
        auto idx = batch_indices(train_split.size(), cfg.batch_size, cfg.seed, step);
        data::Batch raw = data::make_batch(train_split, idx);
        if (cfg.hr_patch > 0)
            raw = data::crop_batch(raw, train_split.factor, cfg.hr_patch,
                                   cfg.seed + static_cast<std::uint64_t>(step) * 977);
        auto b = normalize_batch(raw, norm);
        auto out = unet.forward(assemble_input<T>(b.predictors, b.statics, train_split.factor));
        auto loss = ag::mse_loss(out, ag::constant(b.targets.cast<T>()));
        const double loss_val = static_cast<double>(loss->value[0]);
        require_finite_loss(loss_val, "unet training", step);
        res.curve.record(step, loss_val);

        opt.zero_grad();
        ag::backward(loss);
        nn::clip_grad_norm(unet.parameters(), cfg.clip_norm);
        opt.step();

        if (cfg.val_every > 0 && (step + 1) % cfg.val_every == 0)
            res.curve.record_val(step + 1,
                                 unet_validation_mse(unet, val_split, norm, cfg.val_max_samples));
    }

    res.val_mse_final = unet_validation_mse(unet, val_split, norm, cfg.val_max_samples);
    res.curve.record_val(cfg.steps, res.val_mse_final);
    unet.set_training(false);
    return res;
}

}  // namespace downscale::train
