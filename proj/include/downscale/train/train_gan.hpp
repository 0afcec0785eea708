#pragma once

#include <iostream>

#include "downscale/models/patchgan.hpp"
#include "downscale/models/unet.hpp"
#include "downscale/train/common.hpp"

namespace downscale::train {

struct GanTrainConfig {
    std::int64_t steps = 300;
    std::int64_t batch_size = 2;
    std::int64_t hr_patch = 0;  // GAN default: whole-domain batches
    // The generator warms up on the pixel loss alone; the discriminator and
    // the adversarial term switch on together at this step.
    std::int64_t discriminator_start_step = 2000;
    double lr_g = 2e-4;
    double lr_d = 2e-4;
    double lambda_adv = 0.1;
    double clip_norm = 1.0;
    // Sustained near-zero discriminator loss means it stopped learning
    // anything from the generator (mode collapse indicator).
    double collapse_threshold = 0.05;
    std::int64_t collapse_patience = 50;
    std::uint64_t seed = 0;
};

struct GanStepStats {
    double loss_pixel = 0.0;
    double loss_adv = 0.0;   // generator's adversarial term (0 before start)
    double loss_disc = 0.0;  // hinge discriminator loss (0 before start)
    bool disc_active = false;
};

// Alternating single-step optimization: one discriminator update on
// detached generator output, then one generator update. Before
// discriminator_start_step the adversarial term is not part of the
// generator's graph at all, so its gradient contribution is exactly zero.
template <typename T>
class GanTrainer {
  public:
    GanTrainer(models::Unet<T>& gen, models::PatchGan<T>& disc, const Normalization& norm,
               GanTrainConfig cfg)
        : gen_(&gen),
          disc_(&disc),
          norm_(norm),
          cfg_(cfg),
          opt_g_(gen.parameters(), {cfg.lr_g, 0.5, 0.999, 1e-8, 0.0}),
          opt_d_(disc.parameters(), {cfg.lr_d, 0.5, 0.999, 1e-8, 0.0}) {
        const std::int64_t want = gen.config().in_channels + gen.config().out_channels;
        if (disc.config().in_channels != want)
            fail<ConfigError>("gan: discriminator must see generator inputs + targets (" +
                              std::to_string(want) + " channels), got " +
                              std::to_string(disc.config().in_channels));
    }

    std::int64_t step_count() const { return step_; }
    bool collapse_warned() const { return collapse_warned_; }
    const TrainCurve& curve() const { return curve_; }
    TrainCurve& curve() { return curve_; }

    // Generator objective at a given step: MAE against targets, plus the
    // hinge adversarial term only once the discriminator is active.
    Var<T> generator_loss(const Var<T>& fake, const Var<T>& input, const Var<T>& targets,
                          std::int64_t step) {
        auto pixel = ag::mae_loss(fake, targets);
        if (step < cfg_.discriminator_start_step) return pixel;
        auto fake_scores = disc_->forward(ag::concat_channels(input, fake));
        auto adv = ag::neg(ag::mean_all(fake_scores));
        return ag::add(pixel, ag::scale(adv, T(cfg_.lambda_adv)));
    }

    GanStepStats step(const data::Batch& raw) {
        GanStepStats st;
        st.disc_active = step_ >= cfg_.discriminator_start_step;
        auto b = normalize_batch(raw, norm_);
        auto input = assemble_input<T>(b.predictors, b.statics, factor_of(raw));
        auto targets = ag::constant(b.targets.template cast<T>());

        gen_->set_training(true);
        auto fake = gen_->forward(input);

        if (st.disc_active) {
            disc_->set_training(true);
            auto real_scores = disc_->forward(ag::concat_channels(input, targets));
            auto fake_scores = disc_->forward(ag::concat_channels(input, ag::detach(fake)));
            auto [loss_d, loss_g_unused] = models::hinge_losses(real_scores, fake_scores);
            (void)loss_g_unused;
            st.loss_disc = static_cast<double>(loss_d->value[0]);
            require_finite_loss(st.loss_disc, "gan discriminator", step_);
            opt_d_.zero_grad();
            ag::backward(loss_d);
            nn::clip_grad_norm(disc_->parameters(), cfg_.clip_norm);
            opt_d_.step();
            track_collapse(st.loss_disc);
        }

        auto pixel = ag::mae_loss(fake, targets);
        st.loss_pixel = static_cast<double>(pixel->value[0]);
        Var<T> loss_g = pixel;
        if (st.disc_active) {
            auto fake_scores = disc_->forward(ag::concat_channels(input, fake));
            auto adv = ag::neg(ag::mean_all(fake_scores));
            st.loss_adv = static_cast<double>(adv->value[0]);
            loss_g = ag::add(pixel, ag::scale(adv, T(cfg_.lambda_adv)));
        }
        require_finite_loss(static_cast<double>(loss_g->value[0]), "gan generator", step_);
        opt_g_.zero_grad();
        ag::backward(loss_g);
        nn::clip_grad_norm(gen_->parameters(), cfg_.clip_norm);
        opt_g_.step();

        curve_.record(step_, st.loss_pixel);
        ++step_;
        return st;
    }

    void run(const data::SplitData& train_split) {
        for (std::int64_t s = 0; s < cfg_.steps; ++s) {
            auto idx = batch_indices(train_split.size(), cfg_.batch_size, cfg_.seed, step_);
            data::Batch raw = data::make_batch(train_split, idx);
            if (cfg_.hr_patch > 0)
                raw = data::crop_batch(raw, train_split.factor, cfg_.hr_patch,
                                       cfg_.seed + static_cast<std::uint64_t>(step_) * 977);
            step(raw);
        }
        gen_->set_training(false);
        disc_->set_training(false);
    }

  private:
    std::int64_t factor_of(const data::Batch& b) const {
        return b.statics.shape()[2] / b.predictors.shape()[2];
    }

    void track_collapse(double loss_d) {
        if (loss_d < cfg_.collapse_threshold)
            ++collapse_run_;
        else
            collapse_run_ = 0;
        if (!collapse_warned_ && collapse_run_ >= cfg_.collapse_patience) {
            collapse_warned_ = true;
            std::cerr << "warning: discriminator loss below " << cfg_.collapse_threshold
                      << " for " << collapse_run_
                      << " consecutive steps; generator may be collapsing\n";
        }
    }

    models::Unet<T>* gen_;
    models::PatchGan<T>* disc_;
    Normalization norm_;
    GanTrainConfig cfg_;
    nn::AdamW<T> opt_g_, opt_d_;
    TrainCurve curve_;
    std::int64_t step_ = 0;
    std::int64_t collapse_run_ = 0;
    bool collapse_warned_ = false;
};

}  // namespace downscale::train
