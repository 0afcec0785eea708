#pragma once

#include <optional>

#include "downscale/nn/layers.hpp"

namespace downscale::models {

using ag::Var;

struct DiscriminatorConfig {
    std::int64_t in_channels = 33;  // target fields + conditioning stack
    std::int64_t base_width = 64;

    void validate() const {
        if (in_channels < 1 || base_width < 1)
            fail<ConfigError>("discriminator: channels and width must be >= 1");
    }
};

// Patch discriminator: three stride-2 4x4 conv stages then two stride-1
// stages ending in a 1-channel score map (one score per receptive patch).
template <typename T>
class PatchGan : public nn::Module<T> {
  public:
    PatchGan(DiscriminatorConfig cfg, std::uint64_t seed) : cfg_(cfg) {
        cfg.validate();
        Rng rng = Rng::keyed(seed, fnv1a64("patchgan"));
        const std::int64_t w = cfg.base_width;
        c1_.emplace(*this, "c1", rng, cfg.in_channels, w, 4, 2, 1);
        c2_.emplace(*this, "c2", rng, w, w * 2, 4, 2, 1);
        n2_.emplace(*this, "n2", w * 2);
        c3_.emplace(*this, "c3", rng, w * 2, w * 4, 4, 2, 1);
        n3_.emplace(*this, "n3", w * 4);
        c4_.emplace(*this, "c4", rng, w * 4, w * 8, 4, 1, 1);
        n4_.emplace(*this, "n4", w * 8);
        out_.emplace(*this, "out", rng, w * 8, 1, 4, 1, 1);
    }

    const DiscriminatorConfig& config() const { return cfg_; }

    // hr_fields (N,v,H,W) concatenated with conditioning (N,c,H,W) by the caller
    // or passed pre-concatenated; returns the patch score map.
    Var<T> forward(const Var<T>& x) {
        const auto& s = x->value.shape();
        if (s.size() != 4 || s[1] != cfg_.in_channels)
            fail<ShapeError>("discriminator: expected (N," + std::to_string(cfg_.in_channels) +
                             ",H,W), got " + x->value.shape_str());
        const T slope = T(0.2);
        auto h = ag::leaky_relu((*c1_)(x), slope);
        h = ag::leaky_relu((*n2_)((*c2_)(h)), slope);
        h = ag::leaky_relu((*n3_)((*c3_)(h)), slope);
        h = ag::leaky_relu((*n4_)((*c4_)(h)), slope);
        return (*out_)(h);
    }

  private:
    DiscriminatorConfig cfg_;
    std::optional<nn::Conv2d<T>> c1_, c2_, c3_, c4_, out_;
    std::optional<nn::BatchNorm2d<T>> n2_, n3_, n4_;
};

// loss_D = mean(relu(1 - real)) + mean(relu(1 + fake)); loss_G = -mean(fake).
template <typename T>
std::pair<Var<T>, Var<T>> hinge_losses(const Var<T>& real_scores, const Var<T>& fake_scores) {
    auto loss_d = ag::add(
        ag::mean_all(ag::relu(ag::add_scalar(ag::neg(real_scores), T(1)))),
        ag::mean_all(ag::relu(ag::add_scalar(fake_scores, T(1)))));
    auto loss_g = ag::neg(ag::mean_all(fake_scores));
    return {loss_d, loss_g};
}

}  // namespace downscale::models
