#pragma once

#include <optional>

#include "downscale/nn/layers.hpp"

namespace downscale::models {

using ag::Var;

struct VaeConfig {
    std::int64_t in_channels = 1;  // target variable count v
    std::int64_t base_width = 32;
    std::int64_t levels = 3;           // each level halves the spatial dims
    std::int64_t latent_multiplier = 32;  // latent channels = multiplier * v
    double logvar_min = -30.0;
    double logvar_max = 20.0;

    std::int64_t latent_channels() const { return latent_multiplier * in_channels; }
    std::int64_t spatial_factor() const { return std::int64_t(1) << levels; }

    void validate() const {
        if (in_channels < 1 || base_width < 1 || levels < 1 || latent_multiplier < 1)
            fail<ConfigError>("vae: all size fields must be >= 1");
    }
};

using nn::norm_groups;

// GroupNorm-SiLU-conv residual block.
template <typename T>
struct ResBlock {
    nn::GroupNorm<T> n1, n2;
    nn::Conv2d<T> c1, c2;
    std::optional<nn::Conv2d<T>> skip;

    ResBlock(nn::Module<T>& m, const std::string& name, Rng& rng, std::int64_t in,
             std::int64_t out)
        : n1(m, name + ".n1", norm_groups(in), in),
          n2(m, name + ".n2", norm_groups(out), out),
          c1(m, name + ".c1", rng, in, out, 3, 1, 1),
          c2(m, name + ".c2", rng, out, out, 3, 1, 1) {
        if (in != out) skip.emplace(m, name + ".skip", rng, in, out, 1, 1, 0);
    }

    Var<T> operator()(const Var<T>& x) const {
        auto h = c1(ag::silu(n1(x)));
        h = c2(ag::silu(n2(h)));
        return ag::add(skip ? (*skip)(x) : x, h);
    }
};

// Variational autoencoder over residual fields: `levels` stages of
// ResBlock + stride-2 conv down to a (latent_multiplier*v, H/8, W/8) latent
// with diagonal-Gaussian posterior; mirrored decoder.
template <typename T>
class Vae : public nn::Module<T> {
  public:
    Vae(VaeConfig cfg, std::uint64_t seed) : cfg_(cfg) {
        cfg.validate();
        Rng rng = Rng::keyed(seed, fnv1a64("vae"));
        const std::int64_t zc = cfg.latent_channels();
        std::int64_t c = cfg.base_width;
        enc_in_.emplace(*this, "enc_in", rng, cfg.in_channels, c, 3, 1, 1);
        for (std::int64_t l = 0; l < cfg.levels; ++l) {
            const std::int64_t w = cfg.base_width << std::min<std::int64_t>(l, 2);
            enc_res_.emplace_back(*this, "enc" + std::to_string(l) + ".res", rng, c, w);
            enc_down_.emplace_back(*this, "enc" + std::to_string(l) + ".down", rng, w, w, 3, 2,
                                   1);
            c = w;
        }
        enc_mid_.emplace(*this, "enc_mid", rng, c, c);
        enc_out_.emplace(*this, "enc_out", rng, c, 2 * zc, 3, 1, 1);

        dec_in_.emplace(*this, "dec_in", rng, zc, c, 3, 1, 1);
        dec_mid_.emplace(*this, "dec_mid", rng, c, c);
        for (std::int64_t l = cfg.levels - 1; l >= 0; --l) {
            const std::int64_t w = cfg.base_width << std::min<std::int64_t>(l, 2);
            dec_up_.emplace_back(*this, "dec" + std::to_string(l) + ".up", rng, c, w, 3, 1, 1);
            dec_res_.emplace_back(*this, "dec" + std::to_string(l) + ".res", rng, w, w);
            c = w;
        }
        dec_out_.emplace(*this, "dec_out", rng, c, cfg.in_channels, 3, 1, 1);
    }

    const VaeConfig& config() const { return cfg_; }

    // -> (mu, logvar), each (N, latent_channels, H/f, W/f)
    std::pair<Var<T>, Var<T>> encode(const Var<T>& x) {
        const auto& s = x->value.shape();
        const std::int64_t f = cfg_.spatial_factor();
        if (s.size() != 4 || s[1] != cfg_.in_channels)
            fail<ShapeError>("vae encode: expected (N," + std::to_string(cfg_.in_channels) +
                             ",H,W), got " + x->value.shape_str());
        if (s[2] % f != 0 || s[3] % f != 0)
            fail<ShapeError>("vae encode: spatial dims must divide by " + std::to_string(f));
        auto h = (*enc_in_)(x);
        for (std::size_t l = 0; l < enc_res_.size(); ++l)
            h = enc_down_[l](enc_res_[l](h));
        h = (*enc_mid_)(h);
        h = (*enc_out_)(h);
        const std::int64_t zc = cfg_.latent_channels();
        auto mu = ag::slice_channels(h, 0, zc);
        auto logvar = ag::clamp(ag::slice_channels(h, zc, 2 * zc), T(cfg_.logvar_min),
                                T(cfg_.logvar_max));
        return {mu, logvar};
    }

    Var<T> decode(const Var<T>& z) {
        const auto& s = z->value.shape();
        if (s.size() != 4 || s[1] != cfg_.latent_channels())
            fail<ShapeError>("vae decode: expected (N," +
                             std::to_string(cfg_.latent_channels()) + ",h,w), got " +
                             z->value.shape_str());
        auto h = (*dec_mid_)((*dec_in_)(z));
        for (std::size_t l = 0; l < dec_up_.size(); ++l)
            h = dec_res_[l](dec_up_[l](ag::upsample_nearest(h, 2)));
        return (*dec_out_)(h);
    }

    // Reparameterized draw z = mu + exp(logvar/2) * eps.
    Var<T> sample(const Var<T>& mu, const Var<T>& logvar, Rng& rng) {
        auto eps = ag::constant(rng.normal_tensor<T>(mu->value.shape()));
        return ag::add(mu, ag::mul(ag::exp(ag::scale(logvar, T(0.5))), eps));
    }

  private:
    VaeConfig cfg_;
    std::optional<nn::Conv2d<T>> enc_in_, enc_out_, dec_in_, dec_out_;
    std::optional<ResBlock<T>> enc_mid_, dec_mid_;
    std::vector<ResBlock<T>> enc_res_, dec_res_;
    std::vector<nn::Conv2d<T>> enc_down_, dec_up_;
};

// KL(N(mu, e^logvar) || N(0, I)) = 0.5 * (mu^2 + e^logvar - 1 - logvar) per
// element, reduced as the mean so the weight is resolution-independent.
template <typename T>
Var<T> kl_divergence(const Var<T>& mu, const Var<T>& logvar) {
    auto term = ag::sub(ag::add(ag::mul(mu, mu), ag::exp(logvar)),
                        ag::add_scalar(logvar, T(1)));
    return ag::scale(ag::mean_all(term), T(0.5));
}

}  // namespace downscale::models
