#pragma once

#include <optional>

#include "downscale/models/vae.hpp"

namespace downscale::models {

struct DenoiserConfig {
    std::int64_t latent_channels = 32;
    std::int64_t base_width = 64;
    std::int64_t levels = 3;          // levels-1 poolings inside the latent UNET
    std::int64_t cond_channels = 32;  // channels of each conditioning tensor
    std::int64_t time_dim = 64;

    void validate() const {
        if (latent_channels < 1 || base_width < 1 || levels < 1 || cond_channels < 0 ||
            time_dim < 2 || time_dim % 2 != 0)
            fail<ConfigError>("denoiser: bad size fields (time_dim must be even >= 2)");
    }
};

// Residual block with FiLM-style time modulation.
template <typename T>
struct TimeResBlock {
    nn::GroupNorm<T> n1, n2;
    nn::Conv2d<T> c1, c2;
    nn::Linear<T> tscale, tshift;
    std::optional<nn::Conv2d<T>> skip;

    TimeResBlock(nn::Module<T>& m, const std::string& name, Rng& rng, std::int64_t in,
                 std::int64_t out, std::int64_t time_dim)
        : n1(m, name + ".n1", norm_groups(in), in),
          n2(m, name + ".n2", norm_groups(out), out),
          c1(m, name + ".c1", rng, in, out, 3, 1, 1),
          c2(m, name + ".c2", rng, out, out, 3, 1, 1),
          tscale(m, name + ".tscale", rng, time_dim, out),
          tshift(m, name + ".tshift", rng, time_dim, out) {
        if (in != out) skip.emplace(m, name + ".skip", rng, in, out, 1, 1, 0);
    }

    Var<T> operator()(const Var<T>& x, const Var<T>& temb) const {
        auto h = c1(ag::silu(n1(x)));
        h = ag::scale_shift_spatial(h, tscale(temb), tshift(temb));
        h = c2(ag::silu(n2(h)));
        return ag::add(skip ? (*skip)(x) : x, h);
    }
};

// Sinusoidal embedding of integer diffusion times, one row per batch element.
template <typename T>
Tensor<T> sinusoidal_time_embedding(const std::vector<std::int64_t>& t, std::int64_t dim) {
    const std::int64_t n = static_cast<std::int64_t>(t.size()), half = dim / 2;
    Tensor<T> e({n, dim});
    for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t k = 0; k < half; ++k) {
            const double freq =
                std::exp(-std::log(10000.0) * static_cast<double>(k) /
                         static_cast<double>(std::max<std::int64_t>(1, half - 1)));
            const double a = static_cast<double>(t[i]) * freq;
            e[i * dim + k] = static_cast<T>(std::sin(a));
            e[i * dim + half + k] = static_cast<T>(std::cos(a));
        }
    return e;
}

// Latent-space UNET predicting the v-parameterization target. Conditioning
// tensors are concatenated at every level on both the encoder and decoder
// paths; diffusion time enters through FiLM modulation in every block.
template <typename T>
class Denoiser : public nn::Module<T> {
  public:
    Denoiser(DenoiserConfig cfg, std::uint64_t seed) : cfg_(cfg) {
        cfg.validate();
        Rng rng = Rng::keyed(seed, fnv1a64("denoiser"));
        t1_.emplace(*this, "time.fc1", rng, cfg.time_dim, cfg.time_dim);
        t2_.emplace(*this, "time.fc2", rng, cfg.time_dim, cfg.time_dim);
        std::int64_t c = cfg.latent_channels;
        for (std::int64_t l = 0; l < cfg.levels; ++l) {
            const std::int64_t w = width_at(l);
            enc_.emplace_back(*this, "enc" + std::to_string(l), rng, c + cfg.cond_channels, w,
                              cfg.time_dim);
            c = w;
        }
        mid_.emplace(*this, "mid", rng, c, c, cfg.time_dim);
        for (std::int64_t l = cfg.levels - 2; l >= 0; --l) {
            const std::int64_t w = width_at(l);
            up_.emplace_back(*this, "up" + std::to_string(l), rng, c, w, 3, 1, 1);
            dec_.emplace_back(*this, "dec" + std::to_string(l), rng,
                              2 * w + cfg.cond_channels, w, cfg.time_dim);
            c = w;
        }
        out_norm_.emplace(*this, "out.norm", norm_groups(c), c);
        out_conv_.emplace(*this, "out.conv", rng, c, cfg.latent_channels, 3, 1, 1);
    }

    const DenoiserConfig& cfg() const { return cfg_; }

    Var<T> forward(const Var<T>& z_t, const std::vector<std::int64_t>& t,
                   const std::vector<Var<T>>& cond) {
        const auto& s = z_t->value.shape();
        if (s.size() != 4 || s[1] != cfg_.latent_channels)
            fail<ShapeError>("denoiser: expected (N," + std::to_string(cfg_.latent_channels) +
                             ",h,w), got " + z_t->value.shape_str());
        if (static_cast<std::int64_t>(t.size()) != s[0])
            fail<ShapeError>("denoiser: one time index per batch element");
        if (static_cast<std::int64_t>(cond.size()) != cfg_.levels)
            fail<ShapeError>("denoiser: expected " + std::to_string(cfg_.levels) +
                             " conditioning levels, got " + std::to_string(cond.size()));
        const std::int64_t div = std::int64_t(1) << (cfg_.levels - 1);
        if (s[2] % div != 0 || s[3] % div != 0)
            fail<ShapeError>("denoiser: latent dims must divide by " + std::to_string(div));
        for (std::int64_t l = 0; l < cfg_.levels; ++l) {
            const auto& cs = cond[l]->value.shape();
            if (cs.size() != 4 || cs[0] != s[0] || cs[1] != cfg_.cond_channels ||
                cs[2] != (s[2] >> l) || cs[3] != (s[3] >> l))
                fail<ShapeError>("denoiser: conditioning level " + std::to_string(l) +
                                 " has shape " + cond[l]->value.shape_str());
        }

        auto temb = (*t2_)(ag::silu((*t1_)(
            ag::constant(sinusoidal_time_embedding<T>(t, cfg_.time_dim)))));

        std::vector<Var<T>> skips;
        Var<T> h = z_t;
        for (std::size_t l = 0; l < enc_.size(); ++l) {
            h = enc_[l](ag::concat_channels(h, cond[l]), temb);
            if (l + 1 < enc_.size()) {
                skips.push_back(h);
                h = ag::avg_pool2d(h, 2);
            }
        }
        h = (*mid_)(h, temb);
        for (std::size_t i = 0; i < dec_.size(); ++i) {
            const std::size_t l = dec_.size() - 1 - i;  // level this stage lands on
            h = up_[i](ag::upsample_nearest(h, 2));
            h = ag::concat_channels(ag::concat_channels(skips[l], h), cond[l]);
            h = dec_[i](h, temb);
        }
        return (*out_conv_)(ag::silu((*out_norm_)(h)));
    }

  private:
    std::int64_t width_at(std::int64_t l) const {
        return cfg_.base_width << std::min<std::int64_t>(l, 2);
    }

    DenoiserConfig cfg_;
    std::optional<nn::Linear<T>> t1_, t2_;
    std::vector<TimeResBlock<T>> enc_;
    std::optional<TimeResBlock<T>> mid_;
    std::vector<nn::Conv2d<T>> up_;
    std::vector<TimeResBlock<T>> dec_;
    std::optional<nn::GroupNorm<T>> out_norm_;
    std::optional<nn::Conv2d<T>> out_conv_;
};

}  // namespace downscale::models
