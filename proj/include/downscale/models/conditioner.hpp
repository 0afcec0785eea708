#pragma once

#include <optional>

#include "downscale/models/afno.hpp"
#include "downscale/models/vae.hpp"

namespace downscale::models {

struct ConditionerConfig {
    std::int64_t predictor_channels = 14;
    std::int64_t static_channels = 18;
    std::int64_t static_factor = 8;   // statics grid = factor * latent grid
    std::int64_t static_embed = 8;    // encoded static channels at latent dims
    std::int64_t static_width = 16;   // static encoder base width
    std::int64_t embed_dim = 32;      // width after 1x1 projection and in AFNO
    std::int64_t afno_blocks = 4;
    std::int64_t block_size = 8;
    std::int64_t levels = 3;          // must equal the denoiser's level count
    double sparsity = 0.01;

    void validate() const {
        if (predictor_channels < 1 || static_channels < 1 || embed_dim < 1 || levels < 1)
            fail<ConfigError>("conditioner: size fields must be >= 1");
        if (embed_dim % block_size != 0)
            fail<ConfigError>("conditioner: embed_dim must divide by block_size");
        if (static_factor < 1 || (static_factor & (static_factor - 1)) != 0)
            fail<ConfigError>("conditioner: static_factor must be a power of two");
    }
};

// Turns LR predictors (already on the latent grid) and HR statics into one
// conditioning tensor per denoiser level. Statics pass through a variational
// encoder whose posterior mean is used (never sampled, so conditioning is
// deterministic); the merged stack is projected 1x1, mixed by AFNO blocks,
// then pooled/refined per level.
template <typename T>
class Conditioner : public nn::Module<T> {
  public:
    Conditioner(ConditionerConfig cfg, std::uint64_t seed) : cfg_(cfg) {
        cfg.validate();
        Rng rng = Rng::keyed(seed, fnv1a64("conditioner"));
        const std::int64_t down_steps = log2_int(cfg.static_factor);
        std::int64_t c = cfg.static_width;
        st_in_.emplace(*this, "static_enc.in", rng, cfg.static_channels, c, 3, 1, 1);
        for (std::int64_t l = 0; l < down_steps; ++l) {
            const std::int64_t w = cfg.static_width << std::min<std::int64_t>(l, 2);
            st_res_.emplace_back(*this, "static_enc." + std::to_string(l) + ".res", rng, c, w);
            st_down_.emplace_back(*this, "static_enc." + std::to_string(l) + ".down", rng, w, w,
                                  3, 2, 1);
            c = w;
        }
        st_out_.emplace(*this, "static_enc.out", rng, c, 2 * cfg.static_embed, 3, 1, 1);

        proj_.emplace(*this, "proj", rng, cfg.predictor_channels + cfg.static_embed,
                      cfg.embed_dim, 1, 1, 0);
        for (std::int64_t b = 0; b < cfg.afno_blocks; ++b)
            afno_.emplace_back(*this, "afno" + std::to_string(b), rng, cfg.embed_dim,
                               cfg.block_size, 4, T(cfg.sparsity));
        for (std::int64_t l = 0; l < cfg.levels; ++l)
            level_res_.emplace_back(*this, "level" + std::to_string(l), rng, cfg.embed_dim,
                                    cfg.embed_dim);
    }

    const ConditionerConfig& cfg() const { return cfg_; }

    std::vector<Var<T>> forward(const Var<T>& predictors_lr, const Var<T>& statics_hr) {
        const auto& ps = predictors_lr->value.shape();
        const auto& ss = statics_hr->value.shape();
        if (ps.size() != 4 || ps[1] != cfg_.predictor_channels)
            fail<ShapeError>("conditioner: predictors must be (N," +
                             std::to_string(cfg_.predictor_channels) + ",h,w)");
        if (ss.size() != 4 || ss[1] != cfg_.static_channels)
            fail<ShapeError>("conditioner: statics must be (N," +
                             std::to_string(cfg_.static_channels) + ",H,W)");
        if (ss[2] != ps[2] * cfg_.static_factor || ss[3] != ps[3] * cfg_.static_factor ||
            ss[0] != ps[0])
            fail<ShapeError>("conditioner: statics grid must be " +
                             std::to_string(cfg_.static_factor) +
                             "x the predictor grid with equal batch");

        auto h = (*st_in_)(statics_hr);
        for (std::size_t l = 0; l < st_res_.size(); ++l) h = st_down_[l](st_res_[l](h));
        h = (*st_out_)(h);
        auto static_mu = ag::slice_channels(h, 0, cfg_.static_embed);

        auto merged = (*proj_)(ag::concat_channels(predictors_lr, static_mu));
        for (auto& blk : afno_) merged = blk(merged);

        std::vector<Var<T>> out;
        out.reserve(level_res_.size());
        Var<T> cur = merged;
        for (std::size_t l = 0; l < level_res_.size(); ++l) {
            if (l > 0) cur = ag::avg_pool2d(cur, 2);
            cur = level_res_[l](cur);
            out.push_back(cur);
        }
        return out;
    }

  private:
    static std::int64_t log2_int(std::int64_t v) {
        std::int64_t k = 0;
        while ((std::int64_t(1) << k) < v) ++k;
        return k;
    }

    ConditionerConfig cfg_;
    std::optional<nn::Conv2d<T>> st_in_, st_out_, proj_;
    std::vector<ResBlock<T>> st_res_;
    std::vector<nn::Conv2d<T>> st_down_;
    std::vector<AfnoBlock<T>> afno_;
    std::vector<ResBlock<T>> level_res_;
};

}  // namespace downscale::models
