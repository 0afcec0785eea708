#pragma once

#include <optional>

#include "downscale/nn/layers.hpp"

namespace downscale::models {

using ag::Var;

struct UnetConfig {
    std::int64_t in_channels = 32;
    std::int64_t out_channels = 1;
    std::int64_t base_width = 64;
    std::int64_t levels = 4;

    void validate() const {
        if (levels < 1 || base_width < 1 || in_channels < 1)
            fail<ConfigError>("unet: levels, base_width, in_channels must be >= 1");
        if (out_channels < 1 || out_channels > 2)
            fail<ConfigError>("unet: out_channels must be 1 or 2");
    }
};

// conv3x3 - ReLU, twice. No normalization: for a regression net trained on
// pre-normalized inputs, feature normalization distorts the absolute levels
// the output has to reproduce, and skipping it keeps training and inference
// behaviour identical.
template <typename T>
struct DoubleConv {
    nn::Conv2d<T> c1, c2;

    DoubleConv(nn::Module<T>& m, const std::string& name, Rng& rng, std::int64_t in,
               std::int64_t out)
        : c1(m, name + ".c1", rng, in, out, 3, 1, 1),
          c2(m, name + ".c2", rng, out, out, 3, 1, 1) {}

    Var<T> operator()(const Var<T>& x) const {
        return ag::relu(c2(ag::relu(c1(x))));
    }
};

// Encoder-decoder with skip connections: per level two 3x3 conv+ReLU
// stages, 2x max pooling down, 2x2 transposed-conv up. The 1x1 output head
// sees the last decoder features concatenated with the raw input, so the
// absolute level of each frame reaches the output directly.
template <typename T>
class Unet : public nn::Module<T> {
  public:
    Unet(UnetConfig cfg, std::uint64_t seed) : cfg_(cfg) {
        cfg.validate();
        Rng rng = Rng::keyed(seed, fnv1a64("unet"));
        std::int64_t c = cfg.in_channels;
        for (std::int64_t l = 0; l < cfg.levels; ++l) {
            const std::int64_t w = cfg.base_width << l;
            enc_.emplace_back(*this, "enc" + std::to_string(l), rng, c, w);
            c = w;
        }
        const std::int64_t wb = cfg.base_width << cfg.levels;
        bottleneck_.emplace(*this, "bottleneck", rng, c, wb);
        for (std::int64_t l = cfg.levels - 1; l >= 0; --l) {
            const std::int64_t w = cfg.base_width << l;
            ups_.emplace_back(*this, "up" + std::to_string(l), rng, w * 2, w, 2);
            dec_.emplace_back(*this, "dec" + std::to_string(l), rng, w * 2, w);
        }
        out_.emplace(*this, "out", rng, cfg.base_width + cfg.in_channels, cfg.out_channels, 1, 1,
                     0);
        // Zero-initialized head: the net starts by predicting the dataset
        // mean and the first gradient steps fit the head as a plain linear
        // regression on [decoder features, raw input].
        out_->w->value.fill(T(0));
        out_->b->value.fill(T(0));
    }

    const UnetConfig& config() const { return cfg_; }

    Var<T> forward(const Var<T>& x) {
        const auto& s = x->value.shape();
        if (s.size() != 4 || s[1] != cfg_.in_channels)
            fail<ShapeError>("unet: expected (N," + std::to_string(cfg_.in_channels) +
                             ",H,W), got " + x->value.shape_str());
        const std::int64_t div = std::int64_t(1) << cfg_.levels;
        if (s[2] % div != 0 || s[3] % div != 0)
            fail<ShapeError>("unet: spatial dims " + std::to_string(s[2]) + "x" +
                             std::to_string(s[3]) + " must be divisible by " +
                             std::to_string(div) + "; pad to " +
                             std::to_string((s[2] + div - 1) / div * div) + "x" +
                             std::to_string((s[3] + div - 1) / div * div));
        std::vector<Var<T>> skips;
        Var<T> h = x;
        for (auto& e : enc_) {
            h = e(h);
            skips.push_back(h);
            h = ag::max_pool2d(h, 2);
        }
        h = (*bottleneck_)(h);
        for (std::size_t i = 0; i < dec_.size(); ++i) {
            h = ups_[i](h);
            h = ag::concat_channels(skips[skips.size() - 1 - i], h);
            h = dec_[i](h);
        }
        return (*out_)(ag::concat_channels(h, x));
    }

  private:
    UnetConfig cfg_;
    std::vector<DoubleConv<T>> enc_;
    std::optional<DoubleConv<T>> bottleneck_;
    std::vector<nn::ConvTranspose2d<T>> ups_;
    std::vector<DoubleConv<T>> dec_;
    std::optional<nn::Conv2d<T>> out_;
};

// Closed-form trainable-parameter count for the layout above.
inline std::int64_t unet_parameter_count(const UnetConfig& cfg) {
    cfg.validate();
    auto double_conv = [](std::int64_t in, std::int64_t out) {
        return 9 * out * (in + out) + 2 * out;
    };
    std::int64_t total = 0, c = cfg.in_channels;
    for (std::int64_t l = 0; l < cfg.levels; ++l) {
        const std::int64_t w = cfg.base_width << l;
        total += double_conv(c, w);
        c = w;
    }
    total += double_conv(c, cfg.base_width << cfg.levels);
    for (std::int64_t l = cfg.levels - 1; l >= 0; --l) {
        const std::int64_t w = cfg.base_width << l;
        total += (w * 2) * w * 4 + w;  // transposed conv
        total += double_conv(w * 2, w);
    }
    total += (cfg.base_width + cfg.in_channels) * cfg.out_channels + cfg.out_channels;
    return total;
}

}  // namespace downscale::models
