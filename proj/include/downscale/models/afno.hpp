#pragma once

#include "downscale/autograd/ops_spectral.hpp"
#include "downscale/nn/layers.hpp"

namespace downscale::models {

using ag::Var;

// Fourier token mixer: spectral residual path (frequency-wise block-diagonal
// complex 2-layer MLP with soft-shrinkage sparsification) followed by a
// per-token MLP residual path.
template <typename T>
struct AfnoBlock {
    nn::LayerNormChannels<T> ln1, ln2;
    Var<T> w1, b1, w2, b2;
    nn::Linear<T> fc1, fc2;
    std::int64_t channels;
    T sparsity;

    AfnoBlock(nn::Module<T>& m, const std::string& name, Rng& rng, std::int64_t channels_,
              std::int64_t block_size, std::int64_t mlp_ratio = 4, T sparsity_ = T(0.01))
        : ln1(m, name + ".ln1", channels_),
          ln2(m, name + ".ln2", channels_),
          fc1(m, name + ".fc1", rng, channels_, channels_ * mlp_ratio),
          fc2(m, name + ".fc2", rng, channels_ * mlp_ratio, channels_),
          channels(channels_),
          sparsity(sparsity_) {
        if (channels_ % block_size != 0)
            fail<ConfigError>("afno: channels must divide by block_size");
        const std::int64_t nb = channels_ / block_size;
        w1 = m.add_param(name + ".w1",
                         rng.normal_tensor<T>({nb, block_size, block_size, 2}, 0.0, 0.02));
        b1 = m.add_param(name + ".b1", Tensor<T>({nb, block_size, 2}, T(0)));
        w2 = m.add_param(name + ".w2",
                         rng.normal_tensor<T>({nb, block_size, block_size, 2}, 0.0, 0.02));
        b2 = m.add_param(name + ".b2", Tensor<T>({nb, block_size, 2}, T(0)));
    }

    Var<T> operator()(const Var<T>& x) const {
        const auto& s = x->value.shape();
        if (s.size() != 4 || s[1] != channels)
            fail<ShapeError>("afno: expected (N," + std::to_string(channels) + ",H,W), got " +
                             x->value.shape_str());
        auto z = ag::fft2c(ln1(x));
        z = ag::relu(ag::spectral_block_mm(z, w1, b1));
        z = ag::spectral_block_mm(z, w2, b2);
        z = ag::softshrink(z, sparsity);
        auto h = ag::add(x, ag::ifft2c_real(z));
        auto t = ag::tokens_from_nchw(ln2(h));
        t = fc2(ag::gelu(fc1(t)));
        return ag::add(h, ag::tokens_to_nchw(t, s[0], s[2], s[3]));
    }
};

}  // namespace downscale::models
