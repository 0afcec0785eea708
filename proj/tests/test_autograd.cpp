#include <gtest/gtest.h>

#include "downscale/autograd/ops_conv.hpp"
#include "downscale/autograd/ops_norm.hpp"
#include "downscale/autograd/ops_shape.hpp"
#include "downscale/autograd/ops_spectral.hpp"
#include "gradcheck.hpp"

using namespace downscale;
using ag::Var;
using testutil::expect_grad_matches;
using testutil::safe_random;

namespace {

Var<double> rand_leaf(Rng& rng, std::vector<std::int64_t> shape, double margin = 0.15) {
    return ag::leaf<double>(safe_random(rng, std::move(shape), -2.0, 2.0, margin), true);
}

// Weighted sum makes the scalar objective sensitive to every output element
// with distinct coefficients, so transposed/mirrored bugs cannot cancel.
Var<double> weighted(const Var<double>& y) {
    Tensor<double> w(y->value.shape());
    for (std::int64_t i = 0; i < w.numel(); ++i)
        w[i] = 0.3 + 0.01 * static_cast<double>(i % 97);
    return ag::sum_all(ag::mul(y, ag::constant(std::move(w))));
}

}  // namespace

TEST(Graph, DiamondAccumulation) {
    auto x = ag::leaf<double>(Tensor<double>({1}, 3.0), true);
    auto y = ag::add(ag::mul(x, x), x);
    ag::backward(y);
    EXPECT_DOUBLE_EQ(x->grad[0], 2.0 * 3.0 + 1.0);
}

TEST(Graph, NoGradGuardStopsTape) {
    auto x = ag::leaf<double>(Tensor<double>({2}, 1.0), true);
    ag::NoGradGuard ng;
    auto y = ag::mul(x, x);
    EXPECT_FALSE(y->requires_grad);
    EXPECT_TRUE(y->parents.empty());
}

TEST(Graph, ConstantLeafGetsNoGradient) {
    auto x = ag::leaf<double>(Tensor<double>({2}, 2.0), true);
    auto c = ag::constant(Tensor<double>({2}, 5.0));
    auto y = ag::sum_all(ag::mul(x, c));
    ag::backward(y);
    EXPECT_EQ(c->grad.numel(), 0);
    EXPECT_DOUBLE_EQ(x->grad[0], 5.0);
}

TEST(Graph, BackwardAccumulatesAcrossCalls) {
    auto x = ag::leaf<double>(Tensor<double>({1}, 2.0), true);
    auto y = ag::mul(x, x);
    ag::backward(y);
    EXPECT_DOUBLE_EQ(x->grad[0], 4.0);
    auto y2 = ag::mul(x, x);
    ag::backward(y2);
    EXPECT_DOUBLE_EQ(x->grad[0], 8.0);
}

TEST(Graph, NonScalarRootNeedsSeed) {
    auto x = ag::leaf<double>(Tensor<double>({3}, 1.0), true);
    auto y = ag::scale(x, 2.0);
    EXPECT_THROW(ag::backward(y), ShapeError);
    Tensor<double> seed({3}, 1.0);
    ag::backward(y, &seed);
    EXPECT_DOUBLE_EQ(x->grad[0], 2.0);
}

TEST(Grad, ElementwiseComposite) {
    Rng rng(11);
    auto a = rand_leaf(rng, {2, 3});
    auto b = rand_leaf(rng, {2, 3});
    expect_grad_matches({a, b}, [&] {
        auto y = ag::add(ag::mul(a, b), ag::scale(ag::sub(a, b), 0.7));
        y = ag::add_scalar(ag::neg(y), 0.25);
        return weighted(y);
    });
}

TEST(Grad, Activations) {
    Rng rng(12);
    auto x = rand_leaf(rng, {3, 4}, 0.2);
    expect_grad_matches({x}, [&] { return weighted(ag::relu(x)); });
    expect_grad_matches({x}, [&] { return weighted(ag::leaky_relu(x, 0.2)); });
    expect_grad_matches({x}, [&] { return weighted(ag::sigmoid(x)); });
    expect_grad_matches({x}, [&] { return weighted(ag::silu(x)); });
    expect_grad_matches({x}, [&] { return weighted(ag::gelu(x)); });
    expect_grad_matches({x}, [&] { return weighted(ag::exp(ag::scale(x, 0.5))); });
    expect_grad_matches({x}, [&] { return weighted(ag::abs(x)); });
}

TEST(Grad, SoftshrinkAwayFromKinks) {
    Rng rng(13);
    Tensor<double> t = safe_random(rng, {4, 4});
    for (std::int64_t i = 0; i < t.numel(); ++i)
        if (std::abs(std::abs(t[i]) - 0.5) < 0.05) t[i] += 0.1;
    auto x = ag::leaf<double>(std::move(t), true);
    expect_grad_matches({x}, [&] { return weighted(ag::softshrink(x, 0.5)); });
}

TEST(Grad, ClampAwayFromBounds) {
    Rng rng(14);
    Tensor<double> t = safe_random(rng, {4, 4});
    for (std::int64_t i = 0; i < t.numel(); ++i)
        if (std::abs(std::abs(t[i]) - 1.0) < 0.05) t[i] *= 0.9;
    auto x = ag::leaf<double>(std::move(t), true);
    expect_grad_matches({x}, [&] { return weighted(ag::clamp(x, -1.0, 1.0)); });
}

TEST(Grad, Reductions) {
    Rng rng(15);
    auto x = rand_leaf(rng, {3, 5});
    expect_grad_matches({x}, [&] { return ag::sum_all(ag::mul(x, x)); });
    expect_grad_matches({x}, [&] { return ag::mean_all(ag::mul(x, x)); });
    auto t = rand_leaf(rng, {3, 5});
    expect_grad_matches({x, t}, [&] { return ag::mse_loss(x, t); });
    expect_grad_matches({x, t}, [&] { return ag::mae_loss(x, t); });
}

TEST(Grad, ScaleShiftSpatial) {
    Rng rng(16);
    auto x = rand_leaf(rng, {2, 3, 4, 4});
    auto s = rand_leaf(rng, {2, 3});
    auto b = rand_leaf(rng, {2, 3});
    expect_grad_matches({x, s, b},
                        [&] { return weighted(ag::scale_shift_spatial(x, s, b)); });
}

TEST(Grad, LinearAndMatmul) {
    Rng rng(17);
    auto x = rand_leaf(rng, {4, 3});
    auto w = rand_leaf(rng, {5, 3});
    auto b = rand_leaf(rng, {5});
    expect_grad_matches({x, w, b}, [&] { return weighted(ag::linear(x, w, b)); });
    expect_grad_matches({x, w}, [&] { return weighted(ag::linear(x, w)); });
    auto m = rand_leaf(rng, {3, 6});
    expect_grad_matches({x, m}, [&] { return weighted(ag::matmul(x, m)); });
}

TEST(Linear, ForwardValue) {
    auto x = ag::leaf<double>(Tensor<double>({1, 2}, {1.0, 2.0}), false);
    auto w = ag::leaf<double>(Tensor<double>({2, 2}, {3.0, 4.0, 5.0, 6.0}), false);
    auto b = ag::leaf<double>(Tensor<double>({2}, {0.5, -0.5}), false);
    auto y = ag::linear(x, w, b);
    EXPECT_DOUBLE_EQ(y->value[0], 1 * 3 + 2 * 4 + 0.5);
    EXPECT_DOUBLE_EQ(y->value[1], 1 * 5 + 2 * 6 - 0.5);
}

TEST(Grad, Conv2d) {
    Rng rng(18);
    auto x = rand_leaf(rng, {2, 3, 5, 5});
    auto w = rand_leaf(rng, {4, 3, 3, 3});
    auto b = rand_leaf(rng, {4});
    expect_grad_matches({x, w, b}, [&] { return weighted(ag::conv2d(x, w, b, 1, 1)); });
    expect_grad_matches({x, w, b}, [&] { return weighted(ag::conv2d(x, w, b, 2, 1)); });
    expect_grad_matches({x, w}, [&] { return weighted(ag::conv2d(x, w, 1, 0)); });
}

TEST(Conv2d, IdentityKernel) {
    Rng rng(19);
    auto x = ag::leaf<double>(safe_random(rng, {1, 1, 4, 4}), false);
    Tensor<double> k({1, 1, 3, 3}, 0.0);
    k[4] = 1.0;
    auto y = ag::conv2d(x, ag::constant(std::move(k)), 1, 1);
    EXPECT_LT(max_abs_diff(y->value, x->value.reshaped({1, 1, 4, 4})), 1e-12);
}

TEST(Grad, ConvTranspose2d) {
    Rng rng(20);
    auto x = rand_leaf(rng, {2, 3, 3, 3});
    auto w = rand_leaf(rng, {3, 2, 2, 2});
    auto b = rand_leaf(rng, {2});
    expect_grad_matches({x, w, b}, [&] { return weighted(ag::conv_transpose2d(x, w, b, 2)); });
}

TEST(ConvTranspose2d, MatchesScatterDefinition) {
    Rng rng(21);
    Tensor<double> xt = safe_random(rng, {1, 2, 2, 2});
    Tensor<double> wt = safe_random(rng, {2, 1, 2, 2});
    auto y = ag::conv_transpose2d(ag::constant(xt.clone()), ag::constant(wt.clone()), 2);
    for (std::int64_t i = 0; i < 2; ++i)
        for (std::int64_t j = 0; j < 2; ++j)
            for (std::int64_t di = 0; di < 2; ++di)
                for (std::int64_t dj = 0; dj < 2; ++dj) {
                    double want = 0;
                    for (std::int64_t ci = 0; ci < 2; ++ci)
                        want += xt.at(0, ci, i, j) * wt.at(ci, 0, di, dj);
                    EXPECT_NEAR(y->value.at(0, 0, 2 * i + di, 2 * j + dj), want, 1e-12);
                }
}

TEST(Grad, BatchNormTrainAndEval) {
    Rng rng(22);
    auto x = rand_leaf(rng, {3, 2, 4, 4});
    auto g = rand_leaf(rng, {2});
    auto b = rand_leaf(rng, {2});
    Tensor<double> rm({2}, 0.0), rv({2}, 1.0);
    expect_grad_matches({x, g, b}, [&] {
        Tensor<double> rm2 = rm.clone(), rv2 = rv.clone();
        return weighted(ag::batch_norm2d(x, g, b, rm2, rv2, true));
    });
    Tensor<double> rm3({2}, 0.3), rv3({2}, 1.7);
    expect_grad_matches({x, g, b}, [&] {
        return weighted(ag::batch_norm2d(x, g, b, rm3, rv3, false));
    });
}

TEST(BatchNorm, NormalizesBatch) {
    Rng rng(23);
    auto x = ag::leaf<double>(rng.normal_tensor<double>({4, 3, 8, 8}, 5.0, 2.0), false);
    auto g = ag::constant(Tensor<double>({3}, 1.0));
    auto b = ag::constant(Tensor<double>({3}, 0.0));
    Tensor<double> rm({3}, 0.0), rv({3}, 1.0);
    auto y = ag::batch_norm2d(x, g, b, rm, rv, true);
    for (std::int64_t c = 0; c < 3; ++c) {
        double s = 0, s2 = 0;
        for (std::int64_t n = 0; n < 4; ++n)
            for (std::int64_t i = 0; i < 64; ++i) {
                double v = y->value[(n * 3 + c) * 64 + i];
                s += v;
                s2 += v * v;
            }
        s /= 256;
        s2 /= 256;
        EXPECT_NEAR(s, 0.0, 1e-10);
        EXPECT_NEAR(s2 - s * s, 1.0, 1e-4);
        EXPECT_NEAR(rm[c], 0.1 * 5.0, 0.2);
    }
}

TEST(Grad, GroupNorm) {
    Rng rng(24);
    auto x = rand_leaf(rng, {2, 4, 3, 3});
    auto g = rand_leaf(rng, {4});
    auto b = rand_leaf(rng, {4});
    expect_grad_matches({x, g, b}, [&] { return weighted(ag::group_norm(x, g, b, 2)); });
}

TEST(Grad, LayerNormChannels) {
    Rng rng(25);
    auto x = rand_leaf(rng, {2, 5, 3, 3});
    auto g = rand_leaf(rng, {5});
    auto b = rand_leaf(rng, {5});
    expect_grad_matches({x, g, b}, [&] { return weighted(ag::layer_norm_channels(x, g, b)); });
}

TEST(Grad, ShapeOps) {
    Rng rng(26);
    auto a = rand_leaf(rng, {2, 2, 4, 4});
    auto b = rand_leaf(rng, {2, 3, 4, 4});
    expect_grad_matches({a, b}, [&] { return weighted(ag::concat_channels(a, b)); });
    expect_grad_matches({b}, [&] { return weighted(ag::slice_channels(b, 1, 3)); });
    expect_grad_matches({a}, [&] { return weighted(ag::max_pool2d(a, 2)); });
    expect_grad_matches({a}, [&] { return weighted(ag::avg_pool2d(a, 2)); });
    expect_grad_matches({a}, [&] { return weighted(ag::global_avg_pool(a)); });
    expect_grad_matches({a}, [&] { return weighted(ag::upsample_nearest(a, 2)); });
    expect_grad_matches({a}, [&] { return weighted(ag::pad2d(a, 2)); });
    expect_grad_matches({a}, [&] { return weighted(ag::crop2d(a, 1, 0, 2, 3)); });
    expect_grad_matches({a}, [&] { return weighted(ag::tokens_from_nchw(a)); });
}

TEST(ShapeOps, TokensRoundTrip) {
    Rng rng(27);
    auto x = ag::leaf<double>(safe_random(rng, {2, 3, 4, 5}), true);
    auto y = ag::tokens_to_nchw(ag::tokens_from_nchw(x), 2, 4, 5);
    EXPECT_LT(max_abs_diff(x->value, y->value), 1e-15);
    expect_grad_matches({x}, [&] {
        return weighted(ag::tokens_to_nchw(ag::tokens_from_nchw(x), 2, 4, 5));
    });
}

TEST(ShapeOps, MaxPoolPicksMaxima) {
    Tensor<double> t({1, 1, 2, 2}, {1.0, 4.0, 3.0, 2.0});
    auto y = ag::max_pool2d(ag::leaf(std::move(t), false), 2);
    EXPECT_DOUBLE_EQ(y->value[0], 4.0);
}

TEST(ShapeOps, ConcatLayout) {
    Tensor<double> a({1, 1, 1, 2}, {1.0, 2.0});
    Tensor<double> b({1, 2, 1, 2}, {3.0, 4.0, 5.0, 6.0});
    auto y = ag::concat_channels(ag::leaf(std::move(a), false), ag::leaf(std::move(b), false));
    EXPECT_EQ(y->value.shape(), (std::vector<std::int64_t>{1, 3, 1, 2}));
    EXPECT_DOUBLE_EQ(y->value[0], 1.0);
    EXPECT_DOUBLE_EQ(y->value[2], 3.0);
    EXPECT_DOUBLE_EQ(y->value[5], 6.0);
}

TEST(Spectral, FftMatchesDirectDft) {
    Rng rng(28);
    const std::int64_t H = 4, W = 3;
    Tensor<double> x = safe_random(rng, {1, 1, H, W});
    auto y = ag::fft2c(ag::leaf(x.clone(), false));
    for (std::int64_t kh = 0; kh < H; ++kh)
        for (std::int64_t kw = 0; kw < W; ++kw) {
            double re = 0, im = 0;
            for (std::int64_t i = 0; i < H; ++i)
                for (std::int64_t j = 0; j < W; ++j) {
                    const double ph = -2.0 * M_PI *
                                      (static_cast<double>(kh * i) / H +
                                       static_cast<double>(kw * j) / W);
                    re += x.at(0, 0, i, j) * std::cos(ph);
                    im += x.at(0, 0, i, j) * std::sin(ph);
                }
            EXPECT_NEAR(y->value.at(0, 0, kh, kw, 0), re, 1e-9);
            EXPECT_NEAR(y->value.at(0, 0, kh, kw, 1), im, 1e-9);
        }
}

TEST(Spectral, InverseRoundTrip) {
    Rng rng(29);
    auto x = ag::leaf<double>(safe_random(rng, {2, 3, 8, 6}), false);
    auto y = ag::ifft2c_real(ag::fft2c(x));
    EXPECT_LT(max_abs_diff(x->value, y->value), 1e-10);
}

TEST(Grad, SpectralFfts) {
    Rng rng(30);
    auto x = rand_leaf(rng, {1, 2, 4, 4});
    expect_grad_matches({x}, [&] { return weighted(ag::fft2c(x)); });
    expect_grad_matches({x}, [&] { return ag::mean_all(ag::mul(ag::fft2c(x), ag::fft2c(x))); });
    auto z = rand_leaf(rng, {1, 2, 3, 3});
    auto zc = ag::leaf<double>(safe_random(rng, {1, 2, 3, 3, 2}), true);
    expect_grad_matches({zc}, [&] { return weighted(ag::ifft2c_real(zc)); });
    expect_grad_matches({z}, [&] { return weighted(ag::ifft2c_real(ag::fft2c(z))); });
}

TEST(Grad, SpectralBlockMm) {
    Rng rng(31);
    auto z = ag::leaf<double>(safe_random(rng, {2, 4, 3, 3, 2}), true);
    auto w = ag::leaf<double>(safe_random(rng, {2, 2, 2, 2}), true);
    auto b = ag::leaf<double>(safe_random(rng, {2, 2, 2}), true);
    expect_grad_matches({z, w, b}, [&] { return weighted(ag::spectral_block_mm(z, w, b)); });
    expect_grad_matches({z, w}, [&] { return weighted(ag::spectral_block_mm(z, w)); });
}

TEST(Spectral, BlockIdentityPassesThrough) {
    Rng rng(32);
    Tensor<double> w({2, 3, 3, 2}, 0.0);
    for (std::int64_t blk = 0; blk < 2; ++blk)
        for (std::int64_t i = 0; i < 3; ++i) w[((blk * 3 + i) * 3 + i) * 2] = 1.0;
    auto z = ag::leaf<double>(safe_random(rng, {1, 6, 2, 2, 2}), false);
    auto y = ag::spectral_block_mm(z, ag::constant(std::move(w)));
    EXPECT_LT(max_abs_diff(z->value, y->value), 1e-15);
}
