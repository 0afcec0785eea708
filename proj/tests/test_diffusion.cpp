#include <gtest/gtest.h>

#include "downscale/diffusion/sampler.hpp"
#include "downscale/diffusion/schedule.hpp"
#include "downscale/models/denoiser.hpp"

using namespace downscale;

TEST(Schedule, CosineInvariants) {
    auto sched = diffusion::make_schedule(1000);
    ASSERT_EQ(sched.alpha.size(), 1001u);
    EXPECT_DOUBLE_EQ(sched.alpha[0], 1.0);
    EXPECT_DOUBLE_EQ(sched.sigma[0], 0.0);
    EXPECT_DOUBLE_EQ(sched.alpha[1000], 0.0);
    EXPECT_DOUBLE_EQ(sched.sigma[1000], 1.0);
    for (int t = 0; t <= 1000; ++t) {
        const double a = sched.alpha[t], s = sched.sigma[t];
        EXPECT_NEAR(a * a + s * s, 1.0, 1e-12) << "t=" << t;
        if (t > 0) {
            EXPECT_LE(sched.alpha[t], sched.alpha[t - 1] + 1e-15);
            EXPECT_GE(sched.sigma[t], sched.sigma[t - 1] - 1e-15);
        }
    }
    EXPECT_THROW(sched.check_t(1001), SamplingError);
    EXPECT_THROW(sched.check_t(-1), SamplingError);
    EXPECT_THROW(diffusion::make_schedule(1000, "linear"), ConfigError);
}

TEST(Schedule, VPredictionRoundTrip) {
    auto sched = diffusion::make_schedule(1000);
    Rng rng(40);
    for (int trial = 0; trial < 1000; ++trial) {
        const int t = static_cast<int>(rng.uniform_int(1001));
        Tensor<double> z0 = rng.normal_tensor<double>({1, 2, 3, 3});
        Tensor<double> eps = rng.normal_tensor<double>({1, 2, 3, 3});
        Tensor<double> zt = diffusion::forward_noise(z0, eps, t, sched);
        Tensor<double> v = diffusion::v_target(z0, eps, t, sched);
        auto [z0_hat, eps_hat] = diffusion::recover(zt, v, t, sched);
        EXPECT_LT(max_abs_diff(z0_hat, z0), 1e-6) << "t=" << t;
        EXPECT_LT(max_abs_diff(eps_hat, eps), 1e-6) << "t=" << t;
    }
}

TEST(Schedule, ForwardNoiseEndpoints) {
    auto sched = diffusion::make_schedule(1000);
    Rng rng(41);
    Tensor<float> z0 = rng.normal_tensor<float>({2, 2, 4, 4});
    Tensor<float> eps = rng.normal_tensor<float>({2, 2, 4, 4});
    EXPECT_TRUE(bit_equal(diffusion::forward_noise(z0, eps, 0, sched), z0));
    EXPECT_TRUE(bit_equal(diffusion::forward_noise(z0, eps, 1000, sched), eps));
}

TEST(Sampler, DeterministicPerSeed) {
    models::DenoiserConfig cfg{.latent_channels = 2, .base_width = 4, .levels = 2,
                               .cond_channels = 2, .time_dim = 4};
    models::Denoiser<float> den(cfg, 42);
    auto sched = diffusion::make_schedule(1000);
    Rng rng(43);
    std::vector<ag::Var<float>> cond{
        ag::constant(rng.normal_tensor<float>({1, 2, 4, 4})),
        ag::constant(rng.normal_tensor<float>({1, 2, 2, 2}))};
    auto a = diffusion::sample_latent(den, cond, {1, 2, 4, 4}, sched, 7, 123);
    auto b = diffusion::sample_latent(den, cond, {1, 2, 4, 4}, sched, 7, 123);
    auto c = diffusion::sample_latent(den, cond, {1, 2, 4, 4}, sched, 7, 124);
    EXPECT_TRUE(bit_equal(a, b));
    EXPECT_GT(max_abs_diff(a, c), 1e-6f);
    EXPECT_TRUE(a.all_finite());
    auto one_step = diffusion::sample_latent(den, cond, {1, 2, 4, 4}, sched, 1, 123);
    EXPECT_TRUE(one_step.all_finite());
    EXPECT_THROW(diffusion::sample_latent(den, cond, {1, 2, 4, 4}, sched, 0, 1),
                 SamplingError);
}

TEST(Sampler, EvalModeRestored) {
    models::DenoiserConfig cfg{.latent_channels = 2, .base_width = 4, .levels = 2,
                               .cond_channels = 2, .time_dim = 4};
    models::Denoiser<float> den(cfg, 44);
    den.set_training(true);
    Rng rng(45);
    std::vector<ag::Var<float>> cond{
        ag::constant(rng.normal_tensor<float>({1, 2, 4, 4})),
        ag::constant(rng.normal_tensor<float>({1, 2, 2, 2}))};
    auto sched = diffusion::make_schedule(100);
    diffusion::sample_latent(den, cond, {1, 2, 4, 4}, sched, 3, 1);
    EXPECT_TRUE(den.training());
}
