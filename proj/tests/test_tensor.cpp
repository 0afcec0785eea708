#include <gtest/gtest.h>

#include "downscale/core/rng.hpp"
#include "downscale/core/tensor.hpp"

using namespace downscale;

TEST(Tensor, ShapeAndIndexing) {
    Tensorf t({2, 3, 4});
    EXPECT_EQ(t.numel(), 24);
    EXPECT_EQ(t.shape_str(), "(2,3,4)");
    t.at(1, 2, 3) = 7.0f;
    EXPECT_FLOAT_EQ(t[23], 7.0f);
    t.at(0, 0, 0) = -1.0f;
    EXPECT_FLOAT_EQ(t[0], -1.0f);
}

TEST(Tensor, FillZerosScalar) {
    auto z = Tensorf::zeros({3, 3});
    EXPECT_FLOAT_EQ(z.sum(), 0.0f);
    auto f = Tensorf::full({2, 2}, 2.5f);
    EXPECT_FLOAT_EQ(f.sum(), 10.0f);
    auto s = Tensorf::scalar(4.0f);
    EXPECT_EQ(s.numel(), 1);
    EXPECT_FLOAT_EQ(s[0], 4.0f);
}

TEST(Tensor, CloneIsIndependent) {
    Tensorf a({4}, 1.0f);
    Tensorf b = a.clone();
    b[0] = 9.0f;
    EXPECT_FLOAT_EQ(a[0], 1.0f);
}

TEST(Tensor, ReshapedPreservesData) {
    Tensorf a({2, 6});
    for (std::int64_t i = 0; i < a.numel(); ++i) a[i] = static_cast<float>(i);
    Tensorf b = a.reshaped({3, 4});
    EXPECT_EQ(b.shape(), (std::vector<std::int64_t>{3, 4}));
    EXPECT_TRUE(bit_equal(a, b.reshaped({2, 6})));
    EXPECT_THROW(a.reshaped({5, 2}), ShapeError);
}

TEST(Tensor, CastRoundTrip) {
    Tensord d({3});
    d[0] = 0.25;
    d[1] = -1.5;
    d[2] = 1e-3;
    Tensorf f = d.cast<float>();
    Tensord back = f.cast<double>();
    for (std::int64_t i = 0; i < 3; ++i) EXPECT_NEAR(back[i], d[i], 1e-7);
}

TEST(Tensor, Stats) {
    Tensorf t({4});
    t[0] = 1.0f;
    t[1] = -2.0f;
    t[2] = 3.0f;
    t[3] = 0.0f;
    EXPECT_FLOAT_EQ(t.min(), -2.0f);
    EXPECT_FLOAT_EQ(t.max(), 3.0f);
    EXPECT_FLOAT_EQ(t.mean(), 0.5f);
    EXPECT_TRUE(t.all_finite());
    t[1] = std::numeric_limits<float>::quiet_NaN();
    EXPECT_FALSE(t.all_finite());
}

TEST(Tensor, BitEqualDetectsAnyChange) {
    Rng rng(7);
    auto a = rng.normal_tensor<float>({5, 5});
    auto b = a.clone();
    EXPECT_TRUE(bit_equal(a, b));
    b[12] = std::nextafter(b[12], 1e9f);
    EXPECT_FALSE(bit_equal(a, b));
}

TEST(Rng, DeterministicAcrossInstances) {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
    Rng c(43);
    EXPECT_NE(Rng(42).next_u64(), c.next_u64());
}

TEST(Rng, KeyedStreamsIndependent) {
    auto a = Rng::keyed(1, 0, 0).next_u64();
    auto b = Rng::keyed(1, 0, 1).next_u64();
    auto c = Rng::keyed(1, 1, 0).next_u64();
    EXPECT_NE(a, b);
    EXPECT_NE(a, c);
    EXPECT_EQ(a, Rng::keyed(1, 0, 0).next_u64());
}

TEST(Rng, NormalMoments) {
    Rng rng(3);
    const int n = 200000;
    double s = 0, s2 = 0;
    for (int i = 0; i < n; ++i) {
        double v = rng.normal();
        s += v;
        s2 += v * v;
    }
    EXPECT_NEAR(s / n, 0.0, 0.01);
    EXPECT_NEAR(s2 / n, 1.0, 0.02);
}

TEST(Rng, UniformRange) {
    Rng rng(5);
    for (int i = 0; i < 1000; ++i) {
        double v = rng.uniform(-3.0, 2.0);
        EXPECT_GE(v, -3.0);
        EXPECT_LT(v, 2.0);
    }
    for (int i = 0; i < 1000; ++i) {
        auto k = rng.uniform_int(17);
        EXPECT_GE(k, 0);
        EXPECT_LT(k, 17);
    }
}

TEST(Hash, Fnv1aStableAndSensitive) {
    const std::uint64_t h1 = fnv1a64("abc");
    EXPECT_EQ(h1, fnv1a64("abc"));
    EXPECT_NE(h1, fnv1a64("abd"));
    float data[3] = {1.0f, 2.0f, 3.0f};
    const auto hd = fnv1a64(data, sizeof(data));
    data[2] = 3.0000002f;
    EXPECT_NE(hd, fnv1a64(data, sizeof(data)));
}
