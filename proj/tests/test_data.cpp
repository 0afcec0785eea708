#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "downscale/data/loader.hpp"

using namespace downscale;
using namespace downscale::data;

namespace {

FieldStack make_stack(Tensorf values, GridSpec grid) {
    const std::int64_t c = values.shape()[0];
    std::vector<std::string> names(c);
    for (std::int64_t i = 0; i < c; ++i) names[i] = "ch" + std::to_string(i);
    return {std::move(values), std::move(names), {}, grid, 0};
}

}  // namespace

TEST(Grid, PairAndRefine) {
    GridSpec lr{0, 0, 16.0, 9, 9};
    GridSpec hr = refine(lr, 8);
    EXPECT_EQ(hr.nx, 72);
    EXPECT_DOUBLE_EQ(hr.pixel_size, 2.0);
    EXPECT_NO_THROW(check_grid_pair(hr, lr, 8));
    GridSpec off = hr;
    off.nx = 71;
    EXPECT_THROW(check_grid_pair(off, lr, 8), AlignmentError);
    GridSpec bad{0, 0, -1.0, 4, 4};
    EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(Regrid, NearestConstantFixedPoint) {
    GridSpec lr{0, 0, 8.0, 9, 9};
    auto out = regrid_nearest(make_stack(Tensorf({1, 9, 9}, 4.25f), lr), refine(lr, 8));
    EXPECT_EQ(out.values.shape(), (std::vector<std::int64_t>{1, 72, 72}));
    EXPECT_FLOAT_EQ(out.values.min(), 4.25f);
    EXPECT_FLOAT_EQ(out.values.max(), 4.25f);
}

TEST(Regrid, NearestBlockExpansion) {
    GridSpec lr{0, 0, 2.0, 2, 2};
    Tensorf v({1, 2, 2}, std::vector<float>{1, 2, 3, 4});
    auto out = regrid_nearest(make_stack(std::move(v), lr), refine(lr, 2));
    const float want[16] = {1, 1, 2, 2, 1, 1, 2, 2, 3, 3, 4, 4, 3, 3, 4, 4};
    for (int i = 0; i < 16; ++i) EXPECT_FLOAT_EQ(out.values[i], want[i]) << i;
}

TEST(Regrid, NearestPaperShapesAndExtentGuard) {
    GridSpec lr{0, 0, 16.0, 86, 72};
    auto out = regrid_nearest(make_stack(Tensorf({2, 72, 86}, 1.0f), lr), refine(lr, 8));
    EXPECT_EQ(out.values.shape(), (std::vector<std::int64_t>{2, 576, 688}));
    GridSpec elsewhere{5.0, 0, 2.0, 86 * 8, 72 * 8};
    EXPECT_THROW(regrid_nearest(make_stack(Tensorf({2, 72, 86}, 1.0f), lr), elsewhere),
                 AlignmentError);
}

TEST(Interp, QuadraticReproducesConstantsAndRamps) {
    GridSpec lr{0, 0, 8.0, 12, 12};
    auto c = interp_quadratic(make_stack(Tensorf({1, 12, 12}, 2.5f), lr), 8);
    EXPECT_EQ(c.values.shape(), (std::vector<std::int64_t>{1, 96, 96}));
    EXPECT_NEAR(c.values.min(), 2.5f, 1e-6);
    EXPECT_NEAR(c.values.max(), 2.5f, 1e-6);

    Tensorf ramp({1, 12, 12});
    for (std::int64_t i = 0; i < 12; ++i)
        for (std::int64_t j = 0; j < 12; ++j) ramp.at(0, i, j) = static_cast<float>(j);
    auto r = interp_quadratic(make_stack(std::move(ramp), lr), 4);
    // source pixel centers sit at index j; target centers at (J+0.5)/4 - 0.5
    for (std::int64_t J = 0; J < 48; ++J) {
        const double expect = (static_cast<double>(J) + 0.5) / 4.0 - 0.5;
        EXPECT_NEAR(r.values.at(0, 7, J), expect, 1e-9) << J;
    }
    EXPECT_THROW(interp_quadratic(c, 1), ConfigError);
}

TEST(Onehot, PartitionAndErrors) {
    GridSpec g{0, 0, 1.0, 2, 2};
    Tensorf cls({1, 2, 2}, std::vector<float>{0, 3, 15, 7});
    auto oh = landcover_onehot({cls.clone(), {"lc_class"}, {}, g, {}}, 16);
    EXPECT_EQ(oh.values.shape()[0], 16);
    EXPECT_FLOAT_EQ(oh.values.at(3, 0, 1), 1.0f);
    EXPECT_FLOAT_EQ(oh.values.at(0, 0, 0), 1.0f);
    for (std::int64_t i = 0; i < 2; ++i)
        for (std::int64_t j = 0; j < 2; ++j) {
            float sum = 0;
            for (std::int64_t k = 0; k < 16; ++k) sum += oh.values.at(k, i, j);
            EXPECT_FLOAT_EQ(sum, 1.0f);
        }
    Tensorf vec({1, 1, 1}, std::vector<float>{3});
    auto small = landcover_onehot({vec.clone(), {"c"}, {}, GridSpec{0, 0, 1, 1, 1}, {}}, 4);
    EXPECT_FLOAT_EQ(small.values[0], 0);
    EXPECT_FLOAT_EQ(small.values[3], 1);
    Tensorf bad({1, 1, 1}, std::vector<float>{4});
    EXPECT_THROW(landcover_onehot({bad.clone(), {"c"}, {}, GridSpec{0, 0, 1, 1, 1}, {}}, 4),
                 IngestionError);
    Tensorf frac({1, 1, 1}, std::vector<float>{1.5f});
    EXPECT_THROW(landcover_onehot({frac.clone(), {"c"}, {}, GridSpec{0, 0, 1, 1, 1}, {}}, 4),
                 IngestionError);
}

TEST(Normalize, FitRoundTripAndExempt) {
    Rng rng(7);
    Tensorf data({20, 3, 4, 4});
    for (std::int64_t t = 0; t < 20; ++t)
        for (std::int64_t i = 0; i < 16; ++i) {
            data[t * 48 + 0 * 16 + i] = static_cast<float>(280.0 + 10.0 * rng.normal());
            data[t * 48 + 1 * 16 + i] = static_cast<float>(rng.uniform() > 0.5 ? 1.0 : 0.0);
            data[t * 48 + 2 * 16 + i] = static_cast<float>(5.0 * rng.normal());
        }
    auto st = fit_normalization(data, {"t2m", "lc_1", "u10"}, {"lc_1"});
    EXPECT_NEAR(st.mean[0], 280.0, 1.5);
    EXPECT_NEAR(st.stddev[0], 10.0, 1.0);
    EXPECT_TRUE(st.exempt[1]);

    Tensorf one({3, 1, 1}, std::vector<float>{290.0f, 1.0f, 0.0f});
    st.mean[0] = 280.0;
    st.stddev[0] = 10.0;
    auto n = normalize(one, st);
    EXPECT_FLOAT_EQ(n[0], 1.0f);
    EXPECT_FLOAT_EQ(n[1], 1.0f);  // exempt passes through
    auto back = denormalize(normalize(data, st), st);
    for (std::int64_t i = 0; i < data.numel(); ++i)
        EXPECT_NEAR(back[i], data[i], 1e-6 * std::max(1.0f, std::abs(data[i])));

    json j = st.to_json();
    auto st2 = NormalizationStats::from_json(j);
    EXPECT_EQ(st2.mean, st.mean);
    EXPECT_EQ(st2.exempt, st.exempt);
}

TEST(Normalize, ZeroVarianceAndNan) {
    Tensorf data({2, 2, 2, 2});
    data.fill(3.0f);
    const float nan = std::numeric_limits<float>::quiet_NaN();
    data[0] = nan;  // channel 0 keeps finite values elsewhere
    for (std::int64_t i = 0; i < 4; ++i) data.at(1, 0, i / 2, i % 2) = 5.0f;
    auto st = fit_normalization(data, {"sst", "flat"});
    EXPECT_NEAR(st.mean[0], (3.0 * 3 + 5.0 * 4) / 7.0, 1e-6);
    EXPECT_DOUBLE_EQ(st.stddev[1], 1.0);  // zero variance fallback
    fill_nan_with_mean(data, st);
    EXPECT_TRUE(data.all_finite());
    EXPECT_NEAR(data[0], st.mean[0], 1e-5);
}

TEST(SplitDataset, FractionBlocks) {
    DatasetManifest m;
    m.lr_grid = {0, 0, 16, 4, 4};
    m.hr_grid = refine(m.lr_grid, 8);
    for (int i = 0; i < 100; ++i) m.timestamps.push_back(i);
    m.split.assign(100, Split::unused);
    auto s = split_dataset(m);
    EXPECT_EQ(s.indices_for(Split::train).size(), 70u);
    EXPECT_EQ(s.indices_for(Split::val).size(), 15u);
    EXPECT_EQ(s.indices_for(Split::test).size(), 5u);
    EXPECT_EQ(s.indices_for(Split::unused).size(), 10u);
    EXPECT_EQ(s.indices_for(Split::train).back(), 69);
    EXPECT_EQ(s.indices_for(Split::val).front(), 70);
    EXPECT_EQ(s.indices_for(Split::test).front(), 85);

    m.timestamps.resize(20);
    m.split.assign(20, Split::unused);
    auto s2 = split_dataset(m, {0.5, 0.25, 0.25});
    EXPECT_EQ(s2.indices_for(Split::train).size(), 10u);
    EXPECT_EQ(s2.indices_for(Split::val).size(), 5u);
    EXPECT_EQ(s2.indices_for(Split::test).size(), 5u);
    EXPECT_EQ(s2.indices_for(Split::unused).size(), 0u);

    EXPECT_THROW(split_dataset(m, {0.9, 0.2, 0.1}), ConfigError);
}

TEST(Patch, AlignedDeterministicCrops) {
    SyntheticConfig cfg;
    cfg.hr_nx = cfg.hr_ny = 128;
    cfg.timesteps = 1;
    auto f = generate_synthetic_fields(cfg, 11);
    SplitData d{f.predictors, f.statics, f.targets, f.timestamps,
                f.hr_grid,     f.lr_grid, 8,
                predictor_channel_names(), static_channel_names(), {"t2m"}};
    auto pair = d.pair_at(0);
    auto a = sample_patch(pair, 64, 99);
    auto b = sample_patch(pair, 64, 99);
    auto c = sample_patch(pair, 64, 100);
    EXPECT_TRUE(bit_equal(a.targets_hr.values, b.targets_hr.values));
    EXPECT_GT(max_abs_diff(a.targets_hr.values, c.targets_hr.values), 0.0f);
    EXPECT_EQ(a.predictors_lr.grid.nx, 8);
    EXPECT_EQ(a.statics_hr.grid.nx, 64);
    EXPECT_NO_THROW(a.validate());
    // crop content matches the source at the advertised offset
    const auto off_x = static_cast<std::int64_t>(
        (a.statics_hr.grid.origin_x - pair.statics_hr.grid.origin_x) /
        pair.statics_hr.grid.pixel_size);
    const auto off_y = static_cast<std::int64_t>(
        (a.statics_hr.grid.origin_y - pair.statics_hr.grid.origin_y) /
        pair.statics_hr.grid.pixel_size);
    EXPECT_EQ(off_x % 8, 0);
    EXPECT_FLOAT_EQ(a.statics_hr.values.at(0, 0, 0),
                    pair.statics_hr.values.at(0, off_y, off_x));
    EXPECT_THROW(sample_patch(pair, 256, 1), SamplingError);
    EXPECT_THROW(sample_patch(pair, 60, 1), SamplingError);
}

TEST(Synthetic, DeterministicPerSeed) {
    SyntheticConfig cfg;
    cfg.hr_nx = cfg.hr_ny = 64;
    cfg.timesteps = 4;
    auto a = generate_synthetic_fields(cfg, 42);
    auto b = generate_synthetic_fields(cfg, 42);
    auto c = generate_synthetic_fields(cfg, 43);
    EXPECT_TRUE(bit_equal(a.targets, b.targets));
    EXPECT_TRUE(bit_equal(a.statics, b.statics));
    EXPECT_TRUE(bit_equal(a.predictors, b.predictors));  // NaN sst bits included
    EXPECT_FALSE(bit_equal(a.predictors, c.predictors));
    EXPECT_GT(max_abs_diff(a.targets, c.targets), 0.0f);
}

TEST(Synthetic, ChannelInventoryAndShapes) {
    SyntheticConfig cfg;
    cfg.hr_nx = 64;
    cfg.hr_ny = 64;
    cfg.timesteps = 3;
    auto f = generate_synthetic_fields(cfg, 5);
    EXPECT_EQ(f.predictors.shape(), (std::vector<std::int64_t>{3, 14, 8, 8}));
    EXPECT_EQ(f.statics.shape(), (std::vector<std::int64_t>{18, 64, 64}));
    EXPECT_EQ(f.targets.shape(), (std::vector<std::int64_t>{3, 1, 64, 64}));
    EXPECT_EQ(predictor_channel_names().size(), 14u);
    EXPECT_EQ(static_channel_names().size(), 18u);
    cfg.variable = "uv";
    auto g = generate_synthetic_fields(cfg, 5);
    EXPECT_EQ(g.targets.shape()[1], 2);
    EXPECT_TRUE(g.targets.all_finite());
    cfg.hr_nx = 66;
    EXPECT_THROW(generate_synthetic_fields(cfg, 5), ConfigError);
}

TEST(Synthetic, TerrainCouplingAndSst) {
    SyntheticConfig cfg;
    cfg.hr_nx = cfg.hr_ny = 64;
    cfg.timesteps = 24;
    auto f = generate_synthetic_fields(cfg, 3);

    // pooled correlation between temperature truth and negative elevation
    const std::int64_t HW = 64 * 64, T = 24;
    double st = 0, sd = 0, stt = 0, sdd = 0, std_ = 0;
    for (std::int64_t t = 0; t < T; ++t)
        for (std::int64_t i = 0; i < HW; ++i) {
            const double tv = f.targets[t * HW + i], dv = -f.statics[i];
            st += tv;
            sd += dv;
            stt += tv * tv;
            sdd += dv * dv;
            std_ += tv * dv;
        }
    const double n = static_cast<double>(T * HW);
    const double cov = std_ / n - (st / n) * (sd / n);
    const double corr = cov / std::sqrt((stt / n - (st / n) * (st / n)) *
                                        (sdd / n - (sd / n) * (sd / n)));
    EXPECT_GT(corr, 0.5);

    // sst: NaN exactly over land, finite over water
    const std::int64_t hw = 8 * 8;
    std::int64_t nan_count = 0;
    for (std::int64_t i = 0; i < hw; ++i)
        if (std::isnan(f.predictors[4 * hw + i])) ++nan_count;
    EXPECT_GT(nan_count, 0);
    EXPECT_LT(nan_count, hw);
    for (std::int64_t c = 0; c < 14; ++c) {
        if (c == 4) continue;
        for (std::int64_t i = 0; i < hw; ++i)
            EXPECT_TRUE(std::isfinite(f.predictors[c * hw + i])) << "channel " << c;
    }
}

TEST(Archive, DatasetRoundTrip) {
    const std::string dir = "archive_test_dir";
    std::filesystem::remove_all(dir);
    SyntheticConfig cfg;
    cfg.hr_nx = cfg.hr_ny = 64;
    cfg.timesteps = 20;
    auto m = generate_synthetic_dataset(cfg, 77, dir);
    EXPECT_EQ(m.indices_for(Split::train).size(), 14u);
    EXPECT_EQ(m.indices_for(Split::val).size(), 3u);
    EXPECT_EQ(m.indices_for(Split::test).size(), 1u);

    auto m2 = DatasetManifest::load(dir + "/manifest.json");
    EXPECT_EQ(m2.timestamps, m.timestamps);
    EXPECT_EQ(m2.variable, m.variable);

    auto train = load_split(dir, m2, Split::train);
    EXPECT_EQ(train.size(), 14);
    EXPECT_EQ(train.predictors.shape(), (std::vector<std::int64_t>{14, 14, 8, 8}));
    EXPECT_EQ(train.target_channels, std::vector<std::string>{"t2m"});

    auto raw = generate_synthetic_fields(cfg, 77);
    Tensorf first({1, 64, 64});
    std::copy_n(raw.targets.data(), first.numel(), first.data());
    Tensorf loaded({1, 64, 64});
    std::copy_n(train.targets.data(), loaded.numel(), loaded.data());
    EXPECT_TRUE(bit_equal(first, loaded));

    auto batch = make_batch(train, {0, 3, 5});
    EXPECT_EQ(batch.predictors.shape()[0], 3);
    EXPECT_EQ(batch.statics.shape(), (std::vector<std::int64_t>{3, 18, 64, 64}));
    auto crop = crop_batch(batch, 8, 32, 5);
    EXPECT_EQ(crop.targets.shape(), (std::vector<std::int64_t>{3, 1, 32, 32}));
    EXPECT_EQ(crop.predictors.shape(), (std::vector<std::int64_t>{3, 14, 4, 4}));
    std::filesystem::remove_all(dir);
}
