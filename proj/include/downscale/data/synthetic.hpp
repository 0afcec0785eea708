#pragma once

#include <array>
#include <limits>

#include "downscale/core/fft.hpp"
#include "downscale/core/rng.hpp"
#include "downscale/data/manifest.hpp"
#include "downscale/data/regrid.hpp"

namespace downscale::data {

// Procedural paired dataset: a terrain-coupled high-resolution truth and a
// deliberately biased, smoothed low-resolution predictor view of the same
// synoptic driver. The low-resolution channels are not a coarsening of the
// truth, so the learned task is downscaling plus bias correction, and the
// truth carries spatially correlated small-scale noise that no deterministic
// map can recover.
struct SyntheticConfig {
    std::int64_t hr_nx = 128;
    std::int64_t hr_ny = 128;
    std::int64_t factor = 8;
    std::int64_t timesteps = 64;
    std::string variable = "t2m";  // "t2m" or "uv"
    std::array<double, 3> fractions = {0.70, 0.15, 0.05};
    double pixel_size = 2.0;  // km per HR pixel

    std::int64_t lr_nx() const { return hr_nx / factor; }
    std::int64_t lr_ny() const { return hr_ny / factor; }
    std::int64_t target_channels() const { return variable == "uv" ? 2 : 1; }

    void validate() const {
        if (factor < 2) fail<ConfigError>("synthetic: factor must be >= 2");
        if (hr_nx % factor != 0 || hr_ny % factor != 0)
            fail<ConfigError>("synthetic: HR dims must be multiples of the factor");
        if (hr_nx / factor < 4 || hr_ny / factor < 4)
            fail<ConfigError>("synthetic: LR grid must be at least 4x4");
        if (variable != "t2m" && variable != "uv")
            fail<ConfigError>("synthetic: variable must be t2m or uv");
        if (timesteps < 1) fail<ConfigError>("synthetic: timesteps must be >= 1");
    }
};

inline const std::vector<std::string>& predictor_channel_names() {
    static const std::vector<std::string> names = {"t2m",  "u10",  "v10",  "msl", "sst",
                                                   "sd",   "d2m",  "ssrd", "t850", "u850",
                                                   "v850", "w850", "q850", "tp"};
    return names;
}

inline std::vector<std::string> static_channel_names() {
    std::vector<std::string> names = {"dem"};
    for (int k = 0; k < 16; ++k) names.push_back("lc_" + std::to_string(k));
    names.push_back("lat");
    return names;
}

namespace detail {

// Periodic Gaussian smoothing; spectrum scaled by exp(-2 pi^2 len^2 |k|^2)
// with k in cycles per pixel. Preserves the mean exactly.
inline Tensord smooth_periodic(const Tensord& f, double length_pix) {
    const auto& s = f.shape();
    const std::int64_t H = s[0], W = s[1], HW = H * W;
    Tensord spec({HW, 2});
    fft::forward_real<double>(static_cast<int>(H), static_cast<int>(W), f.data(), spec.data());
    const double c = 2.0 * M_PI * M_PI * length_pix * length_pix;
    for (std::int64_t ky = 0; ky < H; ++ky) {
        const double fy = static_cast<double>(ky <= H / 2 ? ky : ky - H) / static_cast<double>(H);
        for (std::int64_t kx = 0; kx < W; ++kx) {
            const double fx =
                static_cast<double>(kx <= W / 2 ? kx : kx - W) / static_cast<double>(W);
            const double g = std::exp(-c * (fx * fx + fy * fy));
            spec[(ky * W + kx) * 2] *= g;
            spec[(ky * W + kx) * 2 + 1] *= g;
        }
    }
    Tensord out_c({HW, 2});
    fft::c2c_2d<double>(static_cast<int>(H), static_cast<int>(W), spec.data(), out_c.data(),
                        false);
    Tensord out({H, W});
    for (std::int64_t i = 0; i < HW; ++i) out[i] = out_c[2 * i] / static_cast<double>(HW);
    return out;
}

inline void standardize(Tensord& f) {
    double sum = 0.0, sumsq = 0.0;
    const std::int64_t n = f.numel();
    for (std::int64_t i = 0; i < n; ++i) sum += f[i];
    const double m = sum / static_cast<double>(n);
    for (std::int64_t i = 0; i < n; ++i) sumsq += (f[i] - m) * (f[i] - m);
    const double sd = std::sqrt(sumsq / static_cast<double>(n));
    const double inv = sd > 0 ? 1.0 / sd : 1.0;
    for (std::int64_t i = 0; i < n; ++i) f[i] = (f[i] - m) * inv;
}

// Standardized Gaussian random field with the given correlation length.
inline Tensord noise_field(std::uint64_t seed, const std::string& stream, std::uint64_t index,
                           std::int64_t H, std::int64_t W, double length_pix) {
    Rng rng = Rng::keyed(seed, fnv1a64("synth:" + stream), index);
    Tensord f({H, W});
    rng.fill_normal(f);
    if (length_pix > 0) f = smooth_periodic(f, length_pix);
    standardize(f);
    return f;
}

inline Tensord block_mean(const Tensord& hr, std::int64_t factor) {
    const auto& s = hr.shape();
    const std::int64_t h = s[0] / factor, w = s[1] / factor;
    Tensord out({h, w});
    const double inv = 1.0 / static_cast<double>(factor * factor);
    for (std::int64_t i = 0; i < h; ++i)
        for (std::int64_t j = 0; j < w; ++j) {
            double acc = 0.0;
            for (std::int64_t di = 0; di < factor; ++di)
                for (std::int64_t dj = 0; dj < factor; ++dj)
                    acc += hr.at(i * factor + di, j * factor + dj);
            out.at(i, j) = acc * inv;
        }
    return out;
}

// Periodic central-difference gradients, standardized.
inline std::pair<Tensord, Tensord> terrain_gradients(const Tensord& dem) {
    const auto& s = dem.shape();
    const std::int64_t H = s[0], W = s[1];
    Tensord gx({H, W}), gy({H, W});
    for (std::int64_t i = 0; i < H; ++i)
        for (std::int64_t j = 0; j < W; ++j) {
            gx.at(i, j) = 0.5 * (dem.at(i, (j + 1) % W) - dem.at(i, (j + W - 1) % W));
            gy.at(i, j) = 0.5 * (dem.at((i + 1) % H, j) - dem.at((i + H - 1) % H, j));
        }
    standardize(gx);
    standardize(gy);
    return {std::move(gx), std::move(gy)};
}

// First-order autoregressive coefficient path, unit marginal variance.
inline std::vector<double> ar1_series(std::uint64_t seed, const std::string& stream,
                                      std::int64_t T, double rho) {
    Rng rng = Rng::keyed(seed, fnv1a64("synth:" + stream));
    std::vector<double> a(T);
    double x = rng.normal();
    a[0] = x;
    const double innov = std::sqrt(1.0 - rho * rho);
    for (std::int64_t t = 1; t < T; ++t) {
        x = rho * x + innov * rng.normal();
        a[t] = x;
    }
    return a;
}

}  // namespace detail

// Everything the archives will hold, in memory. Predictors keep NaN over land
// in the sea-surface-temperature channel.
struct SyntheticFields {
    Tensorf predictors;  // (T, 14, lr_ny, lr_nx)
    Tensorf statics;     // (18, hr_ny, hr_nx)
    Tensorf targets;     // (T, v, hr_ny, hr_nx)
    std::vector<std::int64_t> timestamps;
    GridSpec hr_grid, lr_grid;
};

inline SyntheticFields generate_synthetic_fields(const SyntheticConfig& cfg,
                                                 std::uint64_t seed) {
    cfg.validate();
    const std::int64_t H = cfg.hr_ny, W = cfg.hr_nx, T = cfg.timesteps;
    const std::int64_t h = cfg.lr_ny(), w = cfg.lr_nx(), F = cfg.factor;
    const std::int64_t v = cfg.target_channels();

    // --- static terrain ---------------------------------------------------
    Tensord relief = detail::noise_field(seed, "relief", 0, H, W, static_cast<double>(H) / 6.0);
    Tensord ridges = detail::noise_field(seed, "ridges", 0, H, W, static_cast<double>(H) / 16.0);
    Tensord dem({H, W});
    for (std::int64_t i = 0; i < H * W; ++i) {
        const double raw = 500.0 * relief[i] + 150.0 * ridges[i];
        dem[i] = raw > 0 ? raw : 0.0;  // sea level clips the lows into coastline
    }
    auto [gx, gy] = detail::terrain_gradients(dem);

    Tensord lc_score = detail::noise_field(seed, "landcover", 0, H, W,
                                           static_cast<double>(H) / 10.0);
    double dem_max = 1.0;
    for (std::int64_t i = 0; i < H * W; ++i) dem_max = std::max(dem_max, dem[i]);
    Tensorf classmap_vals({1, H, W});
    for (std::int64_t i = 0; i < H * W; ++i) {
        if (dem[i] <= 0.0) {
            classmap_vals[i] = 0.0f;  // water
            continue;
        }
        const double u = 0.5 + 0.25 * lc_score[i] + 0.35 * (dem[i] / dem_max);
        auto k = static_cast<std::int64_t>(std::floor(std::min(std::max(u, 0.0), 0.999) * 15.0)) + 1;
        classmap_vals[i] = static_cast<float>(std::min<std::int64_t>(k, 15));
    }

    GridSpec hr_grid{0.0, 0.0, cfg.pixel_size, W, H};
    GridSpec lr_grid{0.0, 0.0, cfg.pixel_size * static_cast<double>(F), w, h};
    FieldStack classmap{std::move(classmap_vals), {"lc_class"}, {"class"}, hr_grid, {}};
    FieldStack onehot = landcover_onehot(classmap, 16);

    SyntheticFields out;
    out.hr_grid = hr_grid;
    out.lr_grid = lr_grid;
    out.statics = Tensorf({18, H, W});
    for (std::int64_t i = 0; i < H * W; ++i)
        out.statics[i] = static_cast<float>(dem[i]);
    for (std::int64_t c = 0; c < 16; ++c)
        for (std::int64_t i = 0; i < H * W; ++i)
            out.statics[(1 + c) * H * W + i] = onehot.values[c * H * W + i];
    for (std::int64_t i = 0; i < H; ++i)
        for (std::int64_t j = 0; j < W; ++j)
            out.statics[17 * H * W + i * W + j] =
                static_cast<float>(i) / static_cast<float>(H - 1);

    // --- synoptic driver: shared large-scale modes with AR(1) amplitudes ---
    const int n_modes = 6;
    const double synoptic_len = static_cast<double>(H) / 3.0;
    std::vector<Tensord> modes;
    for (int k = 0; k < n_modes; ++k)
        modes.push_back(detail::noise_field(seed, "mode", static_cast<std::uint64_t>(k), H, W,
                                            synoptic_len));
    std::vector<std::vector<double>> amp;
    for (int k = 0; k < n_modes; ++k)
        amp.push_back(detail::ar1_series(seed, "amp" + std::to_string(k), T, 0.9));
    auto driver_at = [&](std::int64_t t, int k0, int k1) {
        Tensord f({H, W});
        const double norm = 1.0 / std::sqrt(static_cast<double>(k1 - k0));
        for (int k = k0; k < k1; ++k) {
            const double a = amp[k][t];
            for (std::int64_t i = 0; i < H * W; ++i) f[i] += a * modes[k][i];
        }
        for (std::int64_t i = 0; i < H * W; ++i) f[i] *= norm;
        return f;
    };

    // land-cover thermal offsets, one constant per class
    std::array<double, 16> lc_offset{};
    for (int k = 0; k < 16; ++k) lc_offset[k] = 0.8 * std::sin(1.7 * static_cast<double>(k));

    // per-class map once
    std::vector<int> lc_index(H * W);
    for (std::int64_t i = 0; i < H * W; ++i)
        lc_index[i] = static_cast<int>(classmap.values[i]);

    // LR land mask: majority of HR pixels above sea level
    Tensord land_hr({H, W});
    for (std::int64_t i = 0; i < H * W; ++i) land_hr[i] = dem[i] > 0.0 ? 1.0 : 0.0;
    Tensord land_lr = detail::block_mean(land_hr, F);

    const auto& pn = predictor_channel_names();
    out.predictors = Tensorf({T, static_cast<std::int64_t>(pn.size()), h, w});
    out.targets = Tensorf({T, v, H, W});
    out.timestamps.resize(T);

    // independent quadrature modes for wind and moisture so predictors are
    // informative but not collinear
    auto wind_series_u = detail::ar1_series(seed, "wind_u", T, 0.92);
    auto wind_series_v = detail::ar1_series(seed, "wind_v", T, 0.92);

    const double lapse = 8.5e-3;  // K per m, steeper than ambient to anchor terrain signal
    for (std::int64_t t = 0; t < T; ++t) {
        out.timestamps[t] = t;
        const double cyc = std::sin(2.0 * M_PI * static_cast<double>(t) / 24.0);
        Tensord d_thermal = driver_at(t, 0, 3);
        Tensord d_flow = driver_at(t, 3, 6);

        // --- HR truth ---
        Tensord hf = detail::noise_field(seed, "hf" + std::to_string(t), 0, H, W, 1.5);
        if (cfg.variable == "t2m") {
            for (std::int64_t i = 0; i < H * W; ++i) {
                const double val = 288.0 + 1.7 * d_thermal[i] + 0.8 * cyc - lapse * dem[i] +
                                   lc_offset[static_cast<std::size_t>(lc_index[i])] +
                                   0.6 * hf[i];
                out.targets[t * H * W + i] = static_cast<float>(val);
            }
        } else {
            Tensord hf2 = detail::noise_field(seed, "hf2:" + std::to_string(t), 0, H, W, 1.5);
            const double U = 2.0 * wind_series_u[t], V = 2.0 * wind_series_v[t];
            for (std::int64_t i = 0; i < H * W; ++i) {
                const double u10 = U + 1.5 * d_flow[i] - 1.2 * gx[i] + 0.5 * hf[i];
                const double v10 = V + 1.5 * d_thermal[i] - 1.2 * gy[i] + 0.5 * hf2[i];
                out.targets[(t * 2 + 0) * H * W + i] = static_cast<float>(u10);
                out.targets[(t * 2 + 1) * H * W + i] = static_cast<float>(v10);
            }
        }

        // --- LR predictors: smoothed driver plus deliberate bias and noise ---
        auto lr_view = [&](const Tensord& field_hr, double extra_smooth) {
            Tensord s = detail::smooth_periodic(field_hr, static_cast<double>(F) * extra_smooth);
            return detail::block_mean(s, F);
        };
        Tensord th = lr_view(d_thermal, 1.0);
        Tensord fl = lr_view(d_flow, 1.0);
        Tensord th_wide = lr_view(d_thermal, 2.5);
        Rng lr_noise = Rng::keyed(seed, fnv1a64("synth:lrnoise"), static_cast<std::uint64_t>(t));
        auto eps = [&] { return lr_noise.normal(); };

        float* P = out.predictors.data() + t * static_cast<std::int64_t>(pn.size()) * h * w;
        const std::int64_t hw = h * w;
        const double U = 2.0 * wind_series_u[t], V = 2.0 * wind_series_v[t];
        for (std::int64_t i = 0; i < hw; ++i) {
            const double noise = 0.25;
            const double t2m = 288.8 + 1.8 * th[i] + 0.9 * cyc + noise * eps();
            const double u10 = 0.9 * U + 1.3 * fl[i] + noise * eps();
            const double v10 = 0.9 * V + 1.3 * th[i] + noise * eps();
            P[0 * hw + i] = static_cast<float>(t2m);
            P[1 * hw + i] = static_cast<float>(u10);
            P[2 * hw + i] = static_cast<float>(v10);
            P[3 * hw + i] = static_cast<float>(1013.0 + 7.0 * fl[i] + 0.8 * eps());
            P[4 * hw + i] = land_lr[i] > 0.5
                                ? std::numeric_limits<float>::quiet_NaN()
                                : static_cast<float>(285.0 + 1.2 * th_wide[i] + 0.1 * eps());
            P[5 * hw + i] = static_cast<float>(std::max(0.0, -0.4 * th[i] - 0.2 * cyc +
                                                                 0.1 * eps()));
            P[6 * hw + i] = static_cast<float>(t2m - 2.0 + 0.4 * th_wide[i] + noise * eps());
            P[7 * hw + i] = static_cast<float>(
                std::max(0.0, 400.0 + 180.0 * cyc + 40.0 * th_wide[i] + 8.0 * eps()));
            P[8 * hw + i] = static_cast<float>(t2m - 12.5 + 0.6 * fl[i]);
            P[9 * hw + i] = static_cast<float>(1.3 * u10 + noise * eps());
            P[10 * hw + i] = static_cast<float>(1.3 * v10 + noise * eps());
            P[11 * hw + i] = static_cast<float>(0.12 * fl[i] + 0.03 * eps());
            P[12 * hw + i] = static_cast<float>(std::max(0.0, 6.0 + 1.1 * th_wide[i] +
                                                                  0.2 * eps()));
            const double wet = fl[i] - 0.6;
            P[13 * hw + i] = static_cast<float>(wet > 0 ? 2.0 * wet * wet : 0.0);
        }
    }
    return out;
}

}  // namespace downscale::data
