#pragma once

#include "downscale/core/rng.hpp"
#include "downscale/data/field.hpp"

namespace downscale::data {

namespace detail {

inline Tensorf crop_channels(const Tensorf& t, std::int64_t i0, std::int64_t j0,
                             std::int64_t h, std::int64_t w) {
    const auto& s = t.shape();
    Tensorf out({s[0], h, w});
    for (std::int64_t c = 0; c < s[0]; ++c)
        for (std::int64_t i = 0; i < h; ++i)
            for (std::int64_t j = 0; j < w; ++j) out.at(c, i, j) = t.at(c, i0 + i, j0 + j);
    return out;
}

inline GridSpec crop_grid(const GridSpec& g, std::int64_t i0, std::int64_t j0, std::int64_t h,
                          std::int64_t w) {
    return {g.origin_x + static_cast<double>(j0) * g.pixel_size,
            g.origin_y + static_cast<double>(i0) * g.pixel_size, g.pixel_size, w, h};
}

}  // namespace detail

// Aligned random crop: HR patch of hr_patch^2 pixels with the LR predictors
// cropped to the identical spatial extent. Deterministic for a fixed seed.
inline SamplePair sample_patch(const SamplePair& pair, std::int64_t hr_patch,
                               std::uint64_t seed) {
    pair.validate();
    const std::int64_t factor = pair.factor;
    if (hr_patch < factor || hr_patch % factor != 0)
        fail<SamplingError>("sample_patch: patch size must be a positive multiple of " +
                            std::to_string(factor));
    const GridSpec& hr = pair.statics_hr.grid;
    if (hr_patch > hr.nx || hr_patch > hr.ny)
        fail<SamplingError>("sample_patch: patch " + std::to_string(hr_patch) +
                            " exceeds domain " + std::to_string(hr.ny) + "x" +
                            std::to_string(hr.nx));

    Rng rng = Rng::keyed(seed, fnv1a64("sample_patch"));
    const std::int64_t lr_patch = hr_patch / factor;
    const std::int64_t li0 = rng.uniform_int(pair.predictors_lr.grid.ny - lr_patch + 1);
    const std::int64_t lj0 = rng.uniform_int(pair.predictors_lr.grid.nx - lr_patch + 1);
    const std::int64_t hi0 = li0 * factor, hj0 = lj0 * factor;

    SamplePair out;
    out.factor = factor;
    out.predictors_lr = {detail::crop_channels(pair.predictors_lr.values, li0, lj0, lr_patch,
                                               lr_patch),
                         pair.predictors_lr.channel_names, pair.predictors_lr.units,
                         detail::crop_grid(pair.predictors_lr.grid, li0, lj0, lr_patch, lr_patch),
                         pair.predictors_lr.timestamp};
    out.statics_hr = {detail::crop_channels(pair.statics_hr.values, hi0, hj0, hr_patch,
                                            hr_patch),
                      pair.statics_hr.channel_names, pair.statics_hr.units,
                      detail::crop_grid(pair.statics_hr.grid, hi0, hj0, hr_patch, hr_patch),
                      pair.statics_hr.timestamp};
    out.targets_hr = {detail::crop_channels(pair.targets_hr.values, hi0, hj0, hr_patch,
                                            hr_patch),
                      pair.targets_hr.channel_names, pair.targets_hr.units,
                      detail::crop_grid(pair.targets_hr.grid, hi0, hj0, hr_patch, hr_patch),
                      pair.targets_hr.timestamp};
    return out;
}

}  // namespace downscale::data
