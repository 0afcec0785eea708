#pragma once

#include <cmath>

#include "downscale/data/field.hpp"

namespace downscale::data {

namespace detail {

inline std::int64_t clamp_index(std::int64_t i, std::int64_t n) {
    return i < 0 ? 0 : (i >= n ? n - 1 : i);
}

// Index of the source pixel whose center is nearest to coordinate `coord`.
inline std::int64_t nearest_index(double coord, double origin, double pixel_size,
                                  std::int64_t n) {
    const double u = (coord - origin) / pixel_size - 0.5;
    return clamp_index(static_cast<std::int64_t>(std::llround(u)), n);
}

}  // namespace detail

// Nearest-neighbor resampling onto an arbitrary grid over the same extent.
inline FieldStack regrid_nearest(const FieldStack& src, const GridSpec& dst_grid) {
    src.validate(true);
    dst_grid.validate();
    if (!src.grid.same_extent(dst_grid))
        fail<AlignmentError>("regrid_nearest: source and destination extents differ");

    const std::int64_t C = src.channels();
    Tensorf out({C, dst_grid.ny, dst_grid.nx});
    std::vector<std::int64_t> src_j(dst_grid.nx), src_i(dst_grid.ny);
    for (std::int64_t j = 0; j < dst_grid.nx; ++j)
        src_j[j] = detail::nearest_index(dst_grid.center_x(j), src.grid.origin_x,
                                         src.grid.pixel_size, src.grid.nx);
    for (std::int64_t i = 0; i < dst_grid.ny; ++i)
        src_i[i] = detail::nearest_index(dst_grid.center_y(i), src.grid.origin_y,
                                         src.grid.pixel_size, src.grid.ny);
    for (std::int64_t c = 0; c < C; ++c)
        for (std::int64_t i = 0; i < dst_grid.ny; ++i)
            for (std::int64_t j = 0; j < dst_grid.nx; ++j)
                out.at(c, i, j) = src.values.at(c, src_i[i], src_j[j]);

    return {std::move(out), src.channel_names, src.units, dst_grid, src.timestamp};
}

namespace detail {

// Separable 3-point (order-2 Lagrange) upsampling along one axis in pixel-center
// coordinates. Reproduces polynomials of degree <= 2 exactly.
inline void quad_axis_weights(std::int64_t n_src, std::int64_t factor,
                              std::vector<std::int64_t>& center,
                              std::vector<double>& wm, std::vector<double>& w0,
                              std::vector<double>& wp) {
    const std::int64_t n_dst = n_src * factor;
    center.resize(n_dst);
    wm.resize(n_dst);
    w0.resize(n_dst);
    wp.resize(n_dst);
    for (std::int64_t j = 0; j < n_dst; ++j) {
        const double u = (static_cast<double>(j) + 0.5) / static_cast<double>(factor) - 0.5;
        std::int64_t k = static_cast<std::int64_t>(std::llround(u));
        if (k < 1) k = 1;
        if (k > n_src - 2) k = n_src - 2;
        const double d = u - static_cast<double>(k);
        center[j] = k;
        wm[j] = 0.5 * d * (d - 1.0);
        w0[j] = 1.0 - d * d;
        wp[j] = 0.5 * d * (d + 1.0);
    }
}

}  // namespace detail

// Piecewise-quadratic separable upsampling by an integer factor (the non-learned
// interpolation baseline).
inline FieldStack interp_quadratic(const FieldStack& src, std::int64_t factor) {
    src.validate(true);
    if (factor < 2) fail<ConfigError>("interp_quadratic: factor must be >= 2");
    if (src.grid.nx < 3 || src.grid.ny < 3)
        fail<ShapeError>("interp_quadratic: need at least 3 pixels per axis");

    const std::int64_t C = src.channels(), ny = src.grid.ny, nx = src.grid.nx;
    const std::int64_t NY = ny * factor, NX = nx * factor;
    std::vector<std::int64_t> cx, cy;
    std::vector<double> xm, x0, xp, ym, y0, yp;
    detail::quad_axis_weights(nx, factor, cx, xm, x0, xp);
    detail::quad_axis_weights(ny, factor, cy, ym, y0, yp);

    Tensorf out({C, NY, NX});
    Tensord row({nx});
    for (std::int64_t c = 0; c < C; ++c)
        for (std::int64_t I = 0; I < NY; ++I) {
            const std::int64_t k = cy[I];
            for (std::int64_t j = 0; j < nx; ++j)
                row[j] = ym[I] * src.values.at(c, k - 1, j) + y0[I] * src.values.at(c, k, j) +
                         yp[I] * src.values.at(c, k + 1, j);
            for (std::int64_t J = 0; J < NX; ++J) {
                const std::int64_t m = cx[J];
                out.at(c, I, J) = static_cast<float>(xm[J] * row[m - 1] + x0[J] * row[m] +
                                                     xp[J] * row[m + 1]);
            }
        }

    return {std::move(out), src.channel_names, src.units, refine(src.grid, factor),
            src.timestamp};
}

// Integer class map -> per-class binary masks.
inline FieldStack landcover_onehot(const FieldStack& classmap, std::int64_t n_classes) {
    classmap.validate();
    if (classmap.channels() != 1) fail<ShapeError>("landcover_onehot: expected one channel");
    if (n_classes < 1) fail<ConfigError>("landcover_onehot: n_classes must be >= 1");

    const std::int64_t ny = classmap.grid.ny, nx = classmap.grid.nx;
    Tensorf out({n_classes, ny, nx});
    for (std::int64_t i = 0; i < ny * nx; ++i) {
        const float v = classmap.values[i];
        const std::int64_t k = static_cast<std::int64_t>(v);
        if (v != static_cast<float>(k) || k < 0 || k >= n_classes)
            fail<IngestionError>("landcover_onehot: label " + std::to_string(v) +
                                 " outside [0, " + std::to_string(n_classes) + ")");
        out[k * ny * nx + i] = 1.0f;
    }

    std::vector<std::string> names(n_classes), units(n_classes, "mask");
    for (std::int64_t k = 0; k < n_classes; ++k) names[k] = "lc_" + std::to_string(k);
    return {std::move(out), std::move(names), std::move(units), classmap.grid,
            classmap.timestamp};
}

}  // namespace downscale::data
