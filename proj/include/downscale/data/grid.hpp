#pragma once

#include <cmath>
#include <cstdint>

#include <json.hpp>

#include "downscale/common.hpp"

namespace downscale::data {

using json = nlohmann::json;

// Axis-aligned affine raster; pixel (i,j) covers
// [origin + j*pixel_size, origin + (j+1)*pixel_size) along x, same along y.
struct GridSpec {
    double origin_x = 0.0;
    double origin_y = 0.0;
    double pixel_size = 1.0;
    std::int64_t nx = 1;
    std::int64_t ny = 1;

    void validate() const {
        if (nx < 1 || ny < 1) fail<ConfigError>("grid: nx, ny must be >= 1");
        if (!(pixel_size > 0)) fail<ConfigError>("grid: pixel_size must be > 0");
    }

    double extent_x() const { return static_cast<double>(nx) * pixel_size; }
    double extent_y() const { return static_cast<double>(ny) * pixel_size; }
    double center_x(std::int64_t j) const {
        return origin_x + (static_cast<double>(j) + 0.5) * pixel_size;
    }
    double center_y(std::int64_t i) const {
        return origin_y + (static_cast<double>(i) + 0.5) * pixel_size;
    }

    bool same_extent(const GridSpec& other, double tol = 1e-9) const {
        return std::abs(origin_x - other.origin_x) <= tol &&
               std::abs(origin_y - other.origin_y) <= tol &&
               std::abs(extent_x() - other.extent_x()) <= tol &&
               std::abs(extent_y() - other.extent_y()) <= tol;
    }

    bool operator==(const GridSpec& o) const {
        return origin_x == o.origin_x && origin_y == o.origin_y && pixel_size == o.pixel_size &&
               nx == o.nx && ny == o.ny;
    }
};

// The paired-resolution relationship: HR refines LR by an integer factor over
// the identical extent.
inline void check_grid_pair(const GridSpec& hr, const GridSpec& lr, std::int64_t factor) {
    hr.validate();
    lr.validate();
    if (factor < 1) fail<ConfigError>("grid pair: factor must be >= 1");
    if (hr.nx != factor * lr.nx || hr.ny != factor * lr.ny)
        fail<AlignmentError>("grid pair: hr dims must be factor x lr dims");
    if (std::abs(hr.pixel_size * static_cast<double>(factor) - lr.pixel_size) > 1e-9)
        fail<AlignmentError>("grid pair: pixel sizes inconsistent with factor");
    if (!hr.same_extent(lr)) fail<AlignmentError>("grid pair: extents differ");
}

// HR grid covering the same extent as `lr` at `factor` times the resolution.
inline GridSpec refine(const GridSpec& lr, std::int64_t factor) {
    lr.validate();
    if (factor < 1) fail<ConfigError>("refine: factor must be >= 1");
    return {lr.origin_x, lr.origin_y, lr.pixel_size / static_cast<double>(factor),
            lr.nx * factor, lr.ny * factor};
}

inline json grid_to_json(const GridSpec& g) {
    return {{"origin_x", g.origin_x},
            {"origin_y", g.origin_y},
            {"pixel_size", g.pixel_size},
            {"nx", g.nx},
            {"ny", g.ny}};
}

inline GridSpec grid_from_json(const json& j) {
    GridSpec g{j.at("origin_x").get<double>(), j.at("origin_y").get<double>(),
               j.at("pixel_size").get<double>(), j.at("nx").get<std::int64_t>(),
               j.at("ny").get<std::int64_t>()};
    g.validate();
    return g;
}

}  // namespace downscale::data
