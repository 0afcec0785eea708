#pragma once

#include <optional>
#include <string>
#include <vector>

#include "downscale/core/tensor.hpp"
#include "downscale/data/grid.hpp"

namespace downscale::data {

// A stack of co-registered channels on one grid at one instant.
struct FieldStack {
    Tensorf values;  // (channels, ny, nx)
    std::vector<std::string> channel_names;
    std::vector<std::string> units;
    GridSpec grid;
    std::optional<std::int64_t> timestamp;

    std::int64_t channels() const { return values.numel() ? values.shape()[0] : 0; }

    void validate(bool allow_nan_channels = false) const {
        grid.validate();
        const auto& s = values.shape();
        if (s.size() != 3) fail<ShapeError>("field stack: values must be (channels, ny, nx)");
        if (s[1] != grid.ny || s[2] != grid.nx)
            fail<AlignmentError>("field stack: array dims " + values.shape_str() +
                                 " do not match grid " + std::to_string(grid.ny) + "x" +
                                 std::to_string(grid.nx));
        if (channel_names.size() != static_cast<std::size_t>(s[0]))
            fail<ShapeError>("field stack: channel_names length must equal channels");
        if (!units.empty() && units.size() != channel_names.size())
            fail<ShapeError>("field stack: units length must equal channels");
        if (!allow_nan_channels && !values.all_finite())
            fail<IngestionError>("field stack: non-finite values present");
    }

    std::int64_t channel_index(const std::string& name) const {
        for (std::size_t i = 0; i < channel_names.size(); ++i)
            if (channel_names[i] == name) return static_cast<std::int64_t>(i);
        fail<ConfigError>("field stack: no channel named " + name);
    }

    // View-free copy of one channel as (ny, nx).
    Tensorf channel(std::int64_t c) const {
        const auto& s = values.shape();
        check(c >= 0 && c < s[0], "field stack: channel index out of range");
        Tensorf out({s[1], s[2]});
        const std::int64_t plane = s[1] * s[2];
        for (std::int64_t i = 0; i < plane; ++i) out[i] = values[c * plane + i];
        return out;
    }
};

// The aligned triple consumed by every trainer: LR dynamical predictors,
// HR static descriptors, HR target fields.
struct SamplePair {
    FieldStack predictors_lr;
    FieldStack statics_hr;
    FieldStack targets_hr;
    std::int64_t factor = 8;

    void validate() const {
        predictors_lr.validate(true);
        statics_hr.validate();
        targets_hr.validate();
        check_grid_pair(statics_hr.grid, predictors_lr.grid, factor);
        if (!(targets_hr.grid == statics_hr.grid))
            fail<AlignmentError>("sample pair: target and static grids differ");
    }
};

}  // namespace downscale::data
