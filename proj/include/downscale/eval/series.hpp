#pragma once

#include "downscale/data/container.hpp"
#include "downscale/data/loader.hpp"

namespace downscale::eval {

using data::json;

// A time series of co-registered fields, the unit every evaluation consumes:
// model predictions and reference truth both arrive in this shape.
struct FieldSeries {
    Tensorf values;  // (T, v, ny, nx)
    std::vector<std::string> channel_names;
    std::vector<std::int64_t> timestamps;
    data::GridSpec grid;

    std::int64_t size() const { return values.numel() ? values.shape()[0] : 0; }

    void validate() const {
        const auto& s = values.shape();
        if (s.size() != 4) fail<ShapeError>("field series: values must be (T, v, ny, nx)");
        if (static_cast<std::int64_t>(timestamps.size()) != s[0])
            fail<ShapeError>("field series: timestamps length must equal T");
        if (channel_names.size() != static_cast<std::size_t>(s[1]))
            fail<ShapeError>("field series: channel_names length must equal v");
        if (s[2] != grid.ny || s[3] != grid.nx)
            fail<AlignmentError>("field series: array dims " + values.shape_str() +
                                 " do not match grid " + std::to_string(grid.ny) + "x" +
                                 std::to_string(grid.nx));
    }

    std::int64_t channel_index(const std::string& name) const {
        for (std::size_t i = 0; i < channel_names.size(); ++i)
            if (channel_names[i] == name) return static_cast<std::int64_t>(i);
        fail<ConfigError>("field series: no channel named " + name);
    }

    // Copy of one channel as (T, ny, nx).
    Tensorf channel(std::int64_t c) const {
        const auto& s = values.shape();
        check(c >= 0 && c < s[1], "field series: channel index out of range");
        Tensorf out({s[0], s[2], s[3]});
        const std::int64_t plane = s[2] * s[3];
        for (std::int64_t t = 0; t < s[0]; ++t)
            std::copy_n(values.data() + (t * s[1] + c) * plane, plane,
                        out.data() + t * plane);
        return out;
    }
};

inline FieldSeries truth_series(const data::SplitData& d) {
    FieldSeries s;
    s.values = d.targets.clone();
    s.channel_names = d.target_channels;
    s.timestamps = d.timestamps;
    s.grid = d.hr_grid;
    s.validate();
    return s;
}

inline void write_prediction_archive(const std::string& path, const FieldSeries& s,
                                     json extra_attrs = json::object()) {
    s.validate();
    io::ContainerWriter w(path);
    w.attrs() = std::move(extra_attrs);
    w.attrs()["kind"] = "prediction-archive";
    w.attrs()["grid"] = data::grid_to_json(s.grid);
    Tensorf ts({static_cast<std::int64_t>(s.timestamps.size())});
    for (std::size_t i = 0; i < s.timestamps.size(); ++i)
        ts[static_cast<std::int64_t>(i)] = static_cast<float>(s.timestamps[i]);
    w.add("fields", {"time", "channel", "y", "x"}, s.values,
          {{"channel_names", s.channel_names}});
    w.add("timestamps", {"time"}, ts, {{"units", "hours"}});
    w.finish();
}

inline FieldSeries load_prediction_archive(const std::string& path) {
    io::Container r = io::Container::open(path);
    if (r.attrs().value("kind", "") != "prediction-archive")
        fail<IoError>("not a prediction archive: " + path);
    FieldSeries s;
    s.values = r.read("fields");
    s.channel_names =
        r.meta("fields").attrs.value("channel_names", std::vector<std::string>{});
    s.grid = data::grid_from_json(r.attrs().at("grid"));
    Tensorf ts = r.read("timestamps");
    s.timestamps.resize(static_cast<std::size_t>(ts.numel()));
    for (std::int64_t i = 0; i < ts.numel(); ++i)
        s.timestamps[static_cast<std::size_t>(i)] = static_cast<std::int64_t>(ts[i]);
    s.validate();
    return s;
}

}  // namespace downscale::eval
