#pragma once

#include <array>
#include <fstream>
#include <map>

#include "downscale/data/grid.hpp"

namespace downscale::data {

enum class Split { train, val, test, unused };

inline const char* split_name(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::val: return "val";
        case Split::test: return "test";
        default: return "unused";
    }
}

inline Split split_from_name(const std::string& n) {
    for (Split s : {Split::train, Split::val, Split::test, Split::unused})
        if (n == split_name(s)) return s;
    fail<ConfigError>("unknown split name: " + n);
}

// Index of a prepared dataset: chronological timestamps, per-timestamp split
// assignment, per-split archive files, grids, channels, generator seed.
struct DatasetManifest {
    std::vector<std::int64_t> timestamps;
    std::vector<Split> split;
    std::map<std::string, std::string> archives;  // split name -> file name
    GridSpec hr_grid, lr_grid;
    std::int64_t factor = 8;
    std::string variable = "t2m";
    std::vector<std::string> predictor_channels;
    std::vector<std::string> static_channels;
    std::vector<std::string> target_channels;
    std::uint64_t seed = 0;
    bool synthetic = false;

    void validate() const {
        check_grid_pair(hr_grid, lr_grid, factor);
        if (split.size() != timestamps.size())
            fail<ConfigError>("manifest: split assignment length mismatch");
        for (std::size_t i = 1; i < timestamps.size(); ++i)
            if (timestamps[i] <= timestamps[i - 1])
                fail<ConfigError>("manifest: timestamps must be strictly increasing");
    }

    std::vector<std::int64_t> indices_for(Split s) const {
        std::vector<std::int64_t> idx;
        for (std::size_t i = 0; i < split.size(); ++i)
            if (split[i] == s) idx.push_back(static_cast<std::int64_t>(i));
        return idx;
    }

    json to_json() const {
        json j;
        j["timestamps"] = timestamps;
        std::vector<std::string> names(split.size());
        for (std::size_t i = 0; i < split.size(); ++i) names[i] = split_name(split[i]);
        j["split"] = names;
        j["archives"] = archives;
        j["hr_grid"] = grid_to_json(hr_grid);
        j["lr_grid"] = grid_to_json(lr_grid);
        j["factor"] = factor;
        j["variable"] = variable;
        j["predictor_channels"] = predictor_channels;
        j["static_channels"] = static_channels;
        j["target_channels"] = target_channels;
        j["seed"] = seed;
        j["synthetic"] = synthetic;
        return j;
    }

    static DatasetManifest from_json(const json& j) {
        DatasetManifest m;
        m.timestamps = j.at("timestamps").get<std::vector<std::int64_t>>();
        for (const auto& n : j.at("split").get<std::vector<std::string>>())
            m.split.push_back(split_from_name(n));
        m.archives = j.at("archives").get<std::map<std::string, std::string>>();
        m.hr_grid = grid_from_json(j.at("hr_grid"));
        m.lr_grid = grid_from_json(j.at("lr_grid"));
        m.factor = j.at("factor").get<std::int64_t>();
        m.variable = j.at("variable").get<std::string>();
        m.predictor_channels = j.at("predictor_channels").get<std::vector<std::string>>();
        m.static_channels = j.at("static_channels").get<std::vector<std::string>>();
        m.target_channels = j.at("target_channels").get<std::vector<std::string>>();
        m.seed = j.at("seed").get<std::uint64_t>();
        m.synthetic = j.at("synthetic").get<bool>();
        m.validate();
        return m;
    }

    void save(const std::string& path) const {
        std::ofstream f(path);
        if (!f) fail<IoError>("manifest: cannot write " + path);
        f << to_json().dump(2) << "\n";
    }

    static DatasetManifest load(const std::string& path) {
        std::ifstream f(path);
        if (!f) fail<IoError>("manifest: cannot read " + path);
        json j;
        f >> j;
        return from_json(j);
    }
};

// Assigns contiguous chronological blocks train -> val -> test; the remainder
// stays "unused".
inline DatasetManifest split_dataset(DatasetManifest m,
                                     std::array<double, 3> fractions = {0.70, 0.15, 0.05}) {
    double sum = 0.0;
    for (double f : fractions) {
        if (!(f > 0.0) || f > 1.0) fail<ConfigError>("split: fractions must lie in (0,1]");
        sum += f;
    }
    if (sum > 1.0 + 1e-9) fail<ConfigError>("split: fractions sum to more than 1");

    const std::int64_t n = static_cast<std::int64_t>(m.timestamps.size());
    m.split.assign(m.timestamps.size(), Split::unused);
    std::int64_t pos = 0;
    const Split order[3] = {Split::train, Split::val, Split::test};
    for (int k = 0; k < 3; ++k) {
        std::int64_t count = std::llround(static_cast<double>(n) * fractions[k]);
        count = std::min(count, n - pos);
        for (std::int64_t i = 0; i < count; ++i) m.split[pos + i] = order[k];
        pos += count;
    }
    return m;
}

}  // namespace downscale::data
