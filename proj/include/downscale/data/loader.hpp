#pragma once

#include <algorithm>
#include <filesystem>

#include "downscale/data/container.hpp"
#include "downscale/data/normalize.hpp"
#include "downscale/data/patch.hpp"
#include "downscale/data/synthetic.hpp"

namespace downscale::data {

// One split held fully in memory; desk-scale archives are a few hundred MB at
// most, so there is no streaming layer.
struct SplitData {
    Tensorf predictors;  // (T, 14, lr_ny, lr_nx)
    Tensorf statics;     // (18, hr_ny, hr_nx)
    Tensorf targets;     // (T, v, hr_ny, hr_nx)
    std::vector<std::int64_t> timestamps;
    GridSpec hr_grid, lr_grid;
    std::int64_t factor = 8;
    std::vector<std::string> predictor_channels, static_channels, target_channels;

    std::int64_t size() const { return predictors.numel() ? predictors.shape()[0] : 0; }

    SamplePair pair_at(std::int64_t t) const {
        check(t >= 0 && t < size(), "split: timestamp index out of range");
        const auto& ps = predictors.shape();
        const auto& ts = targets.shape();
        SamplePair p;
        p.factor = factor;
        Tensorf pred({ps[1], ps[2], ps[3]});
        std::copy_n(predictors.data() + t * pred.numel(), pred.numel(), pred.data());
        Tensorf targ({ts[1], ts[2], ts[3]});
        std::copy_n(targets.data() + t * targ.numel(), targ.numel(), targ.data());
        p.predictors_lr = {std::move(pred), predictor_channels, {}, lr_grid, timestamps[t]};
        p.statics_hr = {statics.clone(), static_channels, {}, hr_grid, timestamps[t]};
        p.targets_hr = {std::move(targ), target_channels, {}, hr_grid, timestamps[t]};
        return p;
    }
};

inline void write_split_archive(const std::string& path, const DatasetManifest& m, Split s,
                                const Tensorf& predictors, const Tensorf& statics,
                                const Tensorf& targets,
                                const std::vector<std::int64_t>& timestamps) {
    io::ContainerWriter w(path);
    w.attrs() = {{"kind", "dataset-split"},
                 {"split", split_name(s)},
                 {"variable", m.variable},
                 {"factor", m.factor},
                 {"seed", m.seed},
                 {"hr_grid", grid_to_json(m.hr_grid)},
                 {"lr_grid", grid_to_json(m.lr_grid)}};
    Tensorf ts({static_cast<std::int64_t>(timestamps.size())});
    for (std::size_t i = 0; i < timestamps.size(); ++i)
        ts[static_cast<std::int64_t>(i)] = static_cast<float>(timestamps[i]);
    w.add("predictors_lr", {"time", "channel", "y", "x"}, predictors,
          {{"channel_names", m.predictor_channels}});
    w.add("statics_hr", {"channel", "y", "x"}, statics,
          {{"channel_names", m.static_channels}});
    w.add("targets_hr", {"time", "channel", "y", "x"}, targets,
          {{"channel_names", m.target_channels}});
    w.add("timestamps", {"time"}, ts, {{"units", "hours"}});
    w.finish();
}

inline SplitData load_split_archive(const std::string& path) {
    io::Container c = io::Container::open(path);
    SplitData d;
    d.predictors = c.read("predictors_lr");
    d.statics = c.read("statics_hr");
    d.targets = c.read("targets_hr");
    Tensorf ts = c.read("timestamps");
    d.timestamps.resize(ts.numel());
    for (std::int64_t i = 0; i < ts.numel(); ++i)
        d.timestamps[i] = static_cast<std::int64_t>(ts[i]);
    const json& a = c.attrs();
    d.hr_grid = grid_from_json(a.at("hr_grid"));
    d.lr_grid = grid_from_json(a.at("lr_grid"));
    d.factor = a.at("factor").get<std::int64_t>();
    d.predictor_channels =
        c.meta("predictors_lr").attrs.at("channel_names").get<std::vector<std::string>>();
    d.static_channels =
        c.meta("statics_hr").attrs.at("channel_names").get<std::vector<std::string>>();
    d.target_channels =
        c.meta("targets_hr").attrs.at("channel_names").get<std::vector<std::string>>();
    return d;
}

inline SplitData load_split(const std::string& dir, const DatasetManifest& m, Split s) {
    auto it = m.archives.find(split_name(s));
    if (it == m.archives.end())
        fail<IoError>(std::string("dataset: no archive for split ") + split_name(s));
    return load_split_archive((std::filesystem::path(dir) / it->second).string());
}

// Generates, splits, and writes a complete dataset directory: one archive per
// non-empty split plus manifest.json. Returns the manifest.
inline DatasetManifest generate_synthetic_dataset(const SyntheticConfig& cfg,
                                                  std::uint64_t seed,
                                                  const std::string& out_dir) {
    SyntheticFields f = generate_synthetic_fields(cfg, seed);

    DatasetManifest m;
    m.timestamps = f.timestamps;
    m.hr_grid = f.hr_grid;
    m.lr_grid = f.lr_grid;
    m.factor = cfg.factor;
    m.variable = cfg.variable;
    m.predictor_channels = predictor_channel_names();
    m.static_channels = static_channel_names();
    m.target_channels = cfg.variable == "uv" ? std::vector<std::string>{"u10", "v10"}
                                             : std::vector<std::string>{"t2m"};
    m.seed = seed;
    m.synthetic = true;
    m.split.assign(m.timestamps.size(), Split::unused);
    m = split_dataset(std::move(m), cfg.fractions);

    std::filesystem::create_directories(out_dir);
    const auto& ps = f.predictors.shape();
    const auto& ts = f.targets.shape();
    for (Split s : {Split::train, Split::val, Split::test}) {
        const auto idx = m.indices_for(s);
        if (idx.empty()) continue;
        const std::int64_t n = static_cast<std::int64_t>(idx.size());
        Tensorf pred({n, ps[1], ps[2], ps[3]});
        Tensorf targ({n, ts[1], ts[2], ts[3]});
        std::vector<std::int64_t> stamps(idx.size());
        const std::int64_t pn = ps[1] * ps[2] * ps[3], tn = ts[1] * ts[2] * ts[3];
        for (std::int64_t k = 0; k < n; ++k) {
            std::copy_n(f.predictors.data() + idx[k] * pn, pn, pred.data() + k * pn);
            std::copy_n(f.targets.data() + idx[k] * tn, tn, targ.data() + k * tn);
            stamps[k] = f.timestamps[idx[k]];
        }
        const std::string file = std::string(split_name(s)) + ".dspack";
        m.archives[split_name(s)] = file;
        write_split_archive((std::filesystem::path(out_dir) / file).string(), m, s, pred,
                            f.statics, targ, stamps);
    }
    m.save((std::filesystem::path(out_dir) / "manifest.json").string());
    return m;
}

// Copy of the timestamp rows [lo, hi) of a split; statics and metadata are
// shared unchanged.
inline SplitData time_slice(const SplitData& d, std::int64_t lo, std::int64_t hi) {
    check(0 <= lo && lo < hi && hi <= d.size(), "time_slice: range outside the split");
    const auto& ps = d.predictors.shape();
    const auto& ts = d.targets.shape();
    SplitData out;
    out.predictors = Tensorf({hi - lo, ps[1], ps[2], ps[3]});
    out.targets = Tensorf({hi - lo, ts[1], ts[2], ts[3]});
    const std::int64_t pn = ps[1] * ps[2] * ps[3], tn = ts[1] * ts[2] * ts[3];
    std::copy_n(d.predictors.data() + lo * pn, (hi - lo) * pn, out.predictors.data());
    std::copy_n(d.targets.data() + lo * tn, (hi - lo) * tn, out.targets.data());
    out.statics = d.statics.clone();
    out.timestamps.assign(d.timestamps.begin() + lo, d.timestamps.begin() + hi);
    out.hr_grid = d.hr_grid;
    out.lr_grid = d.lr_grid;
    out.factor = d.factor;
    out.predictor_channels = d.predictor_channels;
    out.static_channels = d.static_channels;
    out.target_channels = d.target_channels;
    return out;
}

// --- batching ------------------------------------------------------------

// Dense batch in model layout; statics are repeated across the batch.
struct Batch {
    Tensorf predictors;  // (B, 14, lr, lr)
    Tensorf statics;     // (B, 18, hr, hr)
    Tensorf targets;     // (B, v, hr, hr)
};

inline Batch make_batch(const SplitData& d, const std::vector<std::int64_t>& idx) {
    check(!idx.empty(), "make_batch: empty index list");
    const auto& ps = d.predictors.shape();
    const auto& ss = d.statics.shape();
    const auto& ts = d.targets.shape();
    const std::int64_t B = static_cast<std::int64_t>(idx.size());
    Batch b{Tensorf({B, ps[1], ps[2], ps[3]}), Tensorf({B, ss[0], ss[1], ss[2]}),
            Tensorf({B, ts[1], ts[2], ts[3]})};
    const std::int64_t pn = ps[1] * ps[2] * ps[3], sn = ss[0] * ss[1] * ss[2],
                       tn = ts[1] * ts[2] * ts[3];
    for (std::int64_t k = 0; k < B; ++k) {
        check(idx[k] >= 0 && idx[k] < d.size(), "make_batch: index out of range");
        std::copy_n(d.predictors.data() + idx[k] * pn, pn, b.predictors.data() + k * pn);
        std::copy_n(d.statics.data(), sn, b.statics.data() + k * sn);
        std::copy_n(d.targets.data() + idx[k] * tn, tn, b.targets.data() + k * tn);
    }
    return b;
}

// Aligned random crops of a batch, one independent offset per row.
inline Batch crop_batch(const Batch& full, std::int64_t factor, std::int64_t hr_patch,
                        std::uint64_t seed) {
    const auto& ss = full.statics.shape();
    if (hr_patch % factor != 0)
        fail<SamplingError>("crop_batch: patch must be a multiple of the grid factor");
    if (hr_patch > ss[2] || hr_patch > ss[3])
        fail<SamplingError>("crop_batch: patch exceeds domain");
    const std::int64_t lr_patch = hr_patch / factor;
    const std::int64_t B = ss[0];
    const auto& psh = full.predictors.shape();
    const auto& tsh = full.targets.shape();
    Batch out{Tensorf({B, psh[1], lr_patch, lr_patch}),
              Tensorf({B, ss[1], hr_patch, hr_patch}),
              Tensorf({B, tsh[1], hr_patch, hr_patch})};
    Rng rng = Rng::keyed(seed, fnv1a64("crop_batch"));
    auto copy_crop = [](const Tensorf& src, Tensorf& dst, std::int64_t n, std::int64_t i0,
                        std::int64_t j0) {
        const auto& s = src.shape();
        const auto& o = dst.shape();
        for (std::int64_t c = 0; c < s[1]; ++c)
            for (std::int64_t i = 0; i < o[2]; ++i)
                for (std::int64_t j = 0; j < o[3]; ++j)
                    dst.at(n, c, i, j) = src.at(n, c, i0 + i, j0 + j);
    };
    for (std::int64_t n = 0; n < B; ++n) {
        const std::int64_t li0 = rng.uniform_int(psh[2] - lr_patch + 1);
        const std::int64_t lj0 = rng.uniform_int(psh[3] - lr_patch + 1);
        copy_crop(full.predictors, out.predictors, n, li0, lj0);
        copy_crop(full.statics, out.statics, n, li0 * factor, lj0 * factor);
        copy_crop(full.targets, out.targets, n, li0 * factor, lj0 * factor);
    }
    return out;
}

}  // namespace downscale::data
