#pragma once

#include "downscale/data/container.hpp"
#include "downscale/nn/optim.hpp"

namespace downscale::nn {

using io::json;

// Checkpoints reuse the array-pack container: raw weights under "model/",
// running buffers under "buffers/", averaged weights under "ema/". Shape and
// architecture metadata live in the pack attrs.
template <typename T>
void save_checkpoint(const std::string& path, const Module<T>& m, const Ema<T>* ema,
                     json attrs) {
    io::ContainerWriter w(path);
    if (attrs.is_null()) attrs = json::object();
    attrs["kind"] = attrs.value("kind", "checkpoint");
    w.attrs() = std::move(attrs);
    auto dims_for = [](const Tensor<T>& t) {
        std::vector<std::string> d(t.shape().size());
        for (std::size_t i = 0; i < d.size(); ++i) d[i] = "d" + std::to_string(i);
        return d;
    };
    for (auto& [name, v] : m.named_parameters())
        w.add("model/" + name, dims_for(v->value), v->value.template cast<float>());
    for (auto& [name, b] : m.named_buffers())
        w.add("buffers/" + name, dims_for(*b), b->template cast<float>());
    if (ema) {
        const auto& named = m.named_parameters();
        const auto& shadow = ema->shadow();
        for (std::size_t k = 0; k < named.size(); ++k)
            w.add("ema/" + named[k].first, dims_for(shadow[k]),
                  shadow[k].template cast<float>());
    }
    w.finish();
}

// Loads weights into an already-constructed module. When use_ema is set and
// averaged weights are present they replace the raw ones. Returns the attrs.
template <typename T>
json load_checkpoint(const std::string& path, Module<T>& m, Ema<T>* ema = nullptr,
                     bool use_ema = false) {
    io::Container c = io::Container::open(path);
    auto read_into = [&](const std::string& key, Tensor<T>& dst) {
        Tensorf t = c.read(key);
        if (t.shape() != dst.shape())
            fail<IoError>(path + ": shape mismatch for " + key + " (" + t.shape_str() + " vs " +
                          dst.shape_str() + ")");
        dst = t.cast<T>();
    };
    for (auto& [name, v] : m.named_parameters()) {
        const std::string key = (use_ema && c.has("ema/" + name)) ? "ema/" + name
                                                                  : "model/" + name;
        read_into(key, v->value);
    }
    for (auto& [name, b] : m.named_buffers()) read_into("buffers/" + name, *b);
    if (ema) {
        const auto& named = m.named_parameters();
        auto& shadow = ema->shadow();
        for (std::size_t k = 0; k < named.size(); ++k) {
            const std::string key = "ema/" + named[k].first;
            if (c.has(key)) read_into(key, shadow[k]);
        }
    }
    return c.attrs();
}

// Reads only the metadata of a checkpoint (to construct the right module).
inline json checkpoint_attrs(const std::string& path) {
    return io::Container::open(path).attrs();
}

}  // namespace downscale::nn
