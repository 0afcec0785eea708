#pragma once

#include <string>
#include <utility>
#include <vector>

#include "downscale/autograd/graph.hpp"
#include "downscale/core/rng.hpp"

namespace downscale::nn {

using ag::Var;

// Flat parameter/buffer registry. Layers register into the owning model's
// registry under dotted names, so checkpoints address tensors by path.
template <typename T>
class Module {
  public:
    Module() = default;
    Module(const Module&) = delete;
    Module& operator=(const Module&) = delete;
    virtual ~Module() = default;

    Var<T> add_param(const std::string& name, Tensor<T> init) {
        for (auto& [n, v] : params_)
            if (n == name) fail<ConfigError>("duplicate parameter name: " + name);
        auto v = ag::leaf<T>(std::move(init), true);
        params_.emplace_back(name, v);
        return v;
    }

    std::shared_ptr<Tensor<T>> add_buffer(const std::string& name, Tensor<T> init) {
        for (auto& [n, b] : buffers_)
            if (n == name) fail<ConfigError>("duplicate buffer name: " + name);
        auto b = std::make_shared<Tensor<T>>(std::move(init));
        buffers_.emplace_back(name, b);
        return b;
    }

    const std::vector<std::pair<std::string, Var<T>>>& named_parameters() const {
        return params_;
    }
    const std::vector<std::pair<std::string, std::shared_ptr<Tensor<T>>>>& named_buffers()
        const {
        return buffers_;
    }

    std::vector<Var<T>> parameters() const {
        std::vector<Var<T>> out;
        out.reserve(params_.size());
        for (auto& [n, v] : params_) out.push_back(v);
        return out;
    }

    std::int64_t parameter_count() const {
        std::int64_t n = 0;
        for (auto& [name, v] : params_) n += v->value.numel();
        return n;
    }

    void set_training(bool on) { training_ = on; }
    bool training() const { return training_; }

    // Order-insensitive digest of all parameter values, for frozen-weight guards.
    std::uint64_t weights_digest() const {
        std::uint64_t h = 0;
        for (auto& [name, v] : params_) {
            std::uint64_t hp = fnv1a64(name);
            hp = fnv1a64(v->value.data(), static_cast<std::size_t>(v->value.numel()) * sizeof(T),
                         hp);
            h ^= hp;
        }
        return h;
    }

  private:
    std::vector<std::pair<std::string, Var<T>>> params_;
    std::vector<std::pair<std::string, std::shared_ptr<Tensor<T>>>> buffers_;
    bool training_ = true;
};

}  // namespace downscale::nn
