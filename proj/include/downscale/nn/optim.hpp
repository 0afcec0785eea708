#pragma once

#include <cmath>
#include <unordered_map>

#include "downscale/nn/module.hpp"

namespace downscale::nn {

// Adam with decoupled weight decay.
template <typename T>
class AdamW {
  public:
    struct Config {
        double lr = 1e-3;
        double beta1 = 0.9;
        double beta2 = 0.999;
        double eps = 1e-8;
        double weight_decay = 0.0;
    };

    AdamW(std::vector<Var<T>> params, Config cfg) : params_(std::move(params)), cfg_(cfg) {
        m_.reserve(params_.size());
        v_.reserve(params_.size());
        for (auto& p : params_) {
            m_.emplace_back(p->value.shape(), T(0));
            v_.emplace_back(p->value.shape(), T(0));
        }
    }

    void set_lr(double lr) { cfg_.lr = lr; }
    double lr() const { return cfg_.lr; }
    std::int64_t step_count() const { return t_; }

    void zero_grad() { ag::zero_grad(params_); }

    void step() {
        ++t_;
        const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
        for (std::size_t k = 0; k < params_.size(); ++k) {
            auto& p = params_[k];
            if (!p->grad.numel()) continue;
            Tensor<T>& m = m_[k];
            Tensor<T>& v = v_[k];
            for (std::int64_t i = 0; i < p->value.numel(); ++i) {
                const double g = static_cast<double>(p->grad[i]);
                const double mi = cfg_.beta1 * static_cast<double>(m[i]) + (1.0 - cfg_.beta1) * g;
                const double vi =
                    cfg_.beta2 * static_cast<double>(v[i]) + (1.0 - cfg_.beta2) * g * g;
                m[i] = static_cast<T>(mi);
                v[i] = static_cast<T>(vi);
                const double update = (mi / bc1) / (std::sqrt(vi / bc2) + cfg_.eps) +
                                      cfg_.weight_decay * static_cast<double>(p->value[i]);
                p->value[i] -= static_cast<T>(cfg_.lr * update);
            }
        }
    }

  private:
    std::vector<Var<T>> params_;
    Config cfg_;
    std::vector<Tensor<T>> m_, v_;
    std::int64_t t_ = 0;
};

// Returns the pre-clip global L2 norm.
template <typename T>
double clip_grad_norm(const std::vector<Var<T>>& params, double max_norm) {
    double sq = 0.0;
    for (auto& p : params) {
        if (!p->grad.numel()) continue;
        for (std::int64_t i = 0; i < p->grad.numel(); ++i) {
            const double g = static_cast<double>(p->grad[i]);
            sq += g * g;
        }
    }
    const double norm = std::sqrt(sq);
    if (norm > max_norm && norm > 0.0) {
        const T s = static_cast<T>(max_norm / norm);
        for (auto& p : params)
            for (std::int64_t i = 0; i < p->grad.numel(); ++i) p->grad[i] *= s;
    }
    return norm;
}

// Exponential moving average of a module's parameters. Shadow values are
// keyed by parameter name so they can be checkpointed alongside the raw
// weights and swapped in for evaluation.
template <typename T>
class Ema {
  public:
    Ema(const Module<T>& module, double decay) : module_(&module), decay_(decay) {
        for (auto& [name, v] : module.named_parameters()) shadow_.emplace_back(v->value.clone());
    }

    double decay() const { return decay_; }

    void update() {
        const auto& named = module_->named_parameters();
        for (std::size_t k = 0; k < named.size(); ++k) {
            const Tensor<T>& p = named[k].second->value;
            Tensor<T>& s = shadow_[k];
            for (std::int64_t i = 0; i < p.numel(); ++i)
                s[i] = static_cast<T>(decay_ * static_cast<double>(s[i]) +
                                      (1.0 - decay_) * static_cast<double>(p[i]));
        }
    }

    const std::vector<Tensor<T>>& shadow() const { return shadow_; }
    std::vector<Tensor<T>>& shadow() { return shadow_; }

    // Writes the averaged weights into the module (for sampling/eval).
    void copy_to_module() const {
        const auto& named = module_->named_parameters();
        for (std::size_t k = 0; k < named.size(); ++k) named[k].second->value = shadow_[k];
    }

  private:
    const Module<T>* module_;
    double decay_;
    std::vector<Tensor<T>> shadow_;
};

}  // namespace downscale::nn
