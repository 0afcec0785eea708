#pragma once

#include <memory>

#include "downscale/train/infer.hpp"

namespace downscale::train {

using io::json;

inline void require_stage(const json& attrs, const std::string& want, const std::string& path) {
    const std::string got = attrs.value("stage", "");
    if (got != want)
        fail<IoError>(path + ": expected a " + want + " checkpoint, found \"" + got + "\"");
}

// --- UNET / GAN generator --------------------------------------------------

inline json unet_arch_json(const models::UnetConfig& c) {
    return {{"in_channels", c.in_channels},
            {"out_channels", c.out_channels},
            {"base_width", c.base_width},
            {"levels", c.levels}};
}

inline models::UnetConfig unet_arch_from_json(const json& j) {
    models::UnetConfig c;
    c.in_channels = j.at("in_channels");
    c.out_channels = j.at("out_channels");
    c.base_width = j.at("base_width");
    c.levels = j.at("levels");
    return c;
}

template <typename T>
void save_unet(const std::string& path, const models::Unet<T>& unet, const Normalization& norm,
               std::int64_t factor, const std::string& stage = "unet", json extra = {}) {
    json attrs = std::move(extra);
    if (attrs.is_null()) attrs = json::object();
    attrs["stage"] = stage;
    attrs["arch"] = unet_arch_json(unet.config());
    attrs["normalization"] = norm.to_json();
    attrs["factor"] = factor;
    nn::save_checkpoint(path, unet, static_cast<const nn::Ema<T>*>(nullptr), std::move(attrs));
}

struct LoadedUnet {
    std::unique_ptr<models::Unet<float>> model;
    Normalization norm;
    std::int64_t factor = 8;
    json attrs;
};

inline LoadedUnet load_unet(const std::string& path, const std::string& stage = "unet") {
    json attrs = nn::checkpoint_attrs(path);
    require_stage(attrs, stage, path);
    LoadedUnet out;
    out.model = std::make_unique<models::Unet<float>>(unet_arch_from_json(attrs.at("arch")), 0);
    nn::load_checkpoint(path, *out.model);
    out.model->set_training(false);
    out.norm = Normalization::from_json(attrs.at("normalization"));
    out.factor = attrs.value("factor", 8);
    out.attrs = std::move(attrs);
    return out;
}

// --- discriminator ----------------------------------------------------------

template <typename T>
void save_discriminator(const std::string& path, const models::PatchGan<T>& disc,
                        json extra = {}) {
    json attrs = std::move(extra);
    if (attrs.is_null()) attrs = json::object();
    attrs["stage"] = "gan-discriminator";
    attrs["arch"] = {{"in_channels", disc.config().in_channels},
                     {"base_width", disc.config().base_width}};
    nn::save_checkpoint(path, disc, static_cast<const nn::Ema<T>*>(nullptr), std::move(attrs));
}

struct LoadedDiscriminator {
    std::unique_ptr<models::PatchGan<float>> model;
    json attrs;
};

inline LoadedDiscriminator load_discriminator(const std::string& path) {
    json attrs = nn::checkpoint_attrs(path);
    require_stage(attrs, "gan-discriminator", path);
    models::DiscriminatorConfig cfg;
    cfg.in_channels = attrs.at("arch").at("in_channels");
    cfg.base_width = attrs.at("arch").at("base_width");
    LoadedDiscriminator out;
    out.model = std::make_unique<models::PatchGan<float>>(cfg, 0);
    nn::load_checkpoint(path, *out.model);
    out.model->set_training(false);
    out.attrs = std::move(attrs);
    return out;
}

// --- VAE ---------------------------------------------------------------------

template <typename T>
void save_vae(const std::string& path, const models::Vae<T>& vae, const Normalization& norm,
              const std::vector<double>& sigma, bool residual_mode, json extra = {}) {
    json attrs = std::move(extra);
    if (attrs.is_null()) attrs = json::object();
    attrs["stage"] = "vae";
    attrs["arch"] = {{"in_channels", vae.config().in_channels},
                     {"base_width", vae.config().base_width},
                     {"levels", vae.config().levels},
                     {"latent_multiplier", vae.config().latent_multiplier}};
    attrs["normalization"] = norm.to_json();
    attrs["sigma"] = sigma;
    attrs["residual_mode"] = residual_mode;
    nn::save_checkpoint(path, vae, static_cast<const nn::Ema<T>*>(nullptr), std::move(attrs));
}

struct LoadedVae {
    std::unique_ptr<models::Vae<float>> model;
    Normalization norm;
    std::vector<double> sigma;
    bool residual_mode = true;
    json attrs;
};

inline LoadedVae load_vae(const std::string& path) {
    json attrs = nn::checkpoint_attrs(path);
    require_stage(attrs, "vae", path);
    models::VaeConfig cfg;
    cfg.in_channels = attrs.at("arch").at("in_channels");
    cfg.base_width = attrs.at("arch").at("base_width");
    cfg.levels = attrs.at("arch").at("levels");
    cfg.latent_multiplier = attrs.at("arch").at("latent_multiplier");
    LoadedVae out;
    out.model = std::make_unique<models::Vae<float>>(cfg, 0);
    nn::load_checkpoint(path, *out.model);
    out.model->set_training(false);
    out.norm = Normalization::from_json(attrs.at("normalization"));
    out.sigma = attrs.at("sigma").get<std::vector<double>>();
    out.residual_mode = attrs.value("residual_mode", true);
    out.attrs = std::move(attrs);
    return out;
}

// --- conditioner + denoiser ---------------------------------------------------

template <typename T>
void save_conditioner(const std::string& path, const models::Conditioner<T>& cond,
                      const nn::Ema<T>* ema, json extra = {}) {
    json attrs = std::move(extra);
    if (attrs.is_null()) attrs = json::object();
    attrs["stage"] = "conditioner";
    const auto& c = cond.cfg();
    attrs["arch"] = {{"predictor_channels", c.predictor_channels},
                     {"static_channels", c.static_channels},
                     {"static_factor", c.static_factor},
                     {"static_embed", c.static_embed},
                     {"static_width", c.static_width},
                     {"embed_dim", c.embed_dim},
                     {"afno_blocks", c.afno_blocks},
                     {"block_size", c.block_size},
                     {"levels", c.levels},
                     {"sparsity", c.sparsity}};
    nn::save_checkpoint(path, cond, ema, std::move(attrs));
}

struct LoadedConditioner {
    std::unique_ptr<models::Conditioner<float>> model;
    json attrs;
};

inline LoadedConditioner load_conditioner(const std::string& path, bool use_ema = true) {
    json attrs = nn::checkpoint_attrs(path);
    require_stage(attrs, "conditioner", path);
    const auto& a = attrs.at("arch");
    models::ConditionerConfig cfg;
    cfg.predictor_channels = a.at("predictor_channels");
    cfg.static_channels = a.at("static_channels");
    cfg.static_factor = a.at("static_factor");
    cfg.static_embed = a.at("static_embed");
    cfg.static_width = a.at("static_width");
    cfg.embed_dim = a.at("embed_dim");
    cfg.afno_blocks = a.at("afno_blocks");
    cfg.block_size = a.at("block_size");
    cfg.levels = a.at("levels");
    cfg.sparsity = a.at("sparsity");
    LoadedConditioner out;
    out.model = std::make_unique<models::Conditioner<float>>(cfg, 0);
    nn::load_checkpoint(path, *out.model, static_cast<nn::Ema<float>*>(nullptr), use_ema);
    out.model->set_training(false);
    out.attrs = std::move(attrs);
    return out;
}

template <typename T>
void save_denoiser(const std::string& path, const models::Denoiser<T>& den,
                   const nn::Ema<T>* ema, double latent_scale, std::int64_t schedule_T,
                   json extra = {}) {
    json attrs = std::move(extra);
    if (attrs.is_null()) attrs = json::object();
    attrs["stage"] = "denoiser";
    const auto& c = den.cfg();
    attrs["arch"] = {{"latent_channels", c.latent_channels},
                     {"base_width", c.base_width},
                     {"levels", c.levels},
                     {"cond_channels", c.cond_channels},
                     {"time_dim", c.time_dim}};
    attrs["latent_scale"] = latent_scale;
    attrs["schedule_T"] = schedule_T;
    nn::save_checkpoint(path, den, ema, std::move(attrs));
}

struct LoadedDenoiser {
    std::unique_ptr<models::Denoiser<float>> model;
    double latent_scale = 1.0;
    std::int64_t schedule_T = 1000;
    json attrs;
};

inline LoadedDenoiser load_denoiser(const std::string& path, bool use_ema = true) {
    json attrs = nn::checkpoint_attrs(path);
    require_stage(attrs, "denoiser", path);
    const auto& a = attrs.at("arch");
    models::DenoiserConfig cfg;
    cfg.latent_channels = a.at("latent_channels");
    cfg.base_width = a.at("base_width");
    cfg.levels = a.at("levels");
    cfg.cond_channels = a.at("cond_channels");
    cfg.time_dim = a.at("time_dim");
    LoadedDenoiser out;
    out.model = std::make_unique<models::Denoiser<float>>(cfg, 0);
    nn::load_checkpoint(path, *out.model, static_cast<nn::Ema<float>*>(nullptr), use_ema);
    out.model->set_training(false);
    out.latent_scale = attrs.at("latent_scale");
    out.schedule_T = attrs.at("schedule_T");
    out.attrs = std::move(attrs);
    return out;
}

}  // namespace downscale::train
