#pragma once

#include "downscale/models/unet.hpp"
#include "downscale/train/common.hpp"

namespace downscale::train {

// Deterministic UNET prediction in normalized units. Domains that do not
// divide the UNET's pooling factor are mirror-padded and cropped back, so
// any grid size runs.
template <typename T>
Tensorf unet_predict_norm(models::Unet<T>& unet, const Tensorf& pred_norm,
                          const Tensorf& statics_norm, std::int64_t factor) {
    ag::NoGradGuard ng;
    const bool was_training = unet.training();
    unet.set_training(false);
    const std::int64_t div = std::int64_t(1) << unet.config().levels;
    auto in = assemble_input<T>(pred_norm, statics_norm, factor);
    const std::int64_t H = in->value.shape()[2], W = in->value.shape()[3];
    Tensor<T> padded = reflect_pad_to_multiple(in->value, div);
    auto out = unet.forward(ag::constant(std::move(padded)));
    unet.set_training(was_training);
    return crop_to(out->value, H, W).template cast<float>();
}

// truth - UNET prediction for one sample, in normalized units; the channel
// names gain a "res_" prefix to keep archives self-describing.
template <typename T>
data::FieldStack residual_target(const data::SamplePair& pair, models::Unet<T>& unet,
                                 const Normalization& norm) {
    pair.validate();
    const auto& ts = pair.targets_hr.values.shape();
    Tensorf pred = prepare_predictors(pair.predictors_lr.values.clone(), norm.predictors);
    Tensorf statics = data::normalize(pair.statics_hr.values, norm.statics);
    Tensorf targets = data::normalize(pair.targets_hr.values, norm.targets);
    pred = pred.reshaped({1, pred.shape()[0], pred.shape()[1], pred.shape()[2]});
    statics = statics.reshaped({1, statics.shape()[0], statics.shape()[1], statics.shape()[2]});
    Tensorf out = unet_predict_norm(unet, pred, statics, pair.factor);

    data::FieldStack res;
    res.values = Tensorf(ts);
    for (std::int64_t i = 0; i < res.values.numel(); ++i)
        res.values[i] = targets[i] - out[i];
    for (const auto& n : pair.targets_hr.channel_names) res.channel_names.push_back("res_" + n);
    res.units.assign(res.channel_names.size(), "normalized");
    res.grid = pair.targets_hr.grid;
    res.timestamp = pair.targets_hr.timestamp;
    return res;
}

// (T, v, H, W) of normalized residuals for a whole split, batched through
// the UNET to bound memory.
template <typename T>
Tensorf residual_fields(models::Unet<T>& unet, const data::SplitData& d,
                        const Normalization& norm, std::int64_t batch = 8) {
    check(batch >= 1, "residual_fields: batch >= 1");
    const auto& ts = d.targets.shape();
    Tensorf res(ts);
    for (std::int64_t t0 = 0; t0 < d.size(); t0 += batch) {
        std::vector<std::int64_t> idx;
        for (std::int64_t t = t0; t < std::min(d.size(), t0 + batch); ++t) idx.push_back(t);
        auto b = normalize_batch(data::make_batch(d, idx), norm);
        Tensorf out = unet_predict_norm(unet, b.predictors, b.statics, d.factor);
        const std::int64_t n = out.numel();
        for (std::int64_t i = 0; i < n; ++i)
            res[t0 * (ts[1] * ts[2] * ts[3]) + i] = b.targets[i] - out[i];
    }
    return res;
}

// Per-channel standard deviation of a residual archive; the diffusion stage
// trains on residual/sigma so latents start near unit scale.
inline std::vector<double> residual_sigma(const Tensorf& res) {
    const auto& s = res.shape();
    check(s.size() == 4, "residual_sigma: expected (T,C,H,W)");
    std::vector<double> sigma(static_cast<std::size_t>(s[1]), 1.0);
    const std::int64_t inner = s[2] * s[3];
    for (std::int64_t c = 0; c < s[1]; ++c) {
        double sum = 0.0, sumsq = 0.0;
        for (std::int64_t t = 0; t < s[0]; ++t) {
            const float* p = res.data() + (t * s[1] + c) * inner;
            for (std::int64_t i = 0; i < inner; ++i) {
                sum += p[i];
                sumsq += static_cast<double>(p[i]) * p[i];
            }
        }
        const double n = static_cast<double>(s[0] * inner);
        const double m = sum / n;
        const double var = std::max(0.0, sumsq / n - m * m);
        sigma[static_cast<std::size_t>(c)] = var > 0 ? std::sqrt(var) : 1.0;
    }
    return sigma;
}

inline void write_residual_archive(const std::string& path, const Tensorf& res,
                                   const std::vector<std::string>& channel_names,
                                   const std::vector<double>& sigma, io::json extra = {}) {
    io::ContainerWriter w(path);
    io::json attrs = std::move(extra);
    if (attrs.is_null()) attrs = io::json::object();
    attrs["kind"] = "residual-archive";
    attrs["sigma"] = sigma;
    attrs["channel_names"] = channel_names;
    w.attrs() = std::move(attrs);
    w.add("residuals", {"time", "channel", "y", "x"}, res);
    w.finish();
}

struct ResidualArchive {
    Tensorf residuals;
    std::vector<std::string> channel_names;
    std::vector<double> sigma;
    io::json attrs;
};

inline ResidualArchive load_residual_archive(const std::string& path) {
    io::Container c = io::Container::open(path);
    ResidualArchive a;
    a.attrs = c.attrs();
    if (a.attrs.value("kind", "") != "residual-archive")
        fail<IoError>(path + ": not a residual archive");
    a.residuals = c.read("residuals");
    a.channel_names = a.attrs.at("channel_names").get<std::vector<std::string>>();
    a.sigma = a.attrs.at("sigma").get<std::vector<double>>();
    return a;
}

}  // namespace downscale::train
