#pragma once

#include "downscale/autograd/ops_shape.hpp"
#include "downscale/data/loader.hpp"

namespace downscale::train {

using ag::Var;
using data::NormalizationStats;

// Per-role channel statistics fitted on the training split and carried in
// every checkpoint, so inference needs nothing beyond the checkpoint file.
struct Normalization {
    NormalizationStats predictors, statics, targets;

    io::json to_json() const {
        return {{"predictors", predictors.to_json()},
                {"statics", statics.to_json()},
                {"targets", targets.to_json()}};
    }

    static Normalization from_json(const io::json& j) {
        return {NormalizationStats::from_json(j.at("predictors")),
                NormalizationStats::from_json(j.at("statics")),
                NormalizationStats::from_json(j.at("targets"))};
    }
};

// Landcover one-hots stay 0/1; everything else becomes zero-mean unit-std.
inline Normalization fit_normalization_bundle(const data::SplitData& d) {
    std::vector<std::string> exempt;
    for (const auto& n : d.static_channels)
        if (n.rfind("lc_", 0) == 0) exempt.push_back(n);
    return {data::fit_normalization(d.predictors, d.predictor_channels),
            data::fit_normalization(d.statics, d.static_channels, exempt),
            data::fit_normalization(d.targets, d.target_channels)};
}

// NaN predictors (sea temperature over land) become the channel mean, which
// normalizes to zero.
inline Tensorf prepare_predictors(Tensorf pred, const NormalizationStats& st) {
    data::fill_nan_with_mean(pred, st);
    return data::normalize(pred, st);
}

// Model input: LR predictors replicated onto the HR grid and stacked with
// the HR statics, all in normalized units.
template <typename T>
Var<T> assemble_input(const Tensorf& pred_norm, const Tensorf& statics_norm,
                      std::int64_t factor) {
    const auto& ps = pred_norm.shape();
    const auto& ss = statics_norm.shape();
    if (ps.size() != 4 || ss.size() != 4 || ps[0] != ss[0])
        fail<ShapeError>("assemble_input: expected batched (N,C,h,w) pairs");
    if (ss[2] != ps[2] * factor || ss[3] != ps[3] * factor)
        fail<AlignmentError>("assemble_input: statics grid must be " + std::to_string(factor) +
                             "x the predictor grid");
    auto lr = ag::constant(pred_norm.template cast<T>());
    auto hr = factor == 1 ? lr : ag::upsample_nearest(lr, factor);
    return ag::concat_channels(hr, ag::constant(statics_norm.template cast<T>()));
}

// Normalized batch views used by every trainer.
struct NormalizedBatch {
    Tensorf predictors, statics, targets;
};

inline NormalizedBatch normalize_batch(const data::Batch& b, const Normalization& norm) {
    return {prepare_predictors(b.predictors.clone(), norm.predictors),
            data::normalize(b.statics, norm.statics), data::normalize(b.targets, norm.targets)};
}

// Mirror-pads the bottom/right edge (no edge repetition) up to the next
// multiple of `mult`; inference pads, runs, and crops back so arbitrary
// domain sizes work despite the models' divisibility requirements.
template <typename T>
Tensor<T> reflect_pad_to_multiple(const Tensor<T>& x, std::int64_t mult) {
    const auto& s = x.shape();
    if (s.size() != 4) fail<ShapeError>("reflect_pad_to_multiple: expected (N,C,H,W)");
    const std::int64_t H = s[2], W = s[3];
    const std::int64_t Hp = (H + mult - 1) / mult * mult;
    const std::int64_t Wp = (W + mult - 1) / mult * mult;
    if (Hp == H && Wp == W) return x.clone();
    if (Hp - H > H - 1 || Wp - W > W - 1)
        fail<ShapeError>("reflect_pad_to_multiple: domain too small to mirror-pad to " +
                         std::to_string(mult));
    Tensor<T> y({s[0], s[1], Hp, Wp});
    for (std::int64_t nc = 0; nc < s[0] * s[1]; ++nc)
        for (std::int64_t i = 0; i < Hp; ++i) {
            const std::int64_t si = i < H ? i : 2 * H - 2 - i;
            for (std::int64_t j = 0; j < Wp; ++j) {
                const std::int64_t sj = j < W ? j : 2 * W - 2 - j;
                y[(nc * Hp + i) * Wp + j] = x[(nc * H + si) * W + sj];
            }
        }
    return y;
}

template <typename T>
Tensor<T> crop_to(const Tensor<T>& x, std::int64_t H, std::int64_t W) {
    const auto& s = x.shape();
    if (s.size() != 4 || H > s[2] || W > s[3]) fail<ShapeError>("crop_to: window out of range");
    Tensor<T> y({s[0], s[1], H, W});
    for (std::int64_t nc = 0; nc < s[0] * s[1]; ++nc)
        for (std::int64_t i = 0; i < H; ++i)
            std::copy_n(x.data() + (nc * s[2] + i) * s[3], W, y.data() + (nc * H + i) * W);
    return y;
}

}  // namespace downscale::train
