#pragma once

#include <cmath>
#include <iostream>

#include "downscale/data/field.hpp"

namespace downscale::data {

// Per-channel affine normalization fitted on the training split. Binary masks
// and coordinate channels are carried through untouched; the fit skips NaNs so
// masked sea pixels do not poison the moments.
struct NormalizationStats {
    std::vector<std::string> channel_names;
    std::vector<double> mean;
    std::vector<double> stddev;
    std::vector<bool> exempt;

    std::size_t size() const { return channel_names.size(); }

    void validate() const {
        if (mean.size() != size() || stddev.size() != size() || exempt.size() != size())
            fail<ConfigError>("normalization stats: inconsistent lengths");
        for (std::size_t c = 0; c < size(); ++c)
            if (!(stddev[c] > 0)) fail<ConfigError>("normalization stats: std must be > 0");
    }

    json to_json() const {
        json j;
        j["channel_names"] = channel_names;
        j["mean"] = mean;
        j["stddev"] = stddev;
        j["exempt"] = std::vector<int>(exempt.begin(), exempt.end());
        return j;
    }

    static NormalizationStats from_json(const json& j) {
        NormalizationStats s;
        s.channel_names = j.at("channel_names").get<std::vector<std::string>>();
        s.mean = j.at("mean").get<std::vector<double>>();
        s.stddev = j.at("stddev").get<std::vector<double>>();
        for (int e : j.at("exempt").get<std::vector<int>>()) s.exempt.push_back(e != 0);
        s.validate();
        return s;
    }
};

namespace detail {

struct ChannelAxis {
    std::int64_t channels;
    std::int64_t outer;  // leading (time) repetitions
    std::int64_t inner;  // elements per channel plane
};

inline ChannelAxis channel_axis(const Tensorf& data) {
    const auto& s = data.shape();
    if (s.size() == 3) return {s[0], 1, s[1] * s[2]};
    if (s.size() == 4) return {s[1], s[0], s[2] * s[3]};
    fail<ShapeError>("normalization: expected (C,H,W) or (T,C,H,W), got " + data.shape_str());
}

}  // namespace detail

inline NormalizationStats fit_normalization(const Tensorf& data,
                                            const std::vector<std::string>& channel_names,
                                            const std::vector<std::string>& exempt_names = {}) {
    const auto ax = detail::channel_axis(data);
    if (static_cast<std::int64_t>(channel_names.size()) != ax.channels)
        fail<ShapeError>("fit_normalization: channel name count mismatch");

    NormalizationStats st;
    st.channel_names = channel_names;
    st.mean.assign(channel_names.size(), 0.0);
    st.stddev.assign(channel_names.size(), 1.0);
    st.exempt.assign(channel_names.size(), false);
    for (std::size_t c = 0; c < channel_names.size(); ++c)
        for (const auto& ex : exempt_names)
            if (channel_names[c] == ex) st.exempt[c] = true;

    for (std::int64_t c = 0; c < ax.channels; ++c) {
        double sum = 0.0, sumsq = 0.0;
        std::int64_t n = 0;
        for (std::int64_t t = 0; t < ax.outer; ++t) {
            const float* p = data.data() + (t * ax.channels + c) * ax.inner;
            for (std::int64_t i = 0; i < ax.inner; ++i) {
                if (std::isnan(p[i])) continue;
                sum += p[i];
                sumsq += static_cast<double>(p[i]) * p[i];
                ++n;
            }
        }
        if (n == 0)
            fail<IngestionError>("fit_normalization: channel " + channel_names[c] +
                                 " has no finite values");
        const double m = sum / static_cast<double>(n);
        const double var = std::max(0.0, sumsq / static_cast<double>(n) - m * m);
        st.mean[c] = m;
        st.stddev[c] = std::sqrt(var);
        if (!(st.stddev[c] > 0)) {
            std::cerr << "warning: channel " << channel_names[c]
                      << " has zero variance; using std=1\n";
            st.stddev[c] = 1.0;
        }
    }
    st.validate();
    return st;
}

// Replaces NaNs with the channel's training mean (in place).
inline void fill_nan_with_mean(Tensorf& data, const NormalizationStats& st) {
    const auto ax = detail::channel_axis(data);
    if (static_cast<std::size_t>(ax.channels) != st.size())
        fail<ShapeError>("fill_nan_with_mean: channel count mismatch");
    for (std::int64_t t = 0; t < ax.outer; ++t)
        for (std::int64_t c = 0; c < ax.channels; ++c) {
            float* p = data.data() + (t * ax.channels + c) * ax.inner;
            const float fill = static_cast<float>(st.mean[c]);
            for (std::int64_t i = 0; i < ax.inner; ++i)
                if (std::isnan(p[i])) p[i] = fill;
        }
}

namespace detail {

inline Tensorf affine_per_channel(const Tensorf& data, const NormalizationStats& st,
                                  bool forward) {
    st.validate();
    const auto ax = channel_axis(data);
    if (static_cast<std::size_t>(ax.channels) != st.size())
        fail<ShapeError>("normalization: channel count mismatch");
    Tensorf out(data.shape());
    for (std::int64_t t = 0; t < ax.outer; ++t)
        for (std::int64_t c = 0; c < ax.channels; ++c) {
            const float* p = data.data() + (t * ax.channels + c) * ax.inner;
            float* q = out.data() + (t * ax.channels + c) * ax.inner;
            if (st.exempt[c]) {
                for (std::int64_t i = 0; i < ax.inner; ++i) q[i] = p[i];
            } else if (forward) {
                const float m = static_cast<float>(st.mean[c]);
                const float inv = static_cast<float>(1.0 / st.stddev[c]);
                for (std::int64_t i = 0; i < ax.inner; ++i) q[i] = (p[i] - m) * inv;
            } else {
                const float m = static_cast<float>(st.mean[c]);
                const float s = static_cast<float>(st.stddev[c]);
                for (std::int64_t i = 0; i < ax.inner; ++i) q[i] = p[i] * s + m;
            }
        }
    return out;
}

}  // namespace detail

inline Tensorf normalize(const Tensorf& data, const NormalizationStats& st) {
    return detail::affine_per_channel(data, st, true);
}

inline Tensorf denormalize(const Tensorf& data, const NormalizationStats& st) {
    return detail::affine_per_channel(data, st, false);
}

}  // namespace downscale::data
