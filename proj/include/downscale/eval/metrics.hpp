#pragma once

#include <limits>

#include "downscale/eval/series.hpp"

namespace downscale::eval {

// Scalar metrics between a prediction a and a reference b over one frame.
// R2 uses the total sum of squares of the PREDICTED values a (not the
// reference), deliberately: the number this reproduces is defined that way.
struct FrameMetrics {
    double rmse = 0.0;
    double bias = 0.0;
    double r2 = 0.0;
    double pcc = 0.0;
};

inline FrameMetrics frame_metrics(const float* a, const float* b, std::int64_t n) {
    check(n > 0, "frame_metrics: empty frame");
    double se = 0.0, e = 0.0, sa = 0.0, sb = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
        const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        se += d * d;
        e += d;
        sa += a[i];
        sb += b[i];
    }
    const double nn = static_cast<double>(n);
    const double ma = sa / nn, mb = sb / nn;
    double ss_tot = 0.0, cov = 0.0, va = 0.0, vb = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
        const double da = a[i] - ma, db = b[i] - mb;
        ss_tot += da * da;
        cov += da * db;
        va += da * da;
        vb += db * db;
    }
    FrameMetrics m;
    m.rmse = std::sqrt(se / nn);
    m.bias = e / nn;
    if (ss_tot > 0.0)
        m.r2 = 1.0 - se / ss_tot;
    else
        m.r2 = se == 0.0 ? 1.0 : -std::numeric_limits<double>::infinity();
    if (va > 0.0 && vb > 0.0)
        m.pcc = cov / std::sqrt(va * vb);
    else
        m.pcc = se == 0.0 ? 1.0 : 0.0;
    return m;
}

// Mean and quartiles (linear interpolation) of a metric series.
struct SummaryStats {
    double mean = 0.0;
    double q25 = 0.0;
    double median = 0.0;
    double q75 = 0.0;
};

inline double percentile(std::vector<double> v, double p) {
    check(!v.empty(), "percentile: empty series");
    std::sort(v.begin(), v.end());
    const double pos = p / 100.0 * static_cast<double>(v.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    const double f = pos - static_cast<double>(lo);
    return v[lo] * (1.0 - f) + v[hi] * f;
}

inline SummaryStats summarize(const std::vector<double>& series) {
    check(!series.empty(), "summarize: empty series");
    SummaryStats s;
    for (double v : series) s.mean += v;
    s.mean /= static_cast<double>(series.size());
    s.q25 = percentile(series, 25.0);
    s.median = percentile(series, 50.0);
    s.q75 = percentile(series, 75.0);
    return s;
}

// Per-timestamp spatially-averaged metrics plus distribution summaries.
struct MetricReport {
    std::vector<std::int64_t> timestamps;
    std::vector<double> rmse, bias, r2, pcc;
    SummaryStats rmse_stats, bias_stats, r2_stats, pcc_stats;

    json to_json() const {
        return {{"timestamps", timestamps},
                {"rmse", rmse},
                {"bias", bias},
                {"r2", r2},
                {"pcc", pcc},
                {"summary",
                 {{"rmse", {{"mean", rmse_stats.mean}, {"q25", rmse_stats.q25},
                            {"median", rmse_stats.median}, {"q75", rmse_stats.q75}}},
                  {"bias", {{"mean", bias_stats.mean}, {"q25", bias_stats.q25},
                            {"median", bias_stats.median}, {"q75", bias_stats.q75}}},
                  {"r2", {{"mean", r2_stats.mean}, {"q25", r2_stats.q25},
                          {"median", r2_stats.median}, {"q75", r2_stats.q75}}},
                  {"pcc", {{"mean", pcc_stats.mean}, {"q25", pcc_stats.q25},
                           {"median", pcc_stats.median}, {"q75", pcc_stats.q75}}}}}};
    }
};

// Metrics of a (T, ny, nx) prediction stack against truth, one frame at a
// time over all pixels, then aggregated.
inline MetricReport compute_metrics(const Tensorf& pred, const Tensorf& truth,
                                    const std::vector<std::int64_t>& timestamps = {}) {
    const auto& ps = pred.shape();
    if (ps.size() != 3 || pred.shape() != truth.shape())
        fail<ShapeError>("compute_metrics: need matching (T, ny, nx) stacks, got " +
                         pred.shape_str() + " vs " + truth.shape_str());
    MetricReport r;
    const std::int64_t T = ps[0], plane = ps[1] * ps[2];
    for (std::int64_t t = 0; t < T; ++t) {
        FrameMetrics m = frame_metrics(pred.data() + t * plane, truth.data() + t * plane, plane);
        r.rmse.push_back(m.rmse);
        r.bias.push_back(m.bias);
        r.r2.push_back(m.r2);
        r.pcc.push_back(m.pcc);
        r.timestamps.push_back(timestamps.empty() ? t : timestamps[static_cast<std::size_t>(t)]);
    }
    r.rmse_stats = summarize(r.rmse);
    r.bias_stats = summarize(r.bias);
    r.r2_stats = summarize(r.r2);
    r.pcc_stats = summarize(r.pcc);
    return r;
}

// Archive-level entry point: checks alignment, picks one channel by name.
inline MetricReport compute_metrics(const FieldSeries& pred, const FieldSeries& truth,
                                    const std::string& channel) {
    pred.validate();
    truth.validate();
    if (pred.timestamps != truth.timestamps)
        fail<AlignmentError>("compute_metrics: timestamp mismatch between archives");
    if (pred.grid.ny != truth.grid.ny || pred.grid.nx != truth.grid.nx)
        fail<AlignmentError>("compute_metrics: grid mismatch between archives");
    return compute_metrics(pred.channel(pred.channel_index(channel)),
                           truth.channel(truth.channel_index(channel)), pred.timestamps);
}

// Derived 10 m wind speed from the two target components.
inline Tensorf wind_speed(const Tensorf& u, const Tensorf& v) {
    if (u.shape() != v.shape())
        fail<AlignmentError>("wind_speed: component shapes differ: " + u.shape_str() + " vs " +
                             v.shape_str());
    Tensorf out(u.shape());
    for (std::int64_t i = 0; i < u.numel(); ++i)
        out[i] = std::sqrt(u[i] * u[i] + v[i] * v[i]);
    return out;
}

}  // namespace downscale::eval
