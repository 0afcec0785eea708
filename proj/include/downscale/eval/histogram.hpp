#pragma once

#include "downscale/eval/series.hpp"

namespace downscale::eval {

// Frequency histogram with bin edges aligned to integer multiples of the
// bin width: value v falls into bin floor(v / width).
struct Histogram {
    double width = 0.0;
    std::int64_t first_bin = 0;  // index of the first bin, edges at k*width
    std::vector<std::int64_t> counts;

    std::int64_t total() const {
        std::int64_t s = 0;
        for (auto c : counts) s += c;
        return s;
    }
    double edge_lo(std::size_t i) const {
        return static_cast<double>(first_bin + static_cast<std::int64_t>(i)) * width;
    }
    double edge_hi(std::size_t i) const { return edge_lo(i) + width; }
};

// Default bin widths: 0.5 degC for temperature, 0.05 m/s for wind speed.
inline double default_bin_width(const std::string& variable) {
    if (variable == "t2m") return 0.5;
    if (variable == "uv" || variable == "wind" || variable == "u10" || variable == "v10")
        return 0.05;
    fail<ConfigError>("default_bin_width: no default for variable " + variable);
}

// Pixel-wise counts cumulated over every frame of the stack.
inline Histogram frequency_histogram(const Tensorf& fields, double width) {
    if (fields.numel() == 0) fail<EvalError>("frequency_histogram: empty archive");
    check(width > 0.0, "frequency_histogram: bin width must be positive");
    if (!fields.all_finite())
        fail<EvalError>("frequency_histogram: non-finite values in archive");
    std::int64_t lo = std::numeric_limits<std::int64_t>::max();
    std::int64_t hi = std::numeric_limits<std::int64_t>::min();
    std::vector<std::int64_t> bins(static_cast<std::size_t>(fields.numel()));
    for (std::int64_t i = 0; i < fields.numel(); ++i) {
        const std::int64_t b =
            static_cast<std::int64_t>(std::floor(static_cast<double>(fields[i]) / width));
        bins[static_cast<std::size_t>(i)] = b;
        lo = std::min(lo, b);
        hi = std::max(hi, b);
    }
    Histogram h;
    h.width = width;
    h.first_bin = lo;
    h.counts.assign(static_cast<std::size_t>(hi - lo + 1), 0);
    for (std::int64_t b : bins) ++h.counts[static_cast<std::size_t>(b - lo)];
    return h;
}

}  // namespace downscale::eval
