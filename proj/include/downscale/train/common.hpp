#pragma once

#include <fstream>

#include "downscale/nn/checkpoint.hpp"
#include "downscale/train/input.hpp"

namespace downscale::train {

// Loss history for one training run, persisted next to the checkpoint.
struct TrainCurve {
    std::vector<std::int64_t> steps;
    std::vector<double> train_loss;
    std::vector<std::int64_t> val_steps;
    std::vector<double> val_loss;

    void record(std::int64_t step, double loss) {
        steps.push_back(step);
        train_loss.push_back(loss);
    }
    void record_val(std::int64_t step, double loss) {
        val_steps.push_back(step);
        val_loss.push_back(loss);
    }

    io::json to_json() const {
        return {{"steps", steps},
                {"train_loss", train_loss},
                {"val_steps", val_steps},
                {"val_loss", val_loss}};
    }

    void save(const std::string& path) const {
        std::ofstream f(path);
        if (!f) fail<IoError>("cannot write " + path);
        f << to_json().dump(2) << "\n";
    }
};

// Training aborts rather than continuing from a poisoned state.
inline void require_finite_loss(double loss, const std::string& stage, std::int64_t step) {
    if (!std::isfinite(loss))
        fail<TrainingError>(stage + ": non-finite loss " + std::to_string(loss) + " at step " +
                            std::to_string(step) +
                            "; lower the learning rate or check input normalization");
}

// Uniform batch of timestamp indices, deterministic per (seed, step).
inline std::vector<std::int64_t> batch_indices(std::int64_t n, std::int64_t batch,
                                               std::uint64_t seed, std::int64_t step) {
    check(n > 0 && batch > 0, "batch_indices: need data and batch >= 1");
    Rng rng = Rng::keyed(seed, fnv1a64("batch_indices"), static_cast<std::uint64_t>(step));
    std::vector<std::int64_t> idx(static_cast<std::size_t>(batch));
    for (auto& i : idx) i = rng.uniform_int(n);
    return idx;
}

// Cosine-annealed learning rate for the given step. A negative lr_final
// disables the decay and keeps the base rate.
inline double cosine_lr(std::int64_t step, std::int64_t steps, double lr, double lr_final) {
    if (lr_final < 0.0 || steps <= 1) return lr;
    const double f = static_cast<double>(step) / static_cast<double>(steps - 1);
    return lr_final + (lr - lr_final) * 0.5 * (1.0 + std::cos(3.14159265358979323846 * f));
}

template <typename T>
double tensor_rms(const Tensor<T>& t) {
    double sq = 0.0;
    for (std::int64_t i = 0; i < t.numel(); ++i)
        sq += static_cast<double>(t[i]) * static_cast<double>(t[i]);
    return t.numel() ? std::sqrt(sq / static_cast<double>(t.numel())) : 0.0;
}

}  // namespace downscale::train
