#pragma once

#include <gtest/gtest.h>

#include <functional>
#include <vector>

#include "downscale/autograd/graph.hpp"
#include "downscale/core/rng.hpp"

namespace downscale::testutil {

using ag::Var;

// Central-difference check of every input element against the tape gradient.
// The callable must rebuild the graph from the given leaves on every call and
// return a scalar node.
inline void expect_grad_matches(const std::vector<Var<double>>& inputs,
                                const std::function<Var<double>()>& forward, double eps = 1e-5,
                                double tol = 1e-4) {
    ag::zero_grad(inputs);
    Var<double> loss = forward();
    ASSERT_EQ(loss->value.numel(), 1) << "gradcheck needs a scalar objective";
    ag::backward(loss);

    ag::NoGradGuard ng;
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        auto& x = inputs[k]->value;
        ASSERT_EQ(inputs[k]->grad.numel(), x.numel()) << "input " << k << " has no gradient";
        for (std::int64_t i = 0; i < x.numel(); ++i) {
            const double orig = x[i];
            x[i] = orig + eps;
            const double fp = forward()->value[0];
            x[i] = orig - eps;
            const double fm = forward()->value[0];
            x[i] = orig;
            const double numeric = (fp - fm) / (2.0 * eps);
            const double analytic = inputs[k]->grad[i];
            const double scale = std::max({1.0, std::abs(numeric), std::abs(analytic)});
            EXPECT_NEAR(analytic, numeric, tol * scale)
                << "input " << k << " element " << i;
        }
    }
}

// Uniform values kept away from zero so kinked activations stay differentiable
// at every probe point.
inline Tensor<double> safe_random(Rng& rng, std::vector<std::int64_t> shape, double lo = -2.0,
                                  double hi = 2.0, double margin = 0.15) {
    Tensor<double> t(std::move(shape));
    for (std::int64_t i = 0; i < t.numel(); ++i) {
        double v = rng.uniform(lo, hi);
        if (std::abs(v) < margin) v = v < 0 ? v - margin : v + margin;
        t[i] = v;
    }
    return t;
}

}  // namespace downscale::testutil
